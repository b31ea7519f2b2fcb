#include <glucokin/dataset_io.hpp>

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

namespace glucokin {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  const char* ws = " \t\r";
  const size_t b = s.find_first_not_of(ws);
  if (b == std::string::npos) return "";
  const size_t e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> fields;
  std::string::size_type start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string::npos) {
      fields.push_back(trim(line.substr(start)));
      break;
    }
    fields.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return fields;
}

double parse_number(const std::string& text, const std::string& path,
                    int line) {
  const std::string t = trim(text);
  if (t.empty()) throw ParseError(path, line, "empty numeric field");
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size())
    throw ParseError(path, line, "not a number: '" + t + "'");
  return v;
}

double unit_divisor(const std::string& unit) {
  if (unit == "min") return 1440.0;
  if (unit == "h") return 24.0;
  if (unit == "d") return 1.0;
  return 0.0;  // caller reports the error with its line number
}

// JSON encoding that survives the +-infinity and NaN sentinels.
ordered_json num_out(double v) {
  if (std::isfinite(v)) return ordered_json(v);
  if (std::isnan(v)) return ordered_json("nan");
  return ordered_json(v > 0 ? "inf" : "-inf");
}

double num_in(const ordered_json& j, const std::string& path) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw std::runtime_error(path + ": expected a number, got " + j.dump());
}

ordered_json vec_out(const Vec& v) {
  ordered_json a = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(num_out(v[i]));
  return a;
}

Vec vec_in(const ordered_json& a, const std::string& path) {
  Vec v(static_cast<Eigen::Index>(a.size()));
  Eigen::Index i = 0;
  for (const auto& item : a) v[i++] = num_in(item, path);
  return v;
}

ordered_json mat_out(const Mat& m) {
  ordered_json rows = ordered_json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    ordered_json row = ordered_json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(num_out(m(r, c)));
    rows.push_back(std::move(row));
  }
  return rows;
}

Mat mat_in(const ordered_json& rows, const std::string& path) {
  const Eigen::Index nr = static_cast<Eigen::Index>(rows.size());
  if (nr == 0) return Mat(0, 0);
  const Eigen::Index nc = static_cast<Eigen::Index>(rows.front().size());
  Mat m(nr, nc);
  Eigen::Index r = 0;
  for (const auto& row : rows) {
    if (static_cast<Eigen::Index>(row.size()) != nc)
      throw std::runtime_error(path + ": ragged matrix rows");
    Eigen::Index c = 0;
    for (const auto& item : row) m(r, c++) = num_in(item, path);
    ++r;
  }
  return m;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

ordered_json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  try {
    return ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

void write_json(const std::string& path, const ordered_json& j) {
  std::ofstream out = open_out(path);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("failed writing " + path);
}

ordered_json fit_to_json(const FitResult& fit, const ModelSpec& spec) {
  ordered_json j;
  j["model"] = family_name(spec.family);
  j["optimizer"] = optimizer_name(fit.optimizer);
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations;
  j["evaluations"] = fit.evaluations;
  j["n"] = fit.n;
  j["cost"] = num_out(fit.cost);
  j["mse"] = num_out(fit.mse);
  j["bic"] = num_out(fit.bic);
  j["final_spread"] = num_out(fit.final_spread);
  ordered_json theta;
  const auto& names = spec.param_names();
  for (Eigen::Index i = 0; i < fit.theta_hat.size(); ++i)
    theta[names[static_cast<size_t>(i)]] = num_out(fit.theta_hat[i]);
  j["theta_hat"] = std::move(theta);
  return j;
}

FitResult fit_from_json(const ordered_json& j, const std::string& path,
                        ModelSpec* spec_out) {
  const ModelSpec spec = make_spec(family_from_name(j.at("model")));
  if (spec_out != nullptr) *spec_out = spec;
  FitResult fit;
  fit.optimizer = optimizer_from_name(j.at("optimizer"));
  fit.converged = j.at("converged").get<bool>();
  fit.iterations = j.at("iterations").get<int>();
  fit.evaluations = j.at("evaluations").get<int>();
  fit.n = j.at("n").get<int>();
  fit.cost = num_in(j.at("cost"), path);
  fit.mse = num_in(j.at("mse"), path);
  fit.bic = num_in(j.at("bic"), path);
  fit.final_spread = num_in(j.at("final_spread"), path);
  const auto& theta = j.at("theta_hat");
  const auto& names = spec.param_names();
  fit.theta_hat = Vec(spec.param_count());
  for (Eigen::Index i = 0; i < fit.theta_hat.size(); ++i)
    fit.theta_hat[i] = num_in(theta.at(names[static_cast<size_t>(i)]), path);
  return fit;
}

}  // namespace

Experiment load_experiment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);

  enum class Section { None, Meta, Glucose, Insulin, Glucagon, Infusion,
                       Boluses };
  Section section = Section::None;
  bool need_header = false;
  std::map<std::string, std::pair<std::string, int>> meta;
  Experiment exp;
  Dataset& data = exp.data;
  bool saw_glucose_section = false;
  double prev_time[3] = {-std::numeric_limits<double>::infinity(),
                         -std::numeric_limits<double>::infinity(),
                         -std::numeric_limits<double>::infinity()};
  double prev_infusion = -std::numeric_limits<double>::infinity();

  std::string raw;
  int ln = 0;
  while (std::getline(in, raw)) {
    ++ln;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;

    if (line.front() == '[') {
      if (line.back() != ']')
        throw ParseError(path, ln, "malformed section marker");
      const std::string name = line.substr(1, line.size() - 2);
      if (name == "meta") {
        section = Section::Meta;
        need_header = false;
      } else if (name == "glucose") {
        section = Section::Glucose;
        saw_glucose_section = true;
        need_header = true;
      } else if (name == "insulin") {
        section = Section::Insulin;
        need_header = true;
      } else if (name == "glucagon") {
        section = Section::Glucagon;
        need_header = true;
      } else if (name == "infusion") {
        section = Section::Infusion;
        need_header = true;
      } else if (name == "boluses") {
        section = Section::Boluses;
        need_header = true;
      } else {
        throw ParseError(path, ln, "unknown section [" + name + "]");
      }
      continue;
    }

    if (section == Section::None)
      throw ParseError(path, ln, "data before the first section marker");

    if (section == Section::Meta) {
      const auto fields = split(line, ',');
      if (fields.size() != 2)
        throw ParseError(path, ln, "meta rows are 'key,value'");
      static const char* known[] = {"subject_id", "model_family", "time_unit",
                                    "t0", "tf", "I_b", "H_b", "x0"};
      bool ok = false;
      for (const char* k : known) ok = ok || fields[0] == k;
      if (!ok)
        throw ParseError(path, ln, "unknown meta key '" + fields[0] + "'");
      if (fields[0] == "time_unit" && unit_divisor(fields[1]) == 0.0)
        throw ParseError(path, ln,
                         "time_unit must be min, h, or d (got '" + fields[1] +
                             "')");
      if (fields[0] == "model_family") {
        try {
          (void)family_from_name(fields[1]);
        } catch (const std::invalid_argument& e) {
          throw ParseError(path, ln, e.what());
        }
      }
      meta[fields[0]] = {fields[1], ln};
      continue;
    }

    if (need_header) {
      const std::string want = section == Section::Infusion ? "t,rate"
                               : section == Section::Boluses
                                   ? "t,hormone,dose"
                                   : "t,value";
      std::string got;
      for (const auto& f : split(line, ',')) {
        if (!got.empty()) got += ',';
        got += f;
      }
      if (got != want)
        throw ParseError(path, ln, "expected header '" + want + "'");
      need_header = false;
      continue;
    }

    const auto fields = split(line, ',');
    if (section == Section::Boluses) {
      if (fields.size() != 3)
        throw ParseError(path, ln, "bolus rows are 't,hormone,dose'");
      Bolus b;
      b.time = parse_number(fields[0], path, ln);
      try {
        b.hormone = hormone_from_name(fields[1]);
      } catch (const std::invalid_argument& e) {
        throw ParseError(path, ln, e.what());
      }
      b.dose = parse_number(fields[2], path, ln);
      data.schedule.boluses.push_back(b);
      continue;
    }
    if (fields.size() != 2)
      throw ParseError(path, ln, "expected two comma-separated fields");
    const double t = parse_number(fields[0], path, ln);
    const double v = parse_number(fields[1], path, ln);
    if (section == Section::Infusion) {
      if (t <= prev_infusion)
        throw ParseError(path, ln,
                         "infusion start times must be strictly increasing");
      prev_infusion = t;
      data.schedule.glucose_infusion.push_back({t, v});
    } else {
      const int idx = section == Section::Glucose  ? 0
                      : section == Section::Insulin ? 1
                                                    : 2;
      if (t <= prev_time[idx])
        throw ParseError(path, ln,
                         "sample times must be strictly increasing");
      prev_time[idx] = t;
      if (idx == 0) {
        data.glucose_times.push_back(t);
        data.glucose_values.push_back(v);
      } else if (idx == 1) {
        data.insulin_times.push_back(t);
        data.insulin_values.push_back(v);
      } else {
        data.glucagon_times.push_back(t);
        data.glucagon_values.push_back(v);
      }
    }
  }

  for (const char* key : {"subject_id", "model_family", "time_unit", "t0",
                          "tf"})
    if (meta.find(key) == meta.end())
      throw std::runtime_error(path + ": missing meta key '" +
                               std::string(key) + "'");
  if (!saw_glucose_section || data.glucose_times.empty())
    throw std::runtime_error(path + ": no [glucose] measurements");

  exp.subject_id = meta["subject_id"].first;
  exp.spec = make_spec(family_from_name(meta["model_family"].first));
  const double div = unit_divisor(meta["time_unit"].first);
  auto meta_number = [&](const char* key, double fallback) {
    const auto it = meta.find(key);
    if (it == meta.end()) return fallback;
    return parse_number(it->second.first, path, it->second.second);
  };
  exp.spec.I_b = meta_number("I_b", 1.0);
  exp.spec.H_b = meta_number("H_b", 1.0);
  data.schedule.t0 = meta_number("t0", 0.0) / div;
  data.schedule.tf = meta_number("tf", 0.0) / div;
  if (meta.count("x0")) {
    const auto parts = split(meta["x0"].first, ';');
    data.x0 = Vec(static_cast<Eigen::Index>(parts.size()));
    for (size_t i = 0; i < parts.size(); ++i)
      data.x0[static_cast<Eigen::Index>(i)] =
          parse_number(parts[i], path, meta["x0"].second);
  }

  for (double& t : data.glucose_times) t /= div;
  for (double& t : data.insulin_times) t /= div;
  for (double& t : data.glucagon_times) t /= div;
  for (auto& seg : data.schedule.glucose_infusion) seg.start /= div;
  for (auto& b : data.schedule.boluses) b.time /= div;

  data.validate();
  data.schedule.validate_for(exp.spec);
  return exp;
}

void save_experiment(const std::string& path, const Experiment& experiment,
                     const std::string& time_unit) {
  const double div = unit_divisor(time_unit);
  if (div == 0.0)
    throw std::invalid_argument("save_experiment: time_unit must be min, h, "
                                "or d");
  const double scale = div;  // days -> requested unit
  std::ofstream out = open_out(path);

  const Dataset& d = experiment.data;
  out << "[meta]\n";
  out << "subject_id," << experiment.subject_id << "\n";
  out << "model_family," << family_name(experiment.spec.family) << "\n";
  out << "time_unit," << time_unit << "\n";
  out << "t0," << fmt(d.schedule.t0 * scale) << "\n";
  out << "tf," << fmt(d.schedule.tf * scale) << "\n";
  out << "I_b," << fmt(experiment.spec.I_b) << "\n";
  out << "H_b," << fmt(experiment.spec.H_b) << "\n";
  if (d.x0.size() > 0) {
    out << "x0,";
    for (Eigen::Index i = 0; i < d.x0.size(); ++i)
      out << (i > 0 ? ";" : "") << fmt(d.x0[i]);
    out << "\n";
  }

  auto series = [&](const char* name, const std::vector<double>& times,
                    const std::vector<double>& values) {
    out << "[" << name << "]\nt,value\n";
    for (size_t i = 0; i < times.size(); ++i)
      out << fmt(times[i] * scale) << "," << fmt(values[i]) << "\n";
  };
  series("glucose", d.glucose_times, d.glucose_values);
  if (d.has_insulin()) series("insulin", d.insulin_times, d.insulin_values);
  if (d.has_glucagon())
    series("glucagon", d.glucagon_times, d.glucagon_values);
  if (!d.schedule.glucose_infusion.empty()) {
    out << "[infusion]\nt,rate\n";
    for (const auto& seg : d.schedule.glucose_infusion)
      out << fmt(seg.start * scale) << "," << fmt(seg.rate) << "\n";
  }
  if (!d.schedule.boluses.empty()) {
    out << "[boluses]\nt,hormone,dose\n";
    for (const auto& b : d.schedule.boluses)
      out << fmt(b.time * scale) << "," << hormone_name(b.hormone) << ","
          << fmt(b.dose) << "\n";
  }
  if (!out) throw std::runtime_error("failed writing " + path);
}

void save_trajectory_csv(const std::string& path,
                         const Trajectory& trajectory) {
  std::ofstream out = open_out(path);
  out << "t";
  for (const auto& name : trajectory.model.state_names()) out << "," << name;
  out << "\n";
  for (size_t i = 0; i < trajectory.times.size(); ++i) {
    out << fmt(trajectory.times[i]);
    for (Eigen::Index j = 0; j < trajectory.states.cols(); ++j)
      out << "," << fmt(trajectory.states(static_cast<Eigen::Index>(i), j));
    out << "\n";
  }
  if (!out) throw std::runtime_error("failed writing " + path);
}

Trajectory load_trajectory_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path, 1, "empty file");
  auto header = split(trim(line), ',');
  if (header.empty() || header[0] != "t")
    throw ParseError(path, 1, "trajectory header must start with 't'");
  const std::vector<std::string> state_names(header.begin() + 1, header.end());

  Trajectory traj;
  bool matched = false;
  for (ModelFamily family :
       {ModelFamily::Complete, ModelFamily::Reduced, ModelFamily::InsulinSub,
        ModelFamily::GlucagonSub, ModelFamily::RescaledComplete}) {
    ModelSpec spec = make_spec(family);
    if (spec.state_names() == state_names) {
      traj.model = spec;
      matched = true;
      break;
    }
  }
  if (!matched)
    throw ParseError(path, 1, "state columns match no model family");

  std::vector<std::vector<double>> rows;
  int ln = 1;
  while (std::getline(in, line)) {
    ++ln;
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto fields = split(t, ',');
    if (fields.size() != state_names.size() + 1)
      throw ParseError(path, ln, "wrong number of columns");
    std::vector<double> row;
    for (const auto& f : fields) row.push_back(parse_number(f, path, ln));
    rows.push_back(std::move(row));
  }
  traj.times.resize(rows.size());
  traj.states.resize(static_cast<Eigen::Index>(rows.size()),
                     static_cast<Eigen::Index>(state_names.size()));
  for (size_t i = 0; i < rows.size(); ++i) {
    traj.times[i] = rows[i][0];
    for (size_t j = 0; j < state_names.size(); ++j)
      traj.states(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          rows[i][j + 1];
  }
  return traj;
}

void save_sensitivity_csv(const std::string& path,
                          const SensitivityMatrix& matrix) {
  std::ofstream out = open_out(path);
  out << "t";
  for (const auto& name : matrix.model.param_names()) out << "," << name;
  out << "\n";
  for (size_t i = 0; i < matrix.times.size(); ++i) {
    out << fmt(matrix.times[i]);
    for (Eigen::Index j = 0; j < matrix.rows.cols(); ++j)
      out << "," << fmt(matrix.rows(static_cast<Eigen::Index>(i), j));
    out << "\n";
  }
  if (!out) throw std::runtime_error("failed writing " + path);
}

void save_fit_result_json(const std::string& path, const FitResult& fit,
                          const ModelSpec& spec) {
  write_json(path, fit_to_json(fit, spec));
}

FitResult load_fit_result_json(const std::string& path, ModelSpec* spec_out) {
  return fit_from_json(read_json(path), path, spec_out);
}

void save_profile_csv(const std::string& path, const ProfileCurve& curve) {
  std::ofstream out = open_out(path);
  out << "grid,value,identifiable,flat_left,flat_right\n";
  for (size_t i = 0; i < curve.grid.size(); ++i)
    out << fmt(curve.grid[i]) << "," << fmt(curve.values[i]) << ","
        << (curve.flags.identifiable ? 1 : 0) << ","
        << (curve.flags.flat_left ? 1 : 0) << ","
        << (curve.flags.flat_right ? 1 : 0) << "\n";
  if (!out) throw std::runtime_error("failed writing " + path);
}

void save_profile_json(const std::string& path, const ProfileCurve& curve) {
  ordered_json j;
  j["param_name"] = curve.param_name;
  ordered_json grid = ordered_json::array();
  for (double g : curve.grid) grid.push_back(num_out(g));
  j["grid"] = std::move(grid);
  ordered_json values = ordered_json::array();
  for (double v : curve.values) values.push_back(num_out(v));
  j["values"] = std::move(values);
  ordered_json theta = ordered_json::array();
  for (const Vec& v : curve.theta_at) theta.push_back(vec_out(v));
  j["theta_at"] = std::move(theta);
  ordered_json ok = ordered_json::array();
  for (char c : curve.point_ok) ok.push_back(static_cast<int>(c));
  j["point_ok"] = std::move(ok);
  j["threshold"] = num_out(curve.threshold);
  j["flags"] = {{"identifiable", curve.flags.identifiable},
                {"flat_left", curve.flags.flat_left},
                {"flat_right", curve.flags.flat_right}};
  write_json(path, j);
}

ProfileCurve load_profile_json(const std::string& path) {
  const ordered_json j = read_json(path);
  ProfileCurve curve;
  curve.param_name = j.at("param_name").get<std::string>();
  for (const auto& g : j.at("grid")) curve.grid.push_back(num_in(g, path));
  for (const auto& v : j.at("values"))
    curve.values.push_back(num_in(v, path));
  for (const auto& t : j.at("theta_at"))
    curve.theta_at.push_back(vec_in(t, path));
  for (const auto& o : j.at("point_ok"))
    curve.point_ok.push_back(static_cast<char>(o.get<int>()));
  curve.threshold = num_in(j.at("threshold"), path);
  const auto& flags = j.at("flags");
  curve.flags.identifiable = flags.at("identifiable").get<bool>();
  curve.flags.flat_left = flags.at("flat_left").get<bool>();
  curve.flags.flat_right = flags.at("flat_right").get<bool>();
  return curve;
}

void save_svd_report_json(const std::string& path, const SVDReport& report) {
  ordered_json j;
  j["singular_values"] = vec_out(report.singular_values);
  j["right_vectors"] = mat_out(report.right_vectors);
  j["small_indices"] = report.small_indices;
  j["groups"] = report.groups;
  ordered_json ens = ordered_json::array();
  for (const Vec& v : report.theta_ensemble) ens.push_back(vec_out(v));
  j["theta_ensemble"] = std::move(ens);
  ordered_json mins = ordered_json::array();
  for (double v : report.member_sigma_min) mins.push_back(num_out(v));
  j["member_sigma_min"] = std::move(mins);
  write_json(path, j);
}

SVDReport load_svd_report_json(const std::string& path) {
  const ordered_json j = read_json(path);
  SVDReport report;
  report.singular_values = vec_in(j.at("singular_values"), path);
  report.right_vectors = mat_in(j.at("right_vectors"), path);
  report.small_indices = j.at("small_indices").get<std::vector<int>>();
  report.groups =
      j.at("groups").get<std::vector<std::vector<std::string>>>();
  for (const auto& v : j.at("theta_ensemble"))
    report.theta_ensemble.push_back(vec_in(v, path));
  for (const auto& v : j.at("member_sigma_min"))
    report.member_sigma_min.push_back(num_in(v, path));
  return report;
}

void save_spectrum_csv(const std::string& path, const SVDReport& report) {
  std::ofstream out = open_out(path);
  out << "index,sigma\n";
  for (Eigen::Index i = 0; i < report.singular_values.size(); ++i)
    out << i << "," << fmt(report.singular_values[i]) << "\n";
  if (!out) throw std::runtime_error("failed writing " + path);
}

void save_split_report_json(const std::string& path, const SplitReport& report,
                            const ModelSpec& spec) {
  ordered_json j;
  j["fit"] = fit_to_json(report.fit, spec);
  j["split_time"] = num_out(report.split_time);
  j["n_first"] = report.n_first;
  j["n_second"] = report.n_second;
  j["mse_first"] = num_out(report.mse_first);
  j["mse_second"] = num_out(report.mse_second);
  j["mse_total"] = num_out(report.mse_total);
  j["bic_first"] = num_out(report.bic_first);
  j["bic_second"] = num_out(report.bic_second);
  j["bic_total"] = num_out(report.bic_total);
  write_json(path, j);
}

SplitReport load_split_report_json(const std::string& path) {
  const ordered_json j = read_json(path);
  SplitReport report;
  report.fit = fit_from_json(j.at("fit"), path, nullptr);
  report.split_time = num_in(j.at("split_time"), path);
  report.n_first = j.at("n_first").get<int>();
  report.n_second = j.at("n_second").get<int>();
  report.mse_first = num_in(j.at("mse_first"), path);
  report.mse_second = num_in(j.at("mse_second"), path);
  report.mse_total = num_in(j.at("mse_total"), path);
  report.bic_first = num_in(j.at("bic_first"), path);
  report.bic_second = num_in(j.at("bic_second"), path);
  report.bic_total = num_in(j.at("bic_total"), path);
  return report;
}

void save_jacobi_report_json(const std::string& path,
                             const JacobiReport& report) {
  ordered_json j;
  j["subset_names"] = report.subset_names;
  j["rows"] = mat_out(report.rows);
  ordered_json res = ordered_json::array();
  for (double r : report.residuals) res.push_back(num_out(r));
  j["residuals"] = std::move(res);
  write_json(path, j);
}

JacobiReport load_jacobi_report_json(const std::string& path) {
  const ordered_json j = read_json(path);
  JacobiReport report;
  report.subset_names =
      j.at("subset_names").get<std::vector<std::string>>();
  report.rows = mat_in(j.at("rows"), path);
  for (const auto& r : j.at("residuals"))
    report.residuals.push_back(num_in(r, path));
  return report;
}

}  // namespace glucokin
