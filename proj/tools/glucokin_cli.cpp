// glucokin — command-line front end for the bihormonal glucose model library.
//
// Subcommands cover the full pipeline: simulate trajectories, generate
// synthetic experiments, fit parameters, profile likelihoods, run the
// sensitivity-SVD screen, evaluate the analytic null-space check, and score
// split-horizon predictions. Every run is deterministic: the same flags,
// inputs, and seed produce byte-identical artifacts. The GLUCOKIN_THREADS
// environment variable caps worker threads; results do not depend on it.

#include <CLI11.hpp>
#include <json.hpp>

#include <glucokin/dataset_io.hpp>
#include <glucokin/estimation.hpp>
#include <glucokin/identifiability.hpp>
#include <glucokin/integrate.hpp>
#include <glucokin/model.hpp>
#include <glucokin/parallel.hpp>
#include <glucokin/schedule.hpp>
#include <glucokin/sensitivity.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace glucokin;

namespace {

struct Options {
  std::string model;
  std::string experiment;
  std::string params;
  std::string optimizer = "nelder-mead";
  double step = 2e-4;
  double delta = 0.004;
  double alpha = 96.0;
  double split = 0.0;
  std::uint64_t seed = 0;
  std::string out = ".";
  int grid_points = 41;
  double grid_span = 10.0;
  double sv_threshold = 1e-9;
  double sv_gap = 1e3;
  double t0 = 0.0;
  double tf = 1.0 / 3.0;
  double sample_dt = 1.0 / 288.0;
  double sigma = 0.0;
  std::string x0_text;
  std::string subset = "both";
  std::string threshold_mode = "pooled";
};

Vec parse_state_list(const std::string& text) {
  std::vector<double> values;
  std::string token;
  for (char c : text + ";") {
    if (c == ';' || c == ',') {
      if (!token.empty()) {
        size_t used = 0;
        values.push_back(std::stod(token, &used));
        if (used != token.size())
          throw std::runtime_error("bad state value '" + token + "'");
        token.clear();
      }
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      token += c;
    }
  }
  Vec v(static_cast<Eigen::Index>(values.size()));
  for (size_t i = 0; i < values.size(); ++i)
    v[static_cast<Eigen::Index>(i)] = values[i];
  return v;
}

// Parameter files are either "name,value" lines ('#' comments allowed) or a
// JSON object — a fit.json artifact works directly via its theta_hat block.
Vec read_params_file(const std::string& path, const ModelSpec& spec) {
  std::map<std::string, double> values;
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    ordered_json j;
    try {
      j = ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(path + ": " + e.what());
    }
    const ordered_json& obj = j.contains("theta_hat") ? j["theta_hat"] : j;
    for (const auto& [key, value] : obj.items()) {
      if (!value.is_number())
        throw std::runtime_error(path + ": '" + key + "' is not a number");
      values[key] = value.get<double>();
    }
  } else {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    while (std::getline(in, line)) {
      const auto start = line.find_first_not_of(" \t\r");
      if (start == std::string::npos || line[start] == '#') continue;
      const auto comma = line.find(',');
      if (comma == std::string::npos)
        throw std::runtime_error(path + ": parameter rows are 'name,value'");
      std::string name = line.substr(start, comma - start);
      name.erase(name.find_last_not_of(" \t\r") + 1);
      values[name] = std::stod(line.substr(comma + 1));
    }
  }
  Vec theta(spec.param_count());
  const auto& names = spec.param_names();
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const auto it = values.find(names[static_cast<size_t>(i)]);
    if (it == values.end())
      throw std::runtime_error(path + ": missing parameter '" +
                               names[static_cast<size_t>(i)] + "'");
    theta[i] = it->second;
  }
  return theta;
}

ordered_json num_out(double v) {
  if (std::isfinite(v)) return ordered_json(v);
  if (std::isnan(v)) return ordered_json("nan");
  return ordered_json(v > 0 ? "inf" : "-inf");
}

void write_json_file(const fs::path& path, const ordered_json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

// Inputs shared by the subcommands: an optional experiment file, an optional
// family override (basals are kept from the file), a parameter vector, and
// the schedule/initial state either from the file or from the horizon flags.
struct Inputs {
  ModelSpec spec;
  Dataset data;  // empty glucose series when no experiment file was given
  Vec theta;
  Vec x0;
  bool from_file = false;
};

Inputs gather_inputs(const Options& opt, bool params_required) {
  Inputs in;
  Experiment exp;
  if (!opt.experiment.empty()) {
    exp = load_experiment(opt.experiment);
    in.spec = exp.spec;
    in.data = exp.data;
    in.from_file = true;
  } else {
    in.data.schedule.t0 = opt.t0;
    in.data.schedule.tf = opt.tf;
  }
  if (!opt.model.empty()) {
    ModelSpec replacement = make_spec(family_from_name(opt.model));
    replacement.I_b = in.from_file ? exp.spec.I_b : replacement.I_b;
    replacement.H_b = in.from_file ? exp.spec.H_b : replacement.H_b;
    in.spec = replacement;
  } else if (!in.from_file) {
    throw std::runtime_error("--model is required without --experiment");
  }

  if (!opt.params.empty())
    in.theta = read_params_file(opt.params, in.spec);
  else if (params_required)
    throw std::runtime_error("this command requires --params");
  else
    in.theta = Vec::Ones(in.spec.param_count());

  if (!opt.x0_text.empty()) {
    in.x0 = parse_state_list(opt.x0_text);
    if (in.x0.size() != in.spec.state_dim())
      throw std::runtime_error("--x0 needs " +
                               std::to_string(in.spec.state_dim()) +
                               " values");
  } else if (in.from_file) {
    in.x0 = initial_state(in.spec, in.data);
  } else {
    in.x0 = Vec::Zero(in.spec.state_dim());
  }
  return in;
}

void require_experiment(const Options& opt, const char* command) {
  if (opt.experiment.empty())
    throw std::runtime_error(std::string(command) +
                             " requires --experiment");
}

int cmd_simulate(const Options& opt) {
  Inputs in = gather_inputs(opt, false);
  IntegrateOptions io;
  io.step = opt.step;
  Trajectory traj = integrate(in.spec, in.theta, in.x0, in.data.schedule, io);
  const fs::path out = fs::path(opt.out) / "trajectory.csv";
  save_trajectory_csv(out.string(), traj);
  std::cout << "wrote " << out.string() << " (" << traj.times.size()
            << " rows)\n";
  return 0;
}

int cmd_generate(const Options& opt) {
  Inputs in = gather_inputs(opt, false);
  std::vector<double> sample_times;
  if (in.from_file) {
    sample_times = in.data.glucose_times;
  } else {
    if (opt.sample_dt <= 0)
      throw std::runtime_error("--sample-dt must be positive");
    const double t0 = in.data.schedule.t0;
    const double tf = in.data.schedule.tf;
    for (double t = t0; t <= tf + 1e-12; t += opt.sample_dt)
      sample_times.push_back(std::min(t, tf));
  }
  IntegrateOptions io;
  io.step = opt.step;
  Experiment exp;
  exp.subject_id = "synthetic";
  exp.spec = in.spec;
  exp.data = generate_synthetic(in.spec, in.theta, in.x0, in.data.schedule,
                                sample_times, opt.sigma, opt.seed, io);
  const fs::path out = fs::path(opt.out) / "generated.exp";
  save_experiment(out.string(), exp);
  std::cout << "wrote " << out.string() << " ("
            << exp.data.glucose_times.size() << " samples, sigma "
            << opt.sigma << ", seed " << opt.seed << ")\n";
  return 0;
}

int cmd_fit(const Options& opt) {
  require_experiment(opt, "fit");
  Inputs in = gather_inputs(opt, false);
  FitOptions fo;
  fo.integrate.step = opt.step;
  FitResult fit = fit_glucose(in.spec, in.data, in.theta,
                              optimizer_from_name(opt.optimizer), fo);
  const fs::path dir(opt.out);
  save_fit_result_json((dir / "fit.json").string(), fit, in.spec);

  IntegrateOptions io = fo.integrate;
  io.extra_breakpoints = in.data.glucose_times;
  Trajectory traj =
      integrate(in.spec, fit.theta_hat, initial_state(in.spec, in.data),
                in.data.schedule, io);
  save_trajectory_csv((dir / "fit_trajectory.csv").string(), traj);

  std::cout << "wrote " << (dir / "fit.json").string() << " and "
            << (dir / "fit_trajectory.csv").string() << "\n"
            << "cost " << fit.cost << ", mse " << fit.mse << ", bic "
            << fit.bic << ", converged " << (fit.converged ? "yes" : "no")
            << "\n";
  return 0;
}

int cmd_profile(const Options& opt) {
  require_experiment(opt, "profile");
  Inputs in = gather_inputs(opt, true);
  IntegrateOptions cost_io;
  cost_io.step = opt.step;
  const double cost = cost_glucose(in.spec, in.theta, in.data, cost_io);
  const int n = static_cast<int>(in.data.glucose_times.size());
  if (!std::isfinite(cost) || cost <= 0.0)
    throw std::runtime_error(
        "profile: the center parameters give a degenerate cost; fit first");
  const double sigma2 = cost / n;

  ProfileOptions po;
  po.grid.points = opt.grid_points;
  po.grid.span = opt.grid_span;
  po.inner.integrate.step = opt.step;
  const auto& names = in.spec.param_names();
  std::vector<ProfileCurve> curves(names.size());
  parallel_for(names.size(), [&](std::size_t i) {
    curves[i] = profile_likelihood(in.spec, in.data, in.theta,
                                   static_cast<int>(i), sigma2, po);
  });
  attach_thresholds(curves, opt.alpha,
                    threshold_mode_from_name(opt.threshold_mode));

  const fs::path dir(opt.out);
  ordered_json summary;
  summary["model"] = family_name(in.spec.family);
  summary["alpha"] = opt.alpha;
  summary["threshold_mode"] = opt.threshold_mode;
  summary["sigma2"] = sigma2;
  ordered_json per_param;
  for (const ProfileCurve& curve : curves) {
    save_profile_csv((dir / ("profile_" + curve.param_name + ".csv")).string(),
                     curve);
    double best = std::numeric_limits<double>::infinity();
    double best_grid = curve.grid.empty() ? 0.0 : curve.grid.front();
    for (size_t k = 0; k < curve.values.size(); ++k)
      if (curve.values[k] < best) {
        best = curve.values[k];
        best_grid = curve.grid[k];
      }
    ordered_json entry;
    entry["identifiable"] = curve.flags.identifiable;
    entry["flat_left"] = curve.flags.flat_left;
    entry["flat_right"] = curve.flags.flat_right;
    entry["threshold"] = num_out(curve.threshold);
    entry["min_value"] = num_out(best);
    entry["argmin_grid"] = num_out(best_grid);
    per_param[curve.param_name] = std::move(entry);
  }
  summary["params"] = std::move(per_param);
  write_json_file(dir / "profile_summary.json", summary);

  int identifiable = 0;
  for (const ProfileCurve& c : curves) identifiable += c.flags.identifiable;
  std::cout << "wrote " << (dir / "profile_summary.json").string() << " and "
            << curves.size() << " profile CSVs; " << identifiable << "/"
            << curves.size() << " identifiable\n";
  return 0;
}

int cmd_svd(const Options& opt) {
  require_experiment(opt, "svd");
  Inputs in = gather_inputs(opt, true);
  StructuralOptions so;
  so.sensitivity.step = opt.step;
  so.sensitivity.delta = opt.delta;
  so.rule.sv_threshold = opt.sv_threshold;
  so.rule.sv_gap = opt.sv_gap;
  // +-1% members around the center, the center itself included.
  std::vector<double> ci(static_cast<size_t>(in.theta.size()));
  for (Eigen::Index i = 0; i < in.theta.size(); ++i)
    ci[static_cast<size_t>(i)] = in.theta[i];
  SVDReport report = structural_analysis(
      in.spec, build_theta_ensemble(in.theta, ci), in.x0, in.data.schedule,
      so);
  const fs::path dir(opt.out);
  save_svd_report_json((dir / "svd.json").string(), report);
  save_spectrum_csv((dir / "spectrum.csv").string(), report);
  std::cout << "wrote " << (dir / "svd.json").string() << " and "
            << (dir / "spectrum.csv").string() << "; "
            << report.small_indices.size() << " flagged directions, "
            << report.groups.size() << " groups\n";
  return 0;
}

int cmd_jacobi(const Options& opt) {
  Options local = opt;
  if (local.model.empty()) local.model = "complete";
  if (local.x0_text.empty()) local.x0_text = "5.5;1;1;1;1;1;1";
  Inputs in = gather_inputs(local, false);
  const fs::path dir(opt.out);
  auto run_one = [&](JacobiSubset subset, const char* name) {
    JacobiReport report =
        jacobi_nullspace_check(in.spec, in.x0, in.theta, subset);
    const fs::path out = dir / (std::string("jacobi_") + name + ".json");
    save_jacobi_report_json(out.string(), report);
    double worst = 0.0;
    for (double r : report.residuals) worst = std::max(worst, r);
    std::cout << "wrote " << out.string() << "; max residual " << worst
              << "\n";
  };
  if (opt.subset == "six" || opt.subset == "both")
    run_one(JacobiSubset::Six, "six");
  if (opt.subset == "eight" || opt.subset == "both")
    run_one(JacobiSubset::Eight, "eight");
  if (opt.subset != "six" && opt.subset != "eight" && opt.subset != "both")
    throw std::runtime_error("--subset must be six, eight, or both");
  return 0;
}

int cmd_predict(const Options& opt) {
  require_experiment(opt, "predict");
  Inputs in = gather_inputs(opt, false);
  FitOptions fo;
  fo.integrate.step = opt.step;
  SplitReport report =
      fit_predict_split(in.spec, in.data, opt.split, in.theta,
                        optimizer_from_name(opt.optimizer), fo);
  const fs::path out = fs::path(opt.out) / "predict.json";
  save_split_report_json(out.string(), report, in.spec);
  std::cout << "wrote " << out.string() << "; mse first " << report.mse_first
            << ", second " << report.mse_second << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "glucokin: low-order bihormonal glucose models — simulation, "
      "calibration, and identifiability analysis"};
  app.require_subcommand(1);
  app.set_help_flag();
  app.set_help_all_flag("--help,-h", "Print help for every command and flag");

  Options opt;
  auto add_model = [&](CLI::App* c) {
    c->add_option("--model", opt.model,
                  "Model family: complete, rescaled, reduced, insulin_sub, "
                  "glucagon_sub");
  };
  auto add_experiment = [&](CLI::App* c, bool required) {
    CLI::Option* o = c->add_option("--experiment", opt.experiment,
                                   "Experiment file (sectioned CSV)");
    if (required) o->required();
  };
  auto add_params = [&](CLI::App* c, bool required) {
    CLI::Option* o =
        c->add_option("--params", opt.params,
                      "Parameter file: 'name,value' lines or a fit.json");
    if (required) o->required();
  };
  auto add_step = [&](CLI::App* c) {
    c->add_option("--step", opt.step, "Integrator step in days")->capture_default_str();
  };
  auto add_out = [&](CLI::App* c) {
    c->add_option("--out", opt.out, "Output directory")->capture_default_str();
  };
  auto add_optimizer = [&](CLI::App* c) {
    c->add_option("--optimizer", opt.optimizer,
                  "nelder-mead or quasi-newton")->capture_default_str();
  };
  auto add_horizon = [&](CLI::App* c) {
    c->add_option("--t0", opt.t0, "Horizon start in days (no --experiment)")->capture_default_str();
    c->add_option("--tf", opt.tf, "Horizon end in days (no --experiment)")->capture_default_str();
    c->add_option("--x0", opt.x0_text,
                  "Initial state, semicolon-separated (default zeros, or the "
                  "experiment's)");
  };

  CLI::App* sim = app.add_subcommand(
      "simulate", "Integrate a model and write trajectory.csv");
  add_model(sim);
  add_experiment(sim, false);
  add_params(sim, false);
  add_step(sim);
  add_horizon(sim);
  add_out(sim);

  CLI::App* gen = app.add_subcommand(
      "generate",
      "Write generated.exp with noisy glucose samples from a model");
  add_model(gen);
  add_experiment(gen, false);
  add_params(gen, false);
  add_step(gen);
  add_horizon(gen);
  gen->add_option("--sample-dt", opt.sample_dt,
                  "Sample spacing in days (no --experiment)")->capture_default_str();
  gen->add_option("--sigma", opt.sigma, "Noise standard deviation")->capture_default_str();
  gen->add_option("--seed", opt.seed, "Noise seed")->capture_default_str();
  add_out(gen);

  CLI::App* fit = app.add_subcommand(
      "fit", "Calibrate to an experiment; write fit.json and "
             "fit_trajectory.csv");
  add_model(fit);
  add_experiment(fit, true);
  add_params(fit, false);
  add_optimizer(fit);
  add_step(fit);
  add_out(fit);

  CLI::App* prof = app.add_subcommand(
      "profile", "Profile likelihoods around fitted parameters; write "
                 "per-parameter CSVs and profile_summary.json");
  add_model(prof);
  add_experiment(prof, true);
  add_params(prof, true);
  add_step(prof);
  prof->add_option("--grid-points", opt.grid_points,
                   "Odd number of grid points per parameter")->capture_default_str();
  prof->add_option("--grid-span", opt.grid_span,
                   "Grid covers [theta/span, theta*span]")->capture_default_str();
  prof->add_option("--alpha", opt.alpha, "Confidence level in percent")->capture_default_str();
  prof->add_option("--threshold-mode", opt.threshold_mode,
                   "pooled, per-parameter, or chi-square")->capture_default_str();
  add_out(prof);

  CLI::App* svd = app.add_subcommand(
      "svd", "Sensitivity-SVD structural screen; write svd.json and "
             "spectrum.csv");
  add_model(svd);
  add_experiment(svd, true);
  add_params(svd, true);
  add_step(svd);
  svd->add_option("--delta", opt.delta, "Sensitivity grid spacing in days")->capture_default_str();
  svd->add_option("--sv-threshold", opt.sv_threshold,
                  "Absolute singular-value cutoff")->capture_default_str();
  svd->add_option("--sv-gap", opt.sv_gap,
                  "Required ratio between kept and flagged values")->capture_default_str();
  add_out(svd);

  CLI::App* jac = app.add_subcommand(
      "jacobi", "Analytic null-space residuals of the full model");
  add_model(jac);
  add_params(jac, false);
  jac->add_option("--x0", opt.x0_text,
                  "Evaluation state, semicolon-separated (all nonzero)");
  jac->add_option("--subset", opt.subset, "six, eight, or both")->capture_default_str();
  add_out(jac);

  CLI::App* pred = app.add_subcommand(
      "predict", "Fit before a split time, score the remainder; write "
                 "predict.json");
  add_model(pred);
  add_experiment(pred, true);
  add_params(pred, false);
  add_optimizer(pred);
  pred->add_option("--split", opt.split, "Split time in days")->required();
  add_step(pred);
  add_out(pred);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    fs::create_directories(opt.out);
    if (app.got_subcommand(sim)) return cmd_simulate(opt);
    if (app.got_subcommand(gen)) return cmd_generate(opt);
    if (app.got_subcommand(fit)) return cmd_fit(opt);
    if (app.got_subcommand(prof)) return cmd_profile(opt);
    if (app.got_subcommand(svd)) return cmd_svd(opt);
    if (app.got_subcommand(jac)) return cmd_jacobi(opt);
    if (app.got_subcommand(pred)) return cmd_predict(opt);
    std::cerr << "error: no command dispatched\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
