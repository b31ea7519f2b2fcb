#include <glucokin/identifiability.hpp>

#include <glucokin/svd.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace glucokin {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Inverse standard-normal CDF: Acklam's rational approximation polished by
// one Newton step through erfc, giving near machine precision on (0, 1).
double probit(double prob) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (prob < plow) {
    const double q = std::sqrt(-2.0 * std::log(prob));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (prob <= 1.0 - plow) {
    const double q = prob - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
        q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - prob));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
          c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double cdf = 0.5 * std::erfc(-x / std::sqrt(2.0));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
  return x - (cdf - prob) / pdf;
}

}  // namespace

std::vector<Vec> build_theta_ensemble(
    const Vec& theta_hat, const std::vector<double>& confidence_intervals) {
  const size_t m = static_cast<size_t>(theta_hat.size());
  if (confidence_intervals.size() != m)
    throw std::invalid_argument(
        "build_theta_ensemble: need one confidence interval per parameter");
  for (double len : confidence_intervals)
    if (!std::isfinite(len) || len < 0.0)
      throw std::invalid_argument(
          "build_theta_ensemble: interval lengths must be finite and >= 0");
  if (!theta_hat.allFinite())
    throw std::invalid_argument("build_theta_ensemble: non-finite center");

  std::vector<Vec> ensemble;
  ensemble.reserve(2 * m + 1);
  ensemble.push_back(theta_hat);
  for (size_t j = 0; j < m; ++j) {
    const double shift = confidence_intervals[j] / 100.0;
    for (double sign : {+1.0, -1.0}) {
      Vec v = theta_hat;
      v[static_cast<Eigen::Index>(j)] =
          std::max(0.0, v[static_cast<Eigen::Index>(j)] + sign * shift);
      ensemble.push_back(std::move(v));
    }
  }
  return ensemble;
}

SpectrumFindings analyze_spectrum(const Vec& singular_values, const Mat& V,
                                  const std::vector<std::string>& param_names,
                                  const SpectrumRule& rule) {
  const Eigen::Index n = singular_values.size();
  if (V.cols() != n)
    throw std::invalid_argument(
        "analyze_spectrum: V must have one column per singular value");
  if (static_cast<Eigen::Index>(param_names.size()) != V.rows())
    throw std::invalid_argument(
        "analyze_spectrum: need one parameter name per V row");
  for (Eigen::Index i = 1; i < n; ++i)
    if (singular_values[i] > singular_values[i - 1])
      throw std::invalid_argument(
          "analyze_spectrum: spectrum must be sorted descending");

  SpectrumFindings out;
  Eigen::Index split = -1;
  for (Eigen::Index k = 1; k < n; ++k) {
    if (singular_values[k] <= rule.sv_threshold &&
        singular_values[k - 1] > 0.0 &&
        singular_values[k - 1] >= rule.sv_gap * singular_values[k]) {
      split = k;
      break;
    }
  }
  if (split < 0) return out;
  for (Eigen::Index k = split; k < n; ++k) {
    out.small_indices.push_back(static_cast<int>(k));
    std::vector<std::string> group;
    for (Eigen::Index i = 0; i < V.rows(); ++i)
      if (std::abs(V(i, k)) >= rule.group_cutoff)
        group.push_back(param_names[static_cast<size_t>(i)]);
    out.groups.push_back(std::move(group));
  }
  return out;
}

SVDReport structural_analysis(const ModelSpec& spec,
                              const std::vector<Vec>& theta_ensemble,
                              const Vec& x0, const InputSchedule& schedule,
                              const StructuralOptions& options) {
  if (theta_ensemble.empty())
    throw std::invalid_argument("structural_analysis: empty ensemble");
  const Eigen::Index p = spec.param_count();
  for (const Vec& th : theta_ensemble)
    if (th.size() != p)
      throw std::invalid_argument(
          "structural_analysis: inconsistent parameter layouts in ensemble");

  const auto& names = spec.param_names();
  SVDReport report;
  report.theta_ensemble = theta_ensemble;

  // Group occurrence counts across ensemble members (sorted name sets).
  std::map<std::vector<std::string>, int> counts;
  std::vector<Mat> member_matrices;
  member_matrices.reserve(theta_ensemble.size());
  Eigen::Index total_rows = 0;
  for (const Vec& th : theta_ensemble) {
    SensitivityMatrix sm =
        assemble_sensitivity_matrix(spec, th, x0, schedule,
                                    options.sensitivity);
    Mat S = options.scale_columns ? Mat(sm.rows * th.asDiagonal()) : sm.rows;
    total_rows += S.rows();

    SVDResult dec = svd(S);
    report.member_sigma_min.push_back(dec.sigma[dec.sigma.size() - 1]);
    SpectrumFindings f = analyze_spectrum(dec.sigma, dec.V, names,
                                          options.rule);
    for (auto group : f.groups) {
      std::sort(group.begin(), group.end());
      ++counts[group];
    }
    member_matrices.push_back(std::move(S));
  }

  Mat stacked(total_rows, p);
  Eigen::Index at = 0;
  for (const Mat& S : member_matrices) {
    stacked.middleRows(at, S.rows()) = S;
    at += S.rows();
  }
  SVDResult combined = svd(stacked);
  report.singular_values = combined.sigma;
  report.right_vectors = combined.V;
  report.small_indices =
      analyze_spectrum(combined.sigma, combined.V, names, options.rule)
          .small_indices;

  const int need = std::max(
      1, static_cast<int>(std::ceil(options.min_recurrence *
                                    static_cast<double>(theta_ensemble.size()))));
  std::vector<std::pair<std::vector<std::string>, int>> frequent;
  for (const auto& [group, count] : counts)
    if (count >= need && !group.empty()) frequent.emplace_back(group, count);
  std::sort(frequent.begin(), frequent.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  for (auto& [group, count] : frequent) report.groups.push_back(group);
  return report;
}

ProfileCurve profile_likelihood(const ModelSpec& spec, const Dataset& data,
                                const Vec& theta_hat, int param_index,
                                double sigma2, const ProfileOptions& options) {
  const int m = spec.param_count();
  if (theta_hat.size() != m)
    throw std::invalid_argument(
        "profile_likelihood: parameter vector has wrong dimension");
  if (param_index < 0 || param_index >= m)
    throw std::invalid_argument(
        "profile_likelihood: parameter index out of range");
  if (!(sigma2 > 0.0))
    throw std::invalid_argument("profile_likelihood: sigma2 must be > 0");
  const int points = options.grid.points;
  if (points < 3 || points % 2 == 0)
    throw std::invalid_argument(
        "profile_likelihood: grid.points must be odd and >= 3 so the grid "
        "contains the optimum");
  if (!(options.grid.span > 1.0))
    throw std::invalid_argument("profile_likelihood: grid.span must be > 1");
  if (!(theta_hat[param_index] > 0.0))
    throw std::invalid_argument(
        "profile_likelihood: profiled parameter must be positive for the "
        "log-spaced grid");
  if (data.glucose_times.empty())
    throw std::invalid_argument("profile_likelihood: dataset has no glucose");

  ProfileCurve curve;
  curve.param_name = spec.param_names()[static_cast<size_t>(param_index)];
  curve.grid.resize(static_cast<size_t>(points));
  curve.values.assign(static_cast<size_t>(points), kInf);
  curve.theta_at.assign(static_cast<size_t>(points), theta_hat);
  curve.point_ok.assign(static_cast<size_t>(points), 0);
  for (int k = 0; k < points; ++k) {
    const double expo =
        -1.0 + 2.0 * static_cast<double>(k) / static_cast<double>(points - 1);
    curve.grid[static_cast<size_t>(k)] =
        theta_hat[param_index] * std::pow(options.grid.span, expo);
  }

  auto embed = [&](double fixed, const Vec& rest) {
    Vec full(m);
    Eigen::Index at = 0;
    for (Eigen::Index j = 0; j < m; ++j)
      full[j] = j == param_index ? fixed : rest[at++];
    return full;
  };
  Vec rest_center(m - 1);
  {
    Eigen::Index at = 0;
    for (Eigen::Index j = 0; j < m; ++j)
      if (j != param_index) rest_center[at++] = theta_hat[j];
  }

  // Minimize over the nuisance parameters at one grid point; returns the
  // optimum to warm-start the neighbor. Failures are recorded, not fatal.
  auto solve_at = [&](size_t k, const Vec& warm) -> Vec {
    const double fixed = curve.grid[k];
    try {
      if (m == 1) {
        curve.values[k] = cost_glucose(spec, embed(fixed, warm), data,
                                       options.inner.integrate) /
                          sigma2;
        curve.theta_at[k] = embed(fixed, warm);
        curve.point_ok[k] = std::isfinite(curve.values[k]) ? 1 : 0;
        return warm;
      }
      CostFunction cost = [&](const Vec& rest) {
        return cost_glucose(spec, embed(fixed, rest), data,
                            options.inner.integrate);
      };
      FitResult r = nelder_mead(cost, warm, options.inner);
      curve.values[k] = r.cost / sigma2;
      curve.theta_at[k] = embed(fixed, r.theta_hat);
      curve.point_ok[k] =
          (r.converged && std::isfinite(curve.values[k])) ? 1 : 0;
      return r.theta_hat;
    } catch (const std::exception&) {
      curve.values[k] = kInf;
      curve.theta_at[k] = embed(fixed, warm);
      curve.point_ok[k] = 0;
      return warm;
    }
  };

  // March outward from the center so each point starts from its neighbor's
  // optimum (profiles are continuous; this damps the optimizer's sensitivity
  // to starting points).
  const size_t center = static_cast<size_t>(points - 1) / 2;
  const Vec at_center = solve_at(center, rest_center);
  Vec warm = at_center;
  for (size_t k = center + 1; k < static_cast<size_t>(points); ++k)
    warm = solve_at(k, warm);
  warm = at_center;
  for (size_t k = center; k-- > 0;) warm = solve_at(k, warm);
  return curve;
}

double confidence_threshold(std::vector<double> pool, double alpha) {
  if (pool.empty())
    throw std::invalid_argument("confidence_threshold: empty value pool");
  if (!(alpha > 0.0) || !(alpha < 100.0))
    throw std::invalid_argument(
        "confidence_threshold: alpha must lie in (0, 100)");
  std::sort(pool.begin(), pool.end());
  const double rank =
      alpha / 100.0 * static_cast<double>(pool.size() - 1);
  const size_t lo = static_cast<size_t>(rank);
  const double frac = rank - static_cast<double>(lo);
  if (lo + 1 >= pool.size()) return pool.back();
  return pool[lo] + frac * (pool[lo + 1] - pool[lo]);
}

double chi_square_threshold(double global_min, double alpha) {
  if (!(alpha > 0.0) || !(alpha < 100.0))
    throw std::invalid_argument(
        "chi_square_threshold: alpha must lie in (0, 100)");
  const double z = probit(0.5 * (1.0 + alpha / 100.0));
  return global_min + z * z;
}

void apply_threshold(ProfileCurve& curve, double threshold) {
  curve.threshold = threshold;
  if (curve.values.empty()) {
    curve.flags = ProfileFlags{};
    return;
  }
  const size_t argmin = static_cast<size_t>(
      std::min_element(curve.values.begin(), curve.values.end()) -
      curve.values.begin());
  bool left = false, right = false;
  for (size_t k = 0; k < argmin; ++k)
    if (curve.values[k] > threshold) left = true;
  for (size_t k = argmin + 1; k < curve.values.size(); ++k)
    if (curve.values[k] > threshold) right = true;
  curve.flags.flat_left = !left;
  curve.flags.flat_right = !right;
  curve.flags.identifiable = left && right;
}

std::string threshold_mode_name(ThresholdMode mode) {
  switch (mode) {
    case ThresholdMode::PerParameter:
      return "per_parameter";
    case ThresholdMode::Pooled:
      return "pooled";
    case ThresholdMode::ChiSquare:
      return "chi_square";
  }
  return "per_parameter";
}

ThresholdMode threshold_mode_from_name(const std::string& name) {
  if (name == "per_parameter" || name == "per-parameter")
    return ThresholdMode::PerParameter;
  if (name == "pooled") return ThresholdMode::Pooled;
  if (name == "chi_square" || name == "chi-square" || name == "chi2")
    return ThresholdMode::ChiSquare;
  throw std::invalid_argument(
      "unknown threshold mode '" + name +
      "' (expected per_parameter, pooled, or chi_square)");
}

void attach_thresholds(std::vector<ProfileCurve>& curves, double alpha,
                       ThresholdMode mode) {
  if (curves.empty()) return;
  if (mode == ThresholdMode::Pooled) {
    std::vector<double> pool;
    for (const ProfileCurve& c : curves)
      for (double v : c.values)
        if (std::isfinite(v)) pool.push_back(v);
    const double thr = confidence_threshold(pool, alpha);
    for (ProfileCurve& c : curves) apply_threshold(c, thr);
    return;
  }
  for (ProfileCurve& c : curves) {
    if (mode == ThresholdMode::PerParameter) {
      std::vector<double> pool;
      for (double v : c.values)
        if (std::isfinite(v)) pool.push_back(v);
      apply_threshold(c, confidence_threshold(pool, alpha));
    } else {
      const double mn = *std::min_element(c.values.begin(), c.values.end());
      apply_threshold(c, chi_square_threshold(mn, alpha));
    }
  }
}

JacobiReport jacobi_nullspace_check(const ModelSpec& spec, const Vec& x0,
                                    const Vec& theta, JacobiSubset subset) {
  if (spec.family != ModelFamily::Complete)
    throw std::invalid_argument(
        "jacobi_nullspace_check: defined for the complete model only");
  if (x0.size() != spec.state_dim() || theta.size() != spec.param_count())
    throw std::invalid_argument("jacobi_nullspace_check: dimension mismatch");

  const double G0 = x0[0], I0 = x0[1], i10 = x0[2], i20 = x0[3], H0 = x0[4],
               h10 = x0[5], xi0 = x0[6];
  const struct {
    const char* name;
    double value;
  } required[] = {{"G", G0},  {"I", I0},   {"i1", i10},
                  {"H", H0},  {"h1", h10}, {"xi", xi0}};
  for (const auto& r : required)
    if (r.value == 0.0)
      throw std::invalid_argument(
          std::string("jacobi_nullspace_check: the construction requires ") +
          r.name + "(0) != 0");

  const double k1 = theta[0], kI = theta[1], ki1 = theta[2], kH = theta[3],
               rG = theta[4], m1 = theta[5], m2 = theta[6], m3 = theta[7],
               m4 = theta[8], pw = theta[9], qw = theta[10];
  const double i1p = pow_pos(i10, pw);
  const double i1q = pow_pos(i10, qw);

  // Gradient entries of the output's second time derivative with respect to
  // the six kinetic parameters (evaluated at t = 0, no infusion term):
  const double g_m1 = kI * I0 * G0;
  const double g_m2 = -kI * i1p * G0;
  const double g_n = -kH * H0 * xi0;
  const double g_n2 = kH * h10 * xi0;
  const double g_x1 = -kH * (H0 + spec.H_b) * H0 * xi0;
  const double g_x2 = kH * (H0 + spec.H_b) * G0 * I0;

  JacobiReport report;
  std::vector<Vec> null_vectors;
  if (subset == JacobiSubset::Six) {
    report.subset_names = {"m1", "m2", "n", "n2", "x1", "x2"};
    report.rows = Mat::Zero(9, 6);
    report.rows.row(5) << g_m1, g_m2, g_n, g_n2, g_x1, g_x2;

    Vec v1 = Vec::Zero(6), v2 = Vec::Zero(6), v3 = Vec::Zero(6);
    v1[0] = 1.0 / I0;
    v1[1] = 1.0 / i1p;
    v2[2] = 1.0 / H0;
    v2[3] = 1.0 / h10;
    v3[4] = 1.0 / (H0 * xi0);
    v3[5] = 1.0 / (G0 * I0);
    null_vectors = {v1, v2, v3};
  } else {
    report.subset_names = {"kI", "ki1", "m1", "m2", "n", "n2", "x1", "x2"};
    report.rows = Mat::Zero(9, 8);

    // First time derivative of the output: the two extra parameters appear
    // directly.
    report.rows(1, 0) = -(I0 + spec.I_b) * G0;
    report.rows(1, 1) = -i10 * G0;

    // Second derivative: product rule over the loss factor
    // B = k1 + kI (I + I_b) + ki1 i1 and the level A = dG/dt at t = 0.
    const double B = k1 + kI * (I0 + spec.I_b) + ki1 * i10;
    const double A = -B * G0 + kH * (H0 + spec.H_b) * xi0;
    const double dI0 = -m1 * I0 + m2 * i1p;
    const double di10 = -m3 * i1q + m4 * i20;
    report.rows(5, 0) =
        (-(I0 + spec.I_b)) * G0 * (-B) + A * (-(I0 + spec.I_b)) + dI0 * (-G0);
    report.rows(5, 1) = (-i10) * G0 * (-B) + A * (-i10) + di10 * (-G0);
    report.rows.row(5).tail(6) << g_m1, g_m2, g_n, g_n2, g_x1, g_x2;

    // Gradient of the infusion coefficient in the second derivative.
    report.rows(6, 0) = -(I0 + spec.I_b) * rG;
    report.rows(6, 1) = -i10 * rG;

    Vec v1 = Vec::Zero(8), v2 = Vec::Zero(8), v3 = Vec::Zero(8);
    v1[2] = 1.0 / I0;
    v1[3] = 1.0 / i1p;
    v2[4] = 1.0 / H0;
    v2[5] = 1.0 / h10;
    v3[6] = 1.0 / (H0 * xi0);
    v3[7] = 1.0 / (G0 * I0);
    null_vectors = {v1, v2, v3};
  }

  for (const Vec& v : null_vectors)
    report.residuals.push_back((report.rows * v).norm() / v.norm());
  return report;
}

}  // namespace glucokin
