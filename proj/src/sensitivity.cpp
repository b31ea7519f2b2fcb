#include <glucokin/sensitivity.hpp>

#include <algorithm>
#include <cmath>

namespace glucokin {

namespace {

constexpr double kDivergenceBound = 1e12;

void jacobians_unchecked(const ModelSpec& spec, const Vec& params, const Vec& x,
                         double ra_g, Mat& Jx, Mat& Jth) {
  switch (spec.family) {
    case ModelFamily::Complete:
      state_jac_complete(x, params, spec.I_b, spec.H_b, Jx);
      param_jac_complete(x, params, spec.I_b, spec.H_b, ra_g, Jth);
      return;
    case ModelFamily::RescaledComplete:
      state_jac_rescaled_complete(x, params, spec.I_b, spec.H_b, Jx);
      param_jac_rescaled_complete(x, params, spec.I_b, spec.H_b, ra_g, Jth);
      return;
    case ModelFamily::Reduced:
      state_jac_reduced(x, params, spec.H_b, Jx);
      param_jac_reduced(x, params, spec.H_b, ra_g, Jth);
      return;
    case ModelFamily::InsulinSub:
      state_jac_insulin_sub(x, params, spec.I_b, Jx);
      param_jac_insulin_sub(x, params, spec.I_b, ra_g, Jth);
      return;
    case ModelFamily::GlucagonSub:
      state_jac_glucagon_sub(x, params, spec.H_b, Jx);
      param_jac_glucagon_sub(x, params, spec.H_b, Jth);
      return;
  }
  throw std::logic_error("unreachable model family");
}

bool finite_and_bounded(const Vec& x, const Mat& X) {
  for (int i = 0; i < x.size(); ++i)
    if (!std::isfinite(x[i]) || std::abs(x[i]) > kDivergenceBound) return false;
  for (int i = 0; i < X.rows(); ++i)
    for (int j = 0; j < X.cols(); ++j)
      if (!std::isfinite(X(i, j)) || std::abs(X(i, j)) > kDivergenceBound)
        return false;
  return true;
}

}  // namespace

void sensitivity_rhs(const ModelSpec& spec, const Vec& params, const Vec& x,
                     const Mat& X, double ra_g, Vec& dx, Mat& dX) {
  check_rhs_inputs(spec, x, params);
  if (X.rows() != spec.state_dim() || X.cols() != spec.param_count())
    throw std::invalid_argument(
        "sensitivity matrix shape does not match the model family");
  Mat Jx, Jth;
  jacobians_unchecked(spec, params, x, ra_g, Jx, Jth);
  detail::rhs_unchecked(spec, params, x, ra_g, 0.0, 0.0, 0.0, dx);
  dX = Jx * X + Jth;
}

SensitivityMatrix assemble_sensitivity_matrix(const ModelSpec& spec,
                                              const Vec& params, const Vec& x0,
                                              const InputSchedule& schedule,
                                              const SensitivityOptions& options) {
  if (!(options.delta > 0.0))
    throw std::invalid_argument("sensitivity grid spacing must be positive");
  if (!(options.step > 0.0))
    throw std::invalid_argument("integration step must be positive");
  check_rhs_inputs(spec, x0, params);
  schedule.validate_for(spec);

  const int dim = spec.state_dim();
  const int m = spec.param_count();

  const int n_rows = static_cast<int>(std::floor(
                         (schedule.tf - schedule.t0) / options.delta + 1e-9)) +
                     1;
  std::vector<double> grid(n_rows);
  for (int k = 0; k < n_rows; ++k)
    grid[k] = std::min(schedule.t0 + k * options.delta, schedule.tf);

  const std::vector<double> breaks = event_breakpoints(schedule, grid);

  SensitivityMatrix out;
  out.model = spec;
  out.params = params;
  out.times = grid;
  out.rows.setZero(n_rows, m);

  Vec x = x0;
  Mat X = Mat::Zero(dim, m);
  Vec k1x(dim), k2x(dim), k3x(dim), k4x(dim), xt(dim);
  Mat k1X(dim, m), k2X(dim, m), k3X(dim, m), k4X(dim, m), Xt(dim, m);
  Mat Jx(dim, dim), Jth(dim, m);

  auto stage = [&](const Vec& xs, const Mat& Xs, double ra_g, Vec& kx,
                   Mat& kX) {
    detail::rhs_unchecked(spec, params, xs, ra_g, 0.0, 0.0, 0.0, kx);
    jacobians_unchecked(spec, params, xs, ra_g, Jx, Jth);
    kX.noalias() = Jx * Xs;
    kX += Jth;
  };
  auto apply_impulses = [&](double t) {
    for (const auto& b : schedule.boluses)
      if (b.time == t) x[bolus_state_index(spec.family, b.hormone)] += b.dose;
  };

  int gi = 0;
  auto maybe_record = [&](double t) {
    if (gi < n_rows && grid[gi] == t) {
      out.rows.row(gi) = X.row(0);
      ++gi;
    }
  };

  apply_impulses(breaks.front());
  maybe_record(breaks.front());

  const double t_end = grid.back();
  for (std::size_t s = 0; s + 1 < breaks.size() && breaks[s] < t_end; ++s) {
    const double a = breaks[s];
    const double b = breaks[s + 1];
    const int n =
        std::max(1, static_cast<int>(std::ceil((b - a) / options.step - 1e-9)));
    const double h = (b - a) / n;
    const double ra_g = schedule.rate_at(0.5 * (a + b));

    for (int i = 0; i < n; ++i) {
      stage(x, X, ra_g, k1x, k1X);
      xt = x + 0.5 * h * k1x;
      Xt = X + 0.5 * h * k1X;
      stage(xt, Xt, ra_g, k2x, k2X);
      xt = x + 0.5 * h * k2x;
      Xt = X + 0.5 * h * k2X;
      stage(xt, Xt, ra_g, k3x, k3X);
      xt = x + h * k3x;
      Xt = X + h * k3X;
      stage(xt, Xt, ra_g, k4x, k4X);
      x += (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
      X += (h / 6.0) * (k1X + 2.0 * k2X + 2.0 * k3X + k4X);
      const double t_next = (i + 1 == n) ? b : a + (i + 1) * h;
      if (!finite_and_bounded(x, X))
        throw DivergenceError("sensitivity system diverged", t_next);
      if (i + 1 == n) {
        apply_impulses(b);
        maybe_record(b);
      }
    }
  }
  return out;
}

Mat finite_difference_sensitivity(const ModelSpec& spec, const Vec& params,
                                  const Vec& x0, const InputSchedule& schedule,
                                  const std::vector<double>& times,
                                  double rel_step,
                                  const IntegrateOptions& integrate_options) {
  if (!(rel_step > 0.0) || !(rel_step < 1.0))
    throw std::invalid_argument("relative step must lie in (0, 1)");
  check_rhs_inputs(spec, x0, params);

  const int m = spec.param_count();
  Mat fd(static_cast<Eigen::Index>(times.size()), m);
  // Sample instants become exact grid points of the perturbed runs, so the
  // difference quotient carries no interpolation error near bolus kinks.
  IntegrateOptions opts = integrate_options;
  opts.extra_breakpoints.insert(opts.extra_breakpoints.end(), times.begin(),
                                times.end());
  Vec th = params;
  for (int j = 0; j < m; ++j) {
    const double h = params[j] == 0.0 ? rel_step : rel_step * params[j];
    th[j] = params[j] + h;
    Trajectory hi = integrate(spec, th, x0, schedule, opts);
    th[j] = params[j] - h;
    Trajectory lo = integrate(spec, th, x0, schedule, opts);
    th[j] = params[j];
    for (std::size_t i = 0; i < times.size(); ++i)
      fd(static_cast<Eigen::Index>(i), j) =
          (output_at(hi, times[i]) - output_at(lo, times[i])) / (2.0 * h);
  }
  return fd;
}

}  // namespace glucokin
