#include <glucokin/integrate.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>

namespace glucokin {

namespace detail {

void rhs_unchecked(const ModelSpec& spec, const Vec& params, const Vec& x,
                   double ra_g, double u_i, double u_h, double u_h_sc,
                   Vec& dx) {
  switch (spec.family) {
    case ModelFamily::Complete:
      rhs_complete(x, params, spec.I_b, spec.H_b, ra_g, dx);
      break;
    case ModelFamily::RescaledComplete:
      rhs_rescaled_complete(x, params, spec.I_b, spec.H_b, ra_g, dx);
      break;
    case ModelFamily::Reduced:
      rhs_reduced(x, params, spec.H_b, ra_g, dx);
      break;
    case ModelFamily::InsulinSub:
      rhs_insulin_sub(x, params, spec.I_b, ra_g, dx);
      break;
    case ModelFamily::GlucagonSub:
      rhs_glucagon_sub(x, params, spec.H_b, dx);
      break;
  }
  // The dosing inputs enter as pure additive sources on the depot
  // compartments; they are only nonzero in rectangular-pulse mode.
  if (u_i != 0.0)
    dx[bolus_state_index(spec.family, Hormone::InsulinIP)] += u_i;
  if (u_h != 0.0)
    dx[bolus_state_index(spec.family, Hormone::GlucagonIP)] += u_h;
  if (u_h_sc != 0.0)
    dx[bolus_state_index(spec.family, Hormone::GlucagonSC)] += u_h_sc;
}

}  // namespace detail

namespace {

constexpr double kDivergenceBound = 1e12;

bool finite_and_bounded(const Vec& x) {
  for (int i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || std::abs(x[i]) > kDivergenceBound) return false;
  }
  return true;
}

struct PulseRates {
  double u_i = 0.0;
  double u_h = 0.0;
  double u_h_sc = 0.0;
};

// Bolus forcing at time t in rectangular-pulse mode.
PulseRates pulse_rates_at(const InputSchedule& schedule, double t,
                          double width) {
  PulseRates r;
  for (const auto& b : schedule.boluses) {
    if (t < b.time || t >= b.time + width) continue;
    const double rate = b.dose / width;
    switch (b.hormone) {
      case Hormone::InsulinIP:
        r.u_i += rate;
        break;
      case Hormone::GlucagonIP:
        r.u_h += rate;
        break;
      case Hormone::GlucagonSC:
        r.u_h_sc += rate;
        break;
    }
  }
  return r;
}

}  // namespace

std::vector<double> event_breakpoints(const InputSchedule& schedule,
                                      const std::vector<double>& extra) {
  std::vector<double> pts;
  pts.push_back(schedule.t0);
  pts.push_back(schedule.tf);
  for (const auto& seg : schedule.glucose_infusion) pts.push_back(seg.start);
  for (const auto& b : schedule.boluses) pts.push_back(b.time);
  for (double t : extra) pts.push_back(t);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::remove_if(pts.begin(), pts.end(),
                           [&](double t) {
                             return t < schedule.t0 || t > schedule.tf;
                           }),
            pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

Trajectory integrate(const ModelSpec& spec, const Vec& params, const Vec& x0,
                     const InputSchedule& schedule,
                     const IntegrateOptions& options) {
  if (!(options.step > 0.0))
    throw std::invalid_argument("integration step must be positive");
  if (options.pulse_boluses && !(options.pulse_width > 0.0))
    throw std::invalid_argument("pulse width must be positive");
  check_rhs_inputs(spec, x0, params);
  schedule.validate_for(spec);

  std::vector<double> extra = options.extra_breakpoints;
  if (options.pulse_boluses) {
    for (const auto& b : schedule.boluses)
      extra.push_back(std::min(b.time + options.pulse_width, schedule.tf));
  }
  const std::vector<double> breaks = event_breakpoints(schedule, extra);

  // Substep counts per segment, then one pass of preallocated storage.
  std::vector<int> substeps(breaks.size() - 1);
  std::size_t rows = 1;
  for (std::size_t s = 0; s + 1 < breaks.size(); ++s) {
    const double len = breaks[s + 1] - breaks[s];
    substeps[s] =
        std::max(1, static_cast<int>(std::ceil(len / options.step - 1e-9)));
    rows += static_cast<std::size_t>(substeps[s]);
  }

  Trajectory traj;
  traj.model = spec;
  traj.times.reserve(rows);
  traj.states.resize(static_cast<Eigen::Index>(rows), spec.state_dim());

  const int dim = spec.state_dim();
  Vec x = x0;
  Vec k1(dim), k2(dim), k3(dim), k4(dim), xt(dim);
  std::size_t row = 0;

  auto store = [&](double t) {
    traj.times.push_back(t);
    traj.states.row(static_cast<Eigen::Index>(row)) = x.transpose();
    ++row;
  };
  auto apply_impulses = [&](double t) {
    if (options.pulse_boluses) return;
    for (const auto& b : schedule.boluses) {
      if (b.time == t) x[bolus_state_index(spec.family, b.hormone)] += b.dose;
    }
  };

  apply_impulses(breaks.front());
  store(breaks.front());

  for (std::size_t s = 0; s + 1 < breaks.size(); ++s) {
    const double a = breaks[s];
    const double b = breaks[s + 1];
    const int n = substeps[s];
    const double h = (b - a) / n;
    const double mid = 0.5 * (a + b);
    const double ra_g = schedule.rate_at(mid);
    PulseRates u;
    if (options.pulse_boluses)
      u = pulse_rates_at(schedule, mid, options.pulse_width);

    for (int i = 0; i < n; ++i) {
      const double t = a + i * h;
      detail::rhs_unchecked(spec, params, x, ra_g, u.u_i, u.u_h, u.u_h_sc, k1);
      xt = x + 0.5 * h * k1;
      detail::rhs_unchecked(spec, params, xt, ra_g, u.u_i, u.u_h, u.u_h_sc, k2);
      xt = x + 0.5 * h * k2;
      detail::rhs_unchecked(spec, params, xt, ra_g, u.u_i, u.u_h, u.u_h_sc, k3);
      xt = x + h * k3;
      detail::rhs_unchecked(spec, params, xt, ra_g, u.u_i, u.u_h, u.u_h_sc, k4);
      x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      const double t_next = (i + 1 == n) ? b : t + h;
      if (!finite_and_bounded(x))
        throw DivergenceError("state diverged during integration", t_next);
      if (i + 1 == n) {
        apply_impulses(b);
        store(b);
      } else {
        store(t_next);
      }
    }
  }
  return traj;
}

namespace {

// Index of the last stored time <= t, validating the range.
std::size_t locate(const Trajectory& traj, double t) {
  if (traj.times.empty()) throw std::out_of_range("empty trajectory");
  if (t < traj.times.front() || t > traj.times.back())
    throw std::out_of_range("time outside the stored trajectory range");
  const auto it =
      std::upper_bound(traj.times.begin(), traj.times.end(), t);
  return static_cast<std::size_t>(it - traj.times.begin()) - 1;
}

}  // namespace

double output_at(const Trajectory& traj, double t) {
  const std::size_t i = locate(traj, t);
  if (traj.times[i] == t || i + 1 == traj.times.size())
    return traj.states(static_cast<Eigen::Index>(i), 0);
  const double w =
      (t - traj.times[i]) / (traj.times[i + 1] - traj.times[i]);
  return (1.0 - w) * traj.states(static_cast<Eigen::Index>(i), 0) +
         w * traj.states(static_cast<Eigen::Index>(i + 1), 0);
}

Vec state_at(const Trajectory& traj, double t) {
  const std::size_t i = locate(traj, t);
  if (traj.times[i] == t || i + 1 == traj.times.size())
    return traj.states.row(static_cast<Eigen::Index>(i)).transpose();
  const double w =
      (t - traj.times[i]) / (traj.times[i + 1] - traj.times[i]);
  return (1.0 - w) *
             traj.states.row(static_cast<Eigen::Index>(i)).transpose() +
         w * traj.states.row(static_cast<Eigen::Index>(i + 1)).transpose();
}

}  // namespace glucokin
