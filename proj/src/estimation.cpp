#include <glucokin/estimation.hpp>

#include <glucokin/rng.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace glucokin {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Synthetic glucose never drops to or below zero; heavy noise draws are
// clamped here so generated datasets always pass validation.
constexpr double kGlucoseFloor = 1e-3;

void check_series(const std::vector<double>& times,
                  const std::vector<double>& values, const char* label,
                  const InputSchedule& schedule) {
  if (times.size() != values.size())
    throw std::invalid_argument(std::string(label) +
                                " times/values length mismatch");
  for (size_t i = 0; i < times.size(); ++i) {
    if (!std::isfinite(times[i]) || !std::isfinite(values[i]))
      throw std::invalid_argument(std::string(label) +
                                  " series contains a non-finite entry");
    if (i > 0 && times[i] <= times[i - 1])
      throw std::invalid_argument(std::string(label) +
                                  " series times are not strictly increasing");
    if (times[i] < schedule.t0 || times[i] > schedule.tf)
      throw std::invalid_argument(std::string(label) +
                                  " sample lies outside the schedule horizon");
  }
}

int state_index_or_throw(const ModelSpec& spec, const std::string& name,
                         const char* what) {
  const auto& names = spec.state_names();
  for (size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<int>(i);
  throw std::invalid_argument(std::string(what) + " requires a model with a '" +
                              name + "' state (" + family_name(spec.family) +
                              " has none)");
}

// Shared residual machinery for the three cost variants. hormone_state < 0
// means glucose-only.
double cost_impl(const ModelSpec& spec, const Vec& theta, const Dataset& data,
                 const IntegrateOptions& options, int hormone_state,
                 const std::vector<double>* hormone_times,
                 const std::vector<double>* hormone_values) {
  if (data.glucose_times.empty())
    throw std::invalid_argument("cost: dataset has no glucose samples");
  if (data.glucose_times.size() != data.glucose_values.size())
    throw std::invalid_argument("cost: glucose times/values length mismatch");
  if (theta.size() != spec.param_count())
    throw std::invalid_argument("cost: parameter vector has wrong dimension");
  for (Eigen::Index j = 0; j < theta.size(); ++j)
    if (!(theta[j] >= 0.0)) return kInf;  // negative or NaN

  IntegrateOptions opt = options;
  opt.extra_breakpoints.insert(opt.extra_breakpoints.end(),
                               data.glucose_times.begin(),
                               data.glucose_times.end());
  if (hormone_times != nullptr)
    opt.extra_breakpoints.insert(opt.extra_breakpoints.end(),
                                 hormone_times->begin(), hormone_times->end());

  Trajectory traj;
  try {
    traj = integrate(spec, theta, initial_state(spec, data), data.schedule,
                     opt);
  } catch (const DivergenceError&) {
    return kInf;
  }

  double sse = 0.0;
  for (size_t k = 0; k < data.glucose_times.size(); ++k) {
    const double r =
        data.glucose_values[k] - output_at(traj, data.glucose_times[k]);
    sse += r * r;
  }
  if (hormone_state >= 0) {
    for (size_t k = 0; k < hormone_times->size(); ++k) {
      const double r = (*hormone_values)[k] -
                       state_at(traj, (*hormone_times)[k])[hormone_state];
      sse += r * r;
    }
  }
  return std::isfinite(sse) ? sse : kInf;
}

// Wraps a raw cost with the nonnegative-orthant barrier and an evaluation
// counter; NaN costs are treated as infinite so ordering stays total.
struct GuardedCost {
  const CostFunction& raw;
  bool nonnegative;
  int evaluations = 0;

  double operator()(const Vec& th) {
    if (nonnegative && (th.array() < 0.0).any()) return kInf;
    ++evaluations;
    const double f = raw(th);
    return std::isnan(f) ? kInf : f;
  }
};

}  // namespace

void Dataset::validate() const {
  schedule.validate();
  if (glucose_times.empty())
    throw std::invalid_argument("dataset: glucose series is empty");
  check_series(glucose_times, glucose_values, "glucose", schedule);
  for (double v : glucose_values)
    if (v <= 0.0)
      throw std::invalid_argument("dataset: glucose values must be positive");
  check_series(insulin_times, insulin_values, "insulin", schedule);
  check_series(glucagon_times, glucagon_values, "glucagon", schedule);
  if (insulin_times.empty() != insulin_values.empty() ||
      glucagon_times.empty() != glucagon_values.empty())
    throw std::invalid_argument("dataset: partial hormone series");
  for (Eigen::Index i = 0; i < x0.size(); ++i)
    if (!std::isfinite(x0[i]))
      throw std::invalid_argument("dataset: x0 contains a non-finite entry");
}

Vec initial_state(const ModelSpec& spec, const Dataset& data) {
  if (data.x0.size() == spec.state_dim()) return data.x0;
  if (data.x0.size() != 0)
    throw std::invalid_argument(
        "initial_state: explicit x0 dimension does not match " +
        family_name(spec.family));
  if (data.glucose_values.empty())
    throw std::invalid_argument(
        "initial_state: need at least one glucose sample to seed G(0)");
  const auto& names = spec.state_names();
  Vec x0 = Vec::Zero(spec.state_dim());
  for (size_t i = 0; i < names.size(); ++i) {
    if (names[i] == "G")
      x0[static_cast<Eigen::Index>(i)] = data.glucose_values.front();
    else if (names[i].rfind("xi", 0) == 0)
      x0[static_cast<Eigen::Index>(i)] = 1.0;
  }
  return x0;
}

std::string optimizer_name(Optimizer opt) {
  return opt == Optimizer::NelderMead ? "nelder_mead" : "quasi_newton";
}

Optimizer optimizer_from_name(const std::string& name) {
  if (name == "nelder_mead" || name == "nelder-mead" || name == "nm")
    return Optimizer::NelderMead;
  if (name == "quasi_newton" || name == "quasi-newton" || name == "qn" ||
      name == "bfgs")
    return Optimizer::QuasiNewton;
  throw std::invalid_argument("unknown optimizer '" + name +
                              "' (expected nelder_mead or quasi_newton)");
}

double cost_glucose(const ModelSpec& spec, const Vec& theta,
                    const Dataset& data, const IntegrateOptions& options) {
  return cost_impl(spec, theta, data, options, -1, nullptr, nullptr);
}

double cost_insulin_joint(const ModelSpec& spec, const Vec& theta,
                          const Dataset& data,
                          const IntegrateOptions& options) {
  const int idx = state_index_or_throw(spec, "I", "cost_insulin_joint");
  if (!data.has_insulin())
    throw std::invalid_argument(
        "cost_insulin_joint: dataset has no insulin series");
  return cost_impl(spec, theta, data, options, idx, &data.insulin_times,
                   &data.insulin_values);
}

double cost_glucagon_joint(const ModelSpec& spec, const Vec& theta,
                           const Dataset& data,
                           const IntegrateOptions& options) {
  const int idx = state_index_or_throw(spec, "H", "cost_glucagon_joint");
  if (!data.has_glucagon())
    throw std::invalid_argument(
        "cost_glucagon_joint: dataset has no glucagon series");
  return cost_impl(spec, theta, data, options, idx, &data.glucagon_times,
                   &data.glucagon_values);
}

FitResult nelder_mead(const CostFunction& cost, const Vec& theta0,
                      const FitOptions& options) {
  const Eigen::Index dim = theta0.size();
  if (dim == 0)
    throw std::invalid_argument("nelder_mead: empty parameter vector");
  if (!theta0.allFinite())
    throw std::invalid_argument("nelder_mead: non-finite start");
  GuardedCost f{cost, options.nonnegative};

  // Vertices and their costs, kept sorted best-first each iteration.
  std::vector<Vec> x(static_cast<size_t>(dim) + 1, theta0);
  std::vector<double> fx(static_cast<size_t>(dim) + 1);
  for (Eigen::Index j = 0; j < dim; ++j) {
    double step = theta0[j] != 0.0 ? options.simplex_scale * theta0[j]
                                   : options.simplex_zero_step;
    x[static_cast<size_t>(j) + 1][j] += step;
  }
  for (size_t i = 0; i < x.size(); ++i) fx[i] = f(x[i]);

  std::vector<size_t> order(x.size());
  auto sort_vertices = [&]() {
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return fx[a] < fx[b]; });
  };

  FitResult result;
  result.optimizer = Optimizer::NelderMead;
  Vec centroid(dim), xr(dim), xe(dim), xc(dim);
  int iter = 0;
  double f_spread = kInf;
  for (; iter < options.max_iter; ++iter) {
    sort_vertices();
    const size_t best = order.front();
    const size_t worst = order.back();
    const size_t second_worst = order[order.size() - 2];

    f_spread = fx[worst] - fx[best];
    double x_spread = 0.0;
    for (size_t i = 0; i < x.size(); ++i)
      x_spread = std::max(x_spread, (x[i] - x[best]).cwiseAbs().maxCoeff());
    if (f_spread < options.tol_f || x_spread < options.tol_x) {
      result.converged = true;
      break;
    }

    centroid.setZero();
    for (size_t i = 0; i < x.size(); ++i)
      if (i != worst) centroid += x[i];
    centroid /= static_cast<double>(dim);

    xr = centroid + (centroid - x[worst]);
    const double fr = f(xr);
    if (fr < fx[best]) {
      xe = centroid + 2.0 * (centroid - x[worst]);
      const double fe = f(xe);
      if (fe < fr) {
        x[worst] = xe;
        fx[worst] = fe;
      } else {
        x[worst] = xr;
        fx[worst] = fr;
      }
    } else if (fr < fx[second_worst]) {
      x[worst] = xr;
      fx[worst] = fr;
    } else {
      const bool outside = fr < fx[worst];
      if (outside)
        xc = centroid + 0.5 * (centroid - x[worst]);
      else
        xc = centroid - 0.5 * (centroid - x[worst]);
      const double fc = f(xc);
      if (fc < (outside ? fr : fx[worst])) {
        x[worst] = xc;
        fx[worst] = fc;
      } else {
        // Shrink toward the best vertex.
        for (size_t i = 0; i < x.size(); ++i) {
          if (i == best) continue;
          x[i] = x[best] + 0.5 * (x[i] - x[best]);
          fx[i] = f(x[i]);
        }
      }
    }
  }

  sort_vertices();
  result.theta_hat = x[order.front()];
  result.cost = fx[order.front()];
  result.iterations = iter;
  result.evaluations = f.evaluations;
  result.final_spread = f_spread;
  return result;
}

namespace {

// Central differences, relative step; falls back to a one-sided quotient when
// the backward point would leave the feasible orthant. Returns false if the
// gradient cannot be formed (some stencil point has infinite cost).
bool numeric_gradient(GuardedCost& f, const Vec& th, double f_center,
                      const FitOptions& options, Vec& grad) {
  const Eigen::Index dim = th.size();
  Vec probe = th;
  for (Eigen::Index j = 0; j < dim; ++j) {
    const double h = th[j] != 0.0 ? options.grad_rel_step * std::abs(th[j])
                                  : options.grad_rel_step;
    probe[j] = th[j] + h;
    const double fp = f(probe);
    if (options.nonnegative && th[j] - h < 0.0) {
      if (!std::isfinite(fp) || !std::isfinite(f_center)) return false;
      grad[j] = (fp - f_center) / h;
    } else {
      probe[j] = th[j] - h;
      const double fm = f(probe);
      if (!std::isfinite(fp) || !std::isfinite(fm)) return false;
      grad[j] = (fp - fm) / (2.0 * h);
    }
    probe[j] = th[j];
  }
  return true;
}

}  // namespace

FitResult quasi_newton(const CostFunction& cost, const Vec& theta0,
                       const FitOptions& options) {
  const Eigen::Index dim = theta0.size();
  if (dim == 0)
    throw std::invalid_argument("quasi_newton: empty parameter vector");
  if (!theta0.allFinite())
    throw std::invalid_argument("quasi_newton: non-finite start");
  GuardedCost f{cost, options.nonnegative};

  auto project = [&](Vec v) -> Vec {
    return options.nonnegative ? Vec(v.cwiseMax(0.0)) : v;
  };

  FitResult result;
  result.optimizer = Optimizer::QuasiNewton;

  Vec th = project(theta0);
  double fval = f(th);
  result.theta_hat = th;
  result.cost = fval;
  if (!std::isfinite(fval)) return result;  // cannot even start

  Mat H = Mat::Identity(dim, dim);
  Vec grad(dim), grad_new(dim), dir(dim), trial(dim), step(dim);
  if (!numeric_gradient(f, th, fval, options, grad)) return result;

  const double max_step = options.max_step_scale > 0.0
                              ? options.max_step_scale * (1.0 + th.norm())
                              : kInf;

  int iter = 0;
  for (; iter < options.max_iter; ++iter) {
    result.final_spread = grad.cwiseAbs().maxCoeff();
    if (result.final_spread <= options.tol_g) {
      result.converged = true;
      break;
    }

    dir = -(H * grad);
    double slope = grad.dot(dir);
    if (slope >= 0.0) {  // stale curvature: restart from steepest descent
      H.setIdentity();
      dir = -grad;
      slope = grad.dot(dir);
      if (slope >= 0.0) {
        result.converged = true;  // gradient is numerically zero
        break;
      }
    }
    // The line search tries t up to 10, so cap the direction at a tenth of
    // the step budget.
    const double dir_norm = dir.norm();
    if (dir_norm * 10.0 > max_step) {
      dir *= max_step / (10.0 * dir_norm);
      slope = grad.dot(dir);
    }

    // Line search: try the unit step, refine it with the parabola through
    // (0, f), (0, slope), (1, f(1)) -- exact on quadratics -- then fall back
    // to halving. Armijo uses the actual (projected) displacement.
    double best_t = -1.0, best_f = kInf;
    auto consider = [&](double t) {
      trial = project(th + t * dir);
      const double ft = f(trial);
      const double armijo =
          fval + options.armijo_c * grad.dot(trial - th);
      if (ft <= armijo && ft < best_f) {
        best_f = ft;
        best_t = t;
      }
      return ft;
    };
    const double f1 = consider(1.0);
    const double denom = f1 - fval - slope;
    if (std::isfinite(f1) && denom > 0.0) {
      const double t_star = -slope / (2.0 * denom);
      if (t_star > 0.0 && std::isfinite(t_star))
        consider(std::min(t_star, 10.0));
    }
    if (best_t < 0.0) {
      double t = 0.5;
      for (int k = 0; k < 40 && best_t < 0.0; ++k, t *= 0.5) consider(t);
    }
    if (best_t < 0.0) break;  // line search failed: converged stays false

    trial = project(th + best_t * dir);
    step = trial - th;
    const double f_new = best_f;
    if (!numeric_gradient(f, trial, f_new, options, grad_new)) {
      th = trial;
      fval = f_new;
      break;
    }

    const Vec y = grad_new - grad;
    const double sy = step.dot(y);
    if (sy > 1e-12 * step.norm() * y.norm()) {
      const Vec Hy = H * y;
      H += ((sy + y.dot(Hy)) / (sy * sy)) * (step * step.transpose()) -
           (Hy * step.transpose() + step * Hy.transpose()) / sy;
    }

    const double decrease = fval - f_new;
    th = trial;
    fval = f_new;
    grad = grad_new;
    if (decrease >= 0.0 && decrease <= options.tol_f * (1.0 + std::abs(fval))) {
      result.converged = true;
      ++iter;
      break;
    }
  }

  result.theta_hat = th;
  result.cost = fval;
  result.iterations = iter;
  result.evaluations = f.evaluations;
  return result;
}

double bic_score(double mse, int n, int param_count) {
  if (n <= 0) throw std::invalid_argument("bic_score: n must be positive");
  if (param_count < 0)
    throw std::invalid_argument("bic_score: negative parameter count");
  if (mse < 0.0) throw std::invalid_argument("bic_score: negative mse");
  if (mse == 0.0) return -kInf;
  return static_cast<double>(n) * std::log(mse) +
         static_cast<double>(param_count) * std::log(static_cast<double>(n));
}

FitResult fit_glucose(const ModelSpec& spec, const Dataset& data,
                      const Vec& theta0, Optimizer optimizer,
                      const FitOptions& options) {
  CostFunction c = [&](const Vec& th) {
    return cost_glucose(spec, th, data, options.integrate);
  };
  FitResult r = optimizer == Optimizer::NelderMead
                    ? nelder_mead(c, theta0, options)
                    : quasi_newton(c, theta0, options);
  r.optimizer = optimizer;
  r.n = static_cast<int>(data.glucose_values.size());
  r.mse = r.cost / static_cast<double>(r.n);
  r.bic = bic_score(r.mse, r.n, spec.param_count());
  return r;
}

SplitReport fit_predict_split(const ModelSpec& spec, const Dataset& data,
                              double split_time, const Vec& theta0,
                              Optimizer optimizer, const FitOptions& options) {
  if (data.glucose_times.size() != data.glucose_values.size())
    throw std::invalid_argument("split: glucose times/values length mismatch");
  Dataset first;
  first.schedule = data.schedule;  // inputs are known over the full horizon
  first.x0 = data.x0;
  int n_first = 0, n_second = 0;
  for (size_t k = 0; k < data.glucose_times.size(); ++k) {
    if (data.glucose_times[k] <= split_time) {
      first.glucose_times.push_back(data.glucose_times[k]);
      first.glucose_values.push_back(data.glucose_values[k]);
      ++n_first;
    } else {
      ++n_second;
    }
  }
  if (n_first < 5 || n_second < 5)
    throw std::invalid_argument(
        "split: need at least five glucose samples on each side");

  SplitReport report;
  report.split_time = split_time;
  report.n_first = n_first;
  report.n_second = n_second;
  report.fit = fit_glucose(spec, first, theta0, optimizer, options);

  IntegrateOptions opt = options.integrate;
  opt.extra_breakpoints.insert(opt.extra_breakpoints.end(),
                               data.glucose_times.begin(),
                               data.glucose_times.end());
  double sse_first = 0.0, sse_second = 0.0;
  try {
    Trajectory traj = integrate(spec, report.fit.theta_hat,
                                initial_state(spec, first), data.schedule, opt);
    for (size_t k = 0; k < data.glucose_times.size(); ++k) {
      const double r =
          data.glucose_values[k] - output_at(traj, data.glucose_times[k]);
      if (data.glucose_times[k] <= split_time)
        sse_first += r * r;
      else
        sse_second += r * r;
    }
  } catch (const DivergenceError&) {
    sse_first = sse_second = kInf;
  }

  report.mse_first = sse_first / n_first;
  report.mse_second = sse_second / n_second;
  report.mse_total = (sse_first + sse_second) / (n_first + n_second);
  const int p = spec.param_count();
  report.bic_first = bic_score(report.mse_first, n_first, p);
  report.bic_second = bic_score(report.mse_second, n_second, p);
  report.bic_total = bic_score(report.mse_total, n_first + n_second, p);
  return report;
}

Dataset generate_synthetic(const ModelSpec& spec, const Vec& theta,
                           const Vec& x0, const InputSchedule& schedule,
                           const std::vector<double>& sample_times,
                           double sigma, std::uint64_t seed,
                           const IntegrateOptions& options) {
  if (sample_times.empty())
    throw std::invalid_argument("generate_synthetic: no sample times");
  if (!std::is_sorted(sample_times.begin(), sample_times.end()))
    throw std::invalid_argument(
        "generate_synthetic: sample times must be sorted ascending");
  if (!(sigma >= 0.0))
    throw std::invalid_argument("generate_synthetic: sigma must be >= 0");

  IntegrateOptions opt = options;
  opt.extra_breakpoints.insert(opt.extra_breakpoints.end(),
                               sample_times.begin(), sample_times.end());
  Trajectory traj = integrate(spec, theta, x0, schedule, opt);

  Dataset out;
  out.schedule = schedule;
  out.x0 = x0;
  out.glucose_times = sample_times;
  out.glucose_values.reserve(sample_times.size());
  NormalSampler noise(seed);
  for (double t : sample_times) {
    double v = output_at(traj, t) + sigma * noise.next();
    out.glucose_values.push_back(std::max(v, kGlucoseFloor));
  }
  return out;
}

}  // namespace glucokin
