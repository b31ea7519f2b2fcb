#pragma once

// Least-squares calibration of the kinetic models against measured time
// series: sum-of-squares cost functions, two derivative-free/quasi-Newton
// minimizers restricted to the nonnegative orthant, BIC-style model scoring,
// a fit/predict split for forecasting checks, and synthetic data generation
// with reproducible Gaussian noise.

#include <glucokin/integrate.hpp>
#include <glucokin/model.hpp>
#include <glucokin/schedule.hpp>

#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace glucokin {

// A measured experiment: a glucose series (required for fitting), optional
// insulin and glucagon series, the input schedule that produced it, and an
// optional explicit initial state. Times are in days, sorted ascending.
struct Dataset {
  std::vector<double> glucose_times;
  std::vector<double> glucose_values;
  std::vector<double> insulin_times;
  std::vector<double> insulin_values;
  std::vector<double> glucagon_times;
  std::vector<double> glucagon_values;
  InputSchedule schedule;
  // Empty means "derive a default for the model being fitted".
  Vec x0 = Vec();

  bool has_insulin() const { return !insulin_times.empty(); }
  bool has_glucagon() const { return !glucagon_times.empty(); }

  // Throws std::invalid_argument on unsorted series, mismatched lengths,
  // samples outside the schedule horizon, or an invalid schedule.
  void validate() const;
};

// Initial state used when fitting `spec` to `data`: the explicit x0 if its
// dimension matches, otherwise glucose from the first sample, hormone
// compartments at zero, and effectiveness states at one.
Vec initial_state(const ModelSpec& spec, const Dataset& data);

enum class Optimizer { NelderMead, QuasiNewton };

std::string optimizer_name(Optimizer opt);
Optimizer optimizer_from_name(const std::string& name);

struct FitOptions {
  int max_iter = 5000;
  // Simplex termination: spread of vertex costs below tol_f or spread of
  // vertex coordinates below tol_x. Quasi-Newton termination: gradient
  // infinity-norm below tol_g or cost decrease below tol_f.
  double tol_f = 1e-10;
  double tol_x = 1e-10;
  double tol_g = 1e-8;
  // Initial simplex: each coordinate displaced by 10% (absolute 0.1 when the
  // coordinate is zero).
  double simplex_scale = 0.1;
  double simplex_zero_step = 0.1;
  // Central-difference step for quasi-Newton gradients, relative to each
  // coordinate (absolute at zero).
  double grad_rel_step = 1e-6;
  double armijo_c = 1e-4;
  // Quasi-Newton step-norm cap: no iteration moves farther than
  // max_step_scale * (1 + |theta0|). Keeps the line search from taking
  // astronomically long steps along near-flat valleys, where the BFGS
  // curvature estimate (and hence the Newton step) is unbounded. Set to 0
  // to disable.
  double max_step_scale = 10.0;
  // Restrict the search to the nonnegative orthant: infinite-cost barrier for
  // the simplex, projection for quasi-Newton. Disable for unconstrained test
  // functions.
  bool nonnegative = true;
  // Forwarded to the integrator by the model-fitting wrappers.
  IntegrateOptions integrate;
};

struct FitResult {
  Vec theta_hat;
  double cost = std::numeric_limits<double>::quiet_NaN();
  double mse = std::numeric_limits<double>::quiet_NaN();
  double bic = std::numeric_limits<double>::quiet_NaN();
  int n = 0;              // number of glucose samples (0 for raw minimization)
  int iterations = 0;     // outer iterations taken
  int evaluations = 0;    // cost evaluations consumed
  double final_spread = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;
  Optimizer optimizer = Optimizer::NelderMead;
};

using CostFunction = std::function<double(const Vec&)>;

// Sum of squared glucose residuals sum_k (y_k - G(t_k; theta))^2. Returns
// +infinity when theta leaves the nonnegative orthant or the trajectory
// diverges, so minimizers can treat failures as ordinary bad points.
// Throws std::invalid_argument if the dataset has no glucose samples.
double cost_glucose(const ModelSpec& spec, const Vec& theta,
                    const Dataset& data,
                    const IntegrateOptions& options = IntegrateOptions());

// Glucose cost plus the summed squared insulin residuals against the plasma
// insulin state. Requires a model with an "I" state and a nonempty insulin
// series.
double cost_insulin_joint(const ModelSpec& spec, const Vec& theta,
                          const Dataset& data,
                          const IntegrateOptions& options = IntegrateOptions());

// Glucose cost plus the summed squared glucagon residuals against the plasma
// glucagon state. Requires a model with an "H" state and a nonempty glucagon
// series.
double cost_glucagon_joint(
    const ModelSpec& spec, const Vec& theta, const Dataset& data,
    const IntegrateOptions& options = IntegrateOptions());

// Downhill-simplex minimization (reflection 1, expansion 2, contraction 0.5,
// shrink 0.5) from theta0. With options.nonnegative the cost is +infinity
// outside the nonnegative orthant. Stops on the spread tolerances or
// max_iter (converged=false, best vertex returned).
FitResult nelder_mead(const CostFunction& cost, const Vec& theta0,
                      const FitOptions& options);

// BFGS quasi-Newton minimization with central-difference gradients, a
// parabolic-interpolation line search with Armijo backtracking, and (with
// options.nonnegative) projection onto the nonnegative orthant. Exact on
// quadratics in at most dim+2 iterations. A failed line search returns the
// best point with converged=false.
FitResult quasi_newton(const CostFunction& cost, const Vec& theta0,
                       const FitOptions& options);

// Minimize the glucose cost for `spec` over theta from theta0 and fill in
// mse = cost/n and the information score.
FitResult fit_glucose(const ModelSpec& spec, const Dataset& data,
                      const Vec& theta0, Optimizer optimizer,
                      const FitOptions& options);

// n*ln(mse) + k*ln(n) with natural logarithms; mse = 0 maps to -infinity.
// Throws std::invalid_argument for n <= 0, k < 0, or mse < 0.
double bic_score(double mse, int n, int param_count);

struct SplitReport {
  FitResult fit;        // calibrated on samples with t <= split_time
  double split_time = 0.0;
  int n_first = 0;
  int n_second = 0;
  double mse_first = std::numeric_limits<double>::quiet_NaN();
  double mse_second = std::numeric_limits<double>::quiet_NaN();
  double mse_total = std::numeric_limits<double>::quiet_NaN();
  double bic_first = std::numeric_limits<double>::quiet_NaN();
  double bic_second = std::numeric_limits<double>::quiet_NaN();
  double bic_total = std::numeric_limits<double>::quiet_NaN();
};

// Calibrate on the glucose samples at or before split_time, then simulate the
// full horizon with the fitted parameters and score both segments. Requires
// at least five samples on each side of the split.
SplitReport fit_predict_split(const ModelSpec& spec, const Dataset& data,
                              double split_time, const Vec& theta0,
                              Optimizer optimizer, const FitOptions& options);

// Simulate the model and sample glucose at sample_times with additive
// Gaussian noise of standard deviation sigma (deterministic for a given
// seed). Values are clamped to a small positive floor so the glucose series
// stays physical.
Dataset generate_synthetic(const ModelSpec& spec, const Vec& theta,
                           const Vec& x0, const InputSchedule& schedule,
                           const std::vector<double>& sample_times,
                           double sigma, std::uint64_t seed,
                           const IntegrateOptions& options = IntegrateOptions());

}  // namespace glucokin
