#pragma once

// Parameter-to-output sensitivities. The forward route integrates the
// augmented system dX/dt = (df/dx)·X + df/dθ alongside the states; the
// glucose row of X is the output sensitivity. A central finite-difference
// route over re-simulations provides an independent cross-check.

#include <glucokin/integrate.hpp>
#include <glucokin/model.hpp>
#include <glucokin/schedule.hpp>

#include <vector>

namespace glucokin {

struct SensitivityOptions {
  double delta = 0.004;  // output grid spacing (days)
  double step = 2e-4;    // integration step for the augmented system
};

// Stacked output sensitivities: entry (i, j) = dG(t_i)/dtheta_j.
struct SensitivityMatrix {
  ModelSpec model;
  Vec params;
  std::vector<double> times;  // uniform grid from t0, spacing delta
  Mat rows;                   // times.size() x param_count
};

// One evaluation of the augmented right-hand side at (x, X).
// Throws std::invalid_argument on shape mismatches.
void sensitivity_rhs(const ModelSpec& spec, const Vec& params, const Vec& x,
                     const Mat& X, double ra_g, Vec& dx, Mat& dX);

// Integrate the augmented system over the schedule horizon and sample dG/dθ
// on the equidistant grid t0, t0+Δ, ... Bolus impulses jump states only;
// sensitivities are continuous across them (doses are not parameters).
SensitivityMatrix assemble_sensitivity_matrix(const ModelSpec& spec,
                                              const Vec& params, const Vec& x0,
                                              const InputSchedule& schedule,
                                              const SensitivityOptions& options);

// Central differences (G(θ+h e_j) - G(θ-h e_j)) / (2h) with h = rel_step·θ_j
// (absolute rel_step when θ_j = 0), sampled by interpolation at `times`.
Mat finite_difference_sensitivity(const ModelSpec& spec, const Vec& params,
                                  const Vec& x0, const InputSchedule& schedule,
                                  const std::vector<double>& times,
                                  double rel_step,
                                  const IntegrateOptions& integrate_options = {});

}  // namespace glucokin
