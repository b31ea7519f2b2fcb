#pragma once

// Practical-identifiability analysis. Two complementary procedures:
//
//  * Singular-value screening of the parameter-to-output sensitivity matrix
//    over a small ensemble of parameter vectors. Near-zero singular values
//    separated from the rest of the spectrum mark directions the data cannot
//    constrain; the dominant coordinates of the matching right singular
//    vectors name the correlated parameter groups.
//  * Profile likelihood: fix one parameter on a log-spaced grid, re-optimize
//    the rest, and compare the profiled -2 log-likelihood against a
//    percentile (or chi-square) confidence threshold. A curve that stays
//    below threshold on a side means the parameter is not identified in that
//    direction.
//
// A third, analytic route cross-checks the screening for the full model: the
// hand-coded gradient rows of the output's iterated time derivatives admit
// explicit null vectors, whose residuals are verified numerically.

#include <glucokin/estimation.hpp>
#include <glucokin/model.hpp>
#include <glucokin/schedule.hpp>
#include <glucokin/sensitivity.hpp>

#include <string>
#include <vector>

namespace glucokin {

// ---- parameter ensembles ----------------------------------------------------

// {theta} plus, for every parameter j, theta with theta_j shifted by plus and
// minus one percent of confidence_intervals[j]; 2m+1 vectors total, entries
// clamped at zero. Throws std::invalid_argument if the interval list does not
// provide exactly one finite nonnegative length per parameter.
std::vector<Vec> build_theta_ensemble(
    const Vec& theta_hat, const std::vector<double>& confidence_intervals);

// ---- singular-value screening -----------------------------------------------

// Flagging rule: find the first index k with sigma[k] <= threshold and
// sigma[k-1] >= gap * sigma[k]; everything from k on is "small". Group
// membership: coordinates of the right singular vector with weight >= cutoff.
struct SpectrumRule {
  double sv_threshold = 1e-9;
  double sv_gap = 1e3;
  double group_cutoff = 0.3;
};

struct SpectrumFindings {
  std::vector<int> small_indices;
  std::vector<std::vector<std::string>> groups;  // one per flagged index
};

// Apply the rule to a descending spectrum with right singular vectors V
// (columns) and parameter names. Exposed separately so the rule can be
// exercised on synthetic spectra.
SpectrumFindings analyze_spectrum(const Vec& singular_values, const Mat& V,
                                  const std::vector<std::string>& param_names,
                                  const SpectrumRule& rule);

struct StructuralOptions {
  SensitivityOptions sensitivity;
  SpectrumRule rule;
  // Scale sensitivity column j by theta_j (relative sensitivities): makes
  // columns comparable across parameters of very different magnitude, and
  // turns ratio/product degeneracies into balanced singular vectors.
  bool scale_columns = true;
  // A group is reported when it recurs in at least this fraction of the
  // ensemble members.
  double min_recurrence = 0.25;
};

struct SVDReport {
  // Spectrum of the stacked (all ensemble members) scaled sensitivity matrix.
  Vec singular_values;
  Mat right_vectors;
  std::vector<int> small_indices;
  // Correlated groups recurring across ensemble members, most frequent
  // first; names sorted within each group.
  std::vector<std::vector<std::string>> groups;
  std::vector<Vec> theta_ensemble;
  // Smallest singular value of each member's own (scaled) matrix.
  std::vector<double> member_sigma_min;
};

// Sensitivity SVD screening for every ensemble member plus the stacked
// matrix. Throws std::invalid_argument on an empty ensemble or members whose
// dimension does not match the model.
SVDReport structural_analysis(const ModelSpec& spec,
                              const std::vector<Vec>& theta_ensemble,
                              const Vec& x0, const InputSchedule& schedule,
                              const StructuralOptions& options);

// ---- profile likelihood -----------------------------------------------------

struct GridSpec {
  int points = 41;     // odd, >= 3: the center point is the optimum itself
  double span = 10.0;  // grid covers [theta_j/span, theta_j*span], log-spaced
};

struct ProfileOptions {
  GridSpec grid;
  FitOptions inner;  // simplex settings for the nuisance re-optimization
};

struct ProfileFlags {
  bool identifiable = false;
  bool flat_left = false;
  bool flat_right = false;
};

struct ProfileCurve {
  std::string param_name;
  std::vector<double> grid;
  std::vector<double> values;  // -2PL(p) = min SSE / sigma^2 at theta_j = p
  std::vector<Vec> theta_at;   // full re-optimized vector per grid point
  std::vector<char> point_ok;  // per-point optimizer success (not fatal)
  double threshold = std::numeric_limits<double>::quiet_NaN();
  ProfileFlags flags;
};

// Profile parameter `param_index` of the glucose fit: at each grid value p,
// minimize the scaled sum of squares over the remaining parameters with the
// simplex method, warm-started from the neighboring grid point (marching
// outward from the center). Requires sigma2 > 0 and theta_hat[param_index]
// > 0 (the grid is log-spaced around it).
ProfileCurve profile_likelihood(const ModelSpec& spec, const Dataset& data,
                                const Vec& theta_hat, int param_index,
                                double sigma2,
                                const ProfileOptions& options);

// Alpha-th percentile (linear interpolation between order statistics) of the
// pooled values; alpha in (0, 100), pool nonempty.
double confidence_threshold(std::vector<double> pool, double alpha);

// Chi-square alternative: global_min plus the one-degree-of-freedom
// chi-square quantile at probability alpha/100.
double chi_square_threshold(double global_min, double alpha);

// Set curve.threshold and derive the flags: a side is flat when no profiled
// value beyond the minimum on that side rises strictly above the threshold;
// identifiable means the curve exceeds the threshold on both sides.
void apply_threshold(ProfileCurve& curve, double threshold);

enum class ThresholdMode { PerParameter, Pooled, ChiSquare };

std::string threshold_mode_name(ThresholdMode mode);
ThresholdMode threshold_mode_from_name(const std::string& name);

// Attach thresholds to a family of curves: PerParameter pools each curve's
// own values, Pooled uses one percentile over all curves, ChiSquare offsets
// each curve's minimum by the chi-square quantile.
void attach_thresholds(std::vector<ProfileCurve>& curves, double alpha,
                       ThresholdMode mode);

// ---- analytic null-space check ----------------------------------------------

enum class JacobiSubset { Six, Eight };

struct JacobiReport {
  // Gradient rows of the output's iterated time derivatives (and their
  // infusion coefficients) with respect to the subset parameters, evaluated
  // at (x0, theta). Rows the subset never enters are identically zero.
  Mat rows;
  std::vector<std::string> subset_names;
  // ||J v|| / ||v|| for each analytic null vector of the construction.
  std::vector<double> residuals;
};

// Full-model-only check that the explicit null vectors of the gradient rows
// are indeed annihilated. Six covers (m1, m2, n, n2, x1, x2); Eight prepends
// (kI, ki1). Throws std::invalid_argument unless the family is Complete and
// G(0), I(0), i1(0), H(0), h1(0), xi(0) are all nonzero.
JacobiReport jacobi_nullspace_check(const ModelSpec& spec, const Vec& x0,
                                    const Vec& theta, JacobiSubset subset);

}  // namespace glucokin
