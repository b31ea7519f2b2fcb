#pragma once

// Model families for glucose dynamics under intraperitoneal insulin/glucagon
// dosing. Four public families plus one internal intermediate:
//
//   Complete          7 states (G, I, i1, i2, H, h1, xi), 16 parameters
//   RescaledComplete  7 states with hormone states rescaled, 13 parameters
//   Reduced           6 states (G, i1_bar, i2, H_bar, h1, xi_bar), 10 params
//   InsulinSub        4 states (G, I, i1, i2), 10 parameters
//   GlucagonSub       5 states (G, H, h1, h2, xi), 8 parameters
//
// G is blood glucose [mmol/L] and the only measured output in the bihormonal
// families; all rates are per day. Insulin transport between compartments is
// power-law (i1^p, i1^q with fractional exponents allowed); xi is a glucagon
// sensitivity state depleted by glucagon and restored by glucose+insulin.
//
// Right-hand sides and their analytic state/parameter Jacobians are plain
// scalar-templated free functions over Eigen vectors so they can be evaluated
// in any scalar type; the double-precision dispatchers at the bottom add
// input validation.

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace glucokin {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

template <class Scalar>
using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <class Scalar>
using MatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

enum class ModelFamily {
  Complete,
  Reduced,
  InsulinSub,
  GlucagonSub,
  RescaledComplete
};

std::string family_name(ModelFamily family);
ModelFamily family_from_name(const std::string& name);

/// Identifies a model family together with its fixed basal constants.
/// I_b and H_b are not estimated; they default to 1 (dimensionless models).
/// For the rescaled/reduced families they hold the rescaled basals.
struct ModelSpec {
  ModelFamily family = ModelFamily::Reduced;
  double I_b = 1.0;
  double H_b = 1.0;

  int state_dim() const;
  int param_count() const;
  const std::vector<std::string>& param_names() const;
  const std::vector<std::string>& state_names() const;
  /// Index of a parameter name, -1 if the family does not have it.
  int param_index(const std::string& name) const;
};

ModelSpec make_spec(ModelFamily family);

// ---- power-law helpers ------------------------------------------------------
// The base is clamped at zero before exponentiation: solver round-off can
// push a state a hair below zero, and the model semantics keep states
// nonnegative. Derivative conventions at base 0 (one-sided limits,
// regularized where the limit is infinite):
//   d(b^e)/db -> 0 for e > 1, e for e == 1, 0 for e < 1 (regularized)
//   d(b^e)/de = b^e ln b -> 0 (continuous extension)

template <class Scalar>
Scalar pow_pos(Scalar base, Scalar expo) {
  if (base <= Scalar(0)) return Scalar(0);
  return std::pow(base, expo);
}

template <class Scalar>
Scalar pow_pos_dbase(Scalar base, Scalar expo) {
  if (base <= Scalar(0)) {
    if (expo == Scalar(1)) return Scalar(1);
    return Scalar(0);
  }
  return expo * std::pow(base, expo - Scalar(1));
}

template <class Scalar>
Scalar pow_pos_dexp(Scalar base, Scalar expo) {
  if (base <= Scalar(0)) return Scalar(0);
  return std::pow(base, expo) * std::log(base);
}

// ---- right-hand sides -------------------------------------------------------
// Parameter orders are fixed (see ModelSpec::param_names):
//   Complete:         k1 kI ki1 kH rG m1 m2 m3 m4 p q n n1 n2 x1 x2
//   RescaledComplete: k1 kI_bar ki1_bar kH_bar rG m1 m3_bar m4 p q n n1 x1_bar
//   Reduced:          k1 ki1_bar kH_bar rG m3_bar m4 q n n1 x1_bar
//   InsulinSub:       k1 kI ki1 rG m1 m2 m3 m4 p q
//   GlucagonSub:      k1 kH n n1 n2 n3 n4 x1
// Boluses are not part of the RHS (u_I = u_H = 0 here); the integrator
// applies them as state impulses on the i2 / h1 / h2 compartments.

template <class Scalar>
void rhs_complete(const VecX<Scalar>& x, const VecX<Scalar>& th, Scalar I_b,
                  Scalar H_b, Scalar ra_g, VecX<Scalar>& dx) {
  const Scalar G = x[0], I = x[1], i1 = x[2], i2 = x[3], H = x[4], h1 = x[5],
               xi = x[6];
  const Scalar k1 = th[0], kI = th[1], ki1 = th[2], kH = th[3], rG = th[4],
               m1 = th[5], m2 = th[6], m3 = th[7], m4 = th[8], p = th[9],
               q = th[10], n = th[11], n1 = th[12], n2 = th[13], x1 = th[14],
               x2 = th[15];
  dx.resize(7);
  dx[0] = -(k1 + kI * (I + I_b) + ki1 * i1) * G + kH * (H + H_b) * xi +
          rG * ra_g;
  dx[1] = -m1 * I + m2 * pow_pos(i1, p);
  dx[2] = -m3 * pow_pos(i1, q) + m4 * i2;
  dx[3] = -m4 * i2;
  dx[4] = -n * H + n2 * h1;
  dx[5] = -n1 * h1;
  dx[6] = -x1 * H * xi + x2 * G * I;
}

template <class Scalar>
void rhs_rescaled_complete(const VecX<Scalar>& x, const VecX<Scalar>& th,
                           Scalar I_b, Scalar H_b, Scalar ra_g,
                           VecX<Scalar>& dx) {
  const Scalar G = x[0], I = x[1], i1 = x[2], i2 = x[3], H = x[4], h1 = x[5],
               xi = x[6];
  const Scalar k1 = th[0], kI = th[1], ki1 = th[2], kH = th[3], rG = th[4],
               m1 = th[5], m3 = th[6], m4 = th[7], p = th[8], q = th[9],
               n = th[10], n1 = th[11], x1 = th[12];
  dx.resize(7);
  dx[0] = -(k1 + kI * (I + I_b) + ki1 * i1) * G + kH * (H + H_b) * xi +
          rG * ra_g;
  // i1 here is the rescaled compartment (original i1 / m4), so the power-law
  // source term of I is (m4*i1)^p, not i1^p.
  dx[1] = -m1 * I + pow_pos(m4 * i1, p);
  dx[2] = -m3 * pow_pos(i1, q) + i2;
  dx[3] = -m4 * i2;
  dx[4] = -n * H + h1;
  dx[5] = -n1 * h1;
  dx[6] = -x1 * H * xi + G * I;
}

template <class Scalar>
void rhs_reduced(const VecX<Scalar>& x, const VecX<Scalar>& th, Scalar H_b,
                 Scalar ra_g, VecX<Scalar>& dx) {
  const Scalar G = x[0], i1 = x[1], i2 = x[2], H = x[3], h1 = x[4], xi = x[5];
  const Scalar k1 = th[0], ki1 = th[1], kH = th[2], rG = th[3], m3 = th[4],
               m4 = th[5], q = th[6], n = th[7], n1 = th[8], x1 = th[9];
  dx.resize(6);
  dx[0] = -(k1 + ki1 * i1) * G + kH * (H + H_b) * xi + rG * ra_g;
  dx[1] = -m3 * pow_pos(i1, q) + i2;
  dx[2] = -m4 * i2;
  dx[3] = -n * H + h1;
  dx[4] = -n1 * h1;
  dx[5] = -x1 * H * xi + G * i1;
}

template <class Scalar>
void rhs_insulin_sub(const VecX<Scalar>& x, const VecX<Scalar>& th, Scalar I_b,
                     Scalar ra_g, VecX<Scalar>& dx) {
  const Scalar G = x[0], I = x[1], i1 = x[2], i2 = x[3];
  const Scalar k1 = th[0], kI = th[1], ki1 = th[2], rG = th[3], m1 = th[4],
               m2 = th[5], m3 = th[6], m4 = th[7], p = th[8], q = th[9];
  dx.resize(4);
  dx[0] = -(k1 + kI * (I + I_b) + ki1 * i1) * G + rG * ra_g;
  dx[1] = -m1 * I + m2 * pow_pos(i1, p);
  dx[2] = -m3 * pow_pos(i1, q) + m4 * i2;
  dx[3] = -m4 * i2;
}

template <class Scalar>
void rhs_glucagon_sub(const VecX<Scalar>& x, const VecX<Scalar>& th,
                      Scalar H_b, VecX<Scalar>& dx) {
  const Scalar G = x[0], H = x[1], h1 = x[2], h2 = x[3], xi = x[4];
  const Scalar k1 = th[0], kH = th[1], n = th[2], n1 = th[3], n2 = th[4],
               n3 = th[5], n4 = th[6], x1 = th[7];
  dx.resize(5);
  dx[0] = -k1 * G + kH * (H + H_b) * xi;
  dx[1] = -n * H + n4 * h2 + n2 * h1;
  dx[2] = -n1 * h1;
  dx[3] = -n3 * h2;
  dx[4] = -x1 * H * xi;  // no restoration term in this submodel
}

// ---- analytic Jacobians -----------------------------------------------------
// d f / d state (square) and d f / d parameters (state_dim x param_count),
// derived by hand from the RHS above. The finite-difference cross-check lives
// in the sensitivity tests.

template <class Scalar>
void state_jac_complete(const VecX<Scalar>& x, const VecX<Scalar>& th,
                        Scalar I_b, Scalar H_b, MatX<Scalar>& J) {
  const Scalar G = x[0], I = x[1], i1 = x[2], H = x[4], xi = x[6];
  const Scalar k1 = th[0], kI = th[1], ki1 = th[2], kH = th[3], m1 = th[5],
               m2 = th[6], m3 = th[7], m4 = th[8], p = th[9], q = th[10],
               n = th[11], n1 = th[12], n2 = th[13], x1 = th[14], x2 = th[15];
  J.setZero(7, 7);
  J(0, 0) = -(k1 + kI * (I + I_b) + ki1 * i1);
  J(0, 1) = -kI * G;
  J(0, 2) = -ki1 * G;
  J(0, 4) = kH * xi;
  J(0, 6) = kH * (H + H_b);
  J(1, 1) = -m1;
  J(1, 2) = m2 * pow_pos_dbase(i1, p);
  J(2, 2) = -m3 * pow_pos_dbase(i1, q);
  J(2, 3) = m4;
  J(3, 3) = -m4;
  J(4, 4) = -n;
  J(4, 5) = n2;
  J(5, 5) = -n1;
  J(6, 0) = x2 * I;
  J(6, 1) = x2 * G;
  J(6, 4) = -x1 * xi;
  J(6, 6) = -x1 * H;
}

template <class Scalar>
void param_jac_complete(const VecX<Scalar>& x, const VecX<Scalar>& th,
                        Scalar I_b, Scalar H_b, Scalar ra_g, MatX<Scalar>& J) {
  const Scalar G = x[0], I = x[1], i1 = x[2], i2 = x[3], H = x[4], h1 = x[5],
               xi = x[6];
  const Scalar m2 = th[6], m3 = th[7], p = th[9], q = th[10];
  J.setZero(7, 16);
  J(0, 0) = -G;                    // k1
  J(0, 1) = -(I + I_b) * G;        // kI
  J(0, 2) = -i1 * G;               // ki1
  J(0, 3) = (H + H_b) * xi;        // kH
  J(0, 4) = ra_g;                  // rG
  J(1, 5) = -I;                    // m1
  J(1, 6) = pow_pos(i1, p);        // m2
  J(1, 9) = m2 * pow_pos_dexp(i1, p);   // p
  J(2, 7) = -pow_pos(i1, q);       // m3
  J(2, 8) = i2;                    // m4
  J(2, 10) = -m3 * pow_pos_dexp(i1, q); // q
  J(3, 8) = -i2;                   // m4
  J(4, 11) = -H;                   // n
  J(4, 13) = h1;                   // n2
  J(5, 12) = -h1;                  // n1
  J(6, 14) = -H * xi;              // x1
  J(6, 15) = G * I;                // x2
}

template <class Scalar>
void state_jac_rescaled_complete(const VecX<Scalar>& x, const VecX<Scalar>& th,
                                 Scalar I_b, Scalar H_b, MatX<Scalar>& J) {
  const Scalar G = x[0], I = x[1], i1 = x[2], H = x[4], xi = x[6];
  const Scalar k1 = th[0], kI = th[1], ki1 = th[2], kH = th[3], m1 = th[5],
               m3 = th[6], m4 = th[7], p = th[8], q = th[9], n = th[10],
               n1 = th[11], x1 = th[12];
  J.setZero(7, 7);
  J(0, 0) = -(k1 + kI * (I + I_b) + ki1 * i1);
  J(0, 1) = -kI * G;
  J(0, 2) = -ki1 * G;
  J(0, 4) = kH * xi;
  J(0, 6) = kH * (H + H_b);
  J(1, 1) = -m1;
  J(1, 2) = m4 * pow_pos_dbase(m4 * i1, p);
  J(2, 2) = -m3 * pow_pos_dbase(i1, q);
  J(2, 3) = Scalar(1);
  J(3, 3) = -m4;
  J(4, 4) = -n;
  J(4, 5) = Scalar(1);
  J(5, 5) = -n1;
  J(6, 0) = I;
  J(6, 1) = G;
  J(6, 4) = -x1 * xi;
  J(6, 6) = -x1 * H;
}

template <class Scalar>
void param_jac_rescaled_complete(const VecX<Scalar>& x, const VecX<Scalar>& th,
                                 Scalar I_b, Scalar H_b, Scalar ra_g,
                                 MatX<Scalar>& J) {
  const Scalar G = x[0], I = x[1], i1 = x[2], i2 = x[3], H = x[4], h1 = x[5],
               xi = x[6];
  const Scalar m3 = th[6], m4 = th[7], p = th[8], q = th[9];
  J.setZero(7, 13);
  J(0, 0) = -G;
  J(0, 1) = -(I + I_b) * G;
  J(0, 2) = -i1 * G;
  J(0, 3) = (H + H_b) * xi;
  J(0, 4) = ra_g;
  J(1, 5) = -I;                                 // m1
  J(1, 7) = i1 * pow_pos_dbase(m4 * i1, p);     // m4 (through the source term)
  J(1, 8) = pow_pos_dexp(m4 * i1, p);           // p
  J(2, 6) = -pow_pos(i1, q);                    // m3_bar
  J(2, 9) = -m3 * pow_pos_dexp(i1, q);          // q  (i2 enters with unit gain)
  J(3, 7) = -i2;                                // m4
  J(4, 10) = -H;                                // n
  J(5, 11) = -h1;                               // n1
  J(6, 12) = -H * xi;                           // x1_bar
}

template <class Scalar>
void state_jac_reduced(const VecX<Scalar>& x, const VecX<Scalar>& th,
                       Scalar H_b, MatX<Scalar>& J) {
  const Scalar G = x[0], i1 = x[1], H = x[3], xi = x[5];
  const Scalar k1 = th[0], ki1 = th[1], kH = th[2], m3 = th[4], m4 = th[5],
               q = th[6], n = th[7], n1 = th[8], x1 = th[9];
  J.setZero(6, 6);
  J(0, 0) = -(k1 + ki1 * i1);
  J(0, 1) = -ki1 * G;
  J(0, 3) = kH * xi;
  J(0, 5) = kH * (H + H_b);
  J(1, 1) = -m3 * pow_pos_dbase(i1, q);
  J(1, 2) = Scalar(1);
  J(2, 2) = -m4;
  J(3, 3) = -n;
  J(3, 4) = Scalar(1);
  J(4, 4) = -n1;
  J(5, 0) = i1;
  J(5, 1) = G;
  J(5, 3) = -x1 * xi;
  J(5, 5) = -x1 * H;
}

template <class Scalar>
void param_jac_reduced(const VecX<Scalar>& x, const VecX<Scalar>& th,
                       Scalar H_b, Scalar ra_g, MatX<Scalar>& J) {
  const Scalar G = x[0], i1 = x[1], i2 = x[2], H = x[3], h1 = x[4], xi = x[5];
  const Scalar m3 = th[4], q = th[6];
  J.setZero(6, 10);
  J(0, 0) = -G;                    // k1
  J(0, 1) = -i1 * G;               // ki1_bar
  J(0, 2) = (H + H_b) * xi;        // kH_bar
  J(0, 3) = ra_g;                  // rG
  J(1, 4) = -pow_pos(i1, q);       // m3_bar
  J(1, 6) = -m3 * pow_pos_dexp(i1, q);  // q
  J(2, 5) = -i2;                   // m4
  J(3, 7) = -H;                    // n
  J(4, 8) = -h1;                   // n1
  J(5, 9) = -H * xi;               // x1_bar
}

template <class Scalar>
void state_jac_insulin_sub(const VecX<Scalar>& x, const VecX<Scalar>& th,
                           Scalar I_b, MatX<Scalar>& J) {
  const Scalar G = x[0], I = x[1], i1 = x[2];
  const Scalar k1 = th[0], kI = th[1], ki1 = th[2], m1 = th[4], m2 = th[5],
               m3 = th[6], m4 = th[7], p = th[8], q = th[9];
  J.setZero(4, 4);
  J(0, 0) = -(k1 + kI * (I + I_b) + ki1 * i1);
  J(0, 1) = -kI * G;
  J(0, 2) = -ki1 * G;
  J(1, 1) = -m1;
  J(1, 2) = m2 * pow_pos_dbase(i1, p);
  J(2, 2) = -m3 * pow_pos_dbase(i1, q);
  J(2, 3) = m4;
  J(3, 3) = -m4;
}

template <class Scalar>
void param_jac_insulin_sub(const VecX<Scalar>& x, const VecX<Scalar>& th,
                           Scalar I_b, Scalar ra_g, MatX<Scalar>& J) {
  const Scalar G = x[0], I = x[1], i1 = x[2], i2 = x[3];
  const Scalar m2 = th[5], m3 = th[6], p = th[8], q = th[9];
  J.setZero(4, 10);
  J(0, 0) = -G;
  J(0, 1) = -(I + I_b) * G;
  J(0, 2) = -i1 * G;
  J(0, 3) = ra_g;
  J(1, 4) = -I;
  J(1, 5) = pow_pos(i1, p);
  J(1, 8) = m2 * pow_pos_dexp(i1, p);
  J(2, 6) = -pow_pos(i1, q);
  J(2, 7) = i2;
  J(2, 9) = -m3 * pow_pos_dexp(i1, q);
  J(3, 7) = -i2;
}

template <class Scalar>
void state_jac_glucagon_sub(const VecX<Scalar>& x, const VecX<Scalar>& th,
                            Scalar H_b, MatX<Scalar>& J) {
  const Scalar H = x[1], xi = x[4];
  const Scalar k1 = th[0], kH = th[1], n = th[2], n1 = th[3], n2 = th[4],
               n3 = th[5], n4 = th[6], x1 = th[7];
  J.setZero(5, 5);
  J(0, 0) = -k1;
  J(0, 1) = kH * xi;
  J(0, 4) = kH * (H + H_b);
  J(1, 1) = -n;
  J(1, 2) = n2;
  J(1, 3) = n4;
  J(2, 2) = -n1;
  J(3, 3) = -n3;
  J(4, 1) = -x1 * xi;
  J(4, 4) = -x1 * H;
}

template <class Scalar>
void param_jac_glucagon_sub(const VecX<Scalar>& x, const VecX<Scalar>& th,
                            Scalar H_b, MatX<Scalar>& J) {
  const Scalar G = x[0], H = x[1], h1 = x[2], h2 = x[3], xi = x[4];
  (void)th;
  J.setZero(5, 8);
  J(0, 0) = -G;               // k1
  J(0, 1) = (H + H_b) * xi;   // kH
  J(1, 2) = -H;               // n
  J(1, 4) = h1;               // n2
  J(1, 6) = h2;               // n4
  J(2, 3) = -h1;              // n1
  J(3, 5) = -h2;              // n3
  J(4, 7) = -H * xi;          // x1
}

// ---- validated double-precision dispatchers ---------------------------------

/// Derivative of the state under the spec's family. Throws
/// std::invalid_argument on dimension mismatch and std::domain_error when a
/// power-law base state is negative beyond solver round-off (1e-9) with a
/// fractional exponent.
Vec rhs(const ModelSpec& spec, const Vec& state, const Vec& params,
        double ra_g);

/// d(rhs)/d(state), square analytic Jacobian.
void state_jacobian(const ModelSpec& spec, const Vec& state, const Vec& params,
                    Mat& J);

/// d(rhs)/d(params), state_dim x param_count analytic Jacobian.
void param_jacobian(const ModelSpec& spec, const Vec& state, const Vec& params,
                    double ra_g, Mat& J);

/// Validates dimensions and the power-base domain; used by the dispatchers.
void check_rhs_inputs(const ModelSpec& spec, const Vec& state,
                      const Vec& params);

// ---- rescaling and reduction ------------------------------------------------

/// Exact re-parametrization of the Complete family. The returned system has
/// 13 parameters and a componentwise state change of variable
///   x_rescaled = x ./ state_divisors
/// (divisors: 1, m2, m4, 1, n2, 1, x2*m2). Its glucose trajectory is
/// pointwise identical to the original's for any schedule.
struct RescaleResult {
  ModelSpec spec;      // RescaledComplete with transformed basal constants
  Vec params;          // 13 entries
  Vec state_divisors;  // 7 entries
};

RescaleResult rescale_complete(const ModelSpec& spec, const Vec& params);

/// Drops the blood-insulin compartment from a rescaled-complete system
/// (i1_bar replaces I in the sensitivity-restoration term), producing the
/// 10-parameter Reduced family. This step changes the output; the flag
/// records that it is an approximation, not a change of variable.
struct MergeResult {
  ModelSpec spec;  // Reduced
  Vec params;      // 10 entries
  bool output_preserving = false;
};

MergeResult merge_insulin_states(const RescaleResult& rescaled);

}  // namespace glucokin
