#include <glucokin/model.hpp>

#include <algorithm>
#include <cmath>

namespace glucokin {

namespace {

const std::vector<std::string> kCompleteParams = {
    "k1", "kI", "ki1", "kH", "rG", "m1", "m2", "m3",
    "m4", "p",  "q",   "n",  "n1", "n2", "x1", "x2"};
const std::vector<std::string> kRescaledParams = {
    "k1", "kI_bar", "ki1_bar", "kH_bar", "rG", "m1", "m3_bar",
    "m4", "p",      "q",       "n",      "n1", "x1_bar"};
const std::vector<std::string> kReducedParams = {
    "k1", "ki1_bar", "kH_bar", "rG", "m3_bar",
    "m4", "q",       "n",      "n1", "x1_bar"};
const std::vector<std::string> kInsulinParams = {
    "k1", "kI", "ki1", "rG", "m1", "m2", "m3", "m4", "p", "q"};
const std::vector<std::string> kGlucagonParams = {"k1", "kH", "n",  "n1",
                                                  "n2", "n3", "n4", "x1"};

const std::vector<std::string> kCompleteStates = {"G",  "I",  "i1", "i2",
                                                  "H",  "h1", "xi"};
const std::vector<std::string> kRescaledStates = {
    "G", "I_bar", "i1_bar", "i2", "H_bar", "h1", "xi_bar"};
const std::vector<std::string> kReducedStates = {"G",     "i1_bar", "i2",
                                                 "H_bar", "h1",     "xi_bar"};
const std::vector<std::string> kInsulinStates = {"G", "I", "i1", "i2"};
const std::vector<std::string> kGlucagonStates = {"G", "H", "h1", "h2", "xi"};

bool is_integer(double v) { return v == std::floor(v); }

// State index of the power-law base compartment, or -1 if the family has
// none; exponents live at the given parameter indices.
struct PowerLayout {
  int base_state;
  int p_index;  // -1 when the family has no p
  int q_index;
};

PowerLayout power_layout(ModelFamily family) {
  switch (family) {
    case ModelFamily::Complete:
      return {2, 9, 10};
    case ModelFamily::RescaledComplete:
      return {2, 8, 9};
    case ModelFamily::Reduced:
      return {1, -1, 6};
    case ModelFamily::InsulinSub:
      return {2, 8, 9};
    case ModelFamily::GlucagonSub:
      return {-1, -1, -1};
  }
  return {-1, -1, -1};
}

}  // namespace

std::string family_name(ModelFamily family) {
  switch (family) {
    case ModelFamily::Complete:
      return "complete";
    case ModelFamily::Reduced:
      return "reduced";
    case ModelFamily::InsulinSub:
      return "insulin_sub";
    case ModelFamily::GlucagonSub:
      return "glucagon_sub";
    case ModelFamily::RescaledComplete:
      return "rescaled_complete";
  }
  return "?";
}

ModelFamily family_from_name(const std::string& name) {
  if (name == "complete") return ModelFamily::Complete;
  if (name == "reduced") return ModelFamily::Reduced;
  if (name == "insulin_sub" || name == "insulin-sub")
    return ModelFamily::InsulinSub;
  if (name == "glucagon_sub" || name == "glucagon-sub")
    return ModelFamily::GlucagonSub;
  if (name == "rescaled_complete" || name == "rescaled-complete")
    return ModelFamily::RescaledComplete;
  throw std::invalid_argument("unknown model family: " + name);
}

int ModelSpec::state_dim() const {
  switch (family) {
    case ModelFamily::Complete:
    case ModelFamily::RescaledComplete:
      return 7;
    case ModelFamily::Reduced:
      return 6;
    case ModelFamily::InsulinSub:
      return 4;
    case ModelFamily::GlucagonSub:
      return 5;
  }
  return 0;
}

int ModelSpec::param_count() const {
  return static_cast<int>(param_names().size());
}

const std::vector<std::string>& ModelSpec::param_names() const {
  switch (family) {
    case ModelFamily::Complete:
      return kCompleteParams;
    case ModelFamily::RescaledComplete:
      return kRescaledParams;
    case ModelFamily::Reduced:
      return kReducedParams;
    case ModelFamily::InsulinSub:
      return kInsulinParams;
    case ModelFamily::GlucagonSub:
      return kGlucagonParams;
  }
  return kReducedParams;
}

const std::vector<std::string>& ModelSpec::state_names() const {
  switch (family) {
    case ModelFamily::Complete:
      return kCompleteStates;
    case ModelFamily::RescaledComplete:
      return kRescaledStates;
    case ModelFamily::Reduced:
      return kReducedStates;
    case ModelFamily::InsulinSub:
      return kInsulinStates;
    case ModelFamily::GlucagonSub:
      return kGlucagonStates;
  }
  return kReducedStates;
}

int ModelSpec::param_index(const std::string& name) const {
  const auto& names = param_names();
  auto it = std::find(names.begin(), names.end(), name);
  return it == names.end() ? -1 : static_cast<int>(it - names.begin());
}

ModelSpec make_spec(ModelFamily family) {
  ModelSpec spec;
  spec.family = family;
  return spec;
}

void check_rhs_inputs(const ModelSpec& spec, const Vec& state,
                      const Vec& params) {
  if (state.size() != spec.state_dim())
    throw std::invalid_argument(
        "state dimension " + std::to_string(state.size()) + " does not match " +
        family_name(spec.family) + " (expected " +
        std::to_string(spec.state_dim()) + ")");
  if (params.size() != spec.param_count())
    throw std::invalid_argument(
        "parameter count " + std::to_string(params.size()) +
        " does not match " + family_name(spec.family) + " (expected " +
        std::to_string(spec.param_count()) + ")");

  // A power-law base meaningfully below zero with a fractional exponent has
  // no real value; round-off-scale negativity is clamped by the kernels.
  constexpr double kSolverSlack = 1e-9;
  const PowerLayout pl = power_layout(spec.family);
  if (pl.base_state >= 0 && state[pl.base_state] < -kSolverSlack) {
    const bool fractional_p =
        pl.p_index >= 0 && !is_integer(params[pl.p_index]);
    const bool fractional_q =
        pl.q_index >= 0 && !is_integer(params[pl.q_index]);
    if (fractional_p || fractional_q)
      throw std::domain_error(
          "negative state '" + spec.state_names()[pl.base_state] +
          "' with fractional power exponent");
  }
}

Vec rhs(const ModelSpec& spec, const Vec& state, const Vec& params,
        double ra_g) {
  check_rhs_inputs(spec, state, params);
  Vec dx;
  switch (spec.family) {
    case ModelFamily::Complete:
      rhs_complete(state, params, spec.I_b, spec.H_b, ra_g, dx);
      break;
    case ModelFamily::RescaledComplete:
      rhs_rescaled_complete(state, params, spec.I_b, spec.H_b, ra_g, dx);
      break;
    case ModelFamily::Reduced:
      rhs_reduced(state, params, spec.H_b, ra_g, dx);
      break;
    case ModelFamily::InsulinSub:
      rhs_insulin_sub(state, params, spec.I_b, ra_g, dx);
      break;
    case ModelFamily::GlucagonSub:
      rhs_glucagon_sub(state, params, spec.H_b, dx);
      break;
  }
  return dx;
}

void state_jacobian(const ModelSpec& spec, const Vec& state, const Vec& params,
                    Mat& J) {
  check_rhs_inputs(spec, state, params);
  switch (spec.family) {
    case ModelFamily::Complete:
      state_jac_complete(state, params, spec.I_b, spec.H_b, J);
      break;
    case ModelFamily::RescaledComplete:
      state_jac_rescaled_complete(state, params, spec.I_b, spec.H_b, J);
      break;
    case ModelFamily::Reduced:
      state_jac_reduced(state, params, spec.H_b, J);
      break;
    case ModelFamily::InsulinSub:
      state_jac_insulin_sub(state, params, spec.I_b, J);
      break;
    case ModelFamily::GlucagonSub:
      state_jac_glucagon_sub(state, params, spec.H_b, J);
      break;
  }
}

void param_jacobian(const ModelSpec& spec, const Vec& state, const Vec& params,
                    double ra_g, Mat& J) {
  check_rhs_inputs(spec, state, params);
  switch (spec.family) {
    case ModelFamily::Complete:
      param_jac_complete(state, params, spec.I_b, spec.H_b, ra_g, J);
      break;
    case ModelFamily::RescaledComplete:
      param_jac_rescaled_complete(state, params, spec.I_b, spec.H_b, ra_g, J);
      break;
    case ModelFamily::Reduced:
      param_jac_reduced(state, params, spec.H_b, ra_g, J);
      break;
    case ModelFamily::InsulinSub:
      param_jac_insulin_sub(state, params, spec.I_b, ra_g, J);
      break;
    case ModelFamily::GlucagonSub:
      param_jac_glucagon_sub(state, params, spec.H_b, J);
      break;
  }
}

RescaleResult rescale_complete(const ModelSpec& spec, const Vec& params) {
  if (spec.family != ModelFamily::Complete)
    throw std::invalid_argument("rescale_complete requires the complete family");
  if (params.size() != 16)
    throw std::invalid_argument("complete family expects 16 parameters");

  const double kI = params[1], ki1 = params[2], kH = params[3];
  const double m1 = params[5], m2 = params[6], m3 = params[7], m4 = params[8];
  const double p = params[9], q = params[10];
  const double n2 = params[13], x1 = params[14], x2 = params[15];
  if (m2 <= 0 || n2 <= 0 || x2 <= 0 || m4 <= 0)
    throw std::domain_error(
        "invalid reduction: rescaling divides by m2, n2, x2, m4, which must "
        "be positive");

  RescaleResult out;
  out.spec = make_spec(ModelFamily::RescaledComplete);
  out.spec.I_b = spec.I_b / m2;
  out.spec.H_b = spec.H_b / n2;

  out.params.resize(13);
  out.params[0] = params[0];          // k1
  out.params[1] = kI * m2;            // kI_bar
  out.params[2] = ki1 * m4;           // ki1_bar
  out.params[3] = kH * x2 * n2 * m2;  // kH_bar
  out.params[4] = params[4];          // rG
  out.params[5] = m1;
  out.params[6] = m3 * std::pow(m4, q - 1.0);  // m3_bar
  out.params[7] = m4;
  out.params[8] = p;
  out.params[9] = q;
  out.params[10] = params[11];  // n
  out.params[11] = params[12];  // n1
  out.params[12] = x1 * n2;     // x1_bar

  out.state_divisors.resize(7);
  out.state_divisors << 1.0, m2, m4, 1.0, n2, 1.0, x2 * m2;
  return out;
}

MergeResult merge_insulin_states(const RescaleResult& rescaled) {
  if (rescaled.spec.family != ModelFamily::RescaledComplete)
    throw std::invalid_argument(
        "merge_insulin_states expects a rescaled-complete system");

  MergeResult out;
  out.spec = make_spec(ModelFamily::Reduced);
  out.spec.H_b = rescaled.spec.H_b;
  // I (and with it kI_bar, I_b, m1, p) is dropped; i1_bar stands in for the
  // blood-insulin state wherever it appeared.
  out.params.resize(10);
  out.params[0] = rescaled.params[0];   // k1
  out.params[1] = rescaled.params[2];   // ki1_bar
  out.params[2] = rescaled.params[3];   // kH_bar
  out.params[3] = rescaled.params[4];   // rG
  out.params[4] = rescaled.params[6];   // m3_bar
  out.params[5] = rescaled.params[7];   // m4
  out.params[6] = rescaled.params[9];   // q
  out.params[7] = rescaled.params[10];  // n
  out.params[8] = rescaled.params[11];  // n1
  out.params[9] = rescaled.params[12];  // x1_bar
  out.output_preserving = false;
  return out;
}

}  // namespace glucokin
