#pragma once

// Experiment inputs: a time horizon, a piecewise-constant glucose infusion,
// and discrete hormone boluses.

#include <glucokin/model.hpp>

#include <string>
#include <vector>

namespace glucokin {

enum class Hormone {
  InsulinIP,   // intraperitoneal insulin, feeds the proximal insulin stage
  GlucagonIP,  // intraperitoneal glucagon, feeds the proximal glucagon stage
  GlucagonSC,  // subcutaneous glucagon, only present in the glucagon submodel
};

std::string hormone_name(Hormone h);
Hormone hormone_from_name(const std::string& name);

struct Bolus {
  double time = 0.0;
  Hormone hormone = Hormone::InsulinIP;
  double dose = 0.0;
};

// Constant infusion rate from `start` until the next segment (or the horizon
// end for the last one).
struct InfusionSegment {
  double start = 0.0;
  double rate = 0.0;
};

struct InputSchedule {
  double t0 = 0.0;
  double tf = 0.0;
  std::vector<InfusionSegment> glucose_infusion;  // sorted by start
  std::vector<Bolus> boluses;                     // any order

  // Glucose appearance rate at time t (0 before the first segment).
  double rate_at(double t) const;

  // Structural checks: horizon ordering, segment ordering, event times inside
  // [t0, tf], nonnegative doses and rates. Throws std::invalid_argument.
  void validate() const;

  // validate() plus model-specific checks (e.g. subcutaneous glucagon is only
  // accepted by the glucagon submodel).
  void validate_for(const ModelSpec& spec) const;
};

// State index that receives a bolus of hormone `h` in family `family`.
// Throws std::invalid_argument if the family has no such input.
int bolus_state_index(ModelFamily family, Hormone h);

}  // namespace glucokin
