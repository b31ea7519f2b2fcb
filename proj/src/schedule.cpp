#include <glucokin/schedule.hpp>

#include <stdexcept>

namespace glucokin {

std::string hormone_name(Hormone h) {
  switch (h) {
    case Hormone::InsulinIP:
      return "insulin_ip";
    case Hormone::GlucagonIP:
      return "glucagon_ip";
    case Hormone::GlucagonSC:
      return "glucagon_sc";
  }
  throw std::logic_error("unreachable hormone");
}

Hormone hormone_from_name(const std::string& name) {
  if (name == "insulin_ip") return Hormone::InsulinIP;
  if (name == "glucagon_ip") return Hormone::GlucagonIP;
  if (name == "glucagon_sc") return Hormone::GlucagonSC;
  throw std::invalid_argument("unknown hormone '" + name +
                              "' (expected insulin_ip, glucagon_ip, or "
                              "glucagon_sc)");
}

double InputSchedule::rate_at(double t) const {
  double rate = 0.0;
  for (const auto& seg : glucose_infusion) {
    if (seg.start <= t)
      rate = seg.rate;
    else
      break;
  }
  return rate;
}

void InputSchedule::validate() const {
  if (!(tf > t0))
    throw std::invalid_argument("schedule horizon must satisfy tf > t0");
  double prev = t0;
  bool first = true;
  for (const auto& seg : glucose_infusion) {
    if (seg.start < t0 || seg.start >= tf)
      throw std::invalid_argument("infusion segment starts outside [t0, tf)");
    if (!first && seg.start <= prev)
      throw std::invalid_argument(
          "infusion segment starts must be strictly increasing");
    if (seg.rate < 0.0)
      throw std::invalid_argument("infusion rate must be nonnegative");
    prev = seg.start;
    first = false;
  }
  for (const auto& b : boluses) {
    if (b.time < t0 || b.time > tf)
      throw std::invalid_argument("bolus time outside [t0, tf]");
    if (b.dose < 0.0) throw std::invalid_argument("bolus dose must be nonnegative");
  }
}

void InputSchedule::validate_for(const ModelSpec& spec) const {
  validate();
  for (const auto& b : boluses)
    (void)bolus_state_index(spec.family, b.hormone);  // throws if unsupported
  if (spec.family == ModelFamily::GlucagonSub && !glucose_infusion.empty()) {
    for (const auto& seg : glucose_infusion)
      if (seg.rate != 0.0)
        throw std::invalid_argument(
            "the glucagon submodel has no glucose infusion input");
  }
}

int bolus_state_index(ModelFamily family, Hormone h) {
  switch (family) {
    case ModelFamily::Complete:
    case ModelFamily::RescaledComplete:
      if (h == Hormone::InsulinIP) return 3;   // i2
      if (h == Hormone::GlucagonIP) return 5;  // h1
      break;
    case ModelFamily::Reduced:
      if (h == Hormone::InsulinIP) return 2;   // i2
      if (h == Hormone::GlucagonIP) return 4;  // h1
      break;
    case ModelFamily::InsulinSub:
      if (h == Hormone::InsulinIP) return 3;  // i2
      break;
    case ModelFamily::GlucagonSub:
      if (h == Hormone::GlucagonIP) return 2;  // h1
      if (h == Hormone::GlucagonSC) return 3;  // h2
      break;
  }
  throw std::invalid_argument("model family '" + family_name(family) +
                              "' has no input for hormone '" + hormone_name(h) +
                              "'");
}

}  // namespace glucokin
