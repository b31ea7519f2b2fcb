#pragma once

// Fixed-step fourth-order Runge-Kutta integration of the model families.
// The step grid is split at every schedule event (infusion change, bolus,
// horizon endpoints) so inputs are smooth inside each sub-interval. Boluses
// default to state impulses; a rectangular-pulse mode is available for
// comparing against the idealized impulse treatment.

#include <glucokin/model.hpp>
#include <glucokin/schedule.hpp>

#include <stdexcept>
#include <vector>

namespace glucokin {

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, double time)
      : std::runtime_error(what), time_(time) {}
  double time() const { return time_; }

 private:
  double time_;
};

struct IntegrateOptions {
  double step = 2e-4;          // target step (days); shrunk to fit segments
  bool pulse_boluses = false;  // spread each bolus over a short rectangle
  double pulse_width = 1e-3;   // rectangle width (days) in pulse mode
  // Times (within the horizon) that must land exactly on the stored grid,
  // e.g. sample instants that interpolation should not smear.
  std::vector<double> extra_breakpoints{};
};

struct Trajectory {
  ModelSpec model;
  std::vector<double> times;  // strictly increasing, includes every event
  Mat states;                 // one row per time, state_dim columns
};

// Integrate family dynamics from x0 over the schedule horizon.
// Bolus impulses are applied before stepping away from the bolus time, so the
// stored row at that time is the post-impulse state (including t0 boluses).
// Throws DivergenceError when the state leaves the finite range.
Trajectory integrate(const ModelSpec& spec, const Vec& params, const Vec& x0,
                     const InputSchedule& schedule,
                     const IntegrateOptions& options);

// Glucose output G(t) by linear interpolation between stored rows.
// Throws std::out_of_range outside the stored range.
double output_at(const Trajectory& traj, double t);
// Full state by the same interpolation.
Vec state_at(const Trajectory& traj, double t);

// Sorted unique event times (segment boundaries) for the schedule, with any
// extra times merged in. Used by the integrator and by sensitivity grids.
std::vector<double> event_breakpoints(const InputSchedule& schedule,
                                      const std::vector<double>& extra = {});

namespace detail {
// RHS dispatch without the per-call validation of the public entry point.
void rhs_unchecked(const ModelSpec& spec, const Vec& params, const Vec& x,
                   double ra_g, double u_i, double u_h, double u_h_sc,
                   Vec& dx);
}  // namespace detail

}  // namespace glucokin
