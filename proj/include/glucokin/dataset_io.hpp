#pragma once

// File formats. Experiments travel as one self-describing sectioned-CSV file
// ("[meta]", "[glucose]", "[insulin]", "[glucagon]", "[infusion]",
// "[boluses]"); results are CSV for tabular data and JSON for structured
// reports. Times in experiment files carry the unit named in [meta]
// (min | h | d) and are converted to days on load; rates and doses are
// stored in model units and never converted. Numbers are written with 17
// significant digits, so save/load round-trips are value-exact.
//
// Experiment file layout:
//
//   [meta]
//   subject_id,<label>
//   model_family,<complete|reduced|insulin_sub|glucagon_sub|...>
//   time_unit,<min|h|d>
//   t0,<number>          horizon start, in time_unit
//   tf,<number>          horizon end
//   I_b,<number>         optional basal levels (default 1)
//   H_b,<number>
//   x0,<v;v;...>         optional explicit initial state
//   [glucose]            required, at least one row
//   t,value
//   ...
//   [insulin]            optional measured series
//   [glucagon]           optional measured series
//   [infusion]           optional piecewise-constant glucose infusion
//   t,rate
//   [boluses]            optional impulses
//   t,hormone,dose       hormone in {insulin_ip, glucagon_ip, glucagon_sc}
//
// '#'-prefixed lines and blank lines are ignored. Loading rejects malformed
// rows with the offending line number.

#include <glucokin/estimation.hpp>
#include <glucokin/identifiability.hpp>
#include <glucokin/integrate.hpp>
#include <glucokin/model.hpp>
#include <glucokin/sensitivity.hpp>

#include <stdexcept>
#include <string>

namespace glucokin {

// A loaded experiment: subject label, model family with basal levels, and
// the measured data plus input schedule.
struct Experiment {
  std::string subject_id;
  ModelSpec spec;
  Dataset data;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& path, int line, const std::string& message)
      : std::runtime_error(path + ":" + std::to_string(line) + ": " + message),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

// Throws ParseError for malformed content, std::runtime_error for I/O
// failures, std::invalid_argument for semantically invalid data (e.g. a
// bolus outside the horizon).
Experiment load_experiment(const std::string& path);

// time_unit selects the unit times are written in; the default "d" writes
// days unchanged, which is the only unit with bit-exact time round-trips.
void save_experiment(const std::string& path, const Experiment& experiment,
                     const std::string& time_unit = "d");

// CSV, header "t,<state names...>"; the state-name set identifies the family
// on load (basal levels are not stored and come back as family defaults).
void save_trajectory_csv(const std::string& path, const Trajectory& trajectory);
Trajectory load_trajectory_csv(const std::string& path);

// CSV, header "t,<parameter names...>"; one row per sample time.
void save_sensitivity_csv(const std::string& path,
                          const SensitivityMatrix& matrix);

// JSON with the parameter map keyed by name; infinities and NaN are encoded
// as strings so the sentinel values survive the round-trip.
void save_fit_result_json(const std::string& path, const FitResult& fit,
                          const ModelSpec& spec);
FitResult load_fit_result_json(const std::string& path,
                               ModelSpec* spec_out = nullptr);

// CSV: grid, value, identifiable, flat_left, flat_right (flags repeated per
// row so the file is self-contained for plotting). JSON: full structure.
void save_profile_csv(const std::string& path, const ProfileCurve& curve);
void save_profile_json(const std::string& path, const ProfileCurve& curve);
ProfileCurve load_profile_json(const std::string& path);

void save_svd_report_json(const std::string& path, const SVDReport& report);
SVDReport load_svd_report_json(const std::string& path);
// CSV "index,sigma", one row per singular value.
void save_spectrum_csv(const std::string& path, const SVDReport& report);

void save_split_report_json(const std::string& path, const SplitReport& report,
                            const ModelSpec& spec);
SplitReport load_split_report_json(const std::string& path);

void save_jacobi_report_json(const std::string& path,
                             const JacobiReport& report);
JacobiReport load_jacobi_report_json(const std::string& path);

}  // namespace glucokin
