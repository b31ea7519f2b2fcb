// The state rescaling that absorbs four parameters (m2, n2, x2, m4) must
// leave the glucose trajectory untouched: the rescaled system is a change of
// variables, not an approximation. These tests check the parameter map
// against hand-computed products and the invariance by integrating both
// systems.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <glucokin/integrate.hpp>

#include "support/protocols.hpp"

#include <cmath>
#include <random>

using glucokin::ModelFamily;
using glucokin::ModelSpec;
using glucokin::RescaleResult;
using glucokin::Trajectory;
using glucokin::Vec;

TEST_CASE("unit scale factors give the identity map") {
  ModelSpec spec = glucokin::make_spec(ModelFamily::Complete);
  spec.I_b = 0.7;
  spec.H_b = 1.3;
  Vec th(16);
  th << 1.1, 2.2, 3.3, 4.4, 5.5, 6.6, /*m2*/ 1.0, 7.7, /*m4*/ 1.0, 0.9, 1.2,
      8.8, 9.9, /*n2*/ 1.0, 10.1, /*x2*/ 1.0;
  RescaleResult r = glucokin::rescale_complete(spec, th);

  CHECK(r.spec.family == ModelFamily::RescaledComplete);
  CHECK(r.spec.I_b == 0.7);
  CHECK(r.spec.H_b == 1.3);
  const int keep[13] = {0, 1, 2, 3, 4, 5, 7, 8, 9, 10, 11, 12, 14};
  for (int j = 0; j < 13; ++j) CHECK(r.params[j] == doctest::Approx(th[keep[j]]));
  for (int i = 0; i < 7; ++i) CHECK(r.state_divisors[i] == 1.0);
}

TEST_CASE("parameter products on a published set") {
  ModelSpec spec = glucokin::make_spec(ModelFamily::Complete);
  Vec th = testsupport::complete_pig5_theta();
  RescaleResult r = glucokin::rescale_complete(spec, th);
  const double m2 = th[6], m4 = th[8], q = th[10], n2 = th[13], x2 = th[15];

  CHECK(r.params[1] == doctest::Approx(62.66 * 12.71));           // kI*m2
  CHECK(r.params[2] == doctest::Approx(0.0638 * 20.75));          // ki1*m4
  CHECK(r.params[3] ==
        doctest::Approx(0.40 * 0.00214 * 294.52 * 12.71));        // kH*x2*n2*m2
  CHECK(r.params[6] == doctest::Approx(23.59 * std::pow(20.75, 1.10 - 1.0)));
  CHECK(r.params[12] == doctest::Approx(2.02 * 294.52));          // x1*n2
  CHECK(r.spec.I_b == doctest::Approx(spec.I_b / m2));
  CHECK(r.spec.H_b == doctest::Approx(spec.H_b / n2));
  Vec divisors(7);
  divisors << 1.0, m2, m4, 1.0, n2, 1.0, x2 * m2;
  for (int i = 0; i < 7; ++i)
    CHECK(r.state_divisors[i] == doctest::Approx(divisors[i]));
  (void)q;
}

TEST_CASE("glucose output is invariant under the rescaling") {
  std::mt19937_64 rng(20240811);
  std::uniform_real_distribution<double> unit(0.1, 3.0);
  std::uniform_real_distribution<double> expo(0.5, 1.5);

  ModelSpec spec = glucokin::make_spec(ModelFamily::Complete);
  glucokin::InputSchedule sched = testsupport::bihormonal_protocol();
  glucokin::IntegrateOptions opt;
  opt.step = 1e-3;

  for (int trial = 0; trial < 5; ++trial) {
    Vec th(16);
    for (int j = 0; j < 16; ++j) th[j] = unit(rng);
    th[9] = expo(rng);   // p
    th[10] = expo(rng);  // q
    th[15] = unit(rng) * 0.01;  // keep the glucagon action term moderate

    Vec x0(7);
    for (int i = 0; i < 7; ++i) x0[i] = unit(rng);

    RescaleResult r = glucokin::rescale_complete(spec, th);
    Vec y0 = x0.cwiseQuotient(r.state_divisors);

    Trajectory orig = glucokin::integrate(spec, th, x0, sched, opt);
    Trajectory resc = glucokin::integrate(r.spec, r.params, y0, sched, opt);

    double worst = 0.0;
    for (double t : testsupport::five_minute_grid(sched)) {
      const double a = glucokin::output_at(orig, t);
      const double b = glucokin::output_at(resc, t);
      worst = std::max(worst, std::abs(a - b) / std::max(1.0, std::abs(a)));
    }
    CAPTURE(trial);
    CHECK(worst < 1e-8);
  }
}

TEST_CASE("rescaling rejects degenerate scale factors") {
  ModelSpec spec = glucokin::make_spec(ModelFamily::Complete);
  Vec th = testsupport::complete_pig5_theta();
  th[6] = 0.0;  // m2
  CHECK_THROWS_AS((void)glucokin::rescale_complete(spec, th),
                  std::domain_error);
  ModelSpec wrong = glucokin::make_spec(ModelFamily::Reduced);
  CHECK_THROWS_AS(
      (void)glucokin::rescale_complete(wrong, testsupport::reduced_pig1_theta()),
      std::invalid_argument);
}

TEST_CASE("merging the insulin states yields the reduced parameter set") {
  ModelSpec spec = glucokin::make_spec(ModelFamily::Complete);
  Vec th = testsupport::complete_pig1_theta();
  RescaleResult r = glucokin::rescale_complete(spec, th);
  glucokin::MergeResult m = glucokin::merge_insulin_states(r);

  CHECK(m.spec.family == ModelFamily::Reduced);
  CHECK_FALSE(m.output_preserving);
  REQUIRE(m.params.size() == 10);
  const auto names = m.spec.param_names();
  CHECK(names[1] == "ki1_bar");
  CHECK(m.params[0] == doctest::Approx(8.24));          // k1 unchanged
  CHECK(m.params[1] == doctest::Approx(3.87 * 76.92));  // ki1*m4
  CHECK(m.params[6] == doctest::Approx(0.57));          // q
  CHECK(m.params.minCoeff() >= 0.0);
}
