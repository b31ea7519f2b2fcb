// Practical-identifiability toolkit: parameter ensembles, singular-value
// screening of sensitivity matrices with correlated-group detection, profile
// likelihoods with percentile/chi-square thresholds, and the analytic
// null-space residual check. Oracles: a constructed product-degenerate model
// (two parameters entering the output only through their product), direct
// grid evaluation for a profile whose nuisance parameters provably cannot
// move the cost, and closed-form percentile/quantile values.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <glucokin/estimation.hpp>
#include <glucokin/identifiability.hpp>

#include "support/protocols.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

using glucokin::Dataset;
using glucokin::Mat;
using glucokin::ModelFamily;
using glucokin::ModelSpec;
using glucokin::Vec;

namespace {

bool contains_group(const std::vector<std::vector<std::string>>& groups,
                    const std::set<std::string>& want) {
  for (const auto& g : groups)
    if (std::set<std::string>(g.begin(), g.end()) == want) return true;
  return false;
}

}  // namespace

TEST_CASE("parameter ensemble construction") {
  ModelSpec complete = glucokin::make_spec(ModelFamily::Complete);
  Vec theta = testsupport::complete_pig1_theta();
  std::vector<double> ci(static_cast<size_t>(complete.param_count()), 2.0);
  auto ens = glucokin::build_theta_ensemble(theta, ci);
  CHECK(ens.size() == 33);  // 2m+1 for m=16

  // Each member differs from the center in at most one coordinate, by
  // exactly one percent of the interval.
  CHECK(ens[0] == theta);
  for (size_t i = 1; i < ens.size(); ++i) {
    int changed = 0;
    for (Eigen::Index j = 0; j < theta.size(); ++j) {
      if (ens[i][j] != theta[j]) {
        ++changed;
        if (ens[i][j] == 0.0) {
          // Downward shift clamped at zero: only reaches tiny parameters.
          CHECK(theta[j] < 2.0 / 100.0);
        } else {
          CHECK(std::abs(ens[i][j] - theta[j]) ==
                doctest::Approx(2.0 / 100.0).epsilon(1e-12));
        }
      }
    }
    CHECK(changed <= 1);
  }

  ModelSpec reduced = glucokin::make_spec(ModelFamily::Reduced);
  Vec rtheta = testsupport::reduced_pig1_theta();
  std::vector<double> rci(static_cast<size_t>(reduced.param_count()), 1.0);
  CHECK(glucokin::build_theta_ensemble(rtheta, rci).size() == 21);

  // Zero-length intervals collapse the ensemble onto the center.
  std::vector<double> zero(rci.size(), 0.0);
  for (const Vec& v : glucokin::build_theta_ensemble(rtheta, zero))
    CHECK(v == rtheta);

  // Downward shifts never go negative.
  Vec near_zero = rtheta;
  near_zero[0] = 1e-4;
  auto clamped = glucokin::build_theta_ensemble(near_zero, rci);
  for (const Vec& v : clamped) CHECK(v.minCoeff() >= 0.0);

  std::vector<double> short_ci(3, 1.0);
  CHECK_THROWS_AS((void)glucokin::build_theta_ensemble(rtheta, short_ci),
                  std::invalid_argument);
}

TEST_CASE("percentile threshold") {
  std::vector<double> pool;
  for (int i = 1; i <= 100; ++i) pool.push_back(static_cast<double>(i));
  // Linear-interpolation percentile: rank 0.96*99 = 95.04.
  CHECK(glucokin::confidence_threshold(pool, 96.0) ==
        doctest::Approx(96.04).epsilon(1e-12));
  CHECK(glucokin::confidence_threshold(pool, 99.0) ==
        doctest::Approx(99.01).epsilon(1e-12));

  std::vector<double> flat(7, 3.25);
  CHECK(glucokin::confidence_threshold(flat, 96.0) == 3.25);
  std::vector<double> five = {50.0, 10.0, 30.0, 20.0, 40.0};  // unsorted input
  CHECK(glucokin::confidence_threshold(five, 50.0) == 30.0);
  CHECK(glucokin::confidence_threshold({42.0}, 96.0) == 42.0);

  CHECK(glucokin::confidence_threshold(pool, 98.0) >
        glucokin::confidence_threshold(pool, 96.0));
  CHECK_THROWS_AS((void)glucokin::confidence_threshold({}, 96.0),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)glucokin::confidence_threshold(pool, 0.0),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)glucokin::confidence_threshold(pool, 100.0),
                  std::invalid_argument);
}

TEST_CASE("chi-square threshold against published quantiles") {
  // One-degree-of-freedom chi-square quantiles (standard tables).
  CHECK(glucokin::chi_square_threshold(0.0, 95.0) ==
        doctest::Approx(3.8414588206941236).epsilon(1e-6));
  CHECK(glucokin::chi_square_threshold(0.0, 99.0) ==
        doctest::Approx(6.6348966010212145).epsilon(1e-6));
  CHECK(glucokin::chi_square_threshold(10.0, 95.0) ==
        doctest::Approx(13.8414588).epsilon(1e-6));
  CHECK_THROWS_AS((void)glucokin::chi_square_threshold(0.0, 0.0),
                  std::invalid_argument);
}

TEST_CASE("spectrum screening rules") {
  std::vector<std::string> names = {"a", "b", "c"};
  Eigen::Matrix3d V = Eigen::Matrix3d::Identity();

  Vec clean(3);
  clean << 1.0, 0.5, 0.2;
  auto none = glucokin::analyze_spectrum(clean, V, names,
                                         glucokin::SpectrumRule{});
  CHECK(none.small_indices.empty());
  CHECK(none.groups.empty());

  Vec one_small(3);
  one_small << 1.0, 0.5, 1e-12;
  auto one = glucokin::analyze_spectrum(one_small, V, names,
                                        glucokin::SpectrumRule{});
  REQUIRE(one.small_indices == std::vector<int>{2});
  REQUIRE(one.groups.size() == 1);
  CHECK(one.groups[0] == std::vector<std::string>{"c"});

  // A cluster below the gap is flagged as a whole.
  Vec cluster(3);
  cluster << 1.0, 1e-12, 3e-13;
  auto two = glucokin::analyze_spectrum(cluster, V, names,
                                        glucokin::SpectrumRule{});
  CHECK(two.small_indices == std::vector<int>{1, 2});

  // Small but not separated: no flag.
  Vec no_gap(3);
  no_gap << 5e-9, 4e-9, 3e-9;
  CHECK(glucokin::analyze_spectrum(no_gap, V, names, glucokin::SpectrumRule{})
            .small_indices.empty());

  // Group membership collects every coordinate with weight >= the cutoff.
  Eigen::Matrix3d mixed = Eigen::Matrix3d::Identity();
  mixed.col(2) << std::sqrt(0.5), std::sqrt(0.5), 0.0;
  auto pair = glucokin::analyze_spectrum(one_small, mixed, names,
                                         glucokin::SpectrumRule{});
  REQUIRE(pair.groups.size() == 1);
  CHECK(pair.groups[0] == std::vector<std::string>{"a", "b"});
}

TEST_CASE("structural screening flags an exact product degeneracy") {
  // In the full model with xi(0) = 0, the glucose output depends on kH and
  // x2 only through their product: xi is linear in x2, and kH multiplies xi.
  // The parameter-scaled sensitivity columns of the pair are then exactly
  // equal, which is a machine-precision null direction the screen must find
  // as the correlated group {kH, x2}.
  ModelSpec spec = glucokin::make_spec(ModelFamily::Complete);
  Vec theta = testsupport::complete_pig1_theta();
  glucokin::InputSchedule schedule = testsupport::bihormonal_protocol();
  Vec x0 = testsupport::default_x0(spec, 5.5);
  x0[6] = 0.0;  // xi(0)

  std::vector<double> ci(static_cast<size_t>(spec.param_count()));
  for (size_t j = 0; j < ci.size(); ++j)
    ci[j] = 0.1 * theta[static_cast<Eigen::Index>(j)];
  auto ensemble = glucokin::build_theta_ensemble(theta, ci);
  ensemble.resize(5);

  glucokin::StructuralOptions opts;
  glucokin::SVDReport report =
      glucokin::structural_analysis(spec, ensemble, x0, schedule, opts);

  REQUIRE(report.singular_values.size() == spec.param_count());
  for (Eigen::Index i = 0; i < report.singular_values.size(); ++i) {
    CHECK(report.singular_values[i] >= 0.0);
    if (i > 0)
      CHECK(report.singular_values[i] <= report.singular_values[i - 1]);
  }
  Mat vtv = report.right_vectors.transpose() * report.right_vectors;
  CHECK((vtv - Mat::Identity(vtv.rows(), vtv.cols()))
            .cwiseAbs()
            .maxCoeff() < 1e-8);
  CHECK(report.theta_ensemble.size() == 5);

  CHECK(!report.small_indices.empty());
  CHECK(contains_group(report.groups, {"kH", "x2"}));

  // Mixed parameter layouts are rejected.
  auto broken = ensemble;
  broken.push_back(Vec::Ones(4));
  CHECK_THROWS_AS((void)glucokin::structural_analysis(spec, broken, x0,
                                                      schedule, opts),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)glucokin::structural_analysis(
                      spec, {}, x0, schedule, opts),
                  std::invalid_argument);
}

namespace {

// Glucagon-submodel setup in which every hormone state is identically zero:
// glucose decays as pure exp(-k1 t), the remaining seven parameters cannot
// affect the output, and the profile of k1 equals the raw cost curve, which
// we can evaluate directly as an independent oracle.
struct DecayProfileFixture {
  ModelSpec spec = glucokin::make_spec(ModelFamily::GlucagonSub);
  Vec theta = Vec(8);
  Dataset data;

  DecayProfileFixture() {
    theta << 3.0, 0.8, 40.0, 280.0, 4400.0, 560.0, 60.0, 0.5;
    glucokin::InputSchedule s;
    s.t0 = 0.0;
    s.tf = 0.2;
    Vec x0 = Vec::Zero(5);
    x0[0] = 6.0;  // xi(0) = 0 as well: hormone path entirely dark
    std::vector<double> times;
    for (int k = 0; k <= 40; ++k) times.push_back(0.005 * k);
    data = glucokin::generate_synthetic(spec, theta, x0, s, times, 0.0, 17);
  }
};

}  // namespace

TEST_CASE("profile likelihood matches direct grid evaluation") {
  DecayProfileFixture fx;
  glucokin::ProfileOptions opts;
  opts.grid.points = 21;
  const double sigma2 = 0.04;

  glucokin::ProfileCurve curve = glucokin::profile_likelihood(
      fx.spec, fx.data, fx.theta, 0, sigma2, opts);

  CHECK(curve.param_name == "k1");
  REQUIRE(static_cast<int>(curve.grid.size()) == 21);
  REQUIRE(curve.values.size() == curve.grid.size());
  REQUIRE(curve.theta_at.size() == curve.grid.size());

  // Log-spaced grid over [theta/10, theta*10] containing the optimum.
  CHECK(curve.grid.front() == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(curve.grid.back() == doctest::Approx(30.0).epsilon(1e-12));
  CHECK(curve.grid[10] == 3.0);
  for (size_t k = 1; k + 1 < curve.grid.size(); ++k)
    CHECK(curve.grid[k + 1] / curve.grid[k] ==
          doctest::Approx(curve.grid[1] / curve.grid[0]).epsilon(1e-9));

  // The nuisance parameters are inert, so -2PL(p) = SSE(p)/sigma^2 exactly.
  for (size_t k = 0; k < curve.grid.size(); ++k) {
    Vec th = fx.theta;
    th[0] = curve.grid[k];
    const double direct =
        glucokin::cost_glucose(fx.spec, th, fx.data) / sigma2;
    CHECK(curve.values[k] ==
          doctest::Approx(direct).epsilon(1e-9));
    CHECK(curve.theta_at[k][0] == curve.grid[k]);
    CHECK(curve.point_ok[k]);
  }

  // Envelope: every profiled value sits at or above the global minimum,
  // which is attained at the center (exact data).
  const double global_min =
      glucokin::cost_glucose(fx.spec, fx.theta, fx.data) / sigma2;
  for (double v : curve.values) CHECK(v >= global_min - 1e-9);
  CHECK(curve.values[10] == doctest::Approx(global_min).epsilon(1e-6));
  const auto argmin =
      std::min_element(curve.values.begin(), curve.values.end()) -
      curve.values.begin();
  CHECK(argmin == 10);
  CHECK(curve.values[9] > curve.values[10]);
  CHECK(curve.values[11] > curve.values[10]);

  // With a mid-curve threshold the profile crosses on both sides.
  glucokin::apply_threshold(curve,
                            glucokin::confidence_threshold(curve.values, 50.0));
  CHECK(curve.flags.identifiable);
  CHECK(!curve.flags.flat_left);
  CHECK(!curve.flags.flat_right);
}

TEST_CASE("profile of an inert parameter is flat on both sides") {
  DecayProfileFixture fx;
  glucokin::ProfileOptions opts;
  opts.grid.points = 11;
  // Parameter index 2 ("n") never influences the output in this setup.
  glucokin::ProfileCurve curve =
      glucokin::profile_likelihood(fx.spec, fx.data, fx.theta, 2, 1.0, opts);
  const double v0 = curve.values.front();
  for (double v : curve.values) CHECK(v == doctest::Approx(v0).epsilon(1e-9));
  glucokin::apply_threshold(curve,
                            glucokin::confidence_threshold(curve.values, 96.0));
  CHECK(!curve.flags.identifiable);
  CHECK(curve.flags.flat_left);
  CHECK(curve.flags.flat_right);
}

TEST_CASE("profile input validation") {
  DecayProfileFixture fx;
  glucokin::ProfileOptions opts;
  CHECK_THROWS_AS((void)glucokin::profile_likelihood(fx.spec, fx.data,
                                                     fx.theta, -1, 1.0, opts),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)glucokin::profile_likelihood(fx.spec, fx.data,
                                                     fx.theta, 8, 1.0, opts),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)glucokin::profile_likelihood(fx.spec, fx.data,
                                                     fx.theta, 0, 0.0, opts),
                  std::invalid_argument);
  glucokin::ProfileOptions even;
  even.grid.points = 10;
  CHECK_THROWS_AS((void)glucokin::profile_likelihood(fx.spec, fx.data,
                                                     fx.theta, 0, 1.0, even),
                  std::invalid_argument);
}

TEST_CASE("threshold modes attach flags to a family of curves") {
  DecayProfileFixture fx;
  glucokin::ProfileOptions opts;
  opts.grid.points = 11;
  std::vector<glucokin::ProfileCurve> curves;
  curves.push_back(
      glucokin::profile_likelihood(fx.spec, fx.data, fx.theta, 0, 0.04, opts));
  curves.push_back(
      glucokin::profile_likelihood(fx.spec, fx.data, fx.theta, 2, 0.04, opts));

  auto pooled = curves;
  glucokin::attach_thresholds(pooled, 50.0, glucokin::ThresholdMode::Pooled);
  CHECK(pooled[0].threshold == pooled[1].threshold);

  auto per_param = curves;
  glucokin::attach_thresholds(per_param, 50.0,
                              glucokin::ThresholdMode::PerParameter);
  CHECK(per_param[0].threshold != per_param[1].threshold);
  CHECK(per_param[0].flags.identifiable);
  CHECK(!per_param[1].flags.identifiable);

  auto chi = curves;
  glucokin::attach_thresholds(chi, 95.0, glucokin::ThresholdMode::ChiSquare);
  CHECK(chi[0].threshold ==
        doctest::Approx(*std::min_element(chi[0].values.begin(),
                                          chi[0].values.end()) +
                        3.8414588206941236)
            .epsilon(1e-6));
  CHECK(chi[0].flags.identifiable);
}

TEST_CASE("analytic null-space residuals vanish at random interior points") {
  ModelSpec spec = glucokin::make_spec(ModelFamily::Complete);
  std::mt19937_64 rng(550123);
  std::uniform_real_distribution<double> mag(0.2, 4.0);

  for (int trial = 0; trial < 20; ++trial) {
    Vec x0(7), theta(16);
    for (int i = 0; i < 7; ++i) x0[i] = mag(rng);
    for (int j = 0; j < 16; ++j) theta[j] = mag(rng);

    glucokin::JacobiReport six = glucokin::jacobi_nullspace_check(
        spec, x0, theta, glucokin::JacobiSubset::Six);
    CHECK(six.rows.rows() == 9);
    CHECK(six.rows.cols() == 6);
    REQUIRE(six.residuals.size() == 3);
    for (double r : six.residuals) CHECK(r < 1e-10);

    glucokin::JacobiReport eight = glucokin::jacobi_nullspace_check(
        spec, x0, theta, glucokin::JacobiSubset::Eight);
    CHECK(eight.rows.cols() == 8);
    REQUIRE(eight.residuals.size() == 3);
    for (double r : eight.residuals) CHECK(r < 1e-10);
  }
}

TEST_CASE("null-space check structure and preconditions") {
  ModelSpec spec = glucokin::make_spec(ModelFamily::Complete);
  Vec x0(7);
  x0 << 5.5, 0.4, 0.3, 0.2, 0.6, 0.7, 1.1;
  Vec theta = testsupport::complete_pig1_theta();

  glucokin::JacobiReport six = glucokin::jacobi_nullspace_check(
      spec, x0, theta, glucokin::JacobiSubset::Six);
  CHECK(six.subset_names ==
        std::vector<std::string>{"m1", "m2", "n", "n2", "x1", "x2"});
  for (int r = 0; r < 9; ++r) {
    if (r == 5) {
      CHECK(six.rows.row(r).cwiseAbs().maxCoeff() > 0.0);
    } else {
      CHECK(six.rows.row(r).cwiseAbs().maxCoeff() == 0.0);
    }
  }

  glucokin::JacobiReport eight = glucokin::jacobi_nullspace_check(
      spec, x0, theta, glucokin::JacobiSubset::Eight);
  CHECK(eight.subset_names ==
        std::vector<std::string>{"kI", "ki1", "m1", "m2", "n", "n2", "x1",
                                 "x2"});
  for (int r = 0; r < 9; ++r) {
    const double row_max = eight.rows.row(r).cwiseAbs().maxCoeff();
    if (r == 1 || r == 5 || r == 6) {
      CHECK(row_max > 0.0);
    } else {
      CHECK(row_max == 0.0);
    }
  }

  // Hypothesis violations: any required state at zero is rejected.
  for (int idx : {0, 1, 2, 4, 5, 6}) {
    Vec bad = x0;
    bad[idx] = 0.0;
    CHECK_THROWS_AS((void)glucokin::jacobi_nullspace_check(
                        spec, bad, theta, glucokin::JacobiSubset::Six),
                    std::invalid_argument);
  }
  // i2(0) = 0 is allowed (not part of the hypothesis).
  Vec ok = x0;
  ok[3] = 0.0;
  CHECK_NOTHROW((void)glucokin::jacobi_nullspace_check(
      spec, ok, theta, glucokin::JacobiSubset::Eight));

  ModelSpec reduced = glucokin::make_spec(ModelFamily::Reduced);
  CHECK_THROWS_AS((void)glucokin::jacobi_nullspace_check(
                      reduced, Vec::Ones(6), testsupport::reduced_pig1_theta(),
                      glucokin::JacobiSubset::Six),
                  std::invalid_argument);
}
