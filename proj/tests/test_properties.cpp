#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "repfrechet/io.hpp"
#include "repfrechet/rng.hpp"

using namespace repfrechet;

namespace {

ScenarioConfig config(Scenario kind, Index n, Index r) {
  ScenarioConfig cfg;
  cfg.kind = kind;
  for (auto& g : cfg.groups) {
    g.n = n;
    g.repeats = RepeatSpec::constant(r);
  }
  cfg.grid_size = 100;
  cfg.seed = 2024;
  return cfg;
}

Dataset shuffled(Dataset d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (auto& g : d.groups) {
    for (auto& s : g.subjects) std::shuffle(s.observations.begin(), s.observations.end(), rng);
    std::shuffle(g.subjects.begin(), g.subjects.end(), rng);
  }
  std::shuffle(d.groups.begin(), d.groups.end(), rng);
  return d;
}

double rate_of(const ScenarioConfig& cfg) { return run_study(cfg).method("q").rate; }

}  // namespace

TEST(Invariance, ScalingDistancesLeavesPValue) {
  for (auto kind : {Scenario::distributional, Scenario::network, Scenario::vector, Scenario::composite}) {
    auto cfg = config(kind, 25, 3);
    cfg.groups[1].beta = 1.4;
    const Dataset d = generate_replicate(cfg, 0);
    const double p = run_test(d).p_value;
    for (double c : {1e-3, 1.0, 1e3}) {
      const double pc = run_test(scale_distances(d, c)).p_value;
      EXPECT_LE(std::fabs(pc - p), 1e-10 * p) << to_string(kind) << " c=" << c;
    }
  }
}

TEST(Invariance, ScalingPrecomputedDistances) {
  const Dataset d = load_dataset(std::string(REPFRECHET_TEST_DATA) + "/precomputed.json");
  TestOptions o;
  o.within = true;
  const double p = run_test(d, o).p_value;
  for (double c : {1e-3, 1e3}) EXPECT_LE(std::fabs(run_test(scale_distances(d, c), o).p_value - p), 1e-10 * p);
}

TEST(Invariance, PermutationsAreExact) {
  for (auto kind : {Scenario::distributional, Scenario::network, Scenario::vector, Scenario::composite}) {
    auto cfg = config(kind, 20, 3);
    cfg.groups[0].repeats = RepeatSpec::uniform123();
    cfg.groups[1].iota = 0.1;
    const Dataset d = generate_replicate(cfg, 1);
    const auto r = run_test(d);
    for (std::uint64_t s = 0; s < 5; ++s) {
      const auto q = run_test(shuffled(d, s));
      EXPECT_EQ(q.components.Q_n, r.components.Q_n) << to_string(kind);
      EXPECT_EQ(q.p_value, r.p_value) << to_string(kind);
    }
  }
}

TEST(Invariance, ThreeGroupsRelabeled) {
  auto cfg = config(Scenario::vector, 15, 2);
  cfg.groups.push_back(cfg.groups[0]);
  cfg.groups[2].eps = 1.3;
  const Dataset d = generate_replicate(cfg, 2);
  const auto r = run_test(d);
  EXPECT_EQ(r.calibration.eigenvalues.size(), 4u);
  Dataset swapped = d;
  std::swap(swapped.groups[0], swapped.groups[2]);
  EXPECT_EQ(run_test(swapped).components.Q_n, r.components.Q_n);
}

TEST(NullBehaviour, MeanTermShrinksWithSampleSize) {
  auto median_abs = [](Index n) {
    auto cfg = config(Scenario::vector, n, 2);
    std::vector<double> v;
    for (Index b = 0; b < 200; ++b) {
      const auto r = run_test(generate_replicate(cfg, b), {.critical_value = false});
      v.push_back(std::sqrt(static_cast<double>(r.N)) * std::fabs(r.components.D_n));
    }
    std::nth_element(v.begin(), v.begin() + 100, v.end());
    return v[100];
  };
  EXPECT_LT(median_abs(200), median_abs(50));
}

TEST(Power, MonotoneInMeanShift) {
  auto cfg = config(Scenario::vector, 40, 2);
  cfg.replicates = 120;
  double prev = 0;
  for (double beta : {1.0, 1.25, 1.5, 2.0, 3.0}) {
    cfg.groups[1].beta = beta;
    const double rate = rate_of(cfg);
    EXPECT_GE(rate, prev - 2 * std::sqrt(0.25 / cfg.replicates)) << beta;
    prev = rate;
  }
  EXPECT_GT(prev, 0.8);
}

TEST(Power, MonotoneInScaleOnBothSides) {
  auto cfg = config(Scenario::vector, 40, 2);
  cfg.replicates = 120;
  for (const auto& side : {std::vector<double>{1.0, 1.5, 2.0, 3.0}, std::vector<double>{1.0, 0.7, 0.4, 0.0}}) {
    double prev = 0;
    for (double eps : side) {
      cfg.groups[1].eps = eps;
      const double rate = rate_of(cfg);
      EXPECT_GE(rate, prev - 2 * std::sqrt(0.25 / cfg.replicates)) << eps;
      prev = rate;
    }
  }
}

TEST(Power, MonotoneInEdgePerturbation) {
  auto cfg = config(Scenario::network, 40, 3);
  cfg.replicates = 120;
  double prev = 0;
  for (Index tau : {3, 4, 5, 7}) {
    cfg.groups[1].tau = tau;
    const double rate = rate_of(cfg);
    EXPECT_GE(rate, prev - 2 * std::sqrt(0.25 / cfg.replicates)) << tau;
    prev = rate;
  }
  double prev_low = 0;
  for (Index tau : {3, 2, 1, 0}) {
    cfg.groups[1].tau = tau;
    const double rate = rate_of(cfg);
    EXPECT_GE(rate, prev_low - 2 * std::sqrt(0.25 / cfg.replicates)) << tau;
    prev_low = rate;
  }
}
