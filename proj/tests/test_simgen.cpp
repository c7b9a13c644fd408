#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <boost/math/distributions/normal.hpp>

#include "repfrechet/rng.hpp"
#include "repfrechet/simgen.hpp"

using namespace repfrechet;

namespace {

ScenarioConfig small(Scenario kind, Index n = 20, Index r = 3) {
  ScenarioConfig cfg;
  cfg.kind = kind;
  for (auto& g : cfg.groups) {
    g.n = n;
    g.repeats = RepeatSpec::constant(r);
  }
  cfg.grid_size = 200;
  cfg.replicates = 4;
  cfg.seed = 5;
  return cfg;
}

double first_coord(const MetricObject& o) { return o.as<EuclideanVector>().coords()[0]; }

}  // namespace

TEST(NormalQuantile, MatchesBoostDistribution) {
  boost::math::normal n;
  for (double u : {1e-12, 1e-6, 0.01, 0.3, 0.5, 0.7, 0.99, 1 - 1e-9}) EXPECT_NEAR(normal_quantile(u), boost::math::quantile(n, u), 1e-9);
  EXPECT_THROW(normal_quantile(0.0), DomainError);
}

TEST(TruncatedNormal, MatchesInverseCdfAndStaysInSupport) {
  const Eigen::VectorXd grid = midpoint_grid(500);
  boost::math::normal n;
  for (double theta : {-9.5, -1.0, 0.0, 3.0, 9.9}) {
    const auto q = truncated_normal_quantiles(theta, 1.3, -10, 10, grid);
    EXPECT_GE(q.minCoeff(), -10.0);
    EXPECT_LE(q.maxCoeff(), 10.0);
    for (Index m = 1; m < q.size(); ++m) EXPECT_GE(q[m], q[m - 1]);
    const double a = boost::math::cdf(n, (-10 - theta) / 1.3), b = boost::math::cdf(n, (10 - theta) / 1.3);
    for (Index m : {0, 100, 250, 499}) {
      const double expected = theta + 1.3 * boost::math::quantile(n, a + grid[m] * (b - a));
      EXPECT_NEAR(q[m], expected, 1e-8) << theta << " " << m;
    }
  }
}

TEST(AttachmentGraph, IsATreeOnAllNodes) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 50; ++t) {
    const auto a = attachment_graph(10, 1.2, rng);
    EXPECT_EQ(a.sum(), 18.0);  // 9 edges, each counted twice
    EXPECT_EQ(a.diagonal().sum(), 0.0);
    EXPECT_TRUE(a.isApprox(a.transpose()));
    for (Index i = 0; i < 10; ++i) EXPECT_GE(a.row(i).sum(), 1.0);
  }
}

TEST(ToggleEdges, ChangesExactlyTauPairs) {
  std::mt19937_64 rng(2);
  const auto base = attachment_graph(10, 1.0, rng);
  for (Index tau : {0, 1, 3, 5, 45}) {
    const auto t = toggle_edges(base, tau, rng);
    EXPECT_EQ((t - base).cwiseAbs().sum(), 2.0 * tau);
    EXPECT_EQ(t.diagonal().sum(), 0.0);
    const auto k0 = GraphLaplacian::from_adjacency(base).matrix(), k1 = GraphLaplacian::from_adjacency(t).matrix();
    if (tau == 1) EXPECT_DOUBLE_EQ(frobenius_squared(k0, k1), 4.0);
  }
  EXPECT_THROW(toggle_edges(base, 46, rng), DomainError);
}

TEST(RepeatSpec, Parse) {
  EXPECT_TRUE(RepeatSpec::parse("mixed").mixed);
  EXPECT_EQ(RepeatSpec::parse("5").fixed, 5);
  EXPECT_THROW(RepeatSpec::parse("0"), DomainError);
  EXPECT_THROW(RepeatSpec::parse("2x"), DomainError);
}

TEST(DrawRepeats, MixedGroupAlwaysHasAPair) {
  std::mt19937_64 rng(3);
  GroupParams g;
  g.n = 1;
  g.repeats = RepeatSpec::uniform123();
  Index redraws = 0;
  for (int t = 0; t < 300; ++t) EXPECT_GE(draw_repeats(g, rng, &redraws)[0], 2);
  EXPECT_GT(redraws, 0);  // one subject: r = 1 with probability 1/3
}

TEST(Generators, DeterministicPerReplicate) {
  for (auto kind : {Scenario::distributional, Scenario::network, Scenario::vector, Scenario::composite}) {
    const auto cfg = small(kind, 5, 2);
    const Dataset a = generate_replicate(cfg, 3), b = generate_replicate(cfg, 3), c = generate_replicate(cfg, 4);
    const auto fa = flatten(a), fb = flatten(b), fc = flatten(c);
    ASSERT_EQ(fa.size(), fb.size());
    bool differs = false;
    for (std::size_t i = 0; i < fa.size(); ++i) {
      EXPECT_EQ(compare(*fa[i], *fb[i]), 0);
      if (i < fc.size() && compare(*fa[i], *fc[i]) != 0) differs = true;
    }
    EXPECT_TRUE(differs);
    EXPECT_NO_THROW(validate(a));
  }
}

TEST(Generators, ObjectsSatisfyInvariants) {
  const Dataset d = generate_replicate(small(Scenario::distributional), 0);
  for (const auto* o : flatten(d)) EXPECT_TRUE(o->as<QuantileDistribution>().within_support(-10, 10));
  const Dataset g = generate_replicate(small(Scenario::network), 0);
  for (const auto* o : flatten(g)) EXPECT_NO_THROW(GraphLaplacian(o->as<GraphLaplacian>().matrix()));
}

TEST(Generators, PerfectCorrelationGivesIdenticalRepeats) {
  auto cfg = small(Scenario::distributional);
  for (auto& g : cfg.groups) {
    g.iota = 1.0;
    g.eps = 0.0;
  }
  const Dataset d = generate_replicate(cfg, 0);
  const Metric metric;
  for (const auto& g : d.groups)
    for (const auto& s : g.subjects)
      for (const auto& o : s.observations) EXPECT_EQ(metric.squared(o, s.observations[0]), 0.0);
  auto v = small(Scenario::vector);
  v.groups[0].iota = v.groups[1].iota = 1.0;
  const Dataset dv = generate_replicate(v, 0);
  for (const auto& s : dv.groups[0].subjects) EXPECT_EQ(metric.squared(s.observations[0], s.observations[1]), 0.0);
}

TEST(Generators, ZeroTauGivesIdenticalNetworkRepeats) {
  auto cfg = small(Scenario::network);
  cfg.groups[0].tau = cfg.groups[1].tau = 0;
  const Dataset d = generate_replicate(cfg, 0);
  const Metric metric;
  for (const auto& s : d.groups[1].subjects) EXPECT_EQ(metric.squared(s.observations[0], s.observations[2]), 0.0);
}

TEST(Generators, CompositeWithNoVariationCollapses) {
  auto cfg = small(Scenario::composite, 5, 3);
  for (auto& g : cfg.groups) {
    g.tau = 0;
    g.iota = 1.0;
    g.eps = 0.0;
  }
  const Dataset d = generate_replicate(cfg, 1);
  const Metric metric;
  for (const auto& g : d.groups)
    for (const auto& s : g.subjects) EXPECT_EQ(metric.squared(s.observations[0], s.observations[1]), 0.0);
  // Parts share the latent location: the distribution centre follows the first vector coordinate.
  for (const auto& s : d.groups[0].subjects) {
    const auto& obs = s.observations[0].as<CompositeObject>();
    ASSERT_EQ(obs.parts.size(), 3u);
    const auto& q = obs.parts[0].as<QuantileDistribution>().values();
    const double median = 0.5 * (q[99] + q[100]);
    EXPECT_NEAR(median, first_coord(obs.parts[2]), 0.05);
  }
}

TEST(Generators, ExchangeableMomentsMatch) {
  // Var(latent) = eps^2 + 1, Cov(repeat s, repeat t) = eps^2 + iota.
  ScenarioConfig cfg = small(Scenario::vector, 20000, 2);
  cfg.vector_dim = 1;
  for (auto& g : cfg.groups) {
    g.beta = 0.7;
    g.eps = 0.8;
    g.iota = 0.3;
  }
  const Dataset d = generate_replicate(cfg, 0);
  double m = 0, v = 0, c = 0;
  const auto& subs = d.groups[0].subjects;
  const double n = static_cast<double>(subs.size());
  for (const auto& s : subs) m += first_coord(s.observations[0]);
  m /= n;
  for (const auto& s : subs) {
    const double a = first_coord(s.observations[0]) - m, b = first_coord(s.observations[1]) - m;
    v += a * a;
    c += a * b;
  }
  v /= n;
  c /= n;
  const double var = 0.64 + 1, cov = 0.64 + 0.3;
  EXPECT_NEAR(m, 0.7, 3 * std::sqrt(var / n));
  EXPECT_NEAR(v, var, 3 * var * std::sqrt(2 / n));
  EXPECT_NEAR(c, cov, 3 * std::sqrt((var * var + cov * cov) / n));
}

TEST(Study, ReportShapeAndDeterminism) {
  auto cfg = small(Scenario::vector, 15, 2);
  cfg.run_af = true;
  cfg.replicates = 6;
  const auto a = run_study(cfg);
  cfg.threads = 3;
  const auto b = run_study(cfg);
  ASSERT_EQ(a.methods.size(), 2u);
  EXPECT_EQ(a.method("q").p_values, b.method("q").p_values);
  EXPECT_EQ(a.method("af").p_values, b.method("af").p_values);
  for (const auto& m : a.methods) {
    EXPECT_GE(m.rate, 0.0);
    EXPECT_LE(m.rate, 1.0);
    EXPECT_DOUBLE_EQ(m.se, std::sqrt(m.rate * (1 - m.rate) / 6));
  }
}

TEST(Study, InvalidConfigurationRejected) {
  auto cfg = small(Scenario::vector);
  cfg.groups[0].iota = 1.5;
  EXPECT_THROW(cfg.validate(), DomainError);
  cfg = small(Scenario::vector);
  cfg.replicates = 0;
  EXPECT_THROW(run_study(cfg), DomainError);
  cfg = small(Scenario::vector);
  cfg.groups[1].eps = -1;
  EXPECT_THROW(run_study(cfg), DomainError);
}

TEST(Study, ErrorsCarryReplicateIndex) {
  auto cfg = small(Scenario::vector, 3, 1);  // r = 1 everywhere: full test undefined
  try {
    run_study(cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::calibration);
    EXPECT_NE(std::string(e.what()).find("replicate 0"), std::string::npos);
  }
}
