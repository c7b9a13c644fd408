#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "repfrechet/baselines.hpp"
#include "test_util.hpp"

using namespace repfrechet;

namespace {

Dataset uneven(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::uniform_int_distribution<int> r(1, 4);
  std::vector<testutil::Scalars> groups(2);
  for (auto& g : groups) {
    for (int i = 0; i < 12; ++i) {
      const double a = z(rng);
      const int ri = i < 3 ? 3 : r(rng);
      std::vector<double> reps;
      for (int l = 0; l < ri; ++l) reps.push_back(a + z(rng));
      g.push_back(reps);
    }
  }
  return testutil::scalar_dataset(groups);
}

}  // namespace

TEST(Collapse, ReplacesSubjectsByTheirMeans) {
  const Dataset d = testutil::scalar_dataset({{{0, 2}, {1, 4, 7}}, {{3}}});
  const Dataset c = subject_collapse(d);
  ASSERT_EQ(c.groups[0].subjects[0].repeats(), 1);
  EXPECT_DOUBLE_EQ(c.groups[0].subjects[0].observations[0].as<EuclideanVector>().coords()[0], 1.0);
  EXPECT_DOUBLE_EQ(c.groups[0].subjects[1].observations[0].as<EuclideanVector>().coords()[0], 4.0);
  EXPECT_DOUBLE_EQ(c.groups[1].subjects[0].observations[0].as<EuclideanVector>().coords()[0], 3.0);
}

TEST(AfTest, UsesReducedStatistic) {
  const auto r = af_test(uneven(1));
  EXPECT_FALSE(r.components.within);
  EXPECT_EQ(r.calibration.eigenvalues.size(), 1u);
  EXPECT_EQ(r.N, 24);
}

TEST(Resample, KeepsOnlyEligibleSubjects) {
  const Dataset d = uneven(2);
  const Dataset s = balanced_subsample(d, 3, 9, 0);
  for (std::size_t j = 0; j < d.groups.size(); ++j) {
    Index eligible = 0;
    for (const auto& sub : d.groups[j].subjects) eligible += sub.repeats() >= 3;
    EXPECT_EQ(static_cast<Index>(s.groups[j].subjects.size()), eligible);
    for (const auto& sub : s.groups[j].subjects) EXPECT_EQ(sub.repeats(), 3);
  }
}

TEST(Resample, SubsetsComeFromTheSubject) {
  const Dataset d = testutil::scalar_dataset({{{1, 2, 3, 4, 5}}, {{10, 20, 30}}});
  for (Index b = 0; b < 20; ++b) {
    const Dataset s = balanced_subsample(d, 2, 4, b);
    const auto& o = s.groups[0].subjects[0].observations;
    const double x = o[0].as<EuclideanVector>().coords()[0], y = o[1].as<EuclideanVector>().coords()[0];
    EXPECT_LT(x, y);
    EXPECT_GE(x, 1.0);
    EXPECT_LE(y, 5.0);
  }
}

TEST(Resample, DeterministicPerReplicate) {
  const Dataset d = uneven(3);
  const auto a = balanced_resample(d, {2, 4, 77});
  const auto b = balanced_resample(d, {2, 4, 77});
  ASSERT_EQ(a.size(), 4u);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < 2; ++j)
      for (std::size_t s = 0; s < a[i].groups[j].subjects.size(); ++s)
        for (std::size_t l = 0; l < 2; ++l)
          EXPECT_EQ(compare(a[i].groups[j].subjects[s].observations[l], b[i].groups[j].subjects[s].observations[l]), 0);
}

TEST(Resample, EmptiedGroupIsNamed) {
  const Dataset d = testutil::scalar_dataset({{{0, 1, 2}}, {{0, 1}, {3}}});
  try {
    balanced_subsample(d, 3, 1, 0);
    FAIL() << "expected a domain error";
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("'g1'"), std::string::npos);
  }
}

TEST(Aggregate, ConstantListIsFixedPoint) {
  for (double p : {0.001, 0.05, 0.3, 0.5, 0.77, 0.999}) {
    const auto r = aggregate_p_values(std::vector<double>(7, p));
    EXPECT_NEAR(r.overall_p, p, 1e-14);
  }
}

TEST(Aggregate, PairValue) {
  const auto r = aggregate_p_values({0.2, 0.8});
  const double theta = 0.5 * (std::atanh(0.2) + std::atanh(0.8));
  EXPECT_NEAR(r.theta, theta, 1e-15);
  EXPECT_NEAR(r.overall_p, std::tanh(theta), 1e-15);
  EXPECT_NEAR(r.overall_p, 0.5721, 1e-4);
}

TEST(Aggregate, OnesAreClipped) {
  const auto r = aggregate_p_values({1.0, 1.0});
  EXPECT_EQ(r.clipped, 2);
  EXPECT_NEAR(r.overall_p, 1.0, 1e-11);
  EXPECT_THROW(aggregate_p_values({}), DomainError);
  EXPECT_THROW(aggregate_p_values({1.5}), DomainError);
}

TEST(BalancedAf, SingleResampleEqualsItsPValue) {
  const Dataset d = uneven(4);
  BaselineOptions opts;
  opts.plan = {2, 1, 5};
  const auto rep = run_balanced_af(d, opts);
  ASSERT_EQ(rep.aggregate.p_values.size(), 1u);
  EXPECT_NEAR(rep.aggregate.overall_p, rep.aggregate.p_values[0], 1e-14);
  EXPECT_EQ(rep.aggregate.p_values[0], af_test(balanced_subsample(d, 2, 5, 0)).p_value);
}

TEST(BalancedAf, ThreadCountDoesNotChangeResult) {
  const Dataset d = uneven(6);
  BaselineOptions one, four;
  one.plan = four.plan = {2, 9, 3};
  four.threads = 4;
  EXPECT_EQ(run_balanced_af(d, one).aggregate.p_values, run_balanced_af(d, four).aggregate.p_values);
}

TEST(BalancedAf, IdenticalGroupsGiveOnes) {
  const testutil::Scalars g{{0, 1}, {2, 3}, {5, 5.5}, {9}};
  BaselineOptions opts;
  opts.plan = {2, 5, 1};
  const auto rep = run_balanced_af(testutil::scalar_dataset({g, g}), opts);
  EXPECT_NEAR(rep.aggregate.overall_p, 1.0, 1e-11);
}
