#include "repfrechet/estimators.hpp"

#include <algorithm>
#include <cmath>

namespace repfrechet {

namespace {

// Relative size below which a difference of two large terms is treated as
// cancellation noise.
constexpr double kCancellationTolerance = 1e-12;

VarianceEstimate guarded(double leading, double subtracted) {
  VarianceEstimate e;
  const double raw = leading - subtracted;
  const double scale = std::max(std::abs(leading), std::abs(subtracted));
  if (raw < 0.0) e.clamped = true;
  if (raw <= kCancellationTolerance * scale) {
    e.value = 0.0;
    e.degenerate = true;
  } else {
    e.value = raw;
  }
  return e;
}

bool sequence_less(const std::vector<const MetricObject*>& a, const std::vector<const MetricObject*>& b) {
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (int c = compare(*a[i], *b[i]); c != 0) return c < 0;
  }
  return a.size() < b.size();
}

}  // namespace

Index CanonicalGroup::observation_count() const noexcept {
  Index n = 0;
  for (const auto& s : subjects) n += static_cast<Index>(s.size());
  return n;
}

std::vector<const MetricObject*> CanonicalGroup::observations() const {
  std::vector<const MetricObject*> out;
  out.reserve(static_cast<std::size_t>(observation_count()));
  for (const auto& s : subjects) out.insert(out.end(), s.begin(), s.end());
  return out;
}

CanonicalGroup canonical_order(const Group& group) {
  CanonicalGroup out;
  out.subjects.reserve(group.subjects.size());
  for (const auto& s : group.subjects) {
    std::vector<const MetricObject*> obs;
    obs.reserve(s.observations.size());
    for (const auto& o : s.observations) obs.push_back(&o);
    std::stable_sort(obs.begin(), obs.end(),
                     [](const MetricObject* a, const MetricObject* b) { return compare(*a, *b) < 0; });
    out.subjects.push_back(std::move(obs));
  }
  std::stable_sort(out.subjects.begin(), out.subjects.end(), sequence_less);
  return out;
}

Index GroupGeometry::observation_count() const noexcept {
  Index n = 0;
  for (const auto& s : subjects) n += s.repeats();
  return n;
}

double GroupGeometry::sum_r_squared() const noexcept {
  double total = 0.0;
  for (const auto& s : subjects) total += static_cast<double>(s.repeats() * s.repeats());
  return total;
}

GroupGeometry group_geometry(const CanonicalGroup& group, const Metric& metric,
                             const MetricObject& mean) {
  GroupGeometry g;
  g.subjects.reserve(group.subjects.size());
  for (const auto& obs : group.subjects) {
    const Index r = static_cast<Index>(obs.size());
    SubjectGeometry s;
    s.to_mean.resize(r);
    s.within = Eigen::MatrixXd::Zero(r, r);
    for (Index l = 0; l < r; ++l) s.to_mean[l] = metric.squared(mean, *obs[static_cast<std::size_t>(l)]);
    for (Index a = 0; a < r; ++a) {
      for (Index b = a + 1; b < r; ++b) {
        const double d2 = metric.squared(*obs[static_cast<std::size_t>(a)], *obs[static_cast<std::size_t>(b)]);
        s.within(a, b) = d2;
        s.within(b, a) = d2;
      }
    }
    g.subjects.push_back(std::move(s));
  }
  return g;
}

double frechet_variance(const GroupGeometry& geometry) {
  double total = 0.0;
  for (const auto& s : geometry.subjects) total += s.to_mean.sum();
  return total / static_cast<double>(geometry.observation_count());
}

GroupFrechetVariance group_frechet_variance(const Group& group, const Metric& metric) {
  const CanonicalGroup canon = canonical_order(group);
  const auto obs = canon.observations();
  if (obs.empty()) throw DomainError("group '" + group.name + "' has no observations");
  MetricObject mean = frechet_mean(metric, std::span<const MetricObject* const>(obs));
  const GroupGeometry geometry = group_geometry(canon, metric, mean);
  return {std::move(mean), frechet_variance(geometry)};
}

std::optional<double> within_subject_variability(const GroupGeometry& geometry) {
  double pairs = 0.0;
  double total = 0.0;
  for (const auto& s : geometry.subjects) {
    const auto r = static_cast<double>(s.repeats());
    pairs += r * (r - 1.0);
    total += s.pair_sum();
  }
  if (pairs == 0.0) return std::nullopt;
  return total / pairs;
}

VarianceEstimate sigma2_hat(const GroupGeometry& geometry, double V_hat) {
  const auto N = static_cast<double>(geometry.observation_count());
  double squares = 0.0;
  for (const auto& s : geometry.subjects) {
    const double row = s.to_mean.sum();
    squares += row * row;
  }
  return guarded(squares / N, geometry.sum_r_squared() / N * V_hat * V_hat);
}

std::optional<VarianceEstimate> gamma2_hat(const GroupGeometry& geometry, std::optional<double> rho_hat) {
  if (!rho_hat) return std::nullopt;
  const auto N = static_cast<double>(geometry.observation_count());
  const double excess = geometry.sum_r_squared() - N;
  if (!(excess > 0.0)) return std::nullopt;
  double squares = 0.0;
  double weight = 0.0;
  for (const auto& s : geometry.subjects) {
    const double p = s.pair_sum();
    const auto r = static_cast<double>(s.repeats());
    squares += p * p;
    weight += r * r * (r - 1.0) * (r - 1.0);
  }
  const double denom = excess * excess;
  return guarded(N / denom * squares, N * weight / denom * (*rho_hat) * (*rho_hat));
}

std::optional<double> cross_covariance_hat(const GroupGeometry& geometry, double V_hat,
                                           std::optional<double> rho_hat) {
  if (!rho_hat) return std::nullopt;
  const auto N = static_cast<double>(geometry.observation_count());
  const double excess = geometry.sum_r_squared() - N;
  if (!(excess > 0.0)) return std::nullopt;
  double products = 0.0;
  double weight = 0.0;
  for (const auto& s : geometry.subjects) {
    const auto r = static_cast<double>(s.repeats());
    products += s.to_mean.sum() * s.pair_sum();
    weight += r * r * (r - 1.0);
  }
  return (products - weight * V_hat * (*rho_hat)) / excess;
}

std::optional<XiEstimate> xi_hat(std::optional<double> cross, const VarianceEstimate& sigma2,
                                 const std::optional<VarianceEstimate>& gamma2) {
  if (!cross || !gamma2 || sigma2.degenerate || gamma2->degenerate) return std::nullopt;
  const double raw = *cross / std::sqrt(sigma2.value * gamma2->value);
  XiEstimate xi;
  xi.value = std::clamp(raw, -1.0, 1.0);
  xi.clamped = std::fabs(raw) >= 1.0;
  return xi;
}

GroupSummary summarize_group(const std::string& name, const CanonicalGroup& group,
                             const GroupGeometry& geometry, MetricObject mean) {
  const double V = frechet_variance(geometry);
  const auto rho = within_subject_variability(geometry);
  const VarianceEstimate s2 = sigma2_hat(geometry, V);
  const auto g2 = gamma2_hat(geometry, rho);
  const auto cross = cross_covariance_hat(geometry, V, rho);
  return GroupSummary{
      .name = name,
      .subjects = static_cast<Index>(group.subjects.size()),
      .N = geometry.observation_count(),
      .lambda = 0.0,
      .frechet_mean = std::move(mean),
      .V_hat = V,
      .rho_hat = rho,
      .sigma2 = s2,
      .gamma2 = g2,
      .cross = cross,
      .xi = xi_hat(cross, s2, g2),
  };
}

GroupSummary summarize_group(const Group& group, const Metric& metric) {
  const CanonicalGroup canon = canonical_order(group);
  const auto obs = canon.observations();
  if (obs.empty()) throw DomainError("group '" + group.name + "' has no observations");
  MetricObject mean = frechet_mean(metric, std::span<const MetricObject* const>(obs));
  const GroupGeometry geometry = group_geometry(canon, metric, mean);
  return summarize_group(group.name, canon, geometry, std::move(mean));
}

PooledVariance pooled_variance(const std::vector<CanonicalGroup>& groups,
                               const std::vector<MetricObject>& group_means, const Metric& metric,
                               ObjectKind kind) {
  if (groups.empty()) throw DomainError("pooled variance of an empty dataset");
  std::vector<double> counts;
  double N = 0.0;
  for (const auto& g : groups) {
    counts.push_back(static_cast<double>(g.observation_count()));
    N += counts.back();
  }

  std::optional<MetricObject> mean;
  if (kind == ObjectKind::precomputed) {
    std::vector<const MetricObject*> all;
    for (const auto& g : groups) {
      const auto obs = g.observations();
      all.insert(all.end(), obs.begin(), obs.end());
    }
    std::stable_sort(all.begin(), all.end(),
                     [](const MetricObject* a, const MetricObject* b) { return compare(*a, *b) < 0; });
    mean = frechet_mean(metric, std::span<const MetricObject* const>(all));
  } else {
    std::vector<const MetricObject*> means;
    for (const auto& m : group_means) means.push_back(&m);
    if (groups.size() == 1) {
      mean = group_means.front();
    } else {
      mean = frechet_mean(metric, std::span<const MetricObject* const>(means), counts);
    }
  }

  double V = 0.0;
  for (std::size_t j = 0; j < groups.size(); ++j) {
    const GroupGeometry to_pooled = [&] {
      GroupGeometry g;
      for (const auto& obs : groups[j].subjects) {
        SubjectGeometry s;
        s.to_mean.resize(static_cast<Index>(obs.size()));
        for (std::size_t l = 0; l < obs.size(); ++l) s.to_mean[static_cast<Index>(l)] = metric.squared(*mean, *obs[l]);
        g.subjects.push_back(std::move(s));
      }
      return g;
    }();
    V += counts[j] / N * frechet_variance(to_pooled);
  }
  return {std::move(*mean), V};
}

PooledVariance pooled_variance(const Dataset& dataset) {
  const Metric metric = dataset.metric();
  std::vector<CanonicalGroup> groups;
  std::vector<MetricObject> means;
  for (const auto& g : dataset.groups) {
    groups.push_back(canonical_order(g));
    const auto obs = groups.back().observations();
    if (obs.empty()) throw DomainError("group '" + g.name + "' has no observations");
    means.push_back(frechet_mean(metric, std::span<const MetricObject* const>(obs)));
  }
  return pooled_variance(groups, means, metric, dataset.kind);
}

}  // namespace repfrechet
