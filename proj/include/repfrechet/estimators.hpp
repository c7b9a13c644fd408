#pragma once

// Per-group and pooled sample quantities: Fréchet mean and variance,
// within-subject variability, and the variance estimators for both.
//
// All sums run over a canonical ordering of subjects and observations (see
// CanonicalGroup), so every estimate is bitwise invariant under relabeling of
// subjects within a group and of repeats within a subject.

#include <optional>
#include <string>
#include <vector>

#include "repfrechet/dataset.hpp"

namespace repfrechet {

/// A group's observations sorted by compare(): repeats within each subject,
/// then subjects lexicographically by their sorted repeat sequences.
struct CanonicalGroup {
  std::vector<std::vector<const MetricObject*>> subjects;

  Index observation_count() const noexcept;
  std::vector<const MetricObject*> observations() const;
};

CanonicalGroup canonical_order(const Group& group);

/// Squared distances every estimator needs: to the group mean, and between
/// the repeats of each subject. This is the per-group distance cache.
struct SubjectGeometry {
  Eigen::VectorXd to_mean;  ///< d^2(mean, Y_il), l = 1..r_i
  Eigen::MatrixXd within;   ///< d^2(Y_is, Y_it), zero diagonal

  Index repeats() const noexcept { return to_mean.size(); }
  /// sum_{s != t} d^2(Y_is, Y_it) over ordered pairs.
  double pair_sum() const noexcept { return within.sum(); }
};

struct GroupGeometry {
  std::vector<SubjectGeometry> subjects;

  Index observation_count() const noexcept;
  /// sum_i r_i^2
  double sum_r_squared() const noexcept;
};

GroupGeometry group_geometry(const CanonicalGroup& group, const Metric& metric,
                             const MetricObject& mean);

/// A variance estimate after guarding against floating-point cancellation.
struct VarianceEstimate {
  double value = 0.0;
  bool clamped = false;     ///< raw value was negative and was set to 0
  bool degenerate = false;  ///< value is 0 (within cancellation noise)
};

struct GroupFrechetVariance {
  MetricObject mean;
  double V_hat;
};

/// Group Fréchet mean over all N_j observations and
/// V_hat = (1/N_j) sum_i sum_l d^2(mean, Y_il).
GroupFrechetVariance group_frechet_variance(const Group& group, const Metric& metric);

double frechet_variance(const GroupGeometry& geometry);

/// rho_hat = sum_i sum_{s != t} d^2(Y_is, Y_it) / sum_i r_i (r_i - 1);
/// absent when every r_i = 1.
std::optional<double> within_subject_variability(const GroupGeometry& geometry);

/// (1/N) sum_i (sum_l d^2(mean, Y_il))^2 - (sum_i r_i^2 / N) V_hat^2
VarianceEstimate sigma2_hat(const GroupGeometry& geometry, double V_hat);

/// Variance estimator of N_j^{1/2} rho_hat; absent when rho_hat is absent.
std::optional<VarianceEstimate> gamma2_hat(const GroupGeometry& geometry, std::optional<double> rho_hat);

/// Covariance estimator between the V and rho estimates (Sigma_hat_jj).
std::optional<double> cross_covariance_hat(const GroupGeometry& geometry, double V_hat,
                                           std::optional<double> rho_hat);

struct XiEstimate {
  double value = 0.0;
  bool clamped = false;
};

/// Sigma_hat / (sigma_hat gamma_hat), clamped to [-1, 1]; absent when either
/// variance is degenerate.
std::optional<XiEstimate> xi_hat(std::optional<double> cross, const VarianceEstimate& sigma2,
                                 const std::optional<VarianceEstimate>& gamma2);

struct GroupSummary {
  std::string name;
  Index subjects = 0;
  Index N = 0;
  double lambda = 0.0;  ///< N_j / N, filled in when groups are combined
  MetricObject frechet_mean;
  double V_hat = 0.0;
  std::optional<double> rho_hat;
  VarianceEstimate sigma2;
  std::optional<VarianceEstimate> gamma2;
  std::optional<double> cross;  ///< Sigma_hat_jj
  std::optional<XiEstimate> xi;
};

GroupSummary summarize_group(const Group& group, const Metric& metric);

/// Same, reusing an existing canonical ordering and geometry.
GroupSummary summarize_group(const std::string& name, const CanonicalGroup& group,
                             const GroupGeometry& geometry, MetricObject mean);

struct PooledVariance {
  MetricObject mean;
  double V_hat;
};

/// Fréchet mean and variance of all observations with group labels ignored.
PooledVariance pooled_variance(const Dataset& dataset);

/// Pooled quantities from precomputed canonical groups and their means.
/// For the linear kinds the pooled mean is the N_j-weighted mean of the group
/// means; V_p is accumulated group by group as sum_j lambda_j W_j.
PooledVariance pooled_variance(const std::vector<CanonicalGroup>& groups,
                               const std::vector<MetricObject>& group_means, const Metric& metric,
                               ObjectKind kind);

}  // namespace repfrechet
