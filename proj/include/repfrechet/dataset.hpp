#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "repfrechet/metric.hpp"

namespace repfrechet {

/// One subject's repeated observations Y_i1..Y_ir (r >= 1).
struct Subject {
  std::string id;
  std::vector<MetricObject> observations;

  Index repeats() const noexcept { return static_cast<Index>(observations.size()); }
};

struct Group {
  std::string name;
  std::vector<Subject> subjects;

  /// N_j, the number of observations in the group.
  Index observation_count() const noexcept;
};

/// k groups of subjects sharing one metric space. The sole input to the test.
struct Dataset {
  ObjectKind kind = ObjectKind::vector;
  std::vector<Group> groups;
  /// Grid size for distribution data (also used to tabulate raw samples).
  std::optional<Index> grid_size;
  /// Declared compact support for distribution data.
  std::optional<std::pair<double, double>> support;
  /// Distance matrix for precomputed mode.
  std::shared_ptr<const Eigen::MatrixXd> distances;

  Index observation_count() const noexcept;
  Metric metric() const { return Metric(distances); }
};

/// Checks group/subject cardinalities, homogeneous kind and shape, support,
/// and precomputed indices. Errors name the offending group/subject/index.
void validate(const Dataset& dataset);

/// Observations in (group, subject, repeat) order.
std::vector<const MetricObject*> flatten(const Dataset& dataset);

/// Pairwise distances over all N observations in flatten() order.
/// Symmetric with zero diagonal; each unordered pair is evaluated once.
Eigen::MatrixXd distance_matrix(const Dataset& dataset, int threads = 1);

/// Multiply every distance by c > 0 (vector, laplacian, distribution and
/// composite values are scaled; precomputed matrices are scaled entrywise).
Dataset scale_distances(const Dataset& dataset, double c);

}  // namespace repfrechet
