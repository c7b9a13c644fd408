#pragma once

// Metric-object representations, their distances and Fréchet means.
//
// Every supported space has a closed-form squared distance on Eigen storage.
// The kernels below are templated on the Eigen expression type so they accept
// blocks, maps and temporaries without copies; the object wrappers store
// doubles and enforce the per-kind invariants at construction.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "repfrechet/error.hpp"

namespace repfrechet {

using Index = Eigen::Index;

/// Absolute tolerance used for structural invariants (symmetry, row sums).
inline constexpr double kStructuralTolerance = 1e-10;

/// Default number of midpoint quantile grid points.
inline constexpr Index kDefaultGridSize = 1000;

// ---------------------------------------------------------------------------
// Distance kernels
// ---------------------------------------------------------------------------

/// Midpoint-rule squared 2-Wasserstein distance between two quantile arrays
/// tabulated on the same grid: mean of squared differences.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar wasserstein_squared(const Eigen::MatrixBase<DerivedA>& a,
                                              const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  if (a.size() != b.size()) {
    throw ShapeError("quantile grids differ: " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  }
  if (a.size() == 0) return Scalar(0);
  return (a - b).squaredNorm() / static_cast<Scalar>(a.size());
}

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar wasserstein_distance(const Eigen::MatrixBase<DerivedA>& a,
                                               const Eigen::MatrixBase<DerivedB>& b) {
  using std::sqrt;
  return sqrt(wasserstein_squared(a, b));
}

/// Squared Frobenius norm of the difference, trace((A-B)^T (A-B)).
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar frobenius_squared(const Eigen::MatrixBase<DerivedA>& a,
                                            const Eigen::MatrixBase<DerivedB>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("matrix dimensions differ: " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
  }
  return (a - b).squaredNorm();
}

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar frobenius_distance(const Eigen::MatrixBase<DerivedA>& a,
                                             const Eigen::MatrixBase<DerivedB>& b) {
  using std::sqrt;
  return sqrt(frobenius_squared(a, b));
}

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar euclidean_squared(const Eigen::MatrixBase<DerivedA>& a,
                                            const Eigen::MatrixBase<DerivedB>& b) {
  if (a.size() != b.size()) {
    throw ShapeError("vector dimensions differ: " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  }
  return (a - b).squaredNorm();
}

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar euclidean_distance(const Eigen::MatrixBase<DerivedA>& a,
                                             const Eigen::MatrixBase<DerivedB>& b) {
  using std::sqrt;
  return sqrt(euclidean_squared(a, b));
}

// ---------------------------------------------------------------------------
// Object types
// ---------------------------------------------------------------------------

enum class ObjectKind { distribution, laplacian, vector, composite, precomputed };

const char* to_string(ObjectKind kind) noexcept;
ObjectKind object_kind_from_string(const std::string& name);

/// Quantile function tabulated at the midpoints (m - 1/2)/M of (0,1).
class QuantileDistribution {
 public:
  /// Throws ValidationError unless values are finite and non-decreasing.
  explicit QuantileDistribution(Eigen::VectorXd values);

  const Eigen::VectorXd& values() const noexcept { return values_; }
  Index grid_size() const noexcept { return values_.size(); }

  /// True when every value lies in [lo, hi] (absolute slack kStructuralTolerance).
  bool within_support(double lo, double hi) const noexcept;

 private:
  Eigen::VectorXd values_;
};

/// Graph Laplacian K = E - A: symmetric, zero row sums, nonpositive off-diagonal.
class GraphLaplacian {
 public:
  /// Throws ValidationError when an invariant fails.
  explicit GraphLaplacian(Eigen::MatrixXd matrix);

  /// Builds E - A from a symmetric 0/1 (or weighted) adjacency matrix.
  static GraphLaplacian from_adjacency(const Eigen::MatrixXd& adjacency);

  const Eigen::MatrixXd& matrix() const noexcept { return matrix_; }
  Index nodes() const noexcept { return matrix_.rows(); }

 private:
  Eigen::MatrixXd matrix_;
};

/// (K + K^T) / 2, for inputs that are symmetric only up to export noise.
Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& matrix);

class EuclideanVector {
 public:
  explicit EuclideanVector(Eigen::VectorXd coords);

  const Eigen::VectorXd& coords() const noexcept { return coords_; }
  Index dimension() const noexcept { return coords_.size(); }

 private:
  Eigen::VectorXd coords_;
};

/// Reference to row/column `index` of a dataset-level distance matrix.
struct PrecomputedRef {
  Index index = 0;
};

class MetricObject;

/// Ordered tuple of non-composite objects; squared distances add across parts.
struct CompositeObject {
  std::vector<MetricObject> parts;
};

class MetricObject {
 public:
  using Storage = std::variant<QuantileDistribution, GraphLaplacian, EuclideanVector,
                               CompositeObject, PrecomputedRef>;

  MetricObject(QuantileDistribution d) : value_(std::move(d)) {}
  MetricObject(GraphLaplacian g) : value_(std::move(g)) {}
  MetricObject(EuclideanVector v) : value_(std::move(v)) {}
  MetricObject(CompositeObject c);
  MetricObject(PrecomputedRef r) : value_(r) {}

  ObjectKind kind() const noexcept { return static_cast<ObjectKind>(value_.index()); }
  const Storage& storage() const noexcept { return value_; }

  template <typename T>
  const T& as() const {
    return std::get<T>(value_);
  }

 private:
  Storage value_;
};

/// Shape signature: kind plus dimensions (parts recursively for composites).
struct ObjectSchema {
  ObjectKind kind = ObjectKind::vector;
  Index rows = 0;
  Index cols = 0;
  std::vector<ObjectSchema> parts;

  friend bool operator==(const ObjectSchema&, const ObjectSchema&) = default;
};

ObjectSchema schema_of(const MetricObject& object);
std::string describe(const ObjectSchema& schema);

/// Total order on objects of equal schema (lexicographic on stored values).
/// Used to fix summation order so estimators are exactly permutation invariant.
int compare(const MetricObject& a, const MetricObject& b);

// ---------------------------------------------------------------------------
// Metric
// ---------------------------------------------------------------------------

/// Distance context. Closed-form kinds need no state; precomputed mode carries
/// the shared distance matrix the PrecomputedRef indices point into.
class Metric {
 public:
  Metric() = default;
  explicit Metric(std::shared_ptr<const Eigen::MatrixXd> precomputed);

  /// Throws ValidationError unless the matrix is square, symmetric, has a zero
  /// diagonal and nonnegative entries. The triangle inequality is not checked.
  static void validate_precomputed(const Eigen::MatrixXd& dist);

  bool has_precomputed() const noexcept { return static_cast<bool>(precomputed_); }
  const Eigen::MatrixXd& precomputed() const;

  double squared(const MetricObject& a, const MetricObject& b) const;
  double operator()(const MetricObject& a, const MetricObject& b) const {
    return std::sqrt(squared(a, b));
  }

 private:
  std::shared_ptr<const Eigen::MatrixXd> precomputed_;
};

double composite_distance(const CompositeObject& a, const CompositeObject& b);

/// Minimizer of sum_i w_i d^2(x, objects[i]).
///
/// Closed form for the linear kinds (pointwise quantile average, entrywise
/// Laplacian average, coordinate average, part-wise for composites). In
/// precomputed mode the minimization is restricted to the listed objects
/// (medoid); ties go to the lowest listed position.
MetricObject frechet_mean(const Metric& metric, std::span<const MetricObject* const> objects,
                          std::span<const double> weights = {});

MetricObject frechet_mean(const Metric& metric, std::span<const MetricObject> objects,
                          std::span<const double> weights = {});

/// Empirical quantile function at midpoints t_m = (m - 1/2)/M using the
/// left-continuous inverse of the empirical CDF, X_(ceil(t_m W)).
QuantileDistribution quantile_from_samples(std::span<const double> samples, Index grid_size);

/// Midpoint grid t_m = (m - 1/2)/M.
Eigen::VectorXd midpoint_grid(Index grid_size);

}  // namespace repfrechet
