#include "repfrechet/metric.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <sstream>

namespace repfrechet {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::shape: return "shape_error";
    case ErrorCode::domain: return "domain_error";
    case ErrorCode::validation: return "validation_error";
    case ErrorCode::parse: return "parse_error";
    case ErrorCode::calibration: return "calibration_error";
    case ErrorCode::numeric: return "numeric_error";
  }
  return "error";
}

const char* to_string(ObjectKind kind) noexcept {
  switch (kind) {
    case ObjectKind::distribution: return "distribution";
    case ObjectKind::laplacian: return "laplacian";
    case ObjectKind::vector: return "vector";
    case ObjectKind::composite: return "composite";
    case ObjectKind::precomputed: return "precomputed";
  }
  return "unknown";
}

ObjectKind object_kind_from_string(const std::string& name) {
  if (name == "distribution") return ObjectKind::distribution;
  if (name == "laplacian") return ObjectKind::laplacian;
  if (name == "vector") return ObjectKind::vector;
  if (name == "composite") return ObjectKind::composite;
  if (name == "precomputed") return ObjectKind::precomputed;
  throw ParseError("unknown metric kind '" + name + "'");
}

// ---------------------------------------------------------------------------

QuantileDistribution::QuantileDistribution(Eigen::VectorXd values) : values_(std::move(values)) {
  if (values_.size() == 0) throw ValidationError("quantile array is empty");
  for (Index m = 0; m < values_.size(); ++m) {
    if (!std::isfinite(values_[m])) {
      throw ValidationError("quantile array has a non-finite value at grid index " +
                            std::to_string(m));
    }
    if (m > 0 && values_[m] < values_[m - 1]) {
      throw ValidationError("quantile array is not non-decreasing at grid index " +
                            std::to_string(m));
    }
  }
}

bool QuantileDistribution::within_support(double lo, double hi) const noexcept {
  return values_.minCoeff() >= lo - kStructuralTolerance &&
         values_.maxCoeff() <= hi + kStructuralTolerance;
}

GraphLaplacian::GraphLaplacian(Eigen::MatrixXd matrix) : matrix_(std::move(matrix)) {
  const Index p = matrix_.rows();
  if (p == 0 || matrix_.cols() != p) throw ValidationError("Laplacian must be a nonempty square matrix");
  if (!matrix_.allFinite()) throw ValidationError("Laplacian has non-finite entries");
  for (Index i = 0; i < p; ++i) {
    for (Index j = i + 1; j < p; ++j) {
      if (std::abs(matrix_(i, j) - matrix_(j, i)) > kStructuralTolerance) {
        throw ValidationError("Laplacian is not symmetric at (" + std::to_string(i) + "," +
                              std::to_string(j) + ")");
      }
      if (matrix_(i, j) > kStructuralTolerance || matrix_(j, i) > kStructuralTolerance) {
        throw ValidationError("Laplacian has a positive off-diagonal entry at (" +
                              std::to_string(i) + "," + std::to_string(j) + ")");
      }
    }
    if (std::abs(matrix_.row(i).sum()) > kStructuralTolerance) {
      throw ValidationError("Laplacian row " + std::to_string(i) + " does not sum to zero");
    }
  }
}

GraphLaplacian GraphLaplacian::from_adjacency(const Eigen::MatrixXd& adjacency) {
  Eigen::MatrixXd k = -adjacency;
  k.diagonal() = adjacency.rowwise().sum() - adjacency.diagonal();
  return GraphLaplacian(std::move(k));
}

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& matrix) {
  if (matrix.rows() != matrix.cols()) throw ShapeError("cannot symmetrize a non-square matrix");
  return 0.5 * (matrix + matrix.transpose());
}

EuclideanVector::EuclideanVector(Eigen::VectorXd coords) : coords_(std::move(coords)) {
  if (coords_.size() == 0) throw ValidationError("vector is empty");
  if (!coords_.allFinite()) throw ValidationError("vector has non-finite coordinates");
}

namespace {

CompositeObject checked_composite(CompositeObject c) {
  if (c.parts.empty()) throw ValidationError("composite object has no parts");
  for (const auto& part : c.parts) {
    if (part.kind() == ObjectKind::composite || part.kind() == ObjectKind::precomputed) {
      throw ValidationError("composite parts must be distribution, laplacian or vector objects");
    }
  }
  return c;
}

}  // namespace

MetricObject::MetricObject(CompositeObject c) : value_(checked_composite(std::move(c))) {}

ObjectSchema schema_of(const MetricObject& object) {
  ObjectSchema s;
  s.kind = object.kind();
  switch (s.kind) {
    case ObjectKind::distribution:
      s.rows = object.as<QuantileDistribution>().grid_size();
      break;
    case ObjectKind::laplacian:
      s.rows = s.cols = object.as<GraphLaplacian>().nodes();
      break;
    case ObjectKind::vector:
      s.rows = object.as<EuclideanVector>().dimension();
      break;
    case ObjectKind::composite:
      for (const auto& part : object.as<CompositeObject>().parts) s.parts.push_back(schema_of(part));
      break;
    case ObjectKind::precomputed:
      break;
  }
  return s;
}

std::string describe(const ObjectSchema& schema) {
  std::ostringstream out;
  out << to_string(schema.kind);
  switch (schema.kind) {
    case ObjectKind::distribution:
    case ObjectKind::vector:
      out << "[" << schema.rows << "]";
      break;
    case ObjectKind::laplacian:
      out << "[" << schema.rows << "x" << schema.cols << "]";
      break;
    case ObjectKind::composite:
      out << "(";
      for (std::size_t i = 0; i < schema.parts.size(); ++i) {
        if (i) out << ",";
        out << describe(schema.parts[i]);
      }
      out << ")";
      break;
    case ObjectKind::precomputed:
      break;
  }
  return out.str();
}

namespace {

int compare_arrays(const double* a, Index na, const double* b, Index nb) {
  const Index n = std::min(na, nb);
  for (Index i = 0; i < n; ++i) {
    if (a[i] < b[i]) return -1;
    if (a[i] > b[i]) return 1;
  }
  return na < nb ? -1 : (na > nb ? 1 : 0);
}

}  // namespace

int compare(const MetricObject& a, const MetricObject& b) {
  if (a.kind() != b.kind()) return a.kind() < b.kind() ? -1 : 1;
  switch (a.kind()) {
    case ObjectKind::distribution: {
      const auto& x = a.as<QuantileDistribution>().values();
      const auto& y = b.as<QuantileDistribution>().values();
      return compare_arrays(x.data(), x.size(), y.data(), y.size());
    }
    case ObjectKind::laplacian: {
      const auto& x = a.as<GraphLaplacian>().matrix();
      const auto& y = b.as<GraphLaplacian>().matrix();
      return compare_arrays(x.data(), x.size(), y.data(), y.size());
    }
    case ObjectKind::vector: {
      const auto& x = a.as<EuclideanVector>().coords();
      const auto& y = b.as<EuclideanVector>().coords();
      return compare_arrays(x.data(), x.size(), y.data(), y.size());
    }
    case ObjectKind::composite: {
      const auto& x = a.as<CompositeObject>().parts;
      const auto& y = b.as<CompositeObject>().parts;
      const std::size_t n = std::min(x.size(), y.size());
      for (std::size_t i = 0; i < n; ++i) {
        if (int c = compare(x[i], y[i]); c != 0) return c;
      }
      return x.size() < y.size() ? -1 : (x.size() > y.size() ? 1 : 0);
    }
    case ObjectKind::precomputed: {
      const Index i = a.as<PrecomputedRef>().index;
      const Index j = b.as<PrecomputedRef>().index;
      return i < j ? -1 : (i > j ? 1 : 0);
    }
  }
  return 0;
}

// ---------------------------------------------------------------------------

Metric::Metric(std::shared_ptr<const Eigen::MatrixXd> precomputed)
    : precomputed_(std::move(precomputed)) {
  if (precomputed_) validate_precomputed(*precomputed_);
}

void Metric::validate_precomputed(const Eigen::MatrixXd& dist) {
  const Index n = dist.rows();
  if (n == 0 || dist.cols() != n) throw ValidationError("distance matrix must be square and nonempty");
  for (Index i = 0; i < n; ++i) {
    if (dist(i, i) != 0.0) {
      throw ValidationError("distance matrix has a nonzero diagonal at " + std::to_string(i));
    }
    for (Index j = 0; j < n; ++j) {
      if (!std::isfinite(dist(i, j)) || dist(i, j) < 0.0) {
        throw ValidationError("distance matrix entry (" + std::to_string(i) + "," +
                              std::to_string(j) + ") is negative or non-finite");
      }
      if (dist(i, j) != dist(j, i)) {
        throw ValidationError("distance matrix is not symmetric at (" + std::to_string(i) + "," +
                              std::to_string(j) + ")");
      }
    }
  }
}

const Eigen::MatrixXd& Metric::precomputed() const {
  if (!precomputed_) throw DomainError("metric has no precomputed distance matrix");
  return *precomputed_;
}

double Metric::squared(const MetricObject& a, const MetricObject& b) const {
  if (a.kind() != b.kind()) {
    throw ShapeError(std::string("cannot measure distance between ") + to_string(a.kind()) +
                     " and " + to_string(b.kind()));
  }
  switch (a.kind()) {
    case ObjectKind::distribution:
      return wasserstein_squared(a.as<QuantileDistribution>().values(),
                                 b.as<QuantileDistribution>().values());
    case ObjectKind::laplacian:
      return frobenius_squared(a.as<GraphLaplacian>().matrix(), b.as<GraphLaplacian>().matrix());
    case ObjectKind::vector:
      return euclidean_squared(a.as<EuclideanVector>().coords(), b.as<EuclideanVector>().coords());
    case ObjectKind::composite: {
      const auto& x = a.as<CompositeObject>().parts;
      const auto& y = b.as<CompositeObject>().parts;
      if (x.size() != y.size()) throw ShapeError("composite part counts differ");
      double total = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) total += squared(x[i], y[i]);
      return total;
    }
    case ObjectKind::precomputed: {
      const auto& dist = precomputed();
      const Index i = a.as<PrecomputedRef>().index;
      const Index j = b.as<PrecomputedRef>().index;
      if (i < 0 || j < 0 || i >= dist.rows() || j >= dist.rows()) {
        throw ShapeError("precomputed index out of range");
      }
      const double d = dist(i, j);
      return d * d;
    }
  }
  return 0.0;
}

double composite_distance(const CompositeObject& a, const CompositeObject& b) {
  return Metric{}(MetricObject(a), MetricObject(b));
}

// ---------------------------------------------------------------------------

namespace {

std::vector<double> normalized_weights(std::span<const double> weights, std::size_t n) {
  std::vector<double> w(n, 1.0 / static_cast<double>(n));
  if (weights.empty()) return w;
  if (weights.size() != n) throw ShapeError("weight count does not match object count");
  double total = 0.0;
  for (double x : weights) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw DomainError("weights must be finite and nonnegative");
    total += x;
  }
  if (!(total > 0.0)) throw DomainError("weights must sum to a positive value");
  for (std::size_t i = 0; i < n; ++i) w[i] = weights[i] / total;
  return w;
}

template <typename Get>
auto weighted_average(std::span<const MetricObject* const> objects, std::span<const double> weights,
                      Get get) {
  using Plain = std::decay_t<decltype(get(*objects[0]))>;
  Plain acc = Plain::Zero(get(*objects[0]).rows(), get(*objects[0]).cols());
  if (weights.empty()) {
    for (const auto* o : objects) acc += get(*o);
    acc /= static_cast<double>(objects.size());
  } else {
    for (std::size_t i = 0; i < objects.size(); ++i) acc += weights[i] * get(*objects[i]);
  }
  return acc;
}

}  // namespace

MetricObject frechet_mean(const Metric& metric, std::span<const MetricObject* const> objects,
                          std::span<const double> weights) {
  if (objects.empty()) throw DomainError("Fréchet mean of an empty list");
  const ObjectSchema schema = schema_of(*objects[0]);
  for (const auto* o : objects) {
    if (!(schema_of(*o) == schema)) {
      throw ShapeError("Fréchet mean over mixed object shapes: " + describe(schema) + " vs " +
                       describe(schema_of(*o)));
    }
  }
  std::vector<double> w;
  if (!weights.empty()) w = normalized_weights(weights, objects.size());

  switch (schema.kind) {
    case ObjectKind::distribution: {
      // The average of non-decreasing arrays is non-decreasing; rounding can
      // only tie neighbours, never reverse them.
      Eigen::VectorXd v = weighted_average(objects, w, [](const MetricObject& o) -> const Eigen::VectorXd& {
        return o.as<QuantileDistribution>().values();
      });
      for (Index m = 1; m < v.size(); ++m) v[m] = std::max(v[m], v[m - 1]);
      return QuantileDistribution(std::move(v));
    }
    case ObjectKind::laplacian: {
      Eigen::MatrixXd k = weighted_average(objects, w, [](const MetricObject& o) -> const Eigen::MatrixXd& {
        return o.as<GraphLaplacian>().matrix();
      });
      return GraphLaplacian(symmetrize(k));
    }
    case ObjectKind::vector:
      return EuclideanVector(weighted_average(objects, w, [](const MetricObject& o) -> const Eigen::VectorXd& {
        return o.as<EuclideanVector>().coords();
      }));
    case ObjectKind::composite: {
      CompositeObject mean;
      const std::size_t parts = schema.parts.size();
      std::vector<const MetricObject*> slice(objects.size());
      for (std::size_t p = 0; p < parts; ++p) {
        for (std::size_t i = 0; i < objects.size(); ++i) {
          slice[i] = &objects[i]->as<CompositeObject>().parts[p];
        }
        mean.parts.push_back(frechet_mean(metric, slice, w));
      }
      return MetricObject(std::move(mean));
    }
    case ObjectKind::precomputed: {
      std::size_t best = 0;
      double best_cost = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < objects.size(); ++c) {
        double cost = 0.0;
        for (std::size_t i = 0; i < objects.size(); ++i) {
          const double d2 = metric.squared(*objects[c], *objects[i]);
          cost += w.empty() ? d2 : w[i] * d2;
        }
        if (cost < best_cost) {
          best_cost = cost;
          best = c;
        }
      }
      return *objects[best];
    }
  }
  throw DomainError("unsupported object kind");
}

MetricObject frechet_mean(const Metric& metric, std::span<const MetricObject> objects,
                          std::span<const double> weights) {
  std::vector<const MetricObject*> ptrs;
  ptrs.reserve(objects.size());
  for (const auto& o : objects) ptrs.push_back(&o);
  return frechet_mean(metric, std::span<const MetricObject* const>(ptrs), weights);
}

Eigen::VectorXd midpoint_grid(Index grid_size) {
  if (grid_size < 1) throw DomainError("grid size must be positive");
  const double m = static_cast<double>(grid_size);
  return (Eigen::VectorXd::LinSpaced(grid_size, 0.0, m - 1.0).array() + 0.5) / m;
}

QuantileDistribution quantile_from_samples(std::span<const double> samples, Index grid_size) {
  if (samples.empty()) throw DomainError("cannot estimate a quantile function from no samples");
  if (grid_size < 2) throw DomainError("quantile grid needs at least 2 points");
  std::vector<double> sorted(samples.begin(), samples.end());
  for (double x : sorted) {
    if (!std::isfinite(x)) throw DomainError("samples must be finite");
  }
  std::sort(sorted.begin(), sorted.end());
  const auto w = static_cast<std::int64_t>(sorted.size());
  Eigen::VectorXd q(grid_size);
  for (Index m = 0; m < grid_size; ++m) {
    // ceil(t_m W) with t_m = (2m+1)/(2M), in exact integer arithmetic.
    const std::int64_t num = (2 * m + 1) * w;
    const std::int64_t den = 2 * grid_size;
    std::int64_t rank = (num + den - 1) / den;
    rank = std::clamp<std::int64_t>(rank, 1, w);
    q[m] = sorted[static_cast<std::size_t>(rank - 1)];
  }
  return QuantileDistribution(std::move(q));
}

}  // namespace repfrechet
