#include "repfrechet/dataset.hpp"

#include <algorithm>
#include <thread>

namespace repfrechet {

Index Group::observation_count() const noexcept {
  Index n = 0;
  for (const auto& s : subjects) n += s.repeats();
  return n;
}

Index Dataset::observation_count() const noexcept {
  Index n = 0;
  for (const auto& g : groups) n += g.observation_count();
  return n;
}

namespace {

std::string where(const Group& g, std::size_t gi, const Subject& s, std::size_t si) {
  const std::string gname = g.name.empty() ? "#" + std::to_string(gi) : "'" + g.name + "'";
  const std::string sname = s.id.empty() ? "#" + std::to_string(si) : "'" + s.id + "'";
  return "group " + gname + ", subject " + sname;
}

}  // namespace

void validate(const Dataset& dataset) {
  if (dataset.groups.empty()) throw ValidationError("dataset has no groups");
  if (dataset.kind == ObjectKind::precomputed) {
    if (!dataset.distances) throw ValidationError("precomputed dataset lacks a distance matrix");
    Metric::validate_precomputed(*dataset.distances);
  }

  std::optional<ObjectSchema> schema;
  for (std::size_t gi = 0; gi < dataset.groups.size(); ++gi) {
    const Group& g = dataset.groups[gi];
    if (g.subjects.empty()) {
      throw ValidationError("group " + (g.name.empty() ? "#" + std::to_string(gi) : "'" + g.name + "'") +
                            " has no subjects");
    }
    for (std::size_t si = 0; si < g.subjects.size(); ++si) {
      const Subject& s = g.subjects[si];
      if (s.observations.empty()) {
        throw ValidationError(where(g, gi, s, si) + " has no observations");
      }
      for (std::size_t l = 0; l < s.observations.size(); ++l) {
        const MetricObject& o = s.observations[l];
        const std::string at = where(g, gi, s, si) + ", observation " + std::to_string(l);
        if (o.kind() != dataset.kind) {
          throw ValidationError(at + ": expected " + to_string(dataset.kind) + " but found " +
                                to_string(o.kind()));
        }
        ObjectSchema sc = schema_of(o);
        if (!schema) {
          schema = sc;
        } else if (!(sc == *schema)) {
          throw ValidationError(at + ": shape " + describe(sc) + " differs from " + describe(*schema));
        }
        if (o.kind() == ObjectKind::precomputed) {
          const Index idx = o.as<PrecomputedRef>().index;
          if (idx < 0 || idx >= dataset.distances->rows()) {
            throw ValidationError(at + ": index " + std::to_string(idx) + " outside the distance matrix");
          }
        }
        if (dataset.support) {
          auto check = [&](const QuantileDistribution& q) {
            if (!q.within_support(dataset.support->first, dataset.support->second)) {
              throw ValidationError(at + ": quantile values leave the declared support");
            }
          };
          if (o.kind() == ObjectKind::distribution) check(o.as<QuantileDistribution>());
          if (o.kind() == ObjectKind::composite) {
            for (const auto& part : o.as<CompositeObject>().parts) {
              if (part.kind() == ObjectKind::distribution) check(part.as<QuantileDistribution>());
            }
          }
        }
      }
    }
  }
}

std::vector<const MetricObject*> flatten(const Dataset& dataset) {
  std::vector<const MetricObject*> out;
  out.reserve(static_cast<std::size_t>(dataset.observation_count()));
  for (const auto& g : dataset.groups)
    for (const auto& s : g.subjects)
      for (const auto& o : s.observations) out.push_back(&o);
  return out;
}

Eigen::MatrixXd distance_matrix(const Dataset& dataset, int threads) {
  const auto objects = flatten(dataset);
  const Metric metric = dataset.metric();
  const Index n = static_cast<Index>(objects.size());
  Eigen::MatrixXd dist = Eigen::MatrixXd::Zero(n, n);

  // Rows are dealt round-robin; every worker writes disjoint cells.
  auto fill = [&](Index first, Index stride) {
    for (Index i = first; i < n; i += stride) {
      for (Index j = i + 1; j < n; ++j) {
        const double d = metric(*objects[i], *objects[j]);
        dist(i, j) = d;
        dist(j, i) = d;
      }
    }
  };
  const Index workers = std::clamp<Index>(threads, 1, std::max<Index>(n, 1));
  if (workers == 1) {
    fill(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (Index w = 0; w < workers; ++w) pool.emplace_back(fill, w, workers);
    for (auto& t : pool) t.join();
  }
  return dist;
}

namespace {

MetricObject scaled(const MetricObject& o, double c) {
  switch (o.kind()) {
    case ObjectKind::distribution:
      return QuantileDistribution(c * o.as<QuantileDistribution>().values());
    case ObjectKind::laplacian:
      return GraphLaplacian(c * o.as<GraphLaplacian>().matrix());
    case ObjectKind::vector:
      return EuclideanVector(c * o.as<EuclideanVector>().coords());
    case ObjectKind::composite: {
      CompositeObject out;
      for (const auto& p : o.as<CompositeObject>().parts) out.parts.push_back(scaled(p, c));
      return out;
    }
    case ObjectKind::precomputed:
      return o;
  }
  return o;
}

}  // namespace

Dataset scale_distances(const Dataset& dataset, double c) {
  if (!(c > 0.0)) throw DomainError("distance scale must be positive");
  Dataset out = dataset;
  for (auto& g : out.groups)
    for (auto& s : g.subjects)
      for (auto& o : s.observations) o = scaled(o, c);
  if (out.support) out.support = std::make_pair(c * out.support->first, c * out.support->second);
  if (dataset.distances) out.distances = std::make_shared<const Eigen::MatrixXd>(c * *dataset.distances);
  return out;
}

}  // namespace repfrechet
