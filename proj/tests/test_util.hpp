#pragma once

#include <string>
#include <vector>

#include "repfrechet/dataset.hpp"

namespace testutil {

using Scalars = std::vector<std::vector<double>>;  // subjects -> repeats

inline repfrechet::Group scalar_group(const Scalars& subjects, const std::string& name = "") {
  repfrechet::Group g{name, {}};
  int id = 0;
  for (const auto& s : subjects) {
    repfrechet::Subject sub{std::to_string(id++), {}};
    for (double y : s) sub.observations.emplace_back(repfrechet::EuclideanVector(Eigen::VectorXd::Constant(1, y)));
    g.subjects.push_back(std::move(sub));
  }
  return g;
}

inline repfrechet::Dataset scalar_dataset(const std::vector<Scalars>& groups) {
  repfrechet::Dataset d;
  d.kind = repfrechet::ObjectKind::vector;
  int j = 0;
  for (const auto& g : groups) d.groups.push_back(scalar_group(g, "g" + std::to_string(j++)));
  return d;
}

inline double rel_diff(long double a, long double b) {
  const long double scale = std::max<long double>({1e-300L, a < 0 ? -a : a, b < 0 ? -b : b});
  const long double d = a - b;
  return static_cast<double>((d < 0 ? -d : d) / scale);
}

}  // namespace testutil
