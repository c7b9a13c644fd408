#pragma once

// Comparison procedures for designs where the repeated measures are either
// averaged away (aF) or balanced by subsampling before a balanced-design test.

#include <cstdint>
#include <vector>

#include "repfrechet/inference.hpp"

namespace repfrechet {

/// Replace every subject by the Fréchet mean of its own repeats (r_i = 1).
Dataset subject_collapse(const Dataset& dataset);

/// Subject-level Fréchet test: collapse, then the reduced D + U statistic
/// calibrated by the k - 1 eigenvalues of A.
TestResult af_test(const Dataset& dataset, const TestOptions& options = {});

struct ResamplePlan {
  Index target_r = 1;
  Index replicates = 1;
  std::uint64_t seed = 0;
};

/// Drop subjects with fewer than target_r repeats and subsample target_r
/// repeats without replacement from the rest. Replicate b draws from a
/// stream derived from (seed, b). Throws DomainError naming a group that loses
/// all of its subjects.
std::vector<Dataset> balanced_resample(const Dataset& dataset, const ResamplePlan& plan);

/// One balanced replicate.
Dataset balanced_subsample(const Dataset& dataset, Index target_r, std::uint64_t seed, Index replicate);

struct AggregatedResult {
  std::vector<double> p_values;
  double theta = 0.0;
  double overall_p = 0.0;
  /// Number of p-values clipped away from 1 before the transform.
  Index clipped = 0;
};

/// theta = mean of atanh(p_j); overall p = 1 - 2 / (1 + exp(2 theta)).
/// p_j = 1 is clipped to 1 - 1e-12.
AggregatedResult aggregate_p_values(std::vector<double> p_values);

struct BaselineOptions {
  ResamplePlan plan;
  TestOptions test;
  int threads = 1;
};

struct BaselineReport {
  AggregatedResult aggregate;
  std::vector<Index> subjects_kept;  ///< per group, identical across replicates
};

/// balanced_resample -> af_test per replicate -> aggregate_p_values.
BaselineReport run_balanced_af(const Dataset& dataset, const BaselineOptions& options);

}  // namespace repfrechet
