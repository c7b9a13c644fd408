#include "repfrechet/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <exception>
#include <mutex>
#include <thread>

#include "repfrechet/rng.hpp"

namespace repfrechet {

Dataset subject_collapse(const Dataset& dataset) {
  const Metric metric = dataset.metric();
  Dataset out = dataset;
  for (auto& g : out.groups) {
    for (auto& s : g.subjects) {
      if (s.observations.size() == 1) continue;
      MetricObject mean = frechet_mean(metric, std::span<const MetricObject>(s.observations));
      s.observations.clear();
      s.observations.push_back(std::move(mean));
    }
  }
  return out;
}

TestResult af_test(const Dataset& dataset, const TestOptions& options) {
  TestOptions reduced = options;
  reduced.within = false;
  return run_test(subject_collapse(dataset), reduced);
}

Dataset balanced_subsample(const Dataset& dataset, Index target_r, std::uint64_t seed, Index replicate) {
  if (target_r < 1) throw DomainError("balanced repeat count must be at least 1");
  auto rng = stream_for(seed, static_cast<std::uint64_t>(replicate));
  Dataset out;
  out.kind = dataset.kind;
  out.grid_size = dataset.grid_size;
  out.support = dataset.support;
  out.distances = dataset.distances;
  for (std::size_t gi = 0; gi < dataset.groups.size(); ++gi) {
    const Group& g = dataset.groups[gi];
    Group kept{g.name, {}};
    for (const auto& s : g.subjects) {
      if (s.repeats() < target_r) continue;
      std::vector<std::size_t> idx(s.observations.size());
      std::iota(idx.begin(), idx.end(), 0);
      // Partial Fisher-Yates: the first target_r slots are a uniform subset.
      for (Index t = 0; t < target_r; ++t) {
        std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(t), idx.size() - 1);
        std::swap(idx[static_cast<std::size_t>(t)], idx[pick(rng)]);
      }
      idx.resize(static_cast<std::size_t>(target_r));
      std::sort(idx.begin(), idx.end());
      Subject sub{s.id, {}};
      for (std::size_t i : idx) sub.observations.push_back(s.observations[i]);
      kept.subjects.push_back(std::move(sub));
    }
    if (kept.subjects.empty()) {
      throw DomainError("group " + (g.name.empty() ? "#" + std::to_string(gi) : "'" + g.name + "'") +
                        " has no subject with at least " + std::to_string(target_r) + " repeated measures");
    }
    out.groups.push_back(std::move(kept));
  }
  return out;
}

std::vector<Dataset> balanced_resample(const Dataset& dataset, const ResamplePlan& plan) {
  if (plan.replicates < 1) throw DomainError("resample count must be at least 1");
  std::vector<Dataset> out;
  out.reserve(static_cast<std::size_t>(plan.replicates));
  for (Index b = 0; b < plan.replicates; ++b) out.push_back(balanced_subsample(dataset, plan.target_r, plan.seed, b));
  return out;
}

AggregatedResult aggregate_p_values(std::vector<double> p_values) {
  if (p_values.empty()) throw DomainError("no p-values to aggregate");
  constexpr double kUpper = 1.0 - 1e-12;
  AggregatedResult r;
  double sum = 0.0;
  for (double p : p_values) {
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("p-values must lie in [0,1]");
    if (p > kUpper) ++r.clipped;
    const double c = std::min(p, kUpper);
    sum += 0.5 * std::log((1.0 + c) / (1.0 - c));
  }
  r.theta = sum / static_cast<double>(p_values.size());
  r.overall_p = std::clamp(1.0 - 2.0 / (1.0 + std::exp(2.0 * r.theta)), 0.0, 1.0);
  r.p_values = std::move(p_values);
  return r;
}

BaselineReport run_balanced_af(const Dataset& dataset, const BaselineOptions& options) {
  const auto& plan = options.plan;
  if (plan.replicates < 1) throw DomainError("resample count must be at least 1");
  std::vector<double> p(static_cast<std::size_t>(plan.replicates));
  BaselineReport report;
  {
    const Dataset first = balanced_subsample(dataset, plan.target_r, plan.seed, 0);
    for (const auto& g : first.groups) report.subjects_kept.push_back(static_cast<Index>(g.subjects.size()));
  }
  TestOptions test = options.test;
  test.critical_value = false;

  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&](Index first, Index stride) {
    for (Index b = first; b < plan.replicates; b += stride) {
      try {
        p[static_cast<std::size_t>(b)] = af_test(balanced_subsample(dataset, plan.target_r, plan.seed, b), test).p_value;
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const Index workers = std::clamp<Index>(options.threads, 1, plan.replicates);
  if (workers == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (Index w = 0; w < workers; ++w) pool.emplace_back(work, w, workers);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  report.aggregate = aggregate_p_values(std::move(p));
  return report;
}

}  // namespace repfrechet
