#pragma once

// Data-generating processes for the type-1 error and power studies, and the
// replicate harness that tabulates rejection rates.
//
// Every subject draws eta_i ~ U(1, 1.5) and a_i ~ N(beta, eps^2). Repeats
// follow an exchangeable structure: latent_il = a_i + sqrt(iota) z_i0 +
// sqrt(1 - iota) z_il, giving correlation iota between repeats.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "repfrechet/baselines.hpp"

namespace repfrechet {

enum class Scenario { distributional, network, vector, composite };

const char* to_string(Scenario s) noexcept;
/// Accepts "dist"/"distributional", "graph"/"network", "vector", "composite".
Scenario scenario_from_string(const std::string& name);

/// Number of repeats per subject: a fixed r, or uniform over {1, 2, 3}.
struct RepeatSpec {
  bool mixed = false;
  Index fixed = 2;

  static RepeatSpec constant(Index r) { return {false, r}; }
  static RepeatSpec uniform123() { return {true, 0}; }
  /// "mixed" or a positive integer.
  static RepeatSpec parse(const std::string& text);
  std::string str() const;
};

struct GroupParams {
  Index n = 100;
  RepeatSpec repeats = RepeatSpec::constant(2);
  double iota = 0.5;
  double beta = 1.0;
  double eps = 1.0;
  Index tau = 3;
};

struct ScenarioConfig {
  Scenario kind = Scenario::distributional;
  std::vector<GroupParams> groups{GroupParams{}, GroupParams{}};
  Index nodes = 10;
  Index vector_dim = 5;
  Index grid_size = kDefaultGridSize;
  double support = 10.0;  ///< truncation interval [-support, support]
  double alpha = 0.05;
  Index replicates = 500;
  std::uint64_t seed = 1;
  bool run_q = true;
  bool run_af = false;
  int threads = 1;
  std::string param_name = "none";
  double param_value = 0.0;

  /// Throws DomainError on out-of-range parameters.
  void validate() const;
};

/// Quantiles of N(mean, sd^2) truncated to [lo, hi] at the given grid points:
/// Phi^{-1}(Phi(a) + t (Phi(b) - Phi(a))) sd + mean.
Eigen::VectorXd truncated_normal_quantiles(double mean, double sd, double lo, double hi,
                                           const Eigen::VectorXd& grid);

/// Standard normal quantile (boost erfc_inv, both tails evaluated directly).
double normal_quantile(double u);

/// Preferential-attachment tree on p nodes: start from edge 0-1, then each new
/// node attaches to one existing node with weight (degree + 0.01)^(-2 eta).
Eigen::MatrixXd attachment_graph(Index nodes, double eta, std::mt19937_64& rng);

/// Flip the presence of `tau` distinct uniformly chosen node pairs.
Eigen::MatrixXd toggle_edges(const Eigen::MatrixXd& adjacency, Index tau, std::mt19937_64& rng);

/// Per-group repeat counts; a mixed group is redrawn until some r_i >= 2.
/// `redraws` is incremented once per rejected draw.
std::vector<Index> draw_repeats(const GroupParams& g, std::mt19937_64& rng, Index* redraws = nullptr);

Dataset gen_distributional(const ScenarioConfig& cfg, std::mt19937_64& rng, Index* redraws = nullptr);
Dataset gen_network(const ScenarioConfig& cfg, std::mt19937_64& rng, Index* redraws = nullptr);
Dataset gen_vector(const ScenarioConfig& cfg, std::mt19937_64& rng, Index* redraws = nullptr);
Dataset gen_composite(const ScenarioConfig& cfg, std::mt19937_64& rng, Index* redraws = nullptr);
Dataset generate(const ScenarioConfig& cfg, std::mt19937_64& rng, Index* redraws = nullptr);

/// Dataset for replicate `index`, drawn from stream_for(cfg.seed, index).
Dataset generate_replicate(const ScenarioConfig& cfg, Index index, Index* redraws = nullptr);

struct MethodOutcome {
  std::string method;  ///< "q" or "af"
  Index rejections = 0;
  double rate = 0.0;
  double se = 0.0;
  std::vector<double> p_values;
};

struct StudyReport {
  ScenarioConfig config;
  std::vector<MethodOutcome> methods;
  Index redraws = 0;
  double runtime_seconds = 0.0;

  const MethodOutcome& method(const std::string& name) const;
};

/// Replicates are independent; results do not depend on cfg.threads.
StudyReport run_study(const ScenarioConfig& cfg);

}  // namespace repfrechet
