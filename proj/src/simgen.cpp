#include "repfrechet/simgen.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include <boost/math/special_functions/erf.hpp>

#include "repfrechet/rng.hpp"

namespace repfrechet {

const char* to_string(Scenario s) noexcept {
  switch (s) {
    case Scenario::distributional: return "distributional";
    case Scenario::network: return "network";
    case Scenario::vector: return "vector";
    case Scenario::composite: return "composite";
  }
  return "unknown";
}

Scenario scenario_from_string(const std::string& name) {
  if (name == "dist" || name == "distributional") return Scenario::distributional;
  if (name == "graph" || name == "network") return Scenario::network;
  if (name == "vector") return Scenario::vector;
  if (name == "composite") return Scenario::composite;
  throw DomainError("unknown scenario '" + name + "' (expected dist, graph, vector or composite)");
}

RepeatSpec RepeatSpec::parse(const std::string& text) {
  if (text == "mixed" || text == "123" || text == "1-3") return uniform123();
  std::size_t used = 0;
  long long r = 0;
  try {
    r = std::stoll(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || r < 1) throw DomainError("repeat spec must be 'mixed' or a positive integer, got '" + text + "'");
  return constant(static_cast<Index>(r));
}

std::string RepeatSpec::str() const { return mixed ? "mixed" : std::to_string(fixed); }

void ScenarioConfig::validate() const {
  if (groups.size() < 2) throw DomainError("a study needs at least two groups");
  for (std::size_t j = 0; j < groups.size(); ++j) {
    const auto& g = groups[j];
    const std::string where = "group " + std::to_string(j + 1) + ": ";
    if (g.n < 1) throw DomainError(where + "n must be at least 1");
    if (!g.repeats.mixed && g.repeats.fixed < 1) throw DomainError(where + "r must be at least 1");
    if (!(g.iota >= 0.0 && g.iota <= 1.0)) throw DomainError(where + "iota must lie in [0,1]");
    if (!(g.eps >= 0.0) || !std::isfinite(g.eps)) throw DomainError(where + "eps must be nonnegative");
    if (!std::isfinite(g.beta)) throw DomainError(where + "beta must be finite");
    if (g.tau < 0) throw DomainError(where + "tau must be nonnegative");
    if (kind == Scenario::network || kind == Scenario::composite) {
      if (g.tau > nodes * (nodes - 1) / 2) throw DomainError(where + "tau exceeds the number of node pairs");
    }
  }
  if (nodes < 3) throw DomainError("node count must be at least 3");
  if (vector_dim < 1) throw DomainError("vector dimension must be at least 1");
  if (grid_size < 2) throw DomainError("grid size must be at least 2");
  if (!(support > 0.0)) throw DomainError("support half-width must be positive");
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0,1)");
  if (replicates < 1) throw DomainError("replicates must be at least 1");
  if (!run_q && !run_af) throw DomainError("no test method selected");
}

double normal_quantile(double u) {
  if (!(u > 0.0 && u < 1.0)) throw DomainError("normal quantile needs u in (0,1)");
  if (u <= 0.5) return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * u);
  return std::sqrt(2.0) * boost::math::erfc_inv(2.0 * (1.0 - u));
}

namespace {

double lower_tail(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }
double upper_tail(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

}  // namespace

Eigen::VectorXd truncated_normal_quantiles(double mean, double sd, double lo, double hi,
                                           const Eigen::VectorXd& grid) {
  if (!(sd > 0.0) || !(lo < hi)) throw DomainError("truncated normal needs sd > 0 and lo < hi");
  const double a = (lo - mean) / sd;
  const double b = (hi - mean) / sd;
  const double pa = lower_tail(a), pb = lower_tail(b);
  const double qa = upper_tail(a), qb = upper_tail(b);
  Eigen::VectorXd out(grid.size());
  double running = lo;
  for (Index m = 0; m < grid.size(); ++m) {
    const double t = grid[m];
    double z;
    const double u = pa + t * (pb - pa);
    if (u <= 0.5) {
      z = u > 0.0 ? -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * u) : a;
    } else {
      const double q = (1.0 - t) * qa + t * qb;
      z = q > 0.0 ? std::sqrt(2.0) * boost::math::erfc_inv(2.0 * q) : b;
    }
    double x = std::clamp(mean + sd * z, lo, hi);
    running = std::max(running, x);
    out[m] = running;
  }
  return out;
}

Eigen::MatrixXd attachment_graph(Index nodes, double eta, std::mt19937_64& rng) {
  if (nodes < 2) throw DomainError("attachment graph needs at least two nodes");
  Eigen::MatrixXd adj = Eigen::MatrixXd::Zero(nodes, nodes);
  std::vector<double> degree(static_cast<std::size_t>(nodes), 0.0);
  adj(0, 1) = adj(1, 0) = 1.0;
  degree[0] = degree[1] = 1.0;
  std::vector<double> weight;
  for (Index v = 2; v < nodes; ++v) {
    weight.assign(static_cast<std::size_t>(v), 0.0);
    for (Index u = 0; u < v; ++u) weight[static_cast<std::size_t>(u)] = std::pow(degree[static_cast<std::size_t>(u)] + 0.01, -2.0 * eta);
    std::discrete_distribution<Index> pick(weight.begin(), weight.end());
    const Index u = pick(rng);
    adj(u, v) = adj(v, u) = 1.0;
    degree[static_cast<std::size_t>(u)] += 1.0;
    degree[static_cast<std::size_t>(v)] += 1.0;
  }
  return adj;
}

Eigen::MatrixXd toggle_edges(const Eigen::MatrixXd& adjacency, Index tau, std::mt19937_64& rng) {
  const Index p = adjacency.rows();
  const Index pairs = p * (p - 1) / 2;
  if (tau < 0 || tau > pairs) throw DomainError("tau must lie in [0, p(p-1)/2]");
  Eigen::MatrixXd out = adjacency;
  if (tau == 0) return out;
  // Floyd's algorithm: tau distinct pair indices.
  std::vector<Index> chosen;
  chosen.reserve(static_cast<std::size_t>(tau));
  for (Index j = pairs - tau; j < pairs; ++j) {
    std::uniform_int_distribution<Index> draw(0, j);
    const Index t = draw(rng);
    if (std::find(chosen.begin(), chosen.end(), t) == chosen.end()) chosen.push_back(t);
    else chosen.push_back(j);
  }
  for (Index idx : chosen) {
    Index row = 0, rest = idx;
    while (rest >= p - 1 - row) {
      rest -= p - 1 - row;
      ++row;
    }
    const Index col = row + 1 + rest;
    const double flipped = out(row, col) != 0.0 ? 0.0 : 1.0;
    out(row, col) = out(col, row) = flipped;
  }
  return out;
}

std::vector<Index> draw_repeats(const GroupParams& g, std::mt19937_64& rng, Index* redraws) {
  std::vector<Index> r(static_cast<std::size_t>(g.n), g.repeats.fixed);
  if (!g.repeats.mixed) return r;
  std::uniform_int_distribution<Index> draw(1, 3);
  for (;;) {
    bool any = false;
    for (auto& x : r) {
      x = draw(rng);
      any = any || x >= 2;
    }
    if (any) return r;
    if (redraws) ++*redraws;
  }
}

namespace {

struct SubjectLatent {
  double eta = 1.0;
  // Row l holds repeat l's latent location(s).
  Eigen::MatrixXd theta;
};

// a ~ N(beta, eps^2); theta_lc = a + sqrt(iota) z0_c + sqrt(1 - iota) z_lc.
SubjectLatent draw_latent(const GroupParams& g, Index r, Index dim, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(1.0, 1.5);
  std::normal_distribution<double> normal(0.0, 1.0);
  SubjectLatent s;
  s.eta = unif(rng);
  const double a = g.beta + g.eps * normal(rng);
  const double shared = std::sqrt(g.iota), own = std::sqrt(1.0 - g.iota);
  Eigen::VectorXd z0(dim);
  for (Index c = 0; c < dim; ++c) z0[c] = normal(rng);
  s.theta.resize(r, dim);
  for (Index l = 0; l < r; ++l)
    for (Index c = 0; c < dim; ++c) s.theta(l, c) = a + shared * z0[c] + own * normal(rng);
  return s;
}

template <typename MakeSubject>
Dataset build(const ScenarioConfig& cfg, ObjectKind kind, std::mt19937_64& rng, Index* redraws,
              MakeSubject&& make) {
  cfg.validate();
  Dataset d;
  d.kind = kind;
  for (std::size_t j = 0; j < cfg.groups.size(); ++j) {
    const auto& g = cfg.groups[j];
    const auto reps = draw_repeats(g, rng, redraws);
    Group group{"group" + std::to_string(j + 1), {}};
    group.subjects.reserve(reps.size());
    for (std::size_t i = 0; i < reps.size(); ++i) {
      Subject s{std::to_string(i + 1), {}};
      s.observations = make(g, reps[i]);
      group.subjects.push_back(std::move(s));
    }
    d.groups.push_back(std::move(group));
  }
  return d;
}

}  // namespace

Dataset gen_distributional(const ScenarioConfig& cfg, std::mt19937_64& rng, Index* redraws) {
  const Eigen::VectorXd grid = midpoint_grid(cfg.grid_size);
  Dataset d = build(cfg, ObjectKind::distribution, rng, redraws, [&](const GroupParams& g, Index r) {
    const SubjectLatent lat = draw_latent(g, r, 1, rng);
    std::vector<MetricObject> obs;
    for (Index l = 0; l < r; ++l)
      obs.emplace_back(QuantileDistribution(
          truncated_normal_quantiles(lat.theta(l, 0), lat.eta, -cfg.support, cfg.support, grid)));
    return obs;
  });
  d.grid_size = cfg.grid_size;
  d.support = std::make_pair(-cfg.support, cfg.support);
  return d;
}

Dataset gen_network(const ScenarioConfig& cfg, std::mt19937_64& rng, Index* redraws) {
  return build(cfg, ObjectKind::laplacian, rng, redraws, [&](const GroupParams& g, Index r) {
    std::uniform_real_distribution<double> unif(1.0, 1.5);
    const Eigen::MatrixXd base = attachment_graph(cfg.nodes, unif(rng), rng);
    std::vector<MetricObject> obs;
    for (Index l = 0; l < r; ++l) obs.emplace_back(GraphLaplacian::from_adjacency(toggle_edges(base, g.tau, rng)));
    return obs;
  });
}

Dataset gen_vector(const ScenarioConfig& cfg, std::mt19937_64& rng, Index* redraws) {
  return build(cfg, ObjectKind::vector, rng, redraws, [&](const GroupParams& g, Index r) {
    const SubjectLatent lat = draw_latent(g, r, cfg.vector_dim, rng);
    std::vector<MetricObject> obs;
    for (Index l = 0; l < r; ++l) obs.emplace_back(EuclideanVector(lat.theta.row(l).transpose()));
    return obs;
  });
}

Dataset gen_composite(const ScenarioConfig& cfg, std::mt19937_64& rng, Index* redraws) {
  const Eigen::VectorXd grid = midpoint_grid(cfg.grid_size);
  Dataset d = build(cfg, ObjectKind::composite, rng, redraws, [&](const GroupParams& g, Index r) {
    const SubjectLatent lat = draw_latent(g, r, cfg.vector_dim, rng);
    const Eigen::MatrixXd base = attachment_graph(cfg.nodes, lat.eta, rng);
    std::vector<MetricObject> obs;
    for (Index l = 0; l < r; ++l) {
      CompositeObject c;
      c.parts.emplace_back(QuantileDistribution(
          truncated_normal_quantiles(lat.theta(l, 0), lat.eta, -cfg.support, cfg.support, grid)));
      c.parts.emplace_back(GraphLaplacian::from_adjacency(toggle_edges(base, g.tau, rng)));
      c.parts.emplace_back(EuclideanVector(lat.theta.row(l).transpose()));
      obs.emplace_back(std::move(c));
    }
    return obs;
  });
  d.grid_size = cfg.grid_size;
  return d;
}

Dataset generate(const ScenarioConfig& cfg, std::mt19937_64& rng, Index* redraws) {
  switch (cfg.kind) {
    case Scenario::distributional: return gen_distributional(cfg, rng, redraws);
    case Scenario::network: return gen_network(cfg, rng, redraws);
    case Scenario::vector: return gen_vector(cfg, rng, redraws);
    case Scenario::composite: return gen_composite(cfg, rng, redraws);
  }
  throw DomainError("unknown scenario");
}

Dataset generate_replicate(const ScenarioConfig& cfg, Index index, Index* redraws) {
  auto rng = stream_for(cfg.seed, static_cast<std::uint64_t>(index));
  return generate(cfg, rng, redraws);
}

const MethodOutcome& StudyReport::method(const std::string& name) const {
  for (const auto& m : methods)
    if (m.method == name) return m;
  throw DomainError("study has no results for method '" + name + "'");
}

StudyReport run_study(const ScenarioConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  const auto reps = static_cast<std::size_t>(cfg.replicates);
  std::vector<double> q_p(cfg.run_q ? reps : 0), af_p(cfg.run_af ? reps : 0);
  std::vector<Index> redraws(reps, 0);

  TestOptions opts;
  opts.alpha = cfg.alpha;
  opts.critical_value = false;

  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::atomic<bool> stop{false};
  auto work = [&](Index first, Index stride) {
    for (Index b = first; b < cfg.replicates && !stop; b += stride) {
      const auto bi = static_cast<std::size_t>(b);
      try {
        const Dataset data = generate_replicate(cfg, b, &redraws[bi]);
        if (cfg.run_q) q_p[bi] = run_test(data, opts).p_value;
        if (cfg.run_af) af_p[bi] = af_test(data, opts).p_value;
      } catch (const Error& e) {
        std::lock_guard lock(failure_mutex);
        if (!failure)
          failure = std::make_exception_ptr(Error(e.code(), "replicate " + std::to_string(b) + ": " + e.what()));
        stop = true;
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        stop = true;
      }
    }
  };
  const Index workers = std::clamp<Index>(cfg.threads, 1, cfg.replicates);
  if (workers == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (Index w = 0; w < workers; ++w) pool.emplace_back(work, w, workers);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  StudyReport report;
  report.config = cfg;
  auto tabulate = [&](const char* name, std::vector<double> p) {
    MethodOutcome m;
    m.method = name;
    for (double v : p) m.rejections += v < cfg.alpha ? 1 : 0;
    m.rate = static_cast<double>(m.rejections) / static_cast<double>(cfg.replicates);
    m.se = std::sqrt(m.rate * (1.0 - m.rate) / static_cast<double>(cfg.replicates));
    m.p_values = std::move(p);
    report.methods.push_back(std::move(m));
  };
  if (cfg.run_q) tabulate("q", std::move(q_p));
  if (cfg.run_af) tabulate("af", std::move(af_p));
  for (Index r : redraws) report.redraws += r;
  report.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace repfrechet
