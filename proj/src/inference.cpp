#include "repfrechet/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>

namespace repfrechet {

namespace {

std::string quoted(const GroupSummary& g, std::size_t j) {
  return g.name.empty() ? "#" + std::to_string(j) : "'" + g.name + "'";
}

void note(std::vector<Diagnostic>* out, std::string code, std::string message) {
  if (out) out->push_back({std::move(code), std::move(message)});
}

struct Dispersion {
  double term = 0.0;
  std::optional<double> raw;
};

// N * sum_{j<l} w_j w_l (x_j - x_l)^2 / sum_j w_j with w_j = lambda_j / v_j.
// One group with v_j = 0 is handled by the limit w_j -> infinity, which
// leaves N * sum_{l != d} w_l (x_d - x_l)^2.
Dispersion dispersion(const std::vector<GroupSummary>& groups, const std::vector<double>& x,
                      const std::vector<VarianceEstimate>& v, double N, const char* what,
                      std::vector<Diagnostic>* diagnostics) {
  const std::size_t k = groups.size();
  std::vector<std::size_t> degenerate;
  for (std::size_t j = 0; j < k; ++j) {
    if (v[j].degenerate) degenerate.push_back(j);
  }
  if (degenerate.size() > 1) {
    std::string names;
    for (std::size_t d : degenerate) names += (names.empty() ? "" : ", ") + quoted(groups[d], d);
    throw CalibrationError(std::string("the ") + what + " variance estimate vanishes in groups " + names +
                           "; the test statistic is undefined");
  }
  Dispersion out;
  if (degenerate.size() == 1) {
    const std::size_t d = degenerate.front();
    double total = 0.0;
    for (std::size_t l = 0; l < k; ++l) {
      if (l == d) continue;
      const double diff = x[d] - x[l];
      total += groups[l].lambda / v[l].value * diff * diff;
    }
    out.term = N * total;
    note(diagnostics, std::string("degenerate_") + what,
         std::string("the ") + what + " variance estimate of group " + quoted(groups[d], d) +
             " is zero; its term uses the limiting form");
    return out;
  }
  double raw = 0.0;
  double wsum = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    const double wj = groups[j].lambda / v[j].value;
    wsum += wj;
    for (std::size_t l = j + 1; l < k; ++l) {
      const double diff = x[j] - x[l];
      raw += wj * (groups[l].lambda / v[l].value) * diff * diff;
    }
  }
  out.raw = raw;
  out.term = N * raw / wsum;
  return out;
}

// Unit direction of s = (lambda_j^{1/2} / sd_j)_j; e_d when group d is degenerate.
Eigen::VectorXd projection_direction(const std::vector<GroupSummary>& groups,
                                     const std::vector<VarianceEstimate>& v, const char* what) {
  const Index k = static_cast<Index>(groups.size());
  Eigen::VectorXd s = Eigen::VectorXd::Zero(k);
  Index degenerate = -1;
  for (Index j = 0; j < k; ++j) {
    const auto& e = v[static_cast<std::size_t>(j)];
    if (e.degenerate) {
      if (degenerate >= 0) {
        throw CalibrationError(std::string("the ") + what +
                               " variance estimate vanishes in more than one group");
      }
      degenerate = j;
    } else {
      s[j] = std::sqrt(groups[static_cast<std::size_t>(j)].lambda) / std::sqrt(e.value);
    }
  }
  if (degenerate >= 0) {
    s.setZero();
    s[degenerate] = 1.0;
    return s;
  }
  return s / s.norm();
}

Eigen::MatrixXd complement_projector(const Eigen::VectorXd& unit) {
  const Index k = unit.size();
  return Eigen::MatrixXd::Identity(k, k) - unit * unit.transpose();
}

std::vector<VarianceEstimate> sigma2_of(const std::vector<GroupSummary>& groups) {
  std::vector<VarianceEstimate> v;
  for (const auto& g : groups) v.push_back(g.sigma2);
  return v;
}

std::vector<VarianceEstimate> gamma2_of(const std::vector<GroupSummary>& groups) {
  std::vector<VarianceEstimate> v;
  for (std::size_t j = 0; j < groups.size(); ++j) {
    if (!groups[j].gamma2) {
      throw CalibrationError("group " + quoted(groups[j], j) +
                             " has no subject with at least two repeated measures; every group "
                             "needs r_i >= 2 for some subject (or use the reduced --no-within test)");
    }
    v.push_back(*groups[j].gamma2);
  }
  return v;
}

void require_groups(const std::vector<GroupSummary>& groups) {
  if (groups.size() < 2) throw DomainError("the test needs at least two groups");
}

}  // namespace

TestComponents compute_components(const std::vector<GroupSummary>& groups, double V_pooled, Index N,
                                  bool within, std::vector<Diagnostic>* diagnostics) {
  require_groups(groups);
  const auto n = static_cast<double>(N);
  TestComponents c;
  c.within = within;

  const auto s2 = sigma2_of(groups);
  std::vector<VarianceEstimate> g2;
  if (within) g2 = gamma2_of(groups);

  double weighted = 0.0;
  double spread = 0.0;
  std::vector<double> V;
  for (const auto& g : groups) {
    weighted += g.lambda * g.V_hat;
    spread += g.lambda * g.lambda * g.sigma2.value;
    V.push_back(g.V_hat);
  }
  c.D_n = V_pooled - weighted;
  if (!(spread > 0.0)) {
    throw CalibrationError("the Fréchet variance estimate vanishes in every group; the test statistic is undefined");
  }
  c.mean_term = n * c.D_n * c.D_n / spread;

  const Dispersion u = dispersion(groups, V, s2, n, "frechet", diagnostics);
  c.U_n = u.raw;
  c.variance_term = u.term;

  if (within) {
    std::vector<double> rho;
    for (const auto& g : groups) rho.push_back(*g.rho_hat);
    const Dispersion r = dispersion(groups, rho, g2, n, "within", diagnostics);
    c.R_n = r.raw;
    c.within_term = r.term;
  }
  c.Q_n = c.mean_term + c.variance_term + c.within_term;
  return c;
}

Eigen::MatrixXd limiting_matrix(const std::vector<GroupSummary>& groups, bool within,
                                std::vector<Diagnostic>* diagnostics) {
  require_groups(groups);
  const Index k = static_cast<Index>(groups.size());
  const Eigen::MatrixXd A = complement_projector(projection_direction(groups, sigma2_of(groups), "frechet"));
  if (!within) return A;

  const Eigen::MatrixXd B = complement_projector(projection_direction(groups, gamma2_of(groups), "within"));
  Eigen::VectorXd xi = Eigen::VectorXd::Zero(k);
  for (Index j = 0; j < k; ++j) {
    const auto& g = groups[static_cast<std::size_t>(j)];
    if (g.xi) {
      xi[j] = g.xi->value;
      if (g.xi->clamped) {
        note(diagnostics, "xi_clamped", "xi estimate of group " + quoted(g, static_cast<std::size_t>(j)) +
                                            " was clamped to " + std::to_string(g.xi->value));
      }
    }
  }
  Eigen::MatrixXd m(2 * k, 2 * k);
  const Eigen::MatrixXd cross = A * xi.asDiagonal() * B;
  m.topLeftCorner(k, k) = A;
  m.topRightCorner(k, k) = cross;
  m.bottomLeftCorner(k, k) = cross.transpose();
  m.bottomRightCorner(k, k) = B;
  return m;
}

std::vector<double> positive_eigenvalues(const Eigen::MatrixXd& matrix, Index cap,
                                         std::vector<Diagnostic>* diagnostics) {
  if (matrix.rows() != matrix.cols()) throw ShapeError("eigenvalues of a non-square matrix");
  if (matrix.size() > 0 && (matrix - matrix.transpose()).cwiseAbs().maxCoeff() > kStructuralTolerance) {
    throw DomainError("eigenvalue input is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(matrix, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericError("symmetric eigen-decomposition failed");
  const Eigen::VectorXd& ev = solver.eigenvalues();  // ascending
  const double largest = ev.size() ? ev[ev.size() - 1] : 0.0;
  const double threshold = kEigenvalueTolerance * std::max(1.0, largest);
  std::vector<double> out;
  for (Index i = ev.size() - 1; i >= 0; --i) {
    if (ev[i] > threshold) out.push_back(ev[i]);
  }
  if (static_cast<Index>(out.size()) > cap) {
    note(diagnostics, "eigenvalues_truncated",
         std::to_string(out.size()) + " eigenvalues exceed the threshold; keeping the largest " +
             std::to_string(cap));
    out.resize(static_cast<std::size_t>(cap));
  }
  return out;
}

namespace {

bool group_less(const CanonicalGroup& a, const CanonicalGroup& b) {
  const std::size_t n = std::min(a.subjects.size(), b.subjects.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto& x = a.subjects[i];
    const auto& y = b.subjects[i];
    const std::size_t m = std::min(x.size(), y.size());
    for (std::size_t l = 0; l < m; ++l) {
      if (int c = compare(*x[l], *y[l]); c != 0) return c < 0;
    }
    if (x.size() != y.size()) return x.size() < y.size();
  }
  return a.subjects.size() < b.subjects.size();
}

}  // namespace

TestResult run_test(const Dataset& dataset, const TestOptions& options) {
  if (!(options.alpha > 0.0 && options.alpha < 1.0)) throw DomainError("alpha must lie in (0,1)");
  validate(dataset);
  const Metric metric = dataset.metric();
  const std::size_t k = dataset.groups.size();
  if (k < 2) throw DomainError("the test needs at least two groups");

  // Groups are processed in a canonical order so that relabeling groups
  // cannot change any floating-point sum.
  std::vector<CanonicalGroup> canon;
  canon.reserve(k);
  for (const auto& g : dataset.groups) canon.push_back(canonical_order(g));
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return group_less(canon[a], canon[b]); });

  std::vector<CanonicalGroup> sorted;
  std::vector<MetricObject> means;
  std::vector<GroupSummary> summaries;
  for (std::size_t j : order) {
    sorted.push_back(canon[j]);
    const auto obs = canon[j].observations();
    MetricObject mean = frechet_mean(metric, std::span<const MetricObject* const>(obs));
    const GroupGeometry geometry = group_geometry(canon[j], metric, mean);
    means.push_back(mean);
    summaries.push_back(summarize_group(dataset.groups[j].name, canon[j], geometry, std::move(mean)));
  }
  const PooledVariance pooled = pooled_variance(sorted, means, metric, dataset.kind);

  double N = 0.0;
  for (const auto& s : summaries) N += static_cast<double>(s.N);
  for (auto& s : summaries) s.lambda = static_cast<double>(s.N) / N;

  TestResult result;
  result.alpha = options.alpha;
  result.N = static_cast<Index>(N);
  result.V_pooled = pooled.V_hat;
  for (std::size_t j = 0; j < summaries.size(); ++j) {
    const auto& s = summaries[j];
    if (s.sigma2.clamped) {
      result.diagnostics.push_back({"sigma2_clamped", "negative sigma^2 estimate of group " + quoted(s, j) + " set to 0"});
    }
    if (options.within && s.gamma2 && s.gamma2->clamped) {
      result.diagnostics.push_back({"gamma2_clamped", "negative gamma^2 estimate of group " + quoted(s, j) + " set to 0"});
    }
  }

  result.components = compute_components(summaries, pooled.V_hat, result.N, options.within, &result.diagnostics);
  result.calibration.matrix = limiting_matrix(summaries, options.within, &result.diagnostics);
  const Index cap = options.within ? 2 * static_cast<Index>(k) - 2 : static_cast<Index>(k) - 1;
  result.calibration.eigenvalues = positive_eigenvalues(result.calibration.matrix, cap, &result.diagnostics);
  if (result.calibration.eigenvalues.empty()) {
    throw CalibrationError("the limiting covariance has no positive eigenvalues");
  }

  SfOptions sf;
  sf.method = options.pvalue_method;
  sf.mc_draws = options.mc_draws;
  sf.seed = options.seed;
  const SfResult p = weighted_chisq_sf(result.components.Q_n, result.calibration.eigenvalues, sf);
  result.p_value = p.value;
  result.calibration.method = p.method;
  if (p.fell_back) {
    result.diagnostics.push_back({"pvalue_fallback", "quadrature did not converge; Monte Carlo p-value used"});
  }
  if (options.critical_value) {
    result.critical_value = weighted_chisq_quantile(options.alpha, result.calibration.eigenvalues, sf);
  }
  result.reject = result.p_value < options.alpha;

  // Report groups in input order.
  result.groups.clear();
  std::vector<std::size_t> position(k);
  for (std::size_t i = 0; i < k; ++i) position[order[i]] = i;
  for (std::size_t j = 0; j < k; ++j) result.groups.push_back(summaries[position[j]]);
  const Eigen::MatrixXd& m = result.calibration.matrix;
  const Index blocks = m.rows() / static_cast<Index>(k);
  auto slot = [&](Index i) {
    const Index block = i / static_cast<Index>(k), j = i % static_cast<Index>(k);
    return block * static_cast<Index>(k) + static_cast<Index>(position[static_cast<std::size_t>(j)]);
  };
  Eigen::MatrixXd reordered(m.rows(), m.cols());
  for (Index a = 0; a < blocks * static_cast<Index>(k); ++a)
    for (Index b = 0; b < blocks * static_cast<Index>(k); ++b) reordered(a, b) = m(slot(a), slot(b));
  result.calibration.matrix = std::move(reordered);
  return result;
}

}  // namespace repfrechet
