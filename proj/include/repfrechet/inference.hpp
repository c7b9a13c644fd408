#pragma once

// The test statistic Q_n = N D_n^2 / sum lambda^2 sigma^2
//                        + N U_n / sum lambda / sigma^2
//                        + N R_n / sum lambda / gamma^2
// and its weighted chi-squared null calibration.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "repfrechet/chisq.hpp"
#include "repfrechet/estimators.hpp"

namespace repfrechet {

/// Relative eigenvalue threshold: eigenvalues above tau * max(1, largest) count as positive.
inline constexpr double kEigenvalueTolerance = 1e-8;

struct Diagnostic {
  std::string code;
  std::string message;
};

struct TestComponents {
  double D_n = 0.0;
  /// Raw U_n and R_n are infinite when a group's variance estimate is
  /// degenerate; they are then absent while the scaled terms stay finite.
  std::optional<double> U_n;
  std::optional<double> R_n;
  double Q_n = 0.0;
  double mean_term = 0.0;        ///< N D_n^2 / sum lambda^2 sigma^2
  double variance_term = 0.0;    ///< N U_n / sum lambda / sigma^2
  double within_term = 0.0;      ///< N R_n / sum lambda / gamma^2 (0 in reduced mode)
  bool within = true;            ///< false in the reduced (D and U only) mode
};

struct NullCalibration {
  Eigen::MatrixXd matrix;
  std::vector<double> eigenvalues;  ///< descending
  SfMethod method = SfMethod::quadrature;
};

struct TestOptions {
  double alpha = 0.05;
  /// Full statistic (D, U, R) or the reduced D + U statistic calibrated by A alone.
  bool within = true;
  SfMethod pvalue_method = SfMethod::quadrature;
  std::int64_t mc_draws = 1'000'000;
  std::uint64_t seed = 20240917;
  /// Also bisect for q_alpha (skipped in simulation studies).
  bool critical_value = true;
};

struct TestResult {
  TestComponents components;
  NullCalibration calibration;
  double p_value = 1.0;
  double alpha = 0.05;
  std::optional<double> critical_value;  ///< q_alpha
  bool reject = false;
  Index N = 0;
  double V_pooled = 0.0;
  std::vector<GroupSummary> groups;
  std::vector<Diagnostic> diagnostics;
};

/// Assemble D_n, U_n, R_n and Q_n from group summaries (lambda filled in).
/// Throws DomainError for k < 2 or (full mode) a group without rho_hat, and
/// CalibrationError when a term's variance estimates are degenerate in more
/// than one group. A single degenerate group enters through the limit of the
/// scaled term as its variance estimate tends to zero.
TestComponents compute_components(const std::vector<GroupSummary>& groups, double V_pooled, Index N,
                                  bool within = true, std::vector<Diagnostic>* diagnostics = nullptr);

/// The 2k x 2k matrix [[A, A diag(xi) B], [B diag(xi) A, B]] (or A alone in
/// reduced mode) with A = I - s_sigma s_sigma^T / |s_sigma|^2,
/// s_sigma = (lambda_j^{1/2} / sigma_j)_j, and B likewise with gamma.
Eigen::MatrixXd limiting_matrix(const std::vector<GroupSummary>& groups, bool within = true,
                                std::vector<Diagnostic>* diagnostics = nullptr);

/// Eigenvalues above kEigenvalueTolerance * max(1, largest), descending, at most `cap` of them.
std::vector<double> positive_eigenvalues(const Eigen::MatrixXd& matrix, Index cap,
                                         std::vector<Diagnostic>* diagnostics = nullptr);

/// Summaries, components, calibration and decision for one dataset.
TestResult run_test(const Dataset& dataset, const TestOptions& options = {});

}  // namespace repfrechet
