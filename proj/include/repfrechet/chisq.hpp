#pragma once

// Survival function and quantiles of weighted sums of independent chi-squared
// variables with one degree of freedom, sum_j phi_j Z_j^2 with phi_j > 0.

#include <cstdint>
#include <span>

namespace repfrechet {

enum class SfMethod { quadrature, monte_carlo };

const char* to_string(SfMethod method) noexcept;

struct SfOptions {
  SfMethod method = SfMethod::quadrature;
  /// Absolute error target for the quadrature route.
  double tolerance = 1e-8;
  /// Draws for the Monte Carlo route (also used as fallback).
  std::int64_t mc_draws = 1'000'000;
  std::uint64_t seed = 20240917;
};

struct SfResult {
  double value = 1.0;
  SfMethod method = SfMethod::quadrature;
  /// True when the requested method was quadrature but it failed to converge
  /// and the Monte Carlo estimate was returned instead.
  bool fell_back = false;
  double error_estimate = 0.0;
};

/// P(sum_j phi_j Z_j^2 > q). Throws DomainError on empty or nonpositive weights.
///
/// The quadrature route inverts the characteristic function along a parabolic
/// contour in the lower half plane, t(x) = x - i (c + a x^2), on which the
/// integrand decays like exp(-a q x^2); the contour stays clear of the branch
/// points at -i / (2 phi_j). The result is clamped to [0, 1].
SfResult weighted_chisq_sf(double q, std::span<const double> weights, const SfOptions& options = {});

/// Monte Carlo estimate of the survival function from `draws` samples.
double weighted_chisq_sf_mc(double q, std::span<const double> weights, std::int64_t draws,
                            std::uint64_t seed);

/// Smallest q with sf(q) <= upper_tail, by bisection to absolute width `tol`.
double weighted_chisq_quantile(double upper_tail, std::span<const double> weights,
                               const SfOptions& options = {}, double tol = 1e-10);

}  // namespace repfrechet
