#include "repfrechet/chisq.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "repfrechet/error.hpp"

namespace repfrechet {

const char* to_string(SfMethod method) noexcept {
  return method == SfMethod::quadrature ? "quadrature" : "monte_carlo";
}

namespace {

void check_weights(std::span<const double> weights) {
  if (weights.empty()) throw DomainError("weighted chi-squared needs at least one weight");
  for (double w : weights) {
    if (!(w > 0.0) || !std::isfinite(w)) throw DomainError("weighted chi-squared weights must be positive");
  }
}

// Real-axis crossing of the contour: the saddle point of
// -q c - 1/2 sum log(1 - 2 phi_j c) - log c on (0, 1/(2 phi_max)).
double saddle_offset(double q, std::span<const double> weights) {
  const double phi_max = *std::max_element(weights.begin(), weights.end());
  const double upper = 0.5 / phi_max;
  auto slope = [&](double c) {
    double s = -q - 1.0 / c;
    for (double w : weights) s += w / (1.0 - 2.0 * w * c);
    return s;
  };
  double lo = 0.0;
  double hi = upper;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * upper; ++it) {
    const double mid = 0.5 * (lo + hi);
    (slope(mid) < 0.0 ? lo : hi) = mid;
  }
  // Keep a margin from the branch point.
  return std::min(0.5 * (lo + hi), 0.9 * upper);
}

struct Quadrature {
  double value;
  double error;
  bool ok;
};

Quadrature contour_integral(double q, std::span<const double> weights, double tolerance) {
  using cplx = std::complex<double>;
  const double c = saddle_offset(q, weights);
  const double a = 1.0 / c;
  const cplx I(0.0, 1.0);

  auto integrand = [&](double x) -> double {
    const cplx t(x, -(c + a * x * x));
    const cplx dt(1.0, -2.0 * a * x);
    cplx log_cf = -I * t * q;
    for (double w : weights) log_cf -= 0.5 * std::log(1.0 - 2.0 * I * w * t);
    const cplx h = std::exp(log_cf) * dt / t;
    return h.imag();
  };

  double error = 0.0;
  double l1 = 0.0;
  const double value = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      integrand, 0.0, std::numeric_limits<double>::infinity(), 15, 1e-13, &error, &l1);
  const double p = value / std::numbers::pi;
  const double err = error / std::numbers::pi;
  return {p, err, std::isfinite(p) && err <= tolerance};
}

}  // namespace

double weighted_chisq_sf_mc(double q, std::span<const double> weights, std::int64_t draws,
                            std::uint64_t seed) {
  check_weights(weights);
  if (draws < 1) throw DomainError("Monte Carlo draw count must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::int64_t exceed = 0;
  for (std::int64_t b = 0; b < draws; ++b) {
    double s = 0.0;
    for (double w : weights) {
      const double x = z(rng);
      s += w * x * x;
    }
    if (s > q) ++exceed;
  }
  return static_cast<double>(exceed) / static_cast<double>(draws);
}

SfResult weighted_chisq_sf(double q, std::span<const double> weights, const SfOptions& options) {
  check_weights(weights);
  SfResult result;
  result.method = options.method;
  if (!(q > 0.0)) {
    result.value = 1.0;
    return result;
  }
  if (options.method == SfMethod::quadrature) {
    const Quadrature quad = contour_integral(q, weights, options.tolerance);
    if (quad.ok) {
      result.value = std::clamp(quad.value, 0.0, 1.0);
      result.error_estimate = quad.error;
      return result;
    }
    result.fell_back = true;
  }
  result.method = SfMethod::monte_carlo;
  result.value = weighted_chisq_sf_mc(q, weights, options.mc_draws, options.seed);
  result.error_estimate =
      std::sqrt(std::max(result.value * (1.0 - result.value), 1e-300) / static_cast<double>(options.mc_draws));
  return result;
}

double weighted_chisq_quantile(double upper_tail, std::span<const double> weights,
                               const SfOptions& options, double tol) {
  check_weights(weights);
  if (!(upper_tail > 0.0 && upper_tail < 1.0)) throw DomainError("upper tail probability must lie in (0,1)");
  auto sf = [&](double q) { return weighted_chisq_sf(q, weights, options).value; };
  double lo = 0.0;
  double hi = 0.0;
  for (double w : weights) hi += w;
  hi = std::max(hi, 1.0);
  while (sf(hi) > upper_tail) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e12) throw NumericError("weighted chi-squared quantile did not bracket");
  }
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    (sf(mid) > upper_tail ? lo : hi) = mid;
  }
  return hi;
}

}  // namespace repfrechet
