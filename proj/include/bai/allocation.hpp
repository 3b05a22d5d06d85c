#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "bai/error.hpp"
#include "bai/models.hpp"

namespace bai {

/// A point on the probability simplex: non-negative weights summing to one.
class Allocation {
 public:
  static constexpr double kSumTolerance = 1e-12;

  explicit Allocation(std::vector<double> weights) : weights_(std::move(weights)) {
    if (weights_.empty()) throw Error("allocation needs at least one weight");
    double total = 0.0;
    for (double w : weights_) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw Error("allocation weights must be >= 0");
      total += w;
    }
    if (std::abs(total - 1.0) > kSumTolerance) throw Error("allocation weights must sum to 1");
  }

  static Allocation uniform(std::size_t k) {
    return Allocation(std::vector<double>(k, 1.0 / static_cast<double>(k)));
  }

  std::size_t size() const { return weights_.size(); }
  double operator[](std::size_t a) const { return weights_[a]; }
  std::span<const double> weights() const { return weights_; }

 private:
  std::vector<double> weights_;
};

/// Result of the optimal-allocation solve.
struct AllocationSolution {
  Allocation allocation;
  double y_star;      // root of balance(y) = 1
  double gamma_star;  // min over sub-optimal arms of rate_G at the optimum
  std::size_t iterations;
};

struct SolverOptions {
  double tol = 1e-12;
  std::size_t max_iterations = 200;
};

namespace detail {

inline void check_moments(std::span<const double> means, std::span<const double> variances) {
  if (means.size() != variances.size()) throw Error("means and variances differ in length");
  if (means.size() < 2) throw Error("need at least two arms");
  for (double v : variances) {
    if (!(v > 0.0) || !std::isfinite(v)) throw Error("variances must be positive and finite");
  }
  for (double m : means) {
    if (!std::isfinite(m)) throw Error("means must be finite");
  }
}

/// psi_a(y) without range checks. Index `best` plays the role of arm 1.
/// Lowest index attaining the maximum; a tied maximum is allowed.
inline std::size_t first_argmax(std::span<const double> values) {
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

inline double psi_unchecked(std::size_t a, std::size_t best, double y,
                            std::span<const double> means, std::span<const double> variances) {
  const double gap = means[best] - means[a];
  return (gap * gap - 2.0 * y * variances[best]) / (2.0 * variances[a] * y);
}

/// F(y); +inf once any psi_a has reached zero.
inline double balance_unchecked(std::size_t best, double y, std::span<const double> means,
                                std::span<const double> variances) {
  double total = 0.0;
  for (std::size_t a = 0; a < means.size(); ++a) {
    if (a == best) continue;
    const double p = psi_unchecked(a, best, y, means, variances);
    if (!(p > 0.0)) return std::numeric_limits<double>::infinity();
    total += variances[best] / (variances[a] * p * p);
  }
  return total;
}

/// Right end of the domain of F: (mu_1 - mu_2)^2 / (2 sigma_1^2) with mu_2
/// the largest sub-optimal mean.
inline double balance_upper(std::size_t best, std::span<const double> means,
                            std::span<const double> variances) {
  double runner_up = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < means.size(); ++a) {
    if (a != best) runner_up = std::max(runner_up, means[a]);
  }
  const double gap = means[best] - runner_up;
  return gap * gap / (2.0 * variances[best]);
}

}  // namespace detail

/// psi_a(y) = ((mu_1 - mu_a)^2 - 2 y sigma_1^2) / (2 sigma_a^2 y), where arm 1
/// is the best arm of the supplied moments. Valid for y in (0, Delta_a^2/(2 sigma_1^2)];
/// the value is exactly zero at the right endpoint.
inline double psi(std::size_t a, double y, std::span<const double> means,
                  std::span<const double> variances) {
  detail::check_moments(means, variances);
  const std::size_t best = unique_argmax(means);
  if (a >= means.size() || a == best) throw Error("psi is defined for sub-optimal arms only");
  const double gap = means[best] - means[a];
  const double upper = gap * gap / (2.0 * variances[best]);
  if (!(y > 0.0) || y > upper) throw Error("y out of range");
  return detail::psi_unchecked(a, best, y, means, variances);
}

/// F(y) = sum over sub-optimal a of sigma_1^2 / (sigma_a^2 psi_a(y)^2).
/// Strictly increasing on (0, U) with U = (mu_1 - mu_2)^2/(2 sigma_1^2);
/// returns +inf at y = U.
inline double balance(double y, std::span<const double> means, std::span<const double> variances) {
  detail::check_moments(means, variances);
  const std::size_t best = unique_argmax(means);
  const double upper = detail::balance_upper(best, means, variances);
  if (!(y > 0.0) || y > upper) throw Error("y out of range");
  if (y == upper) return std::numeric_limits<double>::infinity();
  return detail::balance_unchecked(best, y, means, variances);
}

/// G_a(w_1, w_a) = (mu_1 - mu_a)^2 / (2 (sigma_1^2/w_1 + sigma_a^2/w_a)),
/// extended by 0 when min(w_1, w_a) = 0. Arm 1 is the lowest-index arm with
/// the largest mean, so an arm tied with it has rate 0.
inline double rate_G(std::size_t a, double w1, double wa, std::span<const double> means,
                     std::span<const double> variances) {
  detail::check_moments(means, variances);
  if (w1 < 0.0 || wa < 0.0) throw Error("negative weights");
  const std::size_t best = detail::first_argmax(means);
  if (a >= means.size() || a == best) throw Error("rate_G is defined for sub-optimal arms only");
  if (w1 == 0.0 || wa == 0.0) return 0.0;
  const double gap = means[best] - means[a];
  return gap * gap / (2.0 * (variances[best] / w1 + variances[a] / wa));
}

/// min over sub-optimal arms of rate_G at a fixed allocation (0 when the
/// largest mean is tied).
inline double exponent_of(std::span<const double> means, std::span<const double> variances,
                          const Allocation& w) {
  detail::check_moments(means, variances);
  if (w.size() != means.size()) throw Error("allocation size does not match the instance");
  const std::size_t best = detail::first_argmax(means);
  double value = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < means.size(); ++a) {
    if (a == best) continue;
    if (w[best] == 0.0 || w[a] == 0.0) return 0.0;
    const double gap = means[best] - means[a];
    value = std::min(value, gap * gap / (2.0 * (variances[best] / w[best] + variances[a] / w[a])));
  }
  return value;
}

inline double exponent_of(const BanditInstance& instance, const Allocation& w) {
  const auto m = instance.means();
  const auto v = instance.variances();
  return exponent_of(m, v, w);
}

/// Optimal allocation w* by bisection on balance(y) = 1.
///
/// The root is bracketed in [eps U, U (1 - eps)] with eps = 1e-15; the lower
/// edge is pushed down by decades while F(lo) >= 1. Iteration stops when
/// |F(y) - 1| <= tol, or when the bracket has shrunk to adjacent doubles (no
/// further progress is representable; the better endpoint is returned).
/// Throws on a tied best mean and after max_iterations without convergence.
inline AllocationSolution solve_optimal_allocation(std::span<const double> means,
                                                   std::span<const double> variances,
                                                   const SolverOptions& options = {}) {
  detail::check_moments(means, variances);
  if (!(options.tol > 0.0)) throw Error("tolerance must be positive");
  const std::size_t best = unique_argmax(means);
  const double upper = detail::balance_upper(best, means, variances);
  if (!(upper > 0.0) || !std::isfinite(upper)) {
    throw Error("gap too small to represent the bisection bracket");
  }

  constexpr double kEdge = 1e-15;
  auto f = [&](double y) { return detail::balance_unchecked(best, y, means, variances); };

  double lo = kEdge * upper;
  double f_lo = f(lo);
  while (f_lo >= 1.0) {
    lo /= 10.0;
    if (!(lo > 0.0)) throw Error("bisection bracket: F does not drop below 1 near 0");
    f_lo = f(lo);
  }
  double hi = upper * (1.0 - kEdge);
  double f_hi = f(hi);
  if (!(f_hi > 1.0)) throw Error("bisection bracket: F does not exceed 1 near the upper edge");

  double y = lo;
  bool converged = false;
  std::size_t it = 0;
  for (; it < options.max_iterations; ++it) {
    const double mid = lo + 0.5 * (hi - lo);
    if (mid <= lo || mid >= hi) {
      // Bracket exhausted at double precision.
      y = std::abs(f_hi - 1.0) < std::abs(f_lo - 1.0) ? hi : lo;
      converged = true;
      break;
    }
    const double f_mid = f(mid);
    y = mid;
    if (std::abs(f_mid - 1.0) <= options.tol) {
      converged = true;
      ++it;
      break;
    }
    if (f_mid < 1.0) {
      lo = mid;
      f_lo = f_mid;
    } else {
      hi = mid;
      f_hi = f_mid;
    }
  }
  if (!converged) {
    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "bisection did not converge after %zu iterations: bracket [%.17g, %.17g], "
                  "F(lo) = %.17g, F(hi) = %.17g",
                  options.max_iterations, lo, hi, f_lo, f_hi);
    throw Error(buf);
  }

  const std::size_t k = means.size();
  std::vector<double> inv_psi(k, 0.0);
  double denom = 1.0;
  for (std::size_t a = 0; a < k; ++a) {
    if (a == best) continue;
    inv_psi[a] = 1.0 / detail::psi_unchecked(a, best, y, means, variances);
    denom += inv_psi[a];
  }
  std::vector<double> w(k);
  for (std::size_t a = 0; a < k; ++a) w[a] = (a == best ? 1.0 : inv_psi[a]) / denom;

  Allocation allocation(std::move(w));
  const double gamma = exponent_of(means, variances, allocation);
  return AllocationSolution{std::move(allocation), y, gamma, it};
}

inline AllocationSolution solve_optimal_allocation(const BanditInstance& instance,
                                                   const SolverOptions& options = {}) {
  const auto m = instance.means();
  const auto v = instance.variances();
  return solve_optimal_allocation(m, v, options);
}

}  // namespace bai
