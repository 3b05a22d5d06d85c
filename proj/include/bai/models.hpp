#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "bai/error.hpp"
#include "bai/random.hpp"

namespace bai {

// Arm indices are 0-based inside the library. Everything printed for a user
// (CLI text, CSV share columns) is 1-based.

struct Gaussian {
  double mean;
  double variance;
};

struct Bernoulli {
  double p;
};

/// A per-arm reward law.
class ArmDistribution {
 public:
  static ArmDistribution gaussian(double mean, double variance) {
    if (!(variance > 0.0) || !std::isfinite(variance) || !std::isfinite(mean)) {
      throw Error("gaussian arm needs a finite mean and a positive finite variance");
    }
    return ArmDistribution(Gaussian{mean, variance});
  }

  static ArmDistribution bernoulli(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error("bernoulli arm needs p in [0, 1]");
    return ArmDistribution(Bernoulli{p});
  }

  double mean() const {
    return std::visit(
        [](const auto& d) {
          if constexpr (std::is_same_v<std::decay_t<decltype(d)>, Gaussian>) {
            return d.mean;
          } else {
            return d.p;
          }
        },
        law_);
  }

  double variance() const {
    return std::visit(
        [](const auto& d) {
          if constexpr (std::is_same_v<std::decay_t<decltype(d)>, Gaussian>) {
            return d.variance;
          } else {
            return d.p * (1.0 - d.p);
          }
        },
        law_);
  }

  bool is_gaussian() const { return std::holds_alternative<Gaussian>(law_); }
  bool is_bernoulli() const { return std::holds_alternative<Bernoulli>(law_); }
  const std::variant<Gaussian, Bernoulli>& law() const { return law_; }

  /// One draw. Gaussian: mean + sqrt(variance) * rng.normal().
  /// Bernoulli: 1 if rng.uniform01() < p, else 0.
  double sample(RandomStream& rng) const {
    if (const auto* g = std::get_if<Gaussian>(&law_)) {
      return g->mean + std::sqrt(g->variance) * rng.normal();
    }
    return rng.uniform01() < std::get<Bernoulli>(law_).p ? 1.0 : 0.0;
  }

  friend bool operator==(const ArmDistribution& a, const ArmDistribution& b) {
    if (a.law_.index() != b.law_.index()) return false;
    if (a.is_gaussian()) {
      const auto& x = std::get<Gaussian>(a.law_);
      const auto& y = std::get<Gaussian>(b.law_);
      return x.mean == y.mean && x.variance == y.variance;
    }
    return std::get<Bernoulli>(a.law_).p == std::get<Bernoulli>(b.law_).p;
  }

 private:
  explicit ArmDistribution(std::variant<Gaussian, Bernoulli> law) : law_(law) {}

  std::variant<Gaussian, Bernoulli> law_;
};

/// An ordered collection of K >= 2 arms. Arms need not be sorted by mean.
class BanditInstance {
 public:
  explicit BanditInstance(std::vector<ArmDistribution> arms) : arms_(std::move(arms)) {
    if (arms_.size() < 2) throw Error("a bandit instance needs at least two arms");
  }

  std::size_t size() const { return arms_.size(); }
  const ArmDistribution& arm(std::size_t a) const { return arms_.at(a); }
  const std::vector<ArmDistribution>& arms() const { return arms_; }

  std::vector<double> means() const {
    std::vector<double> out;
    out.reserve(arms_.size());
    for (const auto& d : arms_) out.push_back(d.mean());
    return out;
  }

  std::vector<double> variances() const {
    std::vector<double> out;
    out.reserve(arms_.size());
    for (const auto& d : arms_) out.push_back(d.variance());
    return out;
  }

  friend bool operator==(const BanditInstance&, const BanditInstance&) = default;

 private:
  std::vector<ArmDistribution> arms_;
};

/// Index of the strictly largest value. Throws "no unique best arm" on a tie
/// of the maximum.
template <class Range>
std::size_t unique_argmax(const Range& values) {
  const std::size_t k = std::size(values);
  if (k == 0) throw Error("no unique best arm");
  std::size_t best = 0;
  for (std::size_t a = 1; a < k; ++a) {
    if (values[a] > values[best]) best = a;
  }
  for (std::size_t a = 0; a < k; ++a) {
    if (a != best && !(values[a] < values[best])) throw Error("no unique best arm");
  }
  return best;
}

inline std::size_t best_arm(const BanditInstance& instance) {
  return unique_argmax(instance.means());
}

// --- Benchmark catalogue ----------------------------------------------------

inline constexpr int kScenarioCount = 8;

/// Two-armed Gaussian scenario `id` in 1..8.
inline BanditInstance scenario(int id) {
  struct Row {
    double mu1, mu2, var1, var2;
  };
  static constexpr Row rows[kScenarioCount] = {
      {0.05, 0.01, 1.0, 0.2}, {0.05, 0.01, 1.0, 0.1}, {0.05, 0.03, 1.0, 0.2},
      {0.05, 0.03, 1.0, 0.1}, {0.8, 0.75, 5.0, 3.0},  {0.8, 0.75, 5.0, 1.0},
      {0.8, 0.79, 5.0, 3.0},  {0.8, 0.79, 5.0, 1.0},
  };
  if (id < 1 || id > kScenarioCount) {
    throw Error("unknown scenario id " + std::to_string(id) + " (expected 1..8)");
  }
  const Row& r = rows[id - 1];
  return BanditInstance({ArmDistribution::gaussian(r.mu1, r.var1),
                         ArmDistribution::gaussian(r.mu2, r.var2)});
}

/// Parses "s1".."s8".
inline int parse_scenario_id(std::string_view name) {
  if (name.size() == 2 && name[0] == 's' && name[1] >= '1' && name[1] <= '8') {
    return name[1] - '0';
  }
  throw Error("unknown scenario id \"" + std::string(name) + "\" (expected s1..s8)");
}

/// Parses "case1".."case6".
inline int parse_case_id(std::string_view name) {
  if (name.size() == 5 && name.substr(0, 4) == "case" && name[4] >= '1' && name[4] <= '6') {
    return name[4] - '0';
  }
  throw Error("unknown case id \"" + std::string(name) + "\" (expected case1..case6)");
}

/// Random multi-armed instance recipe.
///
/// `param` is the gap parameter Delta for cases 1, 3 and 5 and the second-best
/// mean mu_2 for cases 2, 4 and 6.
struct CaseRecipe {
  int id = 1;
  std::size_t arms = 3;
  double param = 0.1;
};

namespace detail {

inline bool one_of(double x, std::initializer_list<double> allowed) {
  return std::any_of(allowed.begin(), allowed.end(),
                     [x](double v) { return std::abs(x - v) <= 1e-9; });
}

inline double draw_variance(RandomStream& rng) {
  constexpr double kMinVariance = 1e-3;
  double v = rng.uniform01();
  while (v < kMinVariance) v = rng.uniform01();
  return v;
}

}  // namespace detail

inline void validate(const CaseRecipe& recipe) {
  if (recipe.id < 1 || recipe.id > 6) throw Error("invalid case id");
  if (recipe.arms < 2) throw Error("invalid combination: a case needs K >= 2");
  const bool gap_case = recipe.id % 2 == 1;
  if (gap_case && !detail::one_of(recipe.param, {0.01, 0.05, 0.1})) {
    throw Error("invalid combination: case" + std::to_string(recipe.id) +
                " takes Delta in {0.01, 0.05, 0.1}");
  }
  if (!gap_case && recipe.id != 6 && !detail::one_of(recipe.param, {0.90, 0.95, 0.99})) {
    throw Error("invalid combination: case" + std::to_string(recipe.id) +
                " takes mu2 in {0.90, 0.95, 0.99}");
  }
  if (recipe.id == 6 && !detail::one_of(recipe.param, {0.80, 0.85, 0.89})) {
    throw Error("invalid combination: case6 takes mu2 in {0.80, 0.85, 0.89}");
  }
}

/// Draws one instance from a case recipe. Arm 0 is always the best arm; for
/// cases 2, 4 and 6 arm 1 carries the fixed second-best mean.
///
/// Draw order per arm: mean (if random) then variance (if random). Variances
/// drawn from U[0,1] are redrawn while below 1e-3.
inline BanditInstance generate_case(const CaseRecipe& recipe, RandomStream& rng) {
  validate(recipe);
  const bool bernoulli = recipe.id >= 5;
  const bool random_variance = recipe.id <= 2;
  const bool gap_case = recipe.id % 2 == 1;
  const double best = bernoulli ? 0.9 : 1.0;
  const double top = bernoulli ? 0.89 : 0.99;

  auto make = [&](double mean) {
    if (bernoulli) return ArmDistribution::bernoulli(mean);
    const double var = random_variance ? detail::draw_variance(rng) : 1.0;
    return ArmDistribution::gaussian(mean, var);
  };

  std::vector<ArmDistribution> arms;
  arms.reserve(recipe.arms);
  arms.push_back(make(best));
  for (std::size_t a = 1; a < recipe.arms; ++a) {
    double mean;
    if (gap_case) {
      const double lo = std::min(best - recipe.param, top);
      mean = rng.uniform(lo, top);
    } else if (a == 1) {
      mean = recipe.param;
    } else {
      mean = rng.uniform(0.0, recipe.param);
    }
    arms.push_back(make(mean));
  }
  return BanditInstance(std::move(arms));
}

/// Instance-level complexity measures.
struct Complexity {
  double h1;      // sum over sub-optimal arms of 1 / Delta_a^2
  double h2;      // max over rank i >= 2 of i / Delta_(i)^2
  double hsigma;  // max over sub-optimal arms of (sigma_1^2 + sigma_a^2) / Delta_a^2
};

inline Complexity complexity_measures(const BanditInstance& instance) {
  const auto means = instance.means();
  const auto vars = instance.variances();
  const std::size_t best = unique_argmax(means);

  std::vector<double> gaps;
  Complexity c{0.0, 0.0, 0.0};
  for (std::size_t a = 0; a < means.size(); ++a) {
    if (a == best) continue;
    const double gap = means[best] - means[a];
    gaps.push_back(gap);
    c.h1 += 1.0 / (gap * gap);
    c.hsigma = std::max(c.hsigma, (vars[best] + vars[a]) / (gap * gap));
  }
  std::sort(gaps.begin(), gaps.end());
  for (std::size_t i = 0; i < gaps.size(); ++i) {
    const double rank = static_cast<double>(i + 2);
    c.h2 = std::max(c.h2, rank / (gaps[i] * gaps[i]));
  }
  return c;
}

/// One line per catalogue entry, e.g. "s1: Gaussian mu=(0.05,0.01) var=(1,0.2)".
inline std::vector<std::string> catalogue_lines() {
  std::vector<std::string> lines;
  for (int id = 1; id <= kScenarioCount; ++id) {
    const auto inst = scenario(id);
    char buf[160];
    std::snprintf(buf, sizeof buf, "s%d: Gaussian mu=(%g,%g) var=(%g,%g)", id,
                  inst.arm(0).mean(), inst.arm(1).mean(), inst.arm(0).variance(),
                  inst.arm(1).variance());
    lines.emplace_back(buf);
  }
  lines.emplace_back(
      "case1: Gaussian, best 1, var~U[0,1], sub-optimal mu~U[1-Delta,0.99], "
      "Delta in {0.01,0.05,0.1}");
  lines.emplace_back(
      "case2: Gaussian, best 1, var~U[0,1], mu2 fixed, others mu~U[0,mu2], "
      "mu2 in {0.90,0.95,0.99}");
  lines.emplace_back(
      "case3: Gaussian, best 1, var=1, sub-optimal mu~U[1-Delta,0.99], "
      "Delta in {0.01,0.05,0.1}");
  lines.emplace_back(
      "case4: Gaussian, best 1, var=1, mu2 fixed, others mu~U[0,mu2], "
      "mu2 in {0.90,0.95,0.99}");
  lines.emplace_back(
      "case5: Bernoulli, best 0.9, sub-optimal p~U[0.9-Delta,0.89], "
      "Delta in {0.01,0.05,0.1}");
  lines.emplace_back(
      "case6: Bernoulli, best 0.9, mu2 fixed, others p~U[0,mu2], "
      "mu2 in {0.80,0.85,0.89}");
  return lines;
}

}  // namespace bai
