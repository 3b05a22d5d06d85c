#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "bai/error.hpp"

namespace bai {

/// Per-arm pull counts, reward sums and squared-reward sums.
///
/// Whatever is read from these statistics while choosing the arm of round t
/// must have been recorded in rounds 1..t-1 only; callers record a round after
/// all of its estimates have been consumed.
class RunningArmStats {
 public:
  explicit RunningArmStats(std::size_t arms)
      : counts_(arms, 0), sums_(arms, 0.0), sums_sq_(arms, 0.0) {}

  /// Builds statistics directly from per-arm tallies.
  RunningArmStats(std::vector<std::size_t> counts, std::vector<double> sums,
                  std::vector<double> sums_sq)
      : counts_(std::move(counts)), sums_(std::move(sums)), sums_sq_(std::move(sums_sq)) {
    if (counts_.size() != sums_.size() || counts_.size() != sums_sq_.size()) {
      throw Error("arm statistics have mismatched lengths");
    }
    for (std::size_t n : counts_) rounds_ += n;
  }

  void record(std::size_t arm, double reward) {
    ++counts_.at(arm);
    sums_[arm] += reward;
    sums_sq_[arm] += reward * reward;
    ++rounds_;
  }

  std::size_t arms() const { return counts_.size(); }
  std::size_t rounds() const { return rounds_; }
  std::size_t count(std::size_t a) const { return counts_.at(a); }
  double sum(std::size_t a) const { return sums_.at(a); }
  double sum_sq(std::size_t a) const { return sums_sq_.at(a); }

  /// Unclipped running mean; requires at least one pull.
  double mean(std::size_t a) const {
    if (counts_.at(a) == 0) throw Error("arm has zero pulls");
    return sums_[a] / static_cast<double>(counts_[a]);
  }

  /// zeta - mean^2 with zeta the mean squared reward; requires at least one pull.
  double raw_variance(std::size_t a) const {
    const double m = mean(a);
    return sums_sq_[a] / static_cast<double>(counts_[a]) - m * m;
  }

 private:
  std::vector<std::size_t> counts_;
  std::vector<double> sums_;
  std::vector<double> sums_sq_;
  std::size_t rounds_ = 0;
};

/// Running mean clamped to [-c_mu, c_mu]; 0 before the first pull.
inline double clipped_mean(const RunningArmStats& stats, std::size_t a, double c_mu) {
  if (stats.count(a) == 0) return 0.0;
  return std::clamp(stats.mean(a), -c_mu, c_mu);
}

/// Running variance clamped to [1/c_sigma2, c_sigma2]; 1 before the first pull.
inline double clipped_variance(const RunningArmStats& stats, std::size_t a, double c_sigma2) {
  if (stats.count(a) == 0) return 1.0;
  return std::clamp(stats.raw_variance(a), 1.0 / c_sigma2, c_sigma2);
}

/// 1[pulled == a] (x - mu_hat) / w + mu_hat
inline double aipw_pseudo_reward(std::size_t a, std::size_t pulled, double x, double mu_hat,
                                 double w) {
  if (!(w > 0.0)) throw Error("zero propensity");
  return a == pulled ? (x - mu_hat) / w + mu_hat : mu_hat;
}

/// AIPW form with the propensity replaced by the empirical pull frequency of
/// arm a over rounds 1..t-1.
inline double dr_pseudo_reward(std::size_t a, std::size_t pulled, double x, double mu_hat,
                               double empirical_propensity) {
  if (!(empirical_propensity > 0.0)) throw Error("zero empirical propensity");
  return a == pulled ? (x - mu_hat) / empirical_propensity + mu_hat : mu_hat;
}

/// 1[pulled == a] x / w
inline double ipw_pseudo_reward(std::size_t a, std::size_t pulled, double x, double w) {
  if (!(w > 0.0)) throw Error("zero propensity");
  return a == pulled ? x / w : 0.0;
}

/// Unclipped arithmetic mean of the rewards of arm a.
inline double sample_average(const RunningArmStats& stats, std::size_t a) {
  return stats.mean(a);
}

/// Per-arm running sums of pseudo-rewards X-hat_{a,s}, s = 1..t.
class PseudoRewardAccumulator {
 public:
  explicit PseudoRewardAccumulator(std::size_t arms) : sums_(arms, 0.0) {}

  void add_round(std::span<const double> pseudo_rewards) {
    if (pseudo_rewards.size() != sums_.size()) throw Error("pseudo-reward vector has wrong size");
    for (std::size_t a = 0; a < sums_.size(); ++a) sums_[a] += pseudo_rewards[a];
    ++rounds_;
  }

  std::size_t arms() const { return sums_.size(); }
  std::size_t rounds() const { return rounds_; }
  double sum(std::size_t a) const { return sums_.at(a); }

 private:
  std::vector<double> sums_;
  std::size_t rounds_ = 0;
};

/// (1/t) * sum of pseudo-rewards; the accumulator must hold exactly t rounds.
inline std::vector<double> finalize_aipw(const PseudoRewardAccumulator& acc, std::size_t t) {
  if (t == 0) throw Error("cannot finalize an estimate at t = 0");
  if (acc.rounds() != t) throw Error("accumulator does not hold exactly t rounds");
  std::vector<double> out(acc.arms());
  for (std::size_t a = 0; a < out.size(); ++a) out[a] = acc.sum(a) / static_cast<double>(t);
  return out;
}

}  // namespace bai
