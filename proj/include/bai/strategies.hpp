#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bai/allocation.hpp"
#include "bai/error.hpp"
#include "bai/estimators.hpp"
#include "bai/models.hpp"
#include "bai/random.hpp"

namespace bai {

/// Terminal estimator used by the randomized-sampling family.
enum class Estimator { aipw, dr, ipw, sample_average };

/// Parameters of the randomized-sampling (RS) family.
struct StrategyParams {
  double c_mu = 100.0;
  double c_sigma2 = 100.0;
  double c_w = 1e-3;
  std::size_t init_rounds_per_arm = 1;
  bool gamma_mixing = false;
  Estimator estimator = Estimator::aipw;
};

inline void validate(const StrategyParams& p, std::size_t arms) {
  if (!(p.c_mu > 0.0)) throw Error("C_mu must be positive");
  if (!(p.c_sigma2 >= 1.0)) throw Error("C_sigma2 must be >= 1");
  if (!(p.c_w > 0.0 && p.c_w < 1.0 / static_cast<double>(arms))) {
    throw Error("C_w must lie in (0, 1/K)");
  }
  if (p.init_rounds_per_arm < 1) throw Error("init_rounds must be >= 1");
}

// --- Sampling helpers ---------------------------------------------------------

/// Index drawn from the categorical law `w` with one uniform from `rng`.
inline std::size_t draw_categorical(std::span<const double> w, RandomStream& rng) {
  const double u = rng.uniform01();
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t a = 0; a < w.size(); ++a) {
    if (w[a] <= 0.0) continue;
    last_positive = a;
    cumulative += w[a];
    if (u < cumulative) return a;
  }
  return last_positive;  // u landed in the rounding slack above the total
}

/// Argmax over eligible entries with exact ties broken uniformly at random.
/// `rng` is consumed only when there is a tie.
inline std::size_t argmax_random_ties(std::span<const double> values, RandomStream& rng,
                                      const std::vector<bool>& eligible = {}) {
  double best = -std::numeric_limits<double>::infinity();
  std::vector<std::size_t> winners;
  for (std::size_t a = 0; a < values.size(); ++a) {
    if (!eligible.empty() && !eligible[a]) continue;
    if (winners.empty() || values[a] > best) {
      best = values[a];
      winners.assign(1, a);
    } else if (values[a] == best) {
      winners.push_back(a);
    }
  }
  if (winners.empty()) throw Error("no eligible arm to recommend");
  return winners.size() == 1 ? winners.front() : winners[rng.index(winners.size())];
}

/// Plug-in estimate of w* from estimated moments. The empirical best arm takes
/// the role of arm 1; when the empirical best is not unique the result is
/// uniform.
inline Allocation estimated_allocation(std::span<const double> mu_hat,
                                       std::span<const double> sigma2_hat) {
  const std::size_t k = mu_hat.size();
  const auto top = std::max_element(mu_hat.begin(), mu_hat.end());
  const auto leader = static_cast<std::size_t>(top - mu_hat.begin());
  double runner_up = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < k; ++a) {
    if (a != leader) runner_up = std::max(runner_up, mu_hat[a]);
  }
  const double gap = *top - runner_up;
  // A gap whose square underflows the bracket is a tie at double precision.
  if (!(gap * gap / (2.0 * sigma2_hat[leader]) > 0.0)) return Allocation::uniform(k);
  return solve_optimal_allocation(mu_hat, sigma2_hat).allocation;
}

/// Clipped estimates of the means and variances from rounds recorded so far.
inline void clipped_moments(const RunningArmStats& stats, const StrategyParams& params,
                            std::vector<double>& mu_hat, std::vector<double>& sigma2_hat) {
  const std::size_t k = stats.arms();
  mu_hat.resize(k);
  sigma2_hat.resize(k);
  for (std::size_t a = 0; a < k; ++a) {
    mu_hat[a] = clipped_mean(stats, a, params.c_mu);
    sigma2_hat[a] = clipped_variance(stats, a, params.c_sigma2);
  }
}

inline Allocation estimated_allocation(const RunningArmStats& stats, const StrategyParams& params) {
  std::vector<double> mu_hat, sigma2_hat;
  clipped_moments(stats, params, mu_hat, sigma2_hat);
  return estimated_allocation(mu_hat, sigma2_hat);
}

/// Propensity actually sampled from at round t (t past initialization):
/// optional mixing gamma_t/K + (1 - gamma_t) w with gamma_t = 1/sqrt(t), then
/// the C_w rule (any entry <= C_w falls back to uniform).
inline std::vector<double> sampling_propensity(const Allocation& w, std::size_t t,
                                               const StrategyParams& params) {
  const std::size_t k = w.size();
  const double uniform = 1.0 / static_cast<double>(k);
  std::vector<double> p(w.weights().begin(), w.weights().end());
  if (params.gamma_mixing) {
    const double gamma = 1.0 / std::sqrt(static_cast<double>(t));
    for (double& x : p) x = gamma * uniform + (1.0 - gamma) * x;
  }
  if (std::any_of(p.begin(), p.end(), [&](double x) { return !(x > params.c_w); })) {
    std::fill(p.begin(), p.end(), uniform);
  }
  return p;
}

// --- Strategy interface -------------------------------------------------------

/// Quantities a strategy used to choose the arm of the current round.
struct RoundInfo {
  std::vector<double> propensity;
  std::vector<double> mu_hat;
};

/// A sampling rule plus a recommendation rule. The harness drives it as
///   for t = 1..T: a = select_arm(t); observe(a, X); [recommend()]
class Strategy {
 public:
  virtual ~Strategy() = default;

  /// Arm for round t (1-based); t must be one past the rounds observed so far.
  virtual std::size_t select_arm(std::size_t t) = 0;
  virtual void observe(std::size_t arm, double reward) = 0;
  /// Recommendation after the rounds observed so far (at least one).
  virtual std::size_t recommend() = 0;
  /// Propensity and plug-in means of the round just selected, for strategies
  /// that randomize with known propensities; nullptr otherwise.
  virtual const RoundInfo* round_info() const { return nullptr; }
  virtual std::size_t rounds() const = 0;
};

namespace detail {

inline void check_round(std::size_t t, std::size_t rounds) {
  if (t != rounds + 1) throw Error("select_arm called out of order");
}

inline std::vector<bool> pulled_arms(const RunningArmStats& stats) {
  std::vector<bool> out(stats.arms());
  for (std::size_t a = 0; a < out.size(); ++a) out[a] = stats.count(a) > 0;
  return out;
}

inline std::size_t recommend_by_sample_average(const RunningArmStats& stats, RandomStream& ties) {
  std::vector<double> values(stats.arms(), 0.0);
  for (std::size_t a = 0; a < values.size(); ++a) {
    if (stats.count(a) > 0) values[a] = sample_average(stats, a);
  }
  return argmax_random_ties(values, ties, pulled_arms(stats));
}

}  // namespace detail

/// Randomized sampling with the estimated optimal allocation, recommending by
/// one of the AIPW / DR / IPW / sample-average estimators.
///
/// The first K * init_rounds_per_arm rounds pull arms round-robin with recorded
/// propensity 1/K. Afterwards the arm is drawn from sampling_propensity().
class RandomizedSamplingStrategy final : public Strategy {
 public:
  RandomizedSamplingStrategy(std::size_t arms, StrategyParams params, std::uint64_t sampling_seed,
                             std::uint64_t tie_seed)
      : params_(params),
        arms_(arms),
        stats_(arms),
        acc_(arms),
        sampling_(sampling_seed),
        ties_(tie_seed) {
    validate(params_, arms_);
    pseudo_.resize(arms_);
  }

  std::size_t select_arm(std::size_t t) override {
    detail::check_round(t, stats_.rounds());
    std::vector<double> sigma2_hat;
    clipped_moments(stats_, params_, info_.mu_hat, sigma2_hat);
    if (t <= arms_ * params_.init_rounds_per_arm) {
      info_.propensity.assign(arms_, 1.0 / static_cast<double>(arms_));
      pending_ = (t - 1) % arms_;
    } else {
      info_.propensity =
          sampling_propensity(estimated_allocation(info_.mu_hat, sigma2_hat), t, params_);
      pending_ = draw_categorical(info_.propensity, sampling_);
    }
    return pending_;
  }

  void observe(std::size_t arm, double reward) override {
    if (arm != pending_) throw Error("observed arm differs from the selected arm");
    const std::size_t past = stats_.rounds();
    for (std::size_t a = 0; a < arms_; ++a) {
      const double mu = info_.mu_hat[a];
      const double w = info_.propensity[a];
      switch (params_.estimator) {
        case Estimator::aipw:
          pseudo_[a] = aipw_pseudo_reward(a, arm, reward, mu, w);
          break;
        case Estimator::ipw:
          pseudo_[a] = ipw_pseudo_reward(a, arm, reward, w);
          break;
        case Estimator::dr: {
          const double empirical =
              past == 0 ? 0.0
                        : static_cast<double>(stats_.count(a)) / static_cast<double>(past);
          pseudo_[a] = empirical > 0.0 ? dr_pseudo_reward(a, arm, reward, mu, empirical)
                                       : aipw_pseudo_reward(a, arm, reward, mu, w);
          break;
        }
        case Estimator::sample_average:
          pseudo_[a] = 0.0;
          break;
      }
    }
    acc_.add_round(pseudo_);
    stats_.record(arm, reward);
  }

  std::size_t recommend() override {
    if (stats_.rounds() == 0) throw Error("recommend needs at least one round");
    if (params_.estimator == Estimator::sample_average) {
      return detail::recommend_by_sample_average(stats_, ties_);
    }
    return argmax_random_ties(finalize_aipw(acc_, stats_.rounds()), ties_);
  }

  const RoundInfo* round_info() const override { return &info_; }
  std::size_t rounds() const override { return stats_.rounds(); }
  const RunningArmStats& stats() const { return stats_; }

 private:
  StrategyParams params_;
  std::size_t arms_;
  RunningArmStats stats_;
  PseudoRewardAccumulator acc_;
  RandomStream sampling_;
  RandomStream ties_;
  RoundInfo info_;
  std::vector<double> pseudo_;
  std::size_t pending_ = 0;
};

/// Diagnostics-only strategy: samples from the true w* from round 1 and uses
/// the true means as plug-in estimates; recommends by AIPW.
class OracleAipwStrategy final : public Strategy {
 public:
  OracleAipwStrategy(const BanditInstance& instance, std::uint64_t sampling_seed,
                     std::uint64_t tie_seed)
      : acc_(instance.size()), sampling_(sampling_seed), ties_(tie_seed), rounds_(0) {
    const auto solution = solve_optimal_allocation(instance);
    info_.propensity.assign(solution.allocation.weights().begin(),
                            solution.allocation.weights().end());
    info_.mu_hat = instance.means();
    pseudo_.resize(instance.size());
  }

  std::size_t select_arm(std::size_t t) override {
    detail::check_round(t, rounds_);
    pending_ = draw_categorical(info_.propensity, sampling_);
    return pending_;
  }

  void observe(std::size_t arm, double reward) override {
    if (arm != pending_) throw Error("observed arm differs from the selected arm");
    for (std::size_t a = 0; a < pseudo_.size(); ++a) {
      pseudo_[a] = aipw_pseudo_reward(a, arm, reward, info_.mu_hat[a], info_.propensity[a]);
    }
    acc_.add_round(pseudo_);
    ++rounds_;
  }

  std::size_t recommend() override {
    return argmax_random_ties(finalize_aipw(acc_, rounds_), ties_);
  }

  const RoundInfo* round_info() const override { return &info_; }
  std::size_t rounds() const override { return rounds_; }

 private:
  PseudoRewardAccumulator acc_;
  RandomStream sampling_;
  RandomStream ties_;
  RoundInfo info_;
  std::vector<double> pseudo_;
  std::size_t rounds_;
  std::size_t pending_ = 0;
};

/// Round-robin sampling; recommends the best sample average.
class UniformStrategy final : public Strategy {
 public:
  UniformStrategy(std::size_t arms, std::uint64_t tie_seed) : stats_(arms), ties_(tie_seed) {}

  std::size_t select_arm(std::size_t t) override {
    detail::check_round(t, stats_.rounds());
    return (t - 1) % stats_.arms();
  }
  void observe(std::size_t arm, double reward) override { stats_.record(arm, reward); }
  std::size_t recommend() override { return detail::recommend_by_sample_average(stats_, ties_); }
  std::size_t rounds() const override { return stats_.rounds(); }

 private:
  RunningArmStats stats_;
  RandomStream ties_;
};

/// Two-armed oracle with known standard deviations: tracks N_1(t) = ceil(alpha t)
/// with alpha = sigma_1 / (sigma_1 + sigma_2); recommends the best sample average.
class AlphaEliminationStrategy final : public Strategy {
 public:
  AlphaEliminationStrategy(std::size_t arms, double sigma1, double sigma2, std::uint64_t tie_seed)
      : stats_(arms == 2 ? arms : throw Error("alpha-elimination requires K = 2")),
        alpha_(sigma1 / (sigma1 + sigma2)),
        ties_(tie_seed) {
    if (!(sigma1 > 0.0) || !(sigma2 > 0.0)) throw Error("alpha-elimination needs sigma > 0");
  }

  double alpha() const { return alpha_; }

  std::size_t select_arm(std::size_t t) override {
    detail::check_round(t, stats_.rounds());
    const auto target = static_cast<std::size_t>(std::ceil(alpha_ * static_cast<double>(t)));
    return stats_.count(0) < target ? 0 : 1;
  }
  void observe(std::size_t arm, double reward) override { stats_.record(arm, reward); }
  std::size_t recommend() override { return detail::recommend_by_sample_average(stats_, ties_); }
  std::size_t rounds() const override { return stats_.rounds(); }
  const RunningArmStats& stats() const { return stats_; }

 private:
  RunningArmStats stats_;
  double alpha_;
  RandomStream ties_;
};

inline std::size_t ceil_log2(std::size_t k) {
  std::size_t r = 0;
  while ((std::size_t{1} << r) < k) ++r;
  return r;
}

/// Per-arm pull budget of each sequential-halving phase:
/// floor(T / (|S_r| ceil(log2 K))) with |S_{r+1}| = ceil(|S_r| / 2).
inline std::vector<std::size_t> sequential_halving_budgets(std::size_t arms, std::size_t horizon) {
  if (arms == 0) throw Error("need at least one arm");
  const std::size_t phases = ceil_log2(arms);
  if (horizon < arms * phases) throw Error("budget too small for sequential halving");
  std::vector<std::size_t> budgets;
  std::size_t survivors = arms;
  for (std::size_t r = 0; r < phases; ++r) {
    budgets.push_back(horizon / (survivors * phases));
    survivors = (survivors + 1) / 2;
  }
  return budgets;
}

/// Sequential halving. Within a phase, survivors are pulled round-robin;
/// at the end of a phase the top half by in-phase mean survives (ties keep the
/// lower index). Rounds left after the last phase go to the final survivor.
/// Before the final phase ends, the recommendation is the survivor with the
/// best overall sample average.
class SequentialHalvingStrategy final : public Strategy {
 public:
  SequentialHalvingStrategy(std::size_t arms, std::size_t horizon, std::uint64_t tie_seed)
      : budgets_(sequential_halving_budgets(arms, horizon)),
        stats_(arms),
        phase_sums_(arms, 0.0),
        ties_(tie_seed) {
    for (std::size_t a = 0; a < arms; ++a) survivors_.push_back(a);
  }

  std::size_t select_arm(std::size_t t) override {
    detail::check_round(t, stats_.rounds());
    if (phase_ >= budgets_.size()) return survivors_.front();
    return survivors_[position_ % survivors_.size()];
  }

  void observe(std::size_t arm, double reward) override {
    stats_.record(arm, reward);
    if (phase_ >= budgets_.size()) return;
    phase_sums_[arm] += reward;
    ++position_;
    if (position_ == survivors_.size() * budgets_[phase_]) close_phase();
  }

  std::size_t recommend() override {
    if (survivors_.size() == 1) return survivors_.front();
    std::vector<bool> eligible(stats_.arms(), false);
    std::vector<double> values(stats_.arms(), 0.0);
    for (std::size_t a : survivors_) {
      if (stats_.count(a) == 0) continue;
      eligible[a] = true;
      values[a] = sample_average(stats_, a);
    }
    return argmax_random_ties(values, ties_, eligible);
  }

  std::size_t rounds() const override { return stats_.rounds(); }
  const std::vector<std::size_t>& survivors() const { return survivors_; }
  const RunningArmStats& stats() const { return stats_; }

 private:
  void close_phase() {
    const double n = static_cast<double>(budgets_[phase_]);
    std::stable_sort(survivors_.begin(), survivors_.end(), [&](std::size_t a, std::size_t b) {
      return phase_sums_[a] / n > phase_sums_[b] / n;
    });
    survivors_.resize((survivors_.size() + 1) / 2);
    std::sort(survivors_.begin(), survivors_.end());
    std::fill(phase_sums_.begin(), phase_sums_.end(), 0.0);
    position_ = 0;
    ++phase_;
  }

  std::vector<std::size_t> budgets_;
  RunningArmStats stats_;
  std::vector<double> phase_sums_;
  std::vector<std::size_t> survivors_;
  std::size_t phase_ = 0;
  std::size_t position_ = 0;
  RandomStream ties_;
};

/// UGapE (fixed budget). With beta_a = sqrt(exploration / N_a):
///   B_k = max_{i != k} (mu_i + beta_i) - (mu_k - beta_k),  J = argmin_k B_k,
///   u = argmax_{j != J} (mu_j + beta_j),  pull the one of {J, u} with larger beta.
/// The first K rounds pull each arm once. Recommends J at the current round.
class UGapEbStrategy final : public Strategy {
 public:
  UGapEbStrategy(std::size_t arms, double exploration, std::uint64_t tie_seed)
      : stats_(arms), exploration_(exploration), ties_(tie_seed) {
    if (!(exploration > 0.0)) throw Error("ugap-eb exploration parameter must be positive");
  }

  std::size_t select_arm(std::size_t t) override {
    detail::check_round(t, stats_.rounds());
    const std::size_t k = stats_.arms();
    if (t <= k) return t - 1;
    compute_indices();
    const std::size_t leader = lowest_index_argmin(gap_index_);
    std::size_t challenger = k;
    for (std::size_t j = 0; j < k; ++j) {
      if (j == leader) continue;
      if (challenger == k || upper_[j] > upper_[challenger]) challenger = j;
    }
    return beta_[challenger] > beta_[leader] ? challenger : leader;
  }

  void observe(std::size_t arm, double reward) override { stats_.record(arm, reward); }

  std::size_t recommend() override {
    if (stats_.rounds() < stats_.arms()) {
      return detail::recommend_by_sample_average(stats_, ties_);
    }
    compute_indices();
    std::vector<double> negated(gap_index_.size());
    for (std::size_t a = 0; a < negated.size(); ++a) negated[a] = -gap_index_[a];
    return argmax_random_ties(negated, ties_);
  }

  std::size_t rounds() const override { return stats_.rounds(); }
  const std::vector<double>& gap_index() const { return gap_index_; }

 private:
  void compute_indices() {
    const std::size_t k = stats_.arms();
    beta_.resize(k);
    upper_.resize(k);
    gap_index_.resize(k);
    std::vector<double> lower(k);
    for (std::size_t a = 0; a < k; ++a) {
      const double mu = sample_average(stats_, a);
      beta_[a] = std::sqrt(exploration_ / static_cast<double>(stats_.count(a)));
      upper_[a] = mu + beta_[a];
      lower[a] = mu - beta_[a];
    }
    // Largest and second-largest upper bounds give max_{i != k} U_i in O(K).
    std::size_t first = 0;
    for (std::size_t a = 1; a < k; ++a) {
      if (upper_[a] > upper_[first]) first = a;
    }
    double second = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < k; ++a) {
      if (a != first) second = std::max(second, upper_[a]);
    }
    for (std::size_t a = 0; a < k; ++a) {
      gap_index_[a] = (a == first ? second : upper_[first]) - lower[a];
    }
  }

  static std::size_t lowest_index_argmin(const std::vector<double>& v) {
    return static_cast<std::size_t>(std::min_element(v.begin(), v.end()) - v.begin());
  }

  RunningArmStats stats_;
  double exploration_;
  RandomStream ties_;
  std::vector<double> beta_, upper_, gap_index_;
};

// --- Factory ------------------------------------------------------------------

/// A named strategy with its parameters.
struct StrategySpec {
  std::string id = "rs-aipw";
  StrategyParams params{};
  double ugap_exploration = 1.0;
};

inline const std::vector<std::string>& strategy_ids() {
  static const std::vector<std::string> ids = {"rs-aipw", "rs-dr", "rs-ipw",     "rs-sa",
                                               "uniform", "sh",    "ugap-eb",    "alpha-elim",
                                               "oracle-aipw"};
  return ids;
}

/// Estimator implied by an RS-family id; throws for other ids.
inline Estimator estimator_for(std::string_view id) {
  if (id == "rs-aipw") return Estimator::aipw;
  if (id == "rs-dr") return Estimator::dr;
  if (id == "rs-ipw") return Estimator::ipw;
  if (id == "rs-sa") return Estimator::sample_average;
  throw Error("\"" + std::string(id) + "\" is not a randomized-sampling strategy");
}

inline bool is_rs_family(std::string_view id) { return id.substr(0, 3) == "rs-"; }

/// Strategies whose round_info() is non-null.
inline bool exposes_propensities(std::string_view id) {
  return is_rs_family(id) || id == "oracle-aipw";
}

/// Builds a strategy for one trial. Its randomness comes from two sub-streams
/// of `trial_seed` (sampling, ties).
inline std::unique_ptr<Strategy> make_strategy(const StrategySpec& spec,
                                               const BanditInstance& instance,
                                               std::size_t horizon, std::uint64_t trial_seed) {
  const std::uint64_t sampling = derive_seed(trial_seed, StreamTag::sampling);
  const std::uint64_t ties = derive_seed(trial_seed, StreamTag::ties);
  const std::size_t k = instance.size();
  const std::string& id = spec.id;
  if (is_rs_family(id)) {
    StrategyParams p = spec.params;
    p.estimator = estimator_for(id);
    return std::make_unique<RandomizedSamplingStrategy>(k, p, sampling, ties);
  }
  if (id == "uniform") return std::make_unique<UniformStrategy>(k, ties);
  if (id == "sh") return std::make_unique<SequentialHalvingStrategy>(k, horizon, ties);
  if (id == "ugap-eb") return std::make_unique<UGapEbStrategy>(k, spec.ugap_exploration, ties);
  if (id == "alpha-elim") {
    if (k != 2) throw Error("alpha-elimination requires K = 2");
    return std::make_unique<AlphaEliminationStrategy>(
        k, std::sqrt(instance.arm(0).variance()), std::sqrt(instance.arm(1).variance()), ties);
  }
  if (id == "oracle-aipw") return std::make_unique<OracleAipwStrategy>(instance, sampling, ties);
  throw Error("unknown strategy id \"" + id + "\"");
}

}  // namespace bai
