#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <limits>
#include <mutex>
#include <numbers>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "bai/allocation.hpp"
#include "bai/error.hpp"
#include "bai/estimators.hpp"
#include "bai/models.hpp"
#include "bai/random.hpp"
#include "bai/strategies.hpp"

namespace bai {

// --- Configuration ------------------------------------------------------------

struct ScenarioRef {
  int id = 1;
};

/// Where a trial's instance comes from: a fixed instance, a catalogue
/// scenario, or a case recipe drawn afresh for every trial.
using InstanceSource = std::variant<BanditInstance, ScenarioRef, CaseRecipe>;

struct ExperimentConfig {
  InstanceSource instance = ScenarioRef{1};
  std::vector<StrategySpec> strategies;
  std::size_t horizon = 0;
  std::size_t trials = 1;
  std::uint64_t seed = 0;
  std::vector<std::size_t> record_rounds;  // ascending, within [1, horizon]
  bool diagnostics = false;
  std::vector<std::size_t> checkpoints;  // diagnostics checkpoints; empty means {horizon}
  unsigned threads = 0;                  // 0 = hardware concurrency
};

inline void check_schedule(const std::vector<std::size_t>& rounds, std::size_t horizon,
                           const char* field) {
  for (std::size_t i = 0; i < rounds.size(); ++i) {
    if (rounds[i] < 1 || rounds[i] > horizon) {
      throw Error(std::string(field) + ": round " + std::to_string(rounds[i]) +
                  " outside [1, T]");
    }
    if (i > 0 && rounds[i] <= rounds[i - 1]) {
      throw Error(std::string(field) + ": rounds must be strictly ascending");
    }
  }
}

inline void validate(const ExperimentConfig& config) {
  if (config.horizon < 1) throw Error("T: must be >= 1");
  if (config.trials < 1) throw Error("trials: must be >= 1");
  if (config.strategies.empty()) throw Error("strategies: at least one strategy is required");
  for (std::size_t i = 0; i < config.strategies.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (config.strategies[i].id == config.strategies[j].id) {
        throw Error("strategies: duplicate strategy id \"" + config.strategies[i].id + "\"");
      }
    }
  }
  check_schedule(config.record_rounds, config.horizon, "record_rounds");
  check_schedule(config.checkpoints, config.horizon, "checkpoints");
  if (const auto* recipe = std::get_if<CaseRecipe>(&config.instance)) validate(*recipe);
}

/// Rounds step, 2 step, ... and always T.
inline std::vector<std::size_t> every_nth_round(std::size_t horizon, std::size_t step) {
  if (step < 1) throw Error("record_every: must be >= 1");
  std::vector<std::size_t> rounds;
  for (std::size_t t = step; t <= horizon; t += step) rounds.push_back(t);
  if (rounds.empty() || rounds.back() != horizon) rounds.push_back(horizon);
  return rounds;
}

/// Every round up to 5000; beyond that every ceil(T/1000)-th round plus T.
inline std::vector<std::size_t> default_record_schedule(std::size_t horizon) {
  const std::size_t step = horizon <= 5000 ? 1 : (horizon + 999) / 1000;
  return every_nth_round(horizon, step);
}

/// Seed of trial `index`: derive_seed(base_seed, index).
inline std::uint64_t trial_seed(std::uint64_t base_seed, std::size_t index) {
  return derive_seed(base_seed, static_cast<std::uint64_t>(index));
}

inline BanditInstance instance_for_trial(const InstanceSource& source, std::uint64_t seed) {
  if (const auto* fixed = std::get_if<BanditInstance>(&source)) return *fixed;
  if (const auto* ref = std::get_if<ScenarioRef>(&source)) return scenario(ref->id);
  RandomStream rng(derive_seed(seed, StreamTag::instance));
  return generate_case(std::get<CaseRecipe>(source), rng);
}

// --- Parallel execution -------------------------------------------------------

inline unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

/// Runs fn(i) for i in [0, n) on up to `threads` workers. If any call throws,
/// the exception of the smallest failing index is rethrown.
template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  const unsigned workers = std::min<std::size_t>(resolve_threads(threads), std::max<std::size_t>(n, 1));
  std::atomic<std::size_t> next{0};
  std::mutex guard;
  std::size_t failed_index = std::numeric_limits<std::size_t>::max();
  std::exception_ptr failure;

  auto work = [&] {
    for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(guard);
        if (i < failed_index) {
          failed_index = i;
          failure = std::current_exception();
        }
      }
    }
  };

  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
}

// --- Trials -------------------------------------------------------------------

/// One round of a trial. propensity and mu_hat are empty for strategies that
/// do not randomize with known propensities.
struct TraceStep {
  std::size_t arm;
  double reward;
  std::vector<double> propensity;
  std::vector<double> mu_hat;
};

inline void require_propensities(std::span<const TraceStep> trace) {
  if (trace.empty()) throw Error("missing trace");
  if (trace.front().propensity.empty()) {
    throw Error("missing trace: the strategy does not expose propensities");
  }
}

struct TrialResult {
  std::vector<std::size_t> recommendations;  // one per recorded round
  std::vector<TraceStep> trace;              // empty unless requested
};

/// Plays one trial of `horizon` rounds. Deterministic in its arguments.
/// Rewards come from the `rewards` sub-stream of trial_seed, so strategies run
/// with the same trial seed see the same reward sequence per arm.
inline TrialResult run_trial(const StrategySpec& spec, const BanditInstance& instance,
                             std::size_t horizon, std::uint64_t seed,
                             std::span<const std::size_t> record_rounds, bool keep_trace) {
  auto strategy = make_strategy(spec, instance, horizon, seed);
  RandomStream rewards(derive_seed(seed, StreamTag::rewards));
  TrialResult result;
  result.recommendations.reserve(record_rounds.size());
  if (keep_trace) result.trace.reserve(horizon);

  std::size_t next_record = 0;
  for (std::size_t t = 1; t <= horizon; ++t) {
    const std::size_t arm = strategy->select_arm(t);
    const double x = instance.arm(arm).sample(rewards);
    if (keep_trace) {
      const RoundInfo* info = strategy->round_info();
      result.trace.push_back(info != nullptr ? TraceStep{arm, x, info->propensity, info->mu_hat}
                                             : TraceStep{arm, x, {}, {}});
    }
    strategy->observe(arm, x);
    if (next_record < record_rounds.size() && record_rounds[next_record] == t) {
      result.recommendations.push_back(strategy->recommend());
      ++next_record;
    }
  }
  return result;
}

// --- Misidentification tables -------------------------------------------------

struct ResultRow {
  std::string strategy;
  std::size_t t;
  double p_hat;
  std::size_t n;
  double std_error;
};

struct ResultTable {
  std::vector<ResultRow> rows;

  /// Row for (strategy, t); throws if absent.
  const ResultRow& at(const std::string& strategy, std::size_t t) const {
    for (const auto& r : rows) {
      if (r.strategy == strategy && r.t == t) return r;
    }
    throw Error("no result row for " + strategy + " at t = " + std::to_string(t));
  }
};

/// Fraction of trials whose recommendation differs from the best arm, per
/// strategy and recorded round. Trial i of every strategy uses the same trial
/// seed, hence the same instance and reward streams.
inline ResultTable run_experiment(const ExperimentConfig& config) {
  validate(config);
  const std::vector<std::size_t> schedule =
      config.record_rounds.empty() ? default_record_schedule(config.horizon) : config.record_rounds;
  const std::size_t n = config.trials;

  ResultTable table;
  for (const auto& spec : config.strategies) {
    std::vector<std::vector<std::uint8_t>> wrong(n);
    parallel_for(n, config.threads, [&](std::size_t i) {
      const std::uint64_t seed = trial_seed(config.seed, i);
      const BanditInstance instance = instance_for_trial(config.instance, seed);
      const std::size_t best = best_arm(instance);
      const TrialResult r =
          run_trial(spec, instance, config.horizon, seed, schedule, false);
      auto& flags = wrong[i];
      flags.resize(schedule.size());
      for (std::size_t j = 0; j < schedule.size(); ++j) flags[j] = r.recommendations[j] != best;
    });

    for (std::size_t j = 0; j < schedule.size(); ++j) {
      std::size_t count = 0;
      for (std::size_t i = 0; i < n; ++i) count += wrong[i][j];
      const double p = static_cast<double>(count) / static_cast<double>(n);
      table.rows.push_back(ResultRow{spec.id, schedule[j], p, n,
                                     std::sqrt(p * (1.0 - p) / static_cast<double>(n))});
    }
  }
  return table;
}

inline std::string format_number(double x, const char* fmt = "%.10g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, x);
  return buf;
}

/// CSV "strategy,t,p_hat,n,stderr" with LF line endings and %.10g numbers.
inline void write_csv(std::ostream& out, const ResultTable& table) {
  out << "strategy,t,p_hat,n,stderr\n";
  for (const auto& r : table.rows) {
    out << r.strategy << ',' << r.t << ',' << format_number(r.p_hat) << ',' << r.n << ','
        << format_number(r.std_error) << '\n';
  }
}

// --- Exponents and Gaussian tails ---------------------------------------------

struct EmpiricalExponent {
  double value;
  bool censored;  // no misidentification observed; value is a lower bound
};

/// -log(p_hat)/T. When p_hat = 0 the add-one value -log(1/(n+1))/T is
/// reported with the censored flag set.
inline EmpiricalExponent empirical_exponent(double p_hat, std::size_t horizon, std::size_t trials) {
  if (horizon == 0) throw Error("T must be positive");
  if (!(p_hat >= 0.0 && p_hat <= 1.0)) throw Error("p_hat must lie in [0, 1]");
  const double t = static_cast<double>(horizon);
  if (p_hat == 0.0) {
    return {-std::log(1.0 / static_cast<double>(trials + 1)) / t, true};
  }
  return {-std::log(p_hat) / t, false};
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

struct TailBracket {
  double lower;
  double upper;
};

/// exp(-u^2/2) / (sqrt(2 pi) (1 + u)) <= Phi(-u) <= exp(-u^2/2) / (sqrt(pi) (1 + u)), u >= 0.
inline TailBracket gaussian_tail_bracket(double u) {
  if (!(u >= 0.0)) throw Error("gaussian_tail_bracket needs u >= 0");
  const double e = std::exp(-0.5 * u * u) / (1.0 + u);
  return {e / std::sqrt(2.0 * std::numbers::pi), e / std::sqrt(std::numbers::pi)};
}

// --- Martingale diagnostics ---------------------------------------------------

/// sigma-tilde_a^2 = sigma_1^2 / w_1* + sigma_a^2 / w_a*.
inline double normalizer_sq(double var_best, double var_a, double w_best, double w_a) {
  return var_best / w_best + var_a / w_a;
}

/// Per-round increments xi_t = (Xhat_{1,t} - Xhat_{a,t} - Delta_a) / (sqrt(T) sigma-tilde_a)
/// with T the trace length and AIPW pseudo-rewards rebuilt from the trace.
inline std::vector<double> xi_sequence(std::span<const TraceStep> trace,
                                       const BanditInstance& instance, const Allocation& w_star,
                                       std::size_t arm) {
  require_propensities(trace);
  const std::size_t best = best_arm(instance);
  if (arm == best || arm >= instance.size()) throw Error("xi_sequence needs a sub-optimal arm");
  const double delta = instance.arm(best).mean() - instance.arm(arm).mean();
  const double scale =
      std::sqrt(static_cast<double>(trace.size()) *
                normalizer_sq(instance.arm(best).variance(), instance.arm(arm).variance(),
                              w_star[best], w_star[arm]));
  std::vector<double> xi;
  xi.reserve(trace.size());
  for (const auto& s : trace) {
    const double x1 = aipw_pseudo_reward(best, s.arm, s.reward, s.mu_hat[best], s.propensity[best]);
    const double xa = aipw_pseudo_reward(arm, s.arm, s.reward, s.mu_hat[arm], s.propensity[arm]);
    xi.push_back((x1 - xa - delta) / scale);
  }
  return xi;
}

/// E[(Xhat_1 - Xhat_a - Delta_a)^2 | F_{t-1}] in closed form. Index 0 of each
/// pair is the best arm, index 1 is arm a. With c = (mu_hat_1 - mu_hat_a) - Delta_a:
///   (s1 + (m1 - h1)^2)/w1 + (sa + (ma - ha)^2)/wa + 2c((m1 - h1) - (ma - ha)) + c^2.
inline double conditional_second_moment(std::array<double, 2> mu, std::array<double, 2> sigma2,
                                        std::array<double, 2> mu_hat, std::array<double, 2> w,
                                        double delta) {
  const double c = (mu_hat[0] - mu_hat[1]) - delta;
  const double e1 = mu[0] - mu_hat[0];
  const double ea = mu[1] - mu_hat[1];
  return (sigma2[0] + e1 * e1) / w[0] + (sigma2[1] + ea * ea) / w[1] + 2.0 * c * (e1 - ea) + c * c;
}

struct DiagnosticsRow {
  std::string strategy;
  std::size_t checkpoint;
  double v_hat;                // mean over trials of |sum_t E[xi_t^2 | F] - 1|
  std::vector<double> shares;  // mean N_{a,T'} / T'
  double xi_mean;              // mean over trials of Z_{T'} = sum_t xi_t
  double xi_stderr;            // standard error of xi_mean
  EmpiricalExponent exponent;  // from the misidentification rate at T'
  double p_hat;
  double gamma_star;
};

struct DiagnosticsReport {
  std::size_t arms = 0;
  std::size_t compared_arm = 0;  // sub-optimal arm a used in xi and V (0-based)
  std::vector<DiagnosticsRow> rows;
};

/// The sub-optimal arm with the largest mean (lowest index among ties).
inline std::size_t runner_up_arm(const BanditInstance& instance) {
  const std::size_t best = best_arm(instance);
  std::size_t pick = instance.size();
  for (std::size_t a = 0; a < instance.size(); ++a) {
    if (a == best) continue;
    if (pick == instance.size() || instance.arm(a).mean() > instance.arm(pick).mean()) pick = a;
  }
  return pick;
}

/// Estimates V_{T'}, allocation shares, mean Z_{T'} and the empirical exponent
/// at each checkpoint T', for every strategy of the config. The conditional
/// second moments use the closed form, so no nested simulation is needed.
/// Requires a fixed instance and strategies that expose propensities.
inline DiagnosticsReport estimate_V_T(const ExperimentConfig& config,
                                      std::vector<std::size_t> checkpoints) {
  validate(config);
  if (std::holds_alternative<CaseRecipe>(config.instance)) {
    throw Error("diagnostics need a fixed instance, not a case recipe");
  }
  if (checkpoints.empty()) checkpoints = {config.horizon};
  check_schedule(checkpoints, config.horizon, "checkpoints");

  const BanditInstance instance = instance_for_trial(config.instance, config.seed);
  const std::size_t k = instance.size();
  const std::size_t best = best_arm(instance);
  const std::size_t cmp = runner_up_arm(instance);
  const AllocationSolution optimum = solve_optimal_allocation(instance);
  const std::array<double, 2> mu{instance.arm(best).mean(), instance.arm(cmp).mean()};
  const std::array<double, 2> var{instance.arm(best).variance(), instance.arm(cmp).variance()};
  const double delta = mu[0] - mu[1];
  const double tilde_sq =
      normalizer_sq(var[0], var[1], optimum.allocation[best], optimum.allocation[cmp]);
  const std::size_t last = checkpoints.back();
  const std::size_t n = config.trials;

  struct PerCheckpoint {
    double v;
    double z;
    bool wrong;
    std::vector<std::size_t> counts;
  };

  DiagnosticsReport report;
  report.arms = k;
  report.compared_arm = cmp;
  for (const auto& spec : config.strategies) {
    if (!exposes_propensities(spec.id)) {
      throw Error("missing trace: strategy \"" + spec.id + "\" does not expose propensities");
    }
  }
  for (const auto& spec : config.strategies) {
    std::vector<std::vector<PerCheckpoint>> per_trial(n);
    parallel_for(n, config.threads, [&](std::size_t i) {
      const std::uint64_t seed = trial_seed(config.seed, i);
      const TrialResult r = run_trial(spec, instance, last, seed, checkpoints, true);
      require_propensities(r.trace);
      std::vector<std::size_t> counts(k, 0);
      double deviation = 0.0;  // sum_t (m_t / sigma-tilde^2 - 1)
      double increments = 0.0;  // sum_t (Xhat_1 - Xhat_a - Delta_a)
      std::size_t c = 0;
      auto& out = per_trial[i];
      for (std::size_t t = 1; t <= last; ++t) {
        const TraceStep& s = r.trace[t - 1];
        const std::array<double, 2> mu_hat{s.mu_hat[best], s.mu_hat[cmp]};
        const std::array<double, 2> w{s.propensity[best], s.propensity[cmp]};
        deviation += conditional_second_moment(mu, var, mu_hat, w, delta) / tilde_sq - 1.0;
        const double x1 = aipw_pseudo_reward(best, s.arm, s.reward, mu_hat[0], w[0]);
        const double xa = aipw_pseudo_reward(cmp, s.arm, s.reward, mu_hat[1], w[1]);
        increments += x1 - xa - delta;
        ++counts[s.arm];
        if (t == checkpoints[c]) {
          const double tt = static_cast<double>(t);
          out.push_back(PerCheckpoint{std::abs(deviation) / tt, increments / std::sqrt(tt * tilde_sq),
                                      r.recommendations[c] != best, counts});
          ++c;
        }
      }
    });

    for (std::size_t c = 0; c < checkpoints.size(); ++c) {
      DiagnosticsRow row;
      row.strategy = spec.id;
      row.checkpoint = checkpoints[c];
      row.gamma_star = optimum.gamma_star;
      row.shares.assign(k, 0.0);
      double v = 0.0, z = 0.0, z2 = 0.0;
      std::size_t wrong = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const auto& pc = per_trial[i][c];
        v += pc.v;
        z += pc.z;
        z2 += pc.z * pc.z;
        wrong += pc.wrong;
        for (std::size_t a = 0; a < k; ++a) {
          row.shares[a] += static_cast<double>(pc.counts[a]) / static_cast<double>(checkpoints[c]);
        }
      }
      const double dn = static_cast<double>(n);
      row.v_hat = v / dn;
      row.xi_mean = z / dn;
      const double var_z = n > 1 ? std::max(0.0, (z2 - z * z / dn) / (dn - 1.0)) : 0.0;
      row.xi_stderr = std::sqrt(var_z / dn);
      for (double& s : row.shares) s /= dn;
      row.p_hat = static_cast<double>(wrong) / dn;
      row.exponent = empirical_exponent(row.p_hat, checkpoints[c], n);
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

/// CSV "strategy,T,V_hat,share_1..share_K,xi_mean,emp_exponent,gamma_star".
inline void write_diagnostics_csv(std::ostream& out, const DiagnosticsReport& report) {
  out << "strategy,T,V_hat";
  for (std::size_t a = 1; a <= report.arms; ++a) out << ",share_" << a;
  out << ",xi_mean,emp_exponent,gamma_star\n";
  for (const auto& r : report.rows) {
    out << r.strategy << ',' << r.checkpoint << ',' << format_number(r.v_hat);
    for (double s : r.shares) out << ',' << format_number(s);
    out << ',' << format_number(r.xi_mean) << ',' << format_number(r.exponent.value) << ','
        << format_number(r.gamma_star) << '\n';
  }
}

}  // namespace bai
