#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "bai/harness.hpp"
#include "bai/strategies.hpp"

using bai::Allocation;
using bai::ArmDistribution;
using bai::BanditInstance;
using bai::RandomStream;
using bai::StrategyParams;
using Vec = std::vector<double>;

namespace {

BanditInstance gaussians(Vec means, Vec vars) {
  std::vector<ArmDistribution> arms;
  for (std::size_t a = 0; a < means.size(); ++a) arms.push_back(ArmDistribution::gaussian(means[a], vars[a]));
  return BanditInstance(std::move(arms));
}

std::vector<std::size_t> every_round(std::size_t horizon) {
  std::vector<std::size_t> r;
  for (std::size_t t = 1; t <= horizon; ++t) r.push_back(t);
  return r;
}

bai::StrategySpec rs(const std::string& id, std::size_t init = 1, bool gamma = false) {
  bai::StrategySpec spec;
  spec.id = id;
  spec.params.init_rounds_per_arm = init;
  spec.params.gamma_mixing = gamma;
  spec.params.estimator = bai::estimator_for(id);
  return spec;
}

}  // namespace

TEST(StrategyParams, Validation) {
  StrategyParams p;
  EXPECT_NO_THROW(bai::validate(p, 3));
  p.c_w = 0.5;
  EXPECT_THROW(bai::validate(p, 2), bai::Error);
  p.c_w = 0.0;
  EXPECT_THROW(bai::validate(p, 2), bai::Error);
  p = {};
  p.init_rounds_per_arm = 0;
  EXPECT_THROW(bai::validate(p, 2), bai::Error);
  p = {};
  p.c_sigma2 = 0.5;
  EXPECT_THROW(bai::validate(p, 2), bai::Error);
  p = {};
  p.c_mu = 0.0;
  EXPECT_THROW(bai::validate(p, 2), bai::Error);
}

TEST(DrawCategorical, FrequenciesAndZeroWeights) {
  RandomStream rng(1);
  const Vec w{0.2, 0.0, 0.5, 0.3};
  int counts[4] = {0, 0, 0, 0};
  constexpr int n = 200000;
  for (int i = 0; i < n; ++i) ++counts[bai::draw_categorical(w, rng)];
  EXPECT_EQ(counts[1], 0);
  for (int a : {0, 2, 3}) {
    EXPECT_LT(std::abs(counts[a] - n * w[a]), 5.0 * std::sqrt(n * w[a] * (1 - w[a])));
  }
}

TEST(ArgmaxRandomTies, StrictArgmax) {
  RandomStream rng(2);
  EXPECT_EQ(bai::argmax_random_ties(Vec{0.2, 0.9, 0.9 - 1e-15}, rng), 1u);
  EXPECT_EQ(bai::argmax_random_ties(Vec{1.5, 0.4}, rng), 0u);
}

TEST(ArgmaxRandomTies, ConsumesRandomnessOnlyOnTies) {
  RandomStream used(3), fresh(3);
  bai::argmax_random_ties(Vec{0.1, 0.5, 0.2}, used);
  EXPECT_EQ(used.next_u64(), fresh.next_u64());
}

TEST(ArgmaxRandomTies, TiesAreUniform) {
  RandomStream rng(4);
  int counts[3] = {0, 0, 0};
  constexpr int n = 30000;
  for (int i = 0; i < n; ++i) ++counts[bai::argmax_random_ties(Vec{0.7, 0.7, 0.7}, rng)];
  for (int c : counts) EXPECT_LT(std::abs(c - n / 3.0), 5.0 * std::sqrt(n * 2.0 / 9.0));
}

TEST(ArgmaxRandomTies, Eligibility) {
  RandomStream rng(5);
  EXPECT_EQ(bai::argmax_random_ties(Vec{5.0, 1.0, 2.0}, rng, {false, true, true}), 2u);
  EXPECT_THROW(bai::argmax_random_ties(Vec{1.0, 2.0}, rng, {false, false}), bai::Error);
}

TEST(EstimatedAllocation, Examples) {
  auto w = bai::estimated_allocation(Vec{0.05, 0.01}, Vec{1, 0.2});
  EXPECT_NEAR(w[0], 0.690983, 1e-6);
  EXPECT_NEAR(w[1], 0.309017, 1e-6);

  w = bai::estimated_allocation(Vec{0.5, 0.5, 0.1}, Vec{1, 2, 3});
  for (double x : w.weights()) EXPECT_EQ(x, 1.0 / 3.0);

  w = bai::estimated_allocation(Vec{1, 0.9, 0.9}, Vec{1, 1, 1});
  EXPECT_NEAR(w[0], 0.414214, 1e-6);
  EXPECT_NEAR(w[1], 0.292893, 1e-6);
  EXPECT_NEAR(w[2], 0.292893, 1e-6);

  // Empirical best in another position plays the role of arm 1.
  w = bai::estimated_allocation(Vec{0.01, 0.05}, Vec{0.2, 1});
  EXPECT_NEAR(w[1], 0.690983, 1e-6);
}

TEST(EstimatedAllocation, FromStatistics) {
  // Arm 0: mean 0.2, variance 1.0; arm 1: no pulls -> (0, 1).
  const bai::RunningArmStats stats({10, 0}, {2.0, 0.0}, {10.4, 0.0});
  const auto w = bai::estimated_allocation(stats, StrategyParams{});
  EXPECT_NEAR(w[0], 0.5, 1e-12);
}

TEST(SamplingPropensity, GammaMixing) {
  StrategyParams p;
  p.gamma_mixing = true;
  const auto mixed = bai::sampling_propensity(Allocation({0.9, 0.1}), 100, p);
  EXPECT_NEAR(mixed[0], 0.86, 1e-15);
  EXPECT_NEAR(mixed[1], 0.14, 1e-15);
}

TEST(SamplingPropensity, FloorFallsBackToUniform) {
  StrategyParams p;
  p.c_w = 0.05;
  const auto out = bai::sampling_propensity(Allocation({0.96, 0.04}), 10, p);
  EXPECT_EQ(out, (Vec{0.5, 0.5}));
  const auto kept = bai::sampling_propensity(Allocation({0.9, 0.1}), 10, p);
  EXPECT_EQ(kept, (Vec{0.9, 0.1}));
  p.c_w = 0.1;
  EXPECT_EQ(bai::sampling_propensity(Allocation({0.9, 0.1}), 10, p), (Vec{0.5, 0.5}));
}

TEST(SamplingPropensity, MixingAnchorIsOneOverK) {
  StrategyParams p;
  p.gamma_mixing = true;
  const auto out = bai::sampling_propensity(Allocation({0.5, 0.3, 0.2}), 4, p);
  EXPECT_NEAR(out[0], 0.5 / 3.0 + 0.25, 1e-15);
  EXPECT_NEAR(out[2], 0.5 / 3.0 + 0.1, 1e-15);
}

TEST(RandomizedSampling, InitializationIsRoundRobin) {
  StrategyParams p;
  p.init_rounds_per_arm = 2;
  bai::RandomizedSamplingStrategy s(3, p, 1, 2);
  const std::size_t expected[] = {0, 1, 2, 0, 1, 2};
  for (std::size_t t = 1; t <= 6; ++t) {
    ASSERT_EQ(s.select_arm(t), expected[t - 1]);
    for (double w : s.round_info()->propensity) EXPECT_EQ(w, 1.0 / 3.0);
    s.observe(expected[t - 1], 0.1 * static_cast<double>(t));
  }
}

TEST(RandomizedSampling, ProtocolErrors) {
  bai::RandomizedSamplingStrategy s(2, StrategyParams{}, 1, 2);
  EXPECT_THROW(s.recommend(), bai::Error);
  EXPECT_THROW(s.select_arm(2), bai::Error);
  EXPECT_EQ(s.select_arm(1), 0u);
  EXPECT_THROW(s.observe(1, 0.0), bai::Error);
  s.observe(0, 1.0);
  EXPECT_EQ(s.recommend(), 0u);
}

TEST(RandomizedSampling, PropensityFloorAndMeasurability) {
  RandomStream inst_rng(6);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t k = 2 + rep % 4;
    Vec means, vars;
    for (std::size_t a = 0; a < k; ++a) {
      means.push_back(inst_rng.uniform01());
      vars.push_back(inst_rng.uniform(0.05, 3.0));
    }
    const auto inst = gaussians(means, vars);
    StrategyParams p;
    p.init_rounds_per_arm = 1 + rep % 3;
    p.gamma_mixing = rep % 2 == 0;
    p.c_w = 0.02;
    bai::RandomizedSamplingStrategy s(k, p, 100 + rep, 200 + rep);
    bai::RunningArmStats shadow(k);  // rounds 1..t-1 only
    RandomStream rewards(300 + rep);
    for (std::size_t t = 1; t <= 400; ++t) {
      const std::size_t arm = s.select_arm(t);
      const auto* info = s.round_info();
      Vec mu_hat, s2_hat;
      bai::clipped_moments(shadow, p, mu_hat, s2_hat);
      ASSERT_EQ(info->mu_hat, mu_hat) << "round " << t;
      double total = 0.0;
      for (double w : info->propensity) {
        ASSERT_GT(w, 0.0);
        if (t > k * p.init_rounds_per_arm) {
          ASSERT_TRUE(w > p.c_w || w == 1.0 / static_cast<double>(k));
        }
        total += w;
      }
      ASSERT_NEAR(total, 1.0, 1e-12);
      if (t > k * p.init_rounds_per_arm) {
        const auto expected =
            bai::sampling_propensity(bai::estimated_allocation(mu_hat, s2_hat), t, p);
        ASSERT_EQ(info->propensity, expected);
      }
      const double x = inst.arm(arm).sample(rewards);
      s.observe(arm, x);
      shadow.record(arm, x);
    }
  }
}

TEST(RandomizedSampling, AipwRecommendationMatchesIndependentEstimate) {
  const auto inst = gaussians({0.3, 0.2, 0.25}, {1.0, 0.5, 2.0});
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto spec = rs("rs-aipw", 2);
    const auto r = bai::run_trial(spec, inst, 300, seed, every_round(300), true);
    Vec sums(3, 0.0);
    for (std::size_t t = 1; t <= 300; ++t) {
      const auto& step = r.trace[t - 1];
      for (std::size_t a = 0; a < 3; ++a) {
        sums[a] += step.arm == a
                       ? (step.reward - step.mu_hat[a]) / step.propensity[a] + step.mu_hat[a]
                       : step.mu_hat[a];
      }
      const std::size_t expected = std::max_element(sums.begin(), sums.end()) - sums.begin();
      if (std::count(sums.begin(), sums.end(), sums[expected]) > 1) continue;  // random tie
      ASSERT_EQ(r.recommendations[t - 1], expected) << "seed " << seed << " round " << t;
    }
  }
}

TEST(RandomizedSampling, IpwRecommendationMatchesIndependentEstimate) {
  const auto inst = gaussians({0.3, 0.2}, {1.0, 0.5});
  const auto r = bai::run_trial(rs("rs-ipw"), inst, 200, 9, every_round(200), true);
  Vec sums(2, 0.0);
  for (std::size_t t = 1; t <= 200; ++t) {
    const auto& step = r.trace[t - 1];
    sums[step.arm] += step.reward / step.propensity[step.arm];
    ASSERT_EQ(r.recommendations[t - 1], sums[0] > sums[1] ? 0u : 1u);
  }
}

TEST(RandomizedSampling, DrUsesEmpiricalPropensity) {
  const auto inst = gaussians({0.3, 0.2, 0.1}, {1.0, 0.5, 0.7});
  const auto r = bai::run_trial(rs("rs-dr"), inst, 300, 4, every_round(300), true);
  Vec sums(3, 0.0);
  std::vector<std::size_t> counts(3, 0);
  for (std::size_t t = 1; t <= 300; ++t) {
    const auto& step = r.trace[t - 1];
    for (std::size_t a = 0; a < 3; ++a) {
      const double empirical =
          t == 1 ? 0.0 : static_cast<double>(counts[a]) / static_cast<double>(t - 1);
      const double w = empirical > 0.0 ? empirical : step.propensity[a];
      sums[a] += step.arm == a ? (step.reward - step.mu_hat[a]) / w + step.mu_hat[a]
                               : step.mu_hat[a];
    }
    ++counts[step.arm];
    const std::size_t expected = std::max_element(sums.begin(), sums.end()) - sums.begin();
    if (std::count(sums.begin(), sums.end(), sums[expected]) > 1) continue;
    ASSERT_EQ(r.recommendations[t - 1], expected) << "round " << t;
  }
}

TEST(RandomizedSampling, SampleAverageRecommendation) {
  const auto inst = gaussians({0.3, 0.2}, {1.0, 0.5});
  const auto r = bai::run_trial(rs("rs-sa"), inst, 100, 5, every_round(100), true);
  Vec sums(2, 0.0);
  Vec counts(2, 0.0);
  for (std::size_t t = 1; t <= 100; ++t) {
    const auto& step = r.trace[t - 1];
    sums[step.arm] += step.reward;
    counts[step.arm] += 1.0;
    if (t == 1) {
      ASSERT_EQ(r.recommendations[0], 0u);
      continue;
    }
    ASSERT_EQ(r.recommendations[t - 1], sums[0] / counts[0] > sums[1] / counts[1] ? 0u : 1u);
  }
}

TEST(RandomizedSampling, VariantsSharePathsUnderEqualSeeds) {
  const auto inst = bai::scenario(1);
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    const auto base = bai::run_trial(rs("rs-aipw", 50, true), inst, 1000, seed, {}, true);
    for (const char* id : {"rs-ipw", "rs-dr", "rs-sa"}) {
      const auto other = bai::run_trial(rs(id, 50, true), inst, 1000, seed, {}, true);
      for (std::size_t t = 0; t < 1000; ++t) {
        ASSERT_EQ(base.trace[t].arm, other.trace[t].arm) << id;
        ASSERT_EQ(base.trace[t].reward, other.trace[t].reward) << id;
        ASSERT_EQ(base.trace[t].propensity, other.trace[t].propensity) << id;
      }
    }
  }
}

TEST(RandomizedSampling, Deterministic) {
  const auto inst = gaussians({0.5, 0.45, 0.4}, {1, 1, 1});
  const auto a = bai::run_trial(rs("rs-aipw"), inst, 500, 77, every_round(500), true);
  const auto b = bai::run_trial(rs("rs-aipw"), inst, 500, 77, every_round(500), true);
  EXPECT_EQ(a.recommendations, b.recommendations);
  for (std::size_t t = 0; t < 500; ++t) EXPECT_EQ(a.trace[t].arm, b.trace[t].arm);
}

TEST(Uniform, RoundRobin) {
  bai::UniformStrategy two(2, 1);
  for (std::size_t t = 1; t <= 6; ++t) {
    EXPECT_EQ(two.select_arm(t), t % 2 == 1 ? 0u : 1u);
    two.observe(t % 2 == 1 ? 0 : 1, 0.0);
  }
  bai::UniformStrategy three(3, 1);
  for (std::size_t t = 1; t <= 5; ++t) {
    const std::size_t a = three.select_arm(t);
    if (t == 5) {
      EXPECT_EQ(a, 1u);
    }
    three.observe(a, 0.0);
  }
}

TEST(AlphaElimination, Counts) {
  auto pulls_of_first = [](double s1, double s2, std::size_t horizon) {
    bai::AlphaEliminationStrategy s(2, s1, s2, 1);
    std::size_t n1 = 0;
    for (std::size_t t = 1; t <= horizon; ++t) {
      const std::size_t a = s.select_arm(t);
      n1 += a == 0;
      EXPECT_LE(std::abs(static_cast<double>(n1) - s.alpha() * static_cast<double>(t)), 1.0);
      s.observe(a, 0.0);
    }
    return n1;
  };
  EXPECT_EQ(pulls_of_first(1.0, 1.0, 10), 5u);
  EXPECT_EQ(pulls_of_first(1.0, std::sqrt(0.2), 3000), 2073u);
  EXPECT_EQ(pulls_of_first(1.0, std::sqrt(0.2), 1), 1u);
  EXPECT_THROW(bai::AlphaEliminationStrategy(3, 1.0, 1.0, 1), bai::Error);
  EXPECT_THROW(bai::make_strategy({"alpha-elim"}, gaussians({1, 0, 0.5}, {1, 1, 1}), 10, 1),
               bai::Error);
}

TEST(SequentialHalving, Budgets) {
  EXPECT_EQ(bai::sequential_halving_budgets(2, 100), (std::vector<std::size_t>{50}));
  EXPECT_EQ(bai::sequential_halving_budgets(4, 400), (std::vector<std::size_t>{50, 100}));
  EXPECT_TRUE(bai::sequential_halving_budgets(1, 10).empty());
  EXPECT_EQ(bai::sequential_halving_budgets(5, 300), (std::vector<std::size_t>{20, 33, 50}));
  try {
    bai::sequential_halving_budgets(4, 7);
    FAIL();
  } catch (const bai::Error& e) {
    EXPECT_STREQ(e.what(), "budget too small for sequential halving");
  }
}

TEST(SequentialHalving, SingleArm) {
  bai::SequentialHalvingStrategy s(1, 5, 1);
  EXPECT_EQ(s.recommend(), 0u);
  EXPECT_EQ(s.select_arm(1), 0u);
}

TEST(SequentialHalving, PhasesOnNoiselessInstance) {
  const BanditInstance inst({ArmDistribution::bernoulli(0.0), ArmDistribution::bernoulli(1.0),
                             ArmDistribution::bernoulli(0.0), ArmDistribution::bernoulli(0.0)});
  bai::SequentialHalvingStrategy s(4, 403, 1);
  RandomStream rng(1);
  std::vector<std::size_t> counts(4, 0);
  for (std::size_t t = 1; t <= 403; ++t) {
    const std::size_t a = s.select_arm(t);
    ++counts[a];
    s.observe(a, inst.arm(a).sample(rng));
    if (t == 200) {
      // Phase 1 done: arm 1 and the lowest-index tied arm survive.
      EXPECT_EQ(s.survivors(), (std::vector<std::size_t>{0, 1}));
    }
  }
  EXPECT_EQ(s.survivors(), (std::vector<std::size_t>{1}));
  EXPECT_EQ(s.recommend(), 1u);
  EXPECT_EQ(counts, (std::vector<std::size_t>{150, 153, 50, 50}));
}

TEST(UGapEb, EasyInstance) {
  const auto inst = gaussians({1.0, 0.5, 0.5, 0.4}, {0.01, 0.01, 0.01, 0.01});
  bai::StrategySpec spec;
  spec.id = "ugap-eb";
  int correct = 0;
  constexpr int trials = 200;
  for (int i = 0; i < trials; ++i) {
    const std::size_t horizon = 1000;
    const std::vector<std::size_t> last{horizon};
    correct += bai::run_trial(spec, inst, horizon, bai::trial_seed(1, i), last, false)
                   .recommendations[0] == 0;
  }
  EXPECT_GE(correct, 0.95 * trials);
}

TEST(UGapEb, EqualObservedMeansAlternate) {
  bai::UGapEbStrategy s(2, 1.0, 1);
  std::vector<std::size_t> arms;
  for (std::size_t t = 1; t <= 8; ++t) {
    arms.push_back(s.select_arm(t));
    s.observe(arms.back(), 0.5);
  }
  for (std::size_t t = 1; t < arms.size(); ++t) EXPECT_NE(arms[t], arms[t - 1]);
}

TEST(UGapEb, BudgetEqualToArmCount) {
  bai::UGapEbStrategy s(3, 1.0, 1);
  const double x[] = {0.1, 0.9, 0.3};
  for (std::size_t t = 1; t <= 3; ++t) s.observe(s.select_arm(t), x[t - 1]);
  EXPECT_EQ(s.recommend(), 1u);
  EXPECT_THROW(bai::UGapEbStrategy(2, 0.0, 1), bai::Error);
}

TEST(Factory, Ids) {
  const auto inst = gaussians({0.5, 0.1}, {1, 1});
  for (const auto& id : bai::strategy_ids()) {
    bai::StrategySpec spec;
    spec.id = id;
    EXPECT_NO_THROW(bai::make_strategy(spec, inst, 100, 1)) << id;
  }
  EXPECT_THROW(bai::make_strategy({"thompson"}, inst, 100, 1), bai::Error);
  EXPECT_THROW(bai::estimator_for("uniform"), bai::Error);
  EXPECT_TRUE(bai::exposes_propensities("oracle-aipw"));
  EXPECT_FALSE(bai::exposes_propensities("sh"));
}

TEST(OracleAipw, SamplesFromOptimalAllocation) {
  const auto inst = bai::scenario(1);
  bai::OracleAipwStrategy s(inst, 1, 2);
  const auto w = bai::solve_optimal_allocation(inst).allocation;
  s.select_arm(1);
  EXPECT_EQ(s.round_info()->propensity, Vec(w.weights().begin(), w.weights().end()));
  EXPECT_EQ(s.round_info()->mu_hat, inst.means());
}
