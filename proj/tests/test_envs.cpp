#include "regretlab/envs.hpp"
#include "regretlab/rng.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace regretlab;

// Known-answer vectors of the Random123 distribution for Philox4x32-10.
TEST(Philox, KnownAnswers) {
    EXPECT_EQ(Philox4x32(0)({0, 0, 0, 0}), (Philox4x32::Block{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
    EXPECT_EQ(Philox4x32(0xffffffffffffffffULL)({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}),
              (Philox4x32::Block{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
    EXPECT_EQ(Philox4x32(0x299f31d0a4093822ULL)({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}),
              (Philox4x32::Block{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(CounterStream, PureFunctionOfIndex) {
    const CounterStream a(42, streams::rewards), b(42, streams::rewards), c(42, streams::transitions);
    EXPECT_EQ(a.uniform(17), b.uniform(17));
    EXPECT_NE(a.uniform(17), c.uniform(17));
    EXPECT_NE(a.uniform(17), a.uniform(18));
    double total = 0.0;
    for (std::uint64_t i = 0; i < 100'000; ++i) {
        const double u = a.uniform(i);
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        total += u;
    }
    EXPECT_NEAR(total / 100'000, 0.5, 0.005);
}

TEST(Build, FixedKernelExamples) {
    const auto left = build({EnvKind::figure2_left});
    EXPECT_EQ(left.mdp.n_states(), 2u);
    EXPECT_EQ(std::vector<double>(left.mdp.rewards().begin(), left.mdp.rewards().end()),
              (std::vector<double>{0.5, 0.1, 0.5, 0.1}));
    const auto right = build({EnvKind::figure2_right});
    const auto sol = optimal_solve(right.mdp);
    ASSERT_EQ(sol.bellman_policy_count, 1u);
    EXPECT_EQ(sol.bellman_policies[0], (Policy{{1, 0}}));
    EXPECT_TRUE(right.ambient.contains(right.mdp));

    const auto f7 = build({EnvKind::figure7_cycles});
    EXPECT_EQ(f7.mdp.n_states(), 6u);
    EXPECT_EQ(f7.mdp.n_pairs(), 7u);
    EXPECT_NEAR(policy_eval(f7.mdp, Policy{{0, 0, 0, 0, 0, 0}}).gain[0], 0.74, 1e-12);
    EXPECT_NEAR(policy_eval(f7.mdp, Policy{{0, 1, 0, 0, 0, 0}}).gain[0], 0.6166666666666667, 1e-12);
    const auto sol7 = optimal_solve(f7.mdp);
    EXPECT_EQ(sol7.optimal_pairs, (std::vector<PairId>{0, 1, 3, 4, 5}));
    EXPECT_GT(sol7.gaps[2], 0.0);
}

TEST(Build, RiverSwim) {
    const auto env = build({EnvKind::riverswim, 3});
    const Mdp& m = env.mdp;
    EXPECT_EQ(m.n_states(), 3u);
    EXPECT_EQ(m.reward(m.pair(0, 0)), 0.005);
    EXPECT_EQ(m.reward(m.pair(2, 1)), 1.0);
    EXPECT_EQ(m.row(m.pair(1, 1))[2], 0.6);
    EXPECT_EQ(m.row(m.pair(1, 1))[1], 0.35);
    EXPECT_EQ(m.row(m.pair(1, 1))[0], 0.05);
    EXPECT_EQ(m.row(m.pair(0, 1))[0], 0.4);
    EXPECT_EQ(m.row(m.pair(2, 1))[1], 0.4);
    EXPECT_EQ(m.row(m.pair(2, 0))[1], 1.0);
    EXPECT_TRUE(env.ambient.is_free(0));
    EXPECT_THROW(build({EnvKind::riverswim, 1}), ConfigError);
}

TEST(Build, RandomErgodicIsNonDegenerateAndStable) {
    std::size_t worst = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto env = build({EnvKind::random_ergodic, 0, 5, 2, seed});
        worst = std::max(worst, env.redraws);
        EXPECT_TRUE(non_degenerate(env.mdp).flag);
    }
    EXPECT_LE(worst, 10u);
    const auto a = build({EnvKind::random_ergodic, 0, 5, 2, 7});
    const auto b = build({EnvKind::random_ergodic, 0, 5, 2, 7});
    EXPECT_EQ(std::vector<double>(a.mdp.kernel().begin(), a.mdp.kernel().end()),
              std::vector<double>(b.mdp.kernel().begin(), b.mdp.kernel().end()));
    EXPECT_EQ(a.id, "random_ergodic(5,2,7)");
}

TEST(EnvKind, Parse) {
    EXPECT_EQ(parse_env_kind("random-ergodic"), EnvKind::random_ergodic);
    EXPECT_EQ(parse_env_kind("figure7"), EnvKind::figure7_cycles);
    EXPECT_FALSE(parse_env_kind("garnet").has_value());
}

TEST(Step, Sampling) {
    const Mdp m({1, 2}, {1.0, 0.0, 0.4}, {{0.0, 1.0}, {1.0, 0.0}, {0.3, 0.7}});
    const Simulator sim(5);
    int next1 = 0, reward_hits = 0;
    const int n = 100'000;
    for (std::uint64_t t = 0; t < static_cast<std::uint64_t>(n); ++t) {
        const auto d = sim(m, 0, t);
        ASSERT_EQ(d.reward, 1);
        ASSERT_EQ(d.next, 1u);
        EXPECT_EQ(sim(m, 1, t).next, 0u);
        const auto r = sim(m, 2, t);
        next1 += r.next == 1;
        reward_hits += r.reward;
    }
    EXPECT_NEAR(static_cast<double>(next1) / n, 0.7, 0.01);
    EXPECT_NEAR(static_cast<double>(reward_hits) / n, 0.4, 0.01);
}
