#include "oracles.hpp"

#include "regretlab/envs.hpp"
#include "regretlab/planning.hpp"

#include <gtest/gtest.h>

using namespace regretlab;

namespace {

Mdp cycle(std::size_t n) {
    std::vector<std::vector<double>> rows;
    for (std::size_t s = 0; s < n; ++s) {
        std::vector<double> row(n, 0.0);
        row[(s + 1) % n] = 1.0;
        rows.push_back(row);
    }
    return Mdp(std::vector<std::size_t>(n, 1), std::vector<double>(n, 0.5), rows);
}

Mdp fig2_right() { return build({EnvKind::figure2_right}).mdp; }

} // namespace

TEST(PolicyEval, SingleState) {
    Mdp m({1}, {0.7}, {{1.0}});
    const auto v = policy_eval(m, Policy{{0}});
    EXPECT_DOUBLE_EQ(v.gain[0], 0.7);
    EXPECT_DOUBLE_EQ(v.bias[0], 0.0);
}

TEST(PolicyEval, Figure2RightOptimalPolicy) {
    const auto v = policy_eval(fig2_right(), Policy{{1, 0}});
    EXPECT_NEAR(v.gain[0], 0.51, 1e-12);
    EXPECT_NEAR(v.gain[1], 0.51, 1e-12);
    EXPECT_NEAR(v.bias[0], -0.42, 1e-12);
    EXPECT_NEAR(v.bias[1], 0.0, 1e-12);
}

TEST(PolicyEval, MultichainGainsPerClass) {
    // 0 and 2 absorbing; 1 splits between them.
    Mdp m({1, 1, 1}, {0.2, 0.9, 0.6}, {{1, 0, 0}, {0.25, 0, 0.75}, {0, 0, 1}}, Validation::stochastic_only);
    const auto v = policy_eval(m, Policy{{0, 0, 0}});
    EXPECT_EQ(v.chain.recurrent_classes.size(), 2u);
    EXPECT_NEAR(v.gain[0], 0.2, 1e-12);
    EXPECT_NEAR(v.gain[2], 0.6, 1e-12);
    EXPECT_NEAR(v.gain[1], 0.25 * 0.2 + 0.75 * 0.6, 1e-12);
    EXPECT_LT(poisson_residual(m, Policy{{0, 0, 0}}, v), 1e-12);
}

TEST(PolicyEval, CesaroGaugeCentersEachClass) {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 20; ++i) {
        const Mdp m = oracle::random_model(4, 2, rng, true);
        const Policy pi = oracle::random_policy(m, rng);
        const auto v = policy_eval(m, pi, BiasGauge::cesaro);
        EXPECT_LT(poisson_residual(m, pi, v), 1e-9);
        const auto limit = oracle::limit_matrix(oracle::transition_matrix(m, pi));
        for (const auto& cls : v.chain.recurrent_classes) {
            double mean = 0.0;
            for (StateId s : cls)
                mean += limit(static_cast<Eigen::Index>(cls[0]), static_cast<Eigen::Index>(s)) * v.bias[s];
            EXPECT_NEAR(mean, 0.0, 1e-9);
        }
    }
}

TEST(PolicyEval, PoissonResidualOnRandomPairs) {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 300; ++i) {
        const Mdp m = oracle::random_model(2 + i % 4, 1 + i % 3, rng, i % 2 == 0);
        const Policy pi = oracle::random_policy(m, rng);
        for (auto gauge : {BiasGauge::lowest_recurrent_zero, BiasGauge::cesaro}) {
            const auto v = policy_eval(m, pi, gauge);
            ASSERT_LT(poisson_residual(m, pi, v), 1e-8);
            const auto g = oracle::gain(m, pi);
            for (StateId s = 0; s < m.n_states(); ++s)
                ASSERT_NEAR(v.gain[s], g[s], 1e-9);
        }
    }
}

TEST(PolicyEval, GainMatchesSimulation) {
    std::mt19937_64 rng(5);
    const Mdp m = oracle::random_model(3, 2, rng);
    const Policy pi = oracle::random_policy(m, rng);
    const auto v = policy_eval(m, pi);
    const Simulator sim(42);
    for (StateId s0 = 0; s0 < m.n_states(); ++s0) {
        std::vector<double> rewards(1'000'000);
        StateId s = s0;
        for (std::uint64_t t = 0; t < rewards.size(); ++t) {
            const auto tr = sim(m, m.pair(s, pi(s)), t + s0 * rewards.size());
            rewards[t] = tr.reward;
            s = tr.next;
        }
        const auto bm = oracle::batch_means(rewards);
        EXPECT_LT(std::abs(bm.mean - v.gain[s0]), 3.0 * bm.stderr_ + 1e-12) << "start " << s0;
    }
}

TEST(ChainStructure, ClassesAndReachSets) {
    const Mdp m7 = build({EnvKind::figure7_cycles}).mdp;
    const auto dashed = reach_set(m7, Policy{{0, 1, 0, 0, 0, 0}}, 0);
    EXPECT_EQ(dashed, (std::vector<PairId>{0, 2, 6}));
    const auto five = reach_set(m7, Policy{{0, 0, 0, 0, 0, 0}}, 3);
    EXPECT_EQ(five, (std::vector<PairId>{0, 1, 3, 4, 5}));
    EXPECT_EQ(reach_set(cycle(4), Policy{{0, 0, 0, 0}}, 2).size(), 4u);
    EXPECT_EQ(reach_set(Mdp({1}, {0.3}, {{1.0}}), Policy{{0}}, 0), std::vector<PairId>{0});

    const auto chain = chain_structure(m7, Policy{{0, 1, 0, 0, 0, 0}});
    ASSERT_TRUE(chain.unichain());
    EXPECT_EQ(chain.recurrent_classes[0], (std::vector<StateId>{0, 1, 5}));
    EXPECT_FALSE(chain.is_recurrent(3));
}

TEST(OptimalSolve, Figure2Right) {
    const auto sol = optimal_solve(fig2_right());
    EXPECT_NEAR(sol.optimal_gain(), 0.51, 1e-9);
    EXPECT_NEAR(sol.gain[1], 0.51, 1e-9);
    ASSERT_EQ(sol.bellman_policy_count, 1u);
    EXPECT_EQ(sol.bellman_policies[0], (Policy{{1, 0}}));
    EXPECT_TRUE(sol.unichain_flag);
    EXPECT_NEAR(sol.gaps[0], 0.02, 1e-9);
    EXPECT_NEAR(sol.gaps[1], 0.0, 1e-9);
    EXPECT_NEAR(sol.gaps[2], 0.0, 1e-9);
    EXPECT_NEAR(sol.gaps[3], 0.85, 1e-9);
    EXPECT_EQ(sol.weak_optimal_pairs, (std::vector<PairId>{1, 2}));
    // (0, switch) is transient under the optimal policy.
    EXPECT_EQ(sol.optimal_pairs, (std::vector<PairId>{2}));
}

TEST(OptimalSolve, Figure7OptimalPairsAreTheFiveCycle) {
    const Mdp m = build({EnvKind::figure7_cycles}).mdp;
    const auto sol = optimal_solve(m);
    EXPECT_NEAR(sol.optimal_gain(), 0.74, 1e-9);
    EXPECT_EQ(sol.optimal_pairs, (std::vector<PairId>{0, 1, 3, 4, 5}));
    EXPECT_GT(sol.gaps[2], 0.0);
    // State 5 has a single action, so its gap is 0.
    EXPECT_EQ(sol.gaps[6], 0.0);
    EXPECT_NEAR(policy_eval(m, Policy{{0, 1, 0, 0, 0, 0}}).gain[0], 1.85 / 3.0, 1e-12);
}

TEST(OptimalSolve, MatchesBruteForceOnRandomModels) {
    std::mt19937_64 rng(17);
    for (int i = 0; i < 200; ++i) {
        const std::size_t ns = 2 + static_cast<std::size_t>(i) % 3, na = 1 + static_cast<std::size_t>(i / 3) % 3;
        const Mdp m = oracle::random_model(ns, na, rng, i % 2 == 1);
        const auto sol = optimal_solve(m);
        const auto best = oracle::brute_force_optimal_gain(m);
        for (StateId s = 0; s < ns; ++s)
            ASSERT_NEAR(sol.gain[s], best[s], 1e-8) << "model " << i;
    }
}

TEST(OptimalSolve, NearTieFinishesWithPolicyIteration) {
    // Loop rewards 1.7e-7 apart: value iteration needs millions of sweeps.
    const Mdp m({2, 2}, {0.50018722118704562, 0.10055936962128215, 0.50018704712058848, 0.10067154697310608},
                {{1, 0}, {0, 1}, {0, 1}, {1, 0}});
    const auto sol = optimal_solve(m, 1e-10, 1000);
    EXPECT_NEAR(sol.optimal_gain(), 0.50018722118704562, 1e-12);
    EXPECT_EQ(sol.bellman_policy_count, 1u);
    EXPECT_EQ(sol.bellman_policies[0], (Policy{{0, 1}}));
}

TEST(OptimalSolve, GapProperties) {
    std::mt19937_64 rng(23);
    for (int i = 0; i < 100; ++i) {
        const Mdp m = oracle::random_model(2 + i % 3, 2 + i % 2, rng, true);
        const auto sol = optimal_solve(m);
        for (double g : sol.gaps)
            ASSERT_GE(g, -1e-9);
        for (StateId s = 0; s < m.n_states(); ++s) {
            double lo = 1e300;
            for (ActionId a = 0; a < m.n_actions(s); ++a)
                lo = std::min(lo, sol.gaps[m.pair(s, a)]);
            ASSERT_LE(lo, sol.weak_tol);
        }
        for (PairId z : sol.optimal_pairs)
            ASSERT_TRUE(sol.is_weak_optimal(z));
        ASSERT_LE(detail::span(sol.bias), diameter(m) + 1e-6);
    }
}

TEST(OptimalSolve, RejectsBadTolerance) { EXPECT_THROW(optimal_solve(fig2_right(), 0.0), PreconditionError); }

TEST(Diameter, Cycles) {
    for (std::size_t n : {2u, 3u, 6u})
        EXPECT_NEAR(diameter(cycle(n)), static_cast<double>(n - 1), 1e-9);
    EXPECT_NEAR(diameter(fig2_right()), 1.0, 1e-9);
    EXPECT_DOUBLE_EQ(diameter(Mdp({1}, {0.3}, {{1.0}})), 0.0);
}

TEST(Diameter, MatchesPolicyEnumeration) {
    std::mt19937_64 rng(29);
    for (int i = 0; i < 30; ++i) {
        const Mdp m = oracle::random_model(3, 2, rng, true);
        double worst = 0.0;
        for (StateId target = 0; target < 3; ++target) {
            std::vector<double> best(3, 1e300);
            for_each_policy(all_actions(m.layout()), [&](const Policy& pi) {
                Eigen::MatrixXd a = Eigen::MatrixXd::Identity(3, 3) - oracle::transition_matrix(m, pi);
                Eigen::VectorXd b = Eigen::VectorXd::Ones(3);
                a.row(static_cast<Eigen::Index>(target)).setZero();
                a(static_cast<Eigen::Index>(target), static_cast<Eigen::Index>(target)) = 1.0;
                b(static_cast<Eigen::Index>(target)) = 0.0;
                Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
                if (!lu.isInvertible())
                    return;
                Eigen::VectorXd h = lu.solve(b);
                for (StateId s = 0; s < 3; ++s)
                    if (h(static_cast<Eigen::Index>(s)) >= 0.0)
                        best[s] = std::min(best[s], h(static_cast<Eigen::Index>(s)));
            });
            for (StateId s = 0; s < 3; ++s)
                if (s != target)
                    worst = std::max(worst, best[s]);
        }
        ASSERT_NEAR(diameter(m), worst, 1e-7 * worst);
        // Reward changes leave the diameter alone.
        ASSERT_NEAR(diameter(m.with_rewards(std::vector<double>(m.n_pairs(), 0.25))), diameter(m), 1e-12);
    }
}

TEST(Diameter, MatchesSimulatedHittingTime) {
    std::mt19937_64 rng(31);
    const Mdp m = oracle::random_model(3, 2, rng);
    // Hitting times of every ordered pair under the minimizing policy for that target.
    double best_pair = 0.0;
    StateId from = 0, to = 0;
    Policy pi_best;
    // The diameter is attained by some (start, target) pair: recover it by enumeration.
    for (StateId target = 0; target < 3; ++target) {
        for (StateId s = 0; s < 3; ++s) {
            if (s == target)
                continue;
            double best = 1e300;
            Policy arg;
            for_each_policy(all_actions(m.layout()), [&](const Policy& pi) {
                Eigen::MatrixXd a = Eigen::MatrixXd::Identity(3, 3) - oracle::transition_matrix(m, pi);
                Eigen::VectorXd b = Eigen::VectorXd::Ones(3);
                a.row(static_cast<Eigen::Index>(target)).setZero();
                a(static_cast<Eigen::Index>(target), static_cast<Eigen::Index>(target)) = 1.0;
                b(static_cast<Eigen::Index>(target)) = 0.0;
                const double h = a.fullPivLu().solve(b)(static_cast<Eigen::Index>(s));
                if (h < best) {
                    best = h;
                    arg = pi;
                }
            });
            if (best > best_pair) {
                best_pair = best;
                from = s;
                to = target;
                pi_best = arg;
            }
        }
    }
    const Simulator sim(7);
    std::vector<double> times;
    std::uint64_t draw = 0;
    for (int run = 0; run < 20000; ++run) {
        StateId s = from;
        double steps = 0;
        while (s != to) {
            s = sim(m, m.pair(s, pi_best(s)), draw++).next;
            ++steps;
        }
        times.push_back(steps);
    }
    double mean = 0.0, var = 0.0;
    for (double x : times)
        mean += x / static_cast<double>(times.size());
    for (double x : times)
        var += (x - mean) * (x - mean) / static_cast<double>(times.size() - 1);
    const double se = std::sqrt(var / static_cast<double>(times.size()));
    EXPECT_NEAR(diameter(m), best_pair, 1e-7);
    EXPECT_LT(std::abs(mean - diameter(m)), 3.0 * se);
}

TEST(NonDegenerate, Figure2) {
    const auto left = non_degenerate(build({EnvKind::figure2_left}).mdp);
    EXPECT_FALSE(left.flag);
    EXPECT_NE(left.report.find("3 Bellman-optimal policies"), std::string::npos) << left.report;
    EXPECT_TRUE(non_degenerate(fig2_right()).flag);
}

TEST(NonDegenerate, PerturbedFigure2LeftBecomesNonDegenerate) {
    const Mdp left = build({EnvKind::figure2_left}).mdp;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> noise(0.0, 1e-3);
        std::vector<double> r(left.rewards().begin(), left.rewards().end());
        for (auto& x : r)
            x += noise(rng);
        ASSERT_TRUE(non_degenerate(left.with_rewards(r)).flag) << "seed " << seed;
    }
}

TEST(OptimalSolve, PolishedValuesAreExact) {
    // Switch 1 -> 2 then loop at 2.
    const Mdp m({2, 2}, {0.49, 0.09, 0.51, 0.08}, {{1, 0}, {0, 1}, {0, 1}, {1, 0}});
    const auto sol = optimal_solve(m);
    EXPECT_NEAR(sol.optimal_gain(), 0.51, 1e-15);
    EXPECT_NEAR(sol.gaps[0], 0.02, 1e-14);
    EXPECT_NEAR(sol.gaps[3], 0.85, 1e-14);
    const std::vector<double> u{0.0, 0.42};
    EXPECT_EQ(detail::greedy_policy(m, u), (Policy{{1, 0}}));
}
