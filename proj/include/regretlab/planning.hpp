#pragma once

// Exact planning on known MDPs: policy evaluation, optimal gain/bias,
// Bellman gaps, diameter, recurrence structure and non-degeneracy.

#include "regretlab/mdp.hpp"

#include <Eigen/Dense>

#include <limits>
#include <optional>
#include <sstream>

namespace regretlab {

/// Recurrent-class decomposition of the Markov chain induced by a policy.
struct ChainStructure {
    /// Closed communicating classes, each sorted; classes ordered by lowest state.
    std::vector<std::vector<StateId>> recurrent_classes;
    /// Class index of each state, -1 for transient states.
    std::vector<int> class_of;

    bool unichain() const noexcept { return recurrent_classes.size() == 1; }
    bool is_recurrent(StateId s) const { return class_of[s] >= 0; }
};

namespace detail {

inline std::vector<std::vector<char>> reachability(const Mdp& m, const Policy& pi) {
    const std::size_t n = m.n_states();
    std::vector<std::vector<char>> reach(n, std::vector<char>(n, 0));
    std::vector<StateId> stack;
    for (StateId s0 = 0; s0 < n; ++s0) {
        auto& seen = reach[s0];
        seen[s0] = 1;
        stack.assign(1, s0);
        while (!stack.empty()) {
            StateId s = stack.back();
            stack.pop_back();
            auto p = m.row(m.pair(s, pi(s)));
            for (StateId s2 = 0; s2 < n; ++s2)
                if (p[s2] > 0.0 && !seen[s2]) {
                    seen[s2] = 1;
                    stack.push_back(s2);
                }
        }
    }
    return reach;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        acc += a[i] * b[i];
    return acc;
}

inline double span(std::span<const double> v) {
    auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return *hi - *lo;
}

} // namespace detail

inline ChainStructure chain_structure(const Mdp& m, const Policy& pi) {
    validate_policy(m.layout(), pi);
    const std::size_t n = m.n_states();
    const auto reach = detail::reachability(m, pi);
    ChainStructure out;
    out.class_of.assign(n, -1);
    for (StateId s = 0; s < n; ++s) {
        if (out.class_of[s] >= 0)
            continue;
        bool recurrent = true;
        for (StateId s2 = 0; s2 < n && recurrent; ++s2)
            if (reach[s][s2] && !reach[s2][s])
                recurrent = false;
        if (!recurrent)
            continue;
        const int id = static_cast<int>(out.recurrent_classes.size());
        std::vector<StateId> cls;
        for (StateId s2 = 0; s2 < n; ++s2)
            if (reach[s][s2]) {
                cls.push_back(s2);
                out.class_of[s2] = id;
            }
        out.recurrent_classes.push_back(std::move(cls));
    }
    return out;
}

/// Pairs (s, pi(s)) for every s reachable from s0 under pi, sorted by pair id.
inline std::vector<PairId> reach_set(const Mdp& m, const Policy& pi, StateId s0) {
    validate_policy(m.layout(), pi);
    const std::size_t n = m.n_states();
    std::vector<char> seen(n, 0);
    std::vector<StateId> stack{s0};
    seen[s0] = 1;
    while (!stack.empty()) {
        StateId s = stack.back();
        stack.pop_back();
        auto p = m.row(m.pair(s, pi(s)));
        for (StateId s2 = 0; s2 < n; ++s2)
            if (p[s2] > 0.0 && !seen[s2]) {
                seen[s2] = 1;
                stack.push_back(s2);
            }
    }
    std::vector<PairId> pairs;
    for (StateId s = 0; s < n; ++s)
        if (seen[s])
            pairs.push_back(m.pair(s, pi(s)));
    return pairs;
}

/// Normalization of the bias vector of a policy.
enum class BiasGauge {
    /// h = 0 at the lowest-index state of each recurrent class.
    lowest_recurrent_zero,
    /// Cesaro-limit bias: stationary mean of h is zero on every recurrent class.
    cesaro,
};

struct PolicyValue {
    std::vector<double> gain;
    std::vector<double> bias;
    ChainStructure chain;
};

/**
 * Exact gain and bias of a deterministic policy.
 *
 * Handles multichain policies: every recurrent class gets its own gain from
 * its stationary distribution, transient states get the absorption-weighted
 * gain. The returned pair solves g = P g and g + h = r + P h.
 */
inline PolicyValue policy_eval(const Mdp& m, const Policy& pi,
                               BiasGauge gauge = BiasGauge::lowest_recurrent_zero) {
    using Eigen::MatrixXd;
    using Eigen::VectorXd;

    PolicyValue out;
    out.chain = chain_structure(m, pi);
    const std::size_t n = m.n_states();
    out.gain.assign(n, 0.0);
    out.bias.assign(n, 0.0);

    auto prob = [&](StateId s, StateId s2) { return m.row(m.pair(s, pi(s)))[s2]; };
    auto rew = [&](StateId s) { return m.reward(m.pair(s, pi(s))); };

    for (const auto& cls : out.chain.recurrent_classes) {
        const auto k = static_cast<Eigen::Index>(cls.size());
        // Stationary distribution: mu (I - P) = 0, sum mu = 1.
        MatrixXd a(k, k);
        for (Eigen::Index i = 0; i < k; ++i)
            for (Eigen::Index j = 0; j < k; ++j)
                a(j, i) = (i == j ? 1.0 : 0.0) - prob(cls[i], cls[j]);
        a.row(k - 1).setOnes();
        VectorXd rhs = VectorXd::Zero(k);
        rhs(k - 1) = 1.0;
        Eigen::FullPivLU<MatrixXd> lu_mu(a);
        if (!lu_mu.isInvertible())
            throw InternalError("singular stationary system in policy evaluation");
        VectorXd mu = lu_mu.solve(rhs);
        double g = 0.0;
        for (Eigen::Index i = 0; i < k; ++i)
            g += mu(i) * rew(cls[i]);

        // (I - P) h = r - g with h(first state of the class) = 0.
        MatrixXd b(k, k);
        VectorXd c(k);
        for (Eigen::Index i = 0; i < k; ++i) {
            for (Eigen::Index j = 0; j < k; ++j)
                b(i, j) = (i == j ? 1.0 : 0.0) - prob(cls[i], cls[j]);
            c(i) = rew(cls[i]) - g;
        }
        b.row(0).setZero();
        b(0, 0) = 1.0;
        c(0) = 0.0;
        Eigen::FullPivLU<MatrixXd> lu_h(b);
        if (!lu_h.isInvertible())
            throw InternalError("singular Poisson system in policy evaluation");
        VectorXd h = lu_h.solve(c);
        if (gauge == BiasGauge::cesaro)
            h.array() -= mu.dot(h);
        for (Eigen::Index i = 0; i < k; ++i) {
            out.gain[cls[i]] = g;
            out.bias[cls[i]] = h(i);
        }
    }

    std::vector<StateId> transient;
    for (StateId s = 0; s < n; ++s)
        if (!out.chain.is_recurrent(s))
            transient.push_back(s);
    if (!transient.empty()) {
        const auto k = static_cast<Eigen::Index>(transient.size());
        MatrixXd a(k, k);
        VectorXd pg(k);
        for (Eigen::Index i = 0; i < k; ++i) {
            for (Eigen::Index j = 0; j < k; ++j)
                a(i, j) = (i == j ? 1.0 : 0.0) - prob(transient[i], transient[j]);
            double acc = 0.0;
            for (StateId s2 = 0; s2 < n; ++s2)
                if (out.chain.is_recurrent(s2))
                    acc += prob(transient[i], s2) * out.gain[s2];
            pg(i) = acc;
        }
        Eigen::FullPivLU<MatrixXd> lu(a);
        if (!lu.isInvertible())
            throw InternalError("singular transient system in policy evaluation");
        VectorXd gt = lu.solve(pg);
        VectorXd rhs(k);
        for (Eigen::Index i = 0; i < k; ++i) {
            double acc = rew(transient[i]) - gt(i);
            for (StateId s2 = 0; s2 < n; ++s2)
                if (out.chain.is_recurrent(s2))
                    acc += prob(transient[i], s2) * out.bias[s2];
            rhs(i) = acc;
        }
        VectorXd ht = lu.solve(rhs);
        for (Eigen::Index i = 0; i < k; ++i) {
            out.gain[transient[i]] = gt(i);
            out.bias[transient[i]] = ht(i);
        }
    }
    return out;
}

/// max_s |r(s,pi(s)) + p(s,pi(s)).h - g(s) - h(s)|
inline double poisson_residual(const Mdp& m, const Policy& pi, const PolicyValue& v) {
    double worst = 0.0;
    for (StateId s = 0; s < m.n_states(); ++s) {
        const PairId z = m.pair(s, pi(s));
        worst = std::max(worst, std::abs(m.reward(z) + m.expect(z, v.bias) - v.gain[s] - v.bias[s]));
    }
    return worst;
}

struct SolveResult {
    std::vector<double> gain;
    std::vector<double> bias;
    std::vector<double> gaps;
    std::vector<PairId> weak_optimal_pairs;
    std::vector<PairId> optimal_pairs;
    std::size_t bellman_policy_count = 0;
    /// Every Bellman-optimal policy is unichain.
    bool unichain_flag = false;
    std::vector<Policy> bellman_policies;
    /// Threshold used for weak optimality, 1e-9 (1 + span(h*)).
    double weak_tol = 0.0;
    std::size_t iterations = 0;

    double optimal_gain() const { return gain.front(); }
    bool is_weak_optimal(PairId z) const {
        return std::binary_search(weak_optimal_pairs.begin(), weak_optimal_pairs.end(), z);
    }
    bool is_optimal_pair(PairId z) const {
        return std::binary_search(optimal_pairs.begin(), optimal_pairs.end(), z);
    }
};

namespace detail {

/// Policies are enumerated exhaustively up to this many.
inline constexpr std::size_t enumeration_cap = 1U << 16;

/// Residual of g + h(s) = max_a { r + p.h } for a scalar gain.
inline double optimality_residual(const Mdp& m, double g, std::span<const double> h) {
    double worst = 0.0;
    for (StateId s = 0; s < m.n_states(); ++s) {
        double best = -std::numeric_limits<double>::infinity();
        for (ActionId a = 0; a < m.n_actions(s); ++a) {
            const PairId z = m.pair(s, a);
            best = std::max(best, m.reward(z) + m.expect(z, h));
        }
        worst = std::max(worst, std::abs(best - g - h[s]));
    }
    return worst;
}

inline Policy greedy_policy(const Mdp& m, std::span<const double> u, double tie_tol = 1e-11) {
    Policy pi;
    pi.choice.resize(m.n_states());
    for (StateId s = 0; s < m.n_states(); ++s) {
        double best = -std::numeric_limits<double>::infinity();
        ActionId arg = 0;
        for (ActionId a = 0; a < m.n_actions(s); ++a) {
            const PairId z = m.pair(s, a);
            const double q = m.reward(z) + m.expect(z, u);
            if (a == 0 || q > best + tie_tol * (1.0 + std::abs(best))) {
                best = q;
                arg = a;
            }
        }
        pi.choice[s] = arg;
    }
    return pi;
}

/// Both first- and second-order optimality equations, with the Cesaro bias.
inline bool is_bellman_optimal(const Mdp& m, const Policy& pi, double g_star, PolicyValue* value_out) {
    PolicyValue v = policy_eval(m, pi, BiasGauge::cesaro);
    for (double g : v.gain)
        if (std::abs(g - g_star) > 1e-7 * (1.0 + std::abs(g_star)))
            return false;
    const double tol = 1e-9 * (1.0 + span(v.bias));
    for (StateId s = 0; s < m.n_states(); ++s) {
        double first = -std::numeric_limits<double>::infinity();
        double second = -std::numeric_limits<double>::infinity();
        for (ActionId a = 0; a < m.n_actions(s); ++a) {
            const PairId z = m.pair(s, a);
            first = std::max(first, m.expect(z, v.gain));
            second = std::max(second, m.reward(z) + m.expect(z, v.bias));
        }
        if (std::abs(v.gain[s] - first) > tol || std::abs(v.gain[s] + v.bias[s] - second) > tol)
            return false;
    }
    if (value_out)
        *value_out = std::move(v);
    return true;
}

/**
 * Multichain policy iteration from `pi`: improve on P g first, then on
 * r + P h among the gain-maximizing actions. The current action is kept
 * unless another one is better by more than a relative 1e-12.
 */
inline std::optional<Policy> policy_iteration(const Mdp& m, Policy pi, std::size_t max_rounds = 10'000) {
    for (std::size_t round = 0; round < max_rounds; ++round) {
        const PolicyValue v = policy_eval(m, pi, BiasGauge::cesaro);
        const double eps = 1e-12 * (1.0 + span(v.bias));
        bool changed = false;
        Policy next = pi;
        for (StateId s = 0; s < m.n_states(); ++s) {
            const PairId cur = m.pair(s, pi(s));
            double best_pg = m.expect(cur, v.gain);
            for (ActionId a = 0; a < m.n_actions(s); ++a)
                best_pg = std::max(best_pg, m.expect(m.pair(s, a), v.gain));
            if (best_pg > m.expect(cur, v.gain) + eps) {
                for (ActionId a = 0; a < m.n_actions(s); ++a)
                    if (m.expect(m.pair(s, a), v.gain) >= best_pg) {
                        next.choice[s] = a;
                        break;
                    }
                changed = true;
            }
        }
        if (!changed) {
            for (StateId s = 0; s < m.n_states(); ++s) {
                const PairId cur = m.pair(s, pi(s));
                const double pg = m.expect(cur, v.gain);
                const double cur_q = m.reward(cur) + m.expect(cur, v.bias);
                double best = cur_q;
                ActionId arg = pi(s);
                for (ActionId a = 0; a < m.n_actions(s); ++a) {
                    const PairId z = m.pair(s, a);
                    if (m.expect(z, v.gain) < pg - eps)
                        continue;
                    const double q = m.reward(z) + m.expect(z, v.bias);
                    if (q > best + eps) {
                        best = q;
                        arg = a;
                    }
                }
                if (arg != pi(s)) {
                    next.choice[s] = arg;
                    changed = true;
                }
            }
        }
        if (!changed)
            return pi;
        pi = std::move(next);
    }
    return std::nullopt;
}

} // namespace detail

/**
 * Optimal gain, bias and Bellman gaps of a communicating MDP.
 *
 * Runs relative value iteration on (B + Id)/2 until span(u_{n+1} - u_n) < tol,
 * then polishes the estimate with an exact evaluation of the greedy policy
 * whenever that evaluation satisfies the optimality equation. If max_iters
 * runs out first, multichain policy iteration seeded with the greedy policy
 * finishes the job; ConvergenceError only when that fails as well.
 */
inline SolveResult optimal_solve(const Mdp& m, double tol = 1e-10, std::size_t max_iters = 1'000'000) {
    if (!(tol > 0.0))
        throw PreconditionError("optimal_solve: tol must be positive");
    const std::size_t n = m.n_states();
    std::vector<double> u(n, 0.0), bu(n, 0.0);
    double g_est = 0.0;
    double last_span = std::numeric_limits<double>::infinity();
    std::size_t it = 0;
    for (; it < max_iters; ++it) {
        for (StateId s = 0; s < n; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            for (ActionId a = 0; a < m.n_actions(s); ++a) {
                const PairId z = m.pair(s, a);
                best = std::max(best, m.reward(z) + m.expect(z, u));
            }
            bu[s] = best;
        }
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (StateId s = 0; s < n; ++s) {
            const double d = bu[s] - u[s];
            lo = std::min(lo, d);
            hi = std::max(hi, d);
        }
        g_est = 0.5 * (lo + hi);
        last_span = 0.5 * (hi - lo);
        if (last_span < tol)
            break;
        double base = std::numeric_limits<double>::infinity();
        for (StateId s = 0; s < n; ++s) {
            u[s] = 0.5 * (u[s] + bu[s]);
            base = std::min(base, u[s]);
        }
        for (double& x : u)
            x -= base;
    }
    SolveResult out;
    out.iterations = it + 1;
    double g = g_est;
    std::vector<double> h = u;

    Policy greedy = detail::greedy_policy(m, u);
    if (it == max_iters) {
        // Near-ties between policies make value iteration crawl; finish exactly.
        auto pi = detail::policy_iteration(m, greedy);
        if (!pi)
            throw ConvergenceError("relative value iteration did not converge", last_span, it);
        PolicyValue v = policy_eval(m, *pi);
        if (detail::span(v.gain) > 1e-9)
            throw ConvergenceError("relative value iteration did not converge", last_span, it);
        out.iterations = it;
        g = v.gain[0];
        h = v.bias;
        greedy = *pi;
        g_est = g;
    }

    // Polish with the exact evaluation of the greedy policy.
    for (BiasGauge gauge : {BiasGauge::lowest_recurrent_zero, BiasGauge::cesaro}) {
        PolicyValue v = policy_eval(m, greedy, gauge);
        if (detail::span(v.gain) > 1e-9 || std::abs(v.gain[0] - g_est) > 1e-6)
            break;
        const double g_exact = v.gain[0];
        if (detail::optimality_residual(m, g_exact, v.bias) <= 1e-9) {
            g = g_exact;
            h = std::move(v.bias);
            break;
        }
    }

    out.gain.assign(n, g);
    out.bias = h;
    out.weak_tol = 1e-9 * (1.0 + detail::span(h));
    out.gaps.resize(m.n_pairs());
    for (PairId z = 0; z < m.n_pairs(); ++z) {
        const StateId s = m.layout().state_of(z);
        double gap = g + h[s] - m.reward(z) - m.expect(z, h);
        // Weakly-optimal pairs get an exact zero.
        if (std::abs(gap) <= out.weak_tol) {
            gap = 0.0;
            out.weak_optimal_pairs.push_back(z);
        } else if (gap < 0.0) {
            out.weak_optimal_pairs.push_back(z);
        }
        out.gaps[z] = gap;
    }

    // Optimal pairs: recurrent pairs of gain-optimal policies built from
    // weakly-optimal actions.
    std::vector<std::vector<ActionId>> weak_actions(n);
    for (PairId z : out.weak_optimal_pairs)
        weak_actions[m.layout().state_of(z)].push_back(m.layout().action_of(z));
    std::vector<char> is_opt(m.n_pairs(), 0);
    std::size_t weak_count = 1;
    for (const auto& acts : weak_actions) {
        if (acts.empty())
            throw InternalError("state without weakly-optimal action");
        weak_count = (weak_count > detail::enumeration_cap / acts.size()) ? detail::enumeration_cap + 1
                                                                          : weak_count * acts.size();
    }
    auto collect = [&](const Policy& pi) {
        PolicyValue v = policy_eval(m, pi);
        for (double gs : v.gain)
            if (std::abs(gs - g) > 1e-7 * (1.0 + std::abs(g)))
                return;
        for (StateId s = 0; s < n; ++s)
            if (v.chain.is_recurrent(s))
                is_opt[m.pair(s, pi(s))] = 1;
    };
    if (weak_count <= detail::enumeration_cap) {
        for_each_policy(weak_actions, collect);
    } else {
        Policy pi;
        for (const auto& acts : weak_actions)
            pi.choice.push_back(acts.front());
        collect(pi);
    }
    for (PairId z = 0; z < m.n_pairs(); ++z)
        if (is_opt[z])
            out.optimal_pairs.push_back(z);

    // Bellman-optimal policies. Exhaustive when the policy space is small,
    // otherwise restricted to weakly-optimal actions.
    const auto candidates = policy_count(m.layout(), detail::enumeration_cap + 1) <= detail::enumeration_cap
                                ? all_actions(m.layout())
                                : weak_actions;
    bool all_unichain = true;
    for_each_policy(candidates, [&](const Policy& pi) {
        PolicyValue v;
        if (detail::is_bellman_optimal(m, pi, g, &v)) {
            out.bellman_policies.push_back(pi);
            all_unichain = all_unichain && v.chain.unichain();
        }
    });
    out.bellman_policy_count = out.bellman_policies.size();
    out.unichain_flag = out.bellman_policy_count > 0 && all_unichain;
    return out;
}

/// Gain-optimal policies: g^pi(s) >= g* - tol at every state. Exhaustive up to `cap` policies.
inline std::vector<Policy> gain_optimal_policies(const Mdp& m, double g_star, double tol = 1e-7,
                                                 std::size_t cap = detail::enumeration_cap) {
    if (policy_count(m.layout(), cap + 1) > cap)
        throw PreconditionError("policy space too large to enumerate gain-optimal policies");
    std::vector<Policy> out;
    for_each_policy(all_actions(m.layout()), [&](const Policy& pi) {
        PolicyValue v = policy_eval(m, pi);
        for (double g : v.gain)
            if (g < g_star - tol)
                return;
        out.push_back(pi);
    });
    return out;
}

/**
 * Diameter: max over s != s' of the minimal expected hitting time of s'
 * from s, each target solved by value iteration on the shortest-path
 * equations h(s) = 1 + min_a p(s,a).h, h(s') = 0.
 */
inline double diameter(const Mdp& m, double tol = 1e-12, std::size_t max_iters = 10'000'000) {
    const std::size_t n = m.n_states();
    if (n == 1)
        return 0.0;
    double worst = 0.0;
    std::vector<double> h(n), next(n);
    for (StateId target = 0; target < n; ++target) {
        std::fill(h.begin(), h.end(), 0.0);
        std::size_t it = 0;
        double change = 0.0;
        for (; it < max_iters; ++it) {
            change = 0.0;
            double top = 1.0;
            for (StateId s = 0; s < n; ++s) {
                if (s == target) {
                    next[s] = 0.0;
                    continue;
                }
                double best = std::numeric_limits<double>::infinity();
                for (ActionId a = 0; a < m.n_actions(s); ++a)
                    best = std::min(best, 1.0 + m.expect(m.pair(s, a), h));
                next[s] = best;
                change = std::max(change, std::abs(best - h[s]));
                top = std::max(top, best);
            }
            h.swap(next);
            if (change <= tol * top)
                break;
            if (top > 1e15)
                throw ConvergenceError("hitting times diverge; model is not communicating", change, it);
        }
        if (it == max_iters)
            throw ConvergenceError("hitting-time iteration did not converge", change, it);
        for (StateId s = 0; s < n; ++s)
            if (s != target)
                worst = std::max(worst, h[s]);
    }
    return worst;
}

struct NonDegeneracy {
    bool flag = false;
    std::string report;
};

inline std::string describe_policy(const Policy& pi) {
    std::ostringstream os;
    os << '[';
    for (std::size_t s = 0; s < pi.size(); ++s)
        os << (s ? "," : "") << pi(s);
    os << ']';
    return os.str();
}

/// Unique Bellman-optimal policy, and that policy is unichain.
inline NonDegeneracy non_degenerate(const Mdp& m, double tol = 1e-10) {
    const SolveResult sol = optimal_solve(m, tol);
    NonDegeneracy out;
    out.flag = sol.bellman_policy_count == 1 && sol.unichain_flag;
    std::ostringstream os;
    os << "optimal gain " << sol.optimal_gain() << "; " << sol.bellman_policy_count
       << " Bellman-optimal polic" << (sol.bellman_policy_count == 1 ? "y" : "ies") << '\n';
    for (const Policy& pi : sol.bellman_policies) {
        const ChainStructure chain = chain_structure(m, pi);
        os << "  policy " << describe_policy(pi) << " recurrent classes:";
        for (const auto& cls : chain.recurrent_classes) {
            os << " {";
            for (std::size_t i = 0; i < cls.size(); ++i)
                os << (i ? "," : "") << cls[i];
            os << '}';
        }
        os << '\n';
    }
    os << (out.flag ? "non-degenerate" : "degenerate");
    out.report = os.str();
    return out;
}

} // namespace regretlab
