#pragma once

// Static classification of instances: interiority, confusing-set emptiness
// (hence explorativity) and the gain-deviation inequality.

#include "regretlab/confidence.hpp"
#include "regretlab/planning.hpp"

#include <optional>

namespace regretlab {

/// Rewards strictly inside (0,1) and their ambient interval; ambient supports equal the true supports.
inline bool interior_check(const Mdp& m, const AmbientSet& ambient) {
    ambient.validate(m.layout());
    for (PairId z = 0; z < m.n_pairs(); ++z) {
        const double r = m.reward(z);
        const auto [lo, hi] = ambient.reward_bounds[z];
        if (!(r > 0.0 && r < 1.0 && r > lo && r < hi))
            return false;
        auto p = m.row(z);
        for (StateId s = 0; s < m.n_states(); ++s)
            if ((p[s] > 0.0) != (ambient.support[z][s] != 0))
                return false;
    }
    return true;
}

/// Gain-optimal policies found by enumeration: g^pi(s) >= max_sigma g^sigma(s) - tol everywhere.
inline std::vector<Policy> optimal_policy_set(const Mdp& m, double tol = 1e-9) {
    if (policy_count(m.layout(), detail::enumeration_cap + 1) > detail::enumeration_cap)
        throw PreconditionError("policy space too large to enumerate");
    std::vector<Policy> all;
    std::vector<std::vector<double>> gains;
    std::vector<double> best(m.n_states(), -infinity);
    for_each_policy(all_actions(m.layout()), [&](const Policy& pi) {
        all.push_back(pi);
        gains.push_back(policy_eval(m, pi).gain);
        for (StateId s = 0; s < m.n_states(); ++s)
            best[s] = std::max(best[s], gains.back()[s]);
    });
    std::vector<Policy> out;
    for (std::size_t i = 0; i < all.size(); ++i) {
        bool ok = true;
        for (StateId s = 0; s < m.n_states() && ok; ++s)
            ok = gains[i][s] >= best[s] - tol;
        if (ok)
            out.push_back(all[i]);
    }
    return out;
}

enum class ConfusingVerdict { empty, non_empty, inconclusive };

inline const char* verdict_name(ConfusingVerdict v) {
    switch (v) {
    case ConfusingVerdict::empty: return "empty";
    case ConfusingVerdict::non_empty: return "non_empty";
    case ConfusingVerdict::inconclusive: return "inconclusive";
    }
    return "?";
}

struct ConfusingSetResult {
    ConfusingVerdict verdict = ConfusingVerdict::empty;
    std::optional<Mdp> witness;
    /// Policy whose gain the witness raises above g*.
    std::optional<Policy> witness_policy;
    double witness_gain = 0.0;
    /// Largest supremum gain over candidate policies (g* when there is none).
    double best_sup_gain = 0.0;
    std::size_t candidates_checked = 0;

    bool empty() const noexcept { return verdict == ConfusingVerdict::empty; }
};

/// Why a witness candidate is rejected; empty string when it is valid.
inline std::string witness_defect(const Mdp& m, const Mdp& witness, const AmbientSet& ambient,
                                  const SolveResult& solved) {
    for (PairId z = 0; z < m.n_pairs(); ++z) {
        const double r = m.reward(z), rw = witness.reward(z);
        if ((r > 0.0 && !(rw > 0.0)) || (r < 1.0 && !(rw < 1.0)))
            return "reward of pair " + std::to_string(z) + " breaks absolute continuity";
        auto p = m.row(z), pw = witness.row(z);
        for (StateId s = 0; s < m.n_states(); ++s)
            if (p[s] > 0.0 && !(pw[s] > 0.0))
                return "kernel of pair " + std::to_string(z) + " breaks absolute continuity";
        if (!ambient.contains(z, rw, pw))
            return "pair " + std::to_string(z) + " leaves the ambient set";
    }
    for (PairId z : solved.optimal_pairs) {
        if (std::abs(m.reward(z) - witness.reward(z)) > 1e-12)
            return "reward of optimal pair " + std::to_string(z) + " changed";
        auto p = m.row(z), pw = witness.row(z);
        for (StateId s = 0; s < m.n_states(); ++s)
            if (std::abs(p[s] - pw[s]) > 1e-12)
                return "kernel of optimal pair " + std::to_string(z) + " changed";
    }
    const auto ours = optimal_policy_set(m);
    for (const Policy& pi : optimal_policy_set(witness))
        if (std::find(ours.begin(), ours.end(), pi) != ours.end())
            return "optimal policy " + describe_policy(pi) + " is shared";
    return {};
}

namespace detail {

inline std::vector<double> unit_row(std::size_t n, StateId s) {
    std::vector<double> row(n, 0.0);
    row[s] = 1.0;
    return row;
}

/// Option of a state in the policy-restricted choice model.
struct Choice {
    double reward;
    std::vector<double> row;
};

/// Per-state gain of the best choice sequence, by multichain value iteration on (B + Id)/2.
inline std::vector<double> choice_gain(const std::vector<std::vector<Choice>>& options, std::vector<double>& u_out,
                                       std::size_t max_iters = 2'000'000) {
    const std::size_t n = options.size();
    std::vector<double> u(n, 0.0), next(n), d(n, 0.0), d_prev(n, infinity);
    for (std::size_t it = 0; it < max_iters; ++it) {
        for (StateId s = 0; s < n; ++s) {
            double best = -infinity;
            for (const Choice& c : options[s])
                best = std::max(best, c.reward + dot(c.row, u));
            next[s] = 0.5 * (best + u[s]);
        }
        double change = 0.0, base = infinity;
        for (StateId s = 0; s < n; ++s) {
            d[s] = next[s] - u[s];
            change = std::max(change, std::abs(d[s] - d_prev[s]));
            base = std::min(base, next[s]);
        }
        for (StateId s = 0; s < n; ++s)
            u[s] = next[s] - base;
        if (change < 1e-14)
            break;
        d_prev = d;
    }
    u_out = u;
    std::vector<double> g(n);
    for (StateId s = 0; s < n; ++s)
        g[s] = 2.0 * d[s];
    return g;
}

} // namespace detail

/**
 * Decides whether the confusing set of a non-degenerate m is empty.
 *
 * For every policy not built solely from optimal pairs, the supremum of its
 * gain over ambient models that agree with m on the optimal pairs is a
 * deterministic choice problem: free pairs take their top reward and any
 * allowed next state. A policy beating g* by more than `tol` yields a witness
 * (top rows blended with m at weight 1e-6), which must pass witness_defect();
 * if no improving policy validates, the verdict is inconclusive.
 */
inline ConfusingSetResult confusing_set_empty(const Mdp& m, const AmbientSet& ambient, double tol = 1e-7) {
    ambient.validate(m.layout());
    if (!ambient.contains(m))
        throw PreconditionError("model lies outside its ambient set");
    const SolveResult solved = optimal_solve(m);
    if (!(solved.bellman_policy_count == 1 && solved.unichain_flag))
        throw PreconditionError("confusing-set test needs a non-degenerate model");
    if (policy_count(m.layout(), detail::enumeration_cap + 1) > detail::enumeration_cap)
        throw PreconditionError("policy space too large to enumerate");

    const std::size_t ns = m.n_states();
    const double g_star = solved.optimal_gain();
    constexpr double blend = 1e-6;

    struct Candidate {
        Policy pi;
        double gain;
        StateId state;
        std::vector<std::size_t> pick;
    };
    std::vector<Candidate> improving;
    ConfusingSetResult out;
    out.best_sup_gain = g_star;

    for_each_policy(all_actions(m.layout()), [&](const Policy& pi) {
        bool inside = true;
        for (StateId s = 0; s < ns && inside; ++s)
            inside = solved.is_optimal_pair(m.pair(s, pi(s)));
        if (inside)
            return;
        ++out.candidates_checked;
        std::vector<std::vector<detail::Choice>> options(ns);
        for (StateId s = 0; s < ns; ++s) {
            const PairId z = m.pair(s, pi(s));
            if (solved.is_optimal_pair(z)) {
                options[s].push_back({m.reward(z), {m.row(z).begin(), m.row(z).end()}});
                continue;
            }
            for (StateId s2 = 0; s2 < ns; ++s2)
                if (ambient.support[z][s2])
                    options[s].push_back({ambient.reward_bounds[z].second, detail::unit_row(ns, s2)});
        }
        std::vector<double> u;
        const std::vector<double> g = detail::choice_gain(options, u);
        const auto best = static_cast<StateId>(std::max_element(g.begin(), g.end()) - g.begin());
        out.best_sup_gain = std::max(out.best_sup_gain, g[best]);
        if (g[best] <= g_star + tol)
            return;
        // Lexicographic argmax: gain of the successor first, then its bias.
        std::vector<std::size_t> pick(ns, 0);
        for (StateId s = 0; s < ns; ++s) {
            double bg = -infinity, bu = -infinity;
            for (std::size_t i = 0; i < options[s].size(); ++i) {
                const auto& c = options[s][i];
                const double cg = detail::dot(c.row, g), cu = c.reward + detail::dot(c.row, u);
                if (cg > bg + 1e-9 || (cg > bg - 1e-9 && cu > bu)) {
                    bg = std::max(bg, cg);
                    bu = cu;
                    pick[s] = i;
                }
            }
        }
        improving.push_back({pi, g[best], best, std::move(pick)});
    });

    if (improving.empty())
        return out;
    std::stable_sort(improving.begin(), improving.end(),
                     [](const Candidate& a, const Candidate& b) { return a.gain > b.gain; });

    for (const Candidate& c : improving) {
        // Modify only the free pairs reachable from the improved state under the chosen rows.
        std::vector<char> seen(ns, 0);
        std::vector<StateId> stack{c.state};
        seen[c.state] = 1;
        std::vector<double> rewards(m.rewards().begin(), m.rewards().end());
        std::vector<double> kernel(m.kernel().begin(), m.kernel().end());
        while (!stack.empty()) {
            const StateId s = stack.back();
            stack.pop_back();
            const PairId z = m.pair(s, c.pi(s));
            std::vector<double> row(m.row(z).begin(), m.row(z).end());
            if (!solved.is_optimal_pair(z)) {
                std::size_t k = 0, chosen = 0;
                for (StateId s2 = 0; s2 < ns; ++s2)
                    if (ambient.support[z][s2] && k++ == c.pick[s])
                        chosen = s2;
                rewards[z] = (1.0 - blend) * ambient.reward_bounds[z].second + blend * m.reward(z);
                for (StateId s2 = 0; s2 < ns; ++s2) {
                    row[s2] = blend * m.row(z)[s2] + (s2 == chosen ? 1.0 - blend : 0.0);
                    kernel[z * ns + s2] = row[s2];
                }
            }
            for (StateId s2 = 0; s2 < ns; ++s2)
                if (row[s2] > 0.0 && !seen[s2]) {
                    seen[s2] = 1;
                    stack.push_back(s2);
                }
        }
        Mdp witness(m.layout(), std::move(rewards), std::move(kernel), Validation::stochastic_only);
        if (witness_defect(m, witness, ambient, solved).empty()) {
            out.verdict = ConfusingVerdict::non_empty;
            out.witness_policy = c.pi;
            out.witness_gain = policy_eval(witness, c.pi).gain[c.state];
            out.witness.emplace(std::move(witness));
            return out;
        }
    }
    out.verdict = ConfusingVerdict::inconclusive;
    return out;
}

struct GainDeviation {
    double lhs;
    double rhs;
    bool holds;
};

/**
 * ||g^pi(m2) - g^pi(m)||_inf against
 * max_s |dr(s,pi(s))| + span(h^pi(m))/2 ||dp(s,pi(s))||_1, h the Cesaro bias.
 */
inline GainDeviation gain_deviation_bound(const Mdp& m, const Mdp& m2, const Policy& pi) {
    if (!(m.layout() == m2.layout()))
        throw PreconditionError("models have different shapes");
    const PolicyValue v = policy_eval(m, pi, BiasGauge::cesaro);
    if (detail::span(v.gain) > 1e-9)
        throw PreconditionError("policy gain is not constant on the reference model");
    const PolicyValue v2 = policy_eval(m2, pi);
    GainDeviation out{0.0, 0.0, false};
    for (StateId s = 0; s < m.n_states(); ++s)
        out.lhs = std::max(out.lhs, std::abs(v2.gain[s] - v.gain[s]));
    const double half_span = 0.5 * detail::span(v.bias);
    for (StateId s = 0; s < m.n_states(); ++s) {
        const PairId z = m.pair(s, pi(s));
        double l1 = 0.0;
        for (StateId s2 = 0; s2 < m.n_states(); ++s2)
            l1 += std::abs(m2.row(z)[s2] - m.row(z)[s2]);
        out.rhs = std::max(out.rhs, std::abs(m2.reward(z) - m.reward(z)) + half_span * l1);
    }
    out.holds = out.lhs <= out.rhs + 1e-9;
    return out;
}

struct ClassificationReport {
    bool non_degenerate = false;
    std::string degeneracy_report;
    bool interior = false;
    /// Set only for non-degenerate models.
    std::optional<ConfusingSetResult> confusing;
    double optimal_gain = 0.0;
    double diameter = 0.0;

    std::optional<bool> confusing_set_empty() const {
        if (!confusing || confusing->verdict == ConfusingVerdict::inconclusive)
            return std::nullopt;
        return confusing->empty();
    }
    std::optional<bool> explorative() const {
        auto e = confusing_set_empty();
        if (!e)
            return std::nullopt;
        return !*e;
    }
};

inline ClassificationReport classify(const Mdp& m, const AmbientSet& ambient, double tol = 1e-7) {
    ClassificationReport r;
    const NonDegeneracy nd = non_degenerate(m);
    r.non_degenerate = nd.flag;
    r.degeneracy_report = nd.report;
    r.interior = interior_check(m, ambient);
    r.optimal_gain = optimal_solve(m).optimal_gain();
    r.diameter = diameter(m);
    if (r.non_degenerate)
        r.confusing = confusing_set_empty(m, ambient, tol);
    return r;
}

} // namespace regretlab
