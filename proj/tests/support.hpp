#pragma once

// Fixtures shared by the unit tests and the acceptance binary.

#include "regretlab/envs.hpp"
#include "regretlab/confidence.hpp"
#include "regretlab/learner.hpp"
#include "regretlab/planning.hpp"

#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace support {

using namespace regretlab;

/**
 * Statistics in which pair z was seen n times with empirical means equal to
 * m's, up to rounding n * p to integers. Steps are fed in pair order.
 */
inline VisitStats exact_counts(const Mdp& m, std::uint64_t n) {
    VisitStats stats(m.layout());
    for (PairId z = 0; z < m.n_pairs(); ++z) {
        const auto ones = static_cast<std::uint64_t>(std::llround(m.reward(z) * static_cast<double>(n)));
        std::uint64_t fed = 0;
        auto p = m.row(z);
        for (StateId s = 0; s < m.n_states(); ++s) {
            auto c = static_cast<std::uint64_t>(std::llround(p[s] * static_cast<double>(n)));
            for (; c > 0 && fed < n; --c, ++fed)
                stats.update(z, fed < ones ? 1 : 0, s);
        }
    }
    return stats;
}

enum class Part { whole, kernel };

/**
 * One simulation of uniformly random actions from state 0: true iff m left
 * the region at some t <= horizon. Between updates only the updated pair can
 * leave, since every radius grows with t. Part::kernel ignores rewards.
 */
inline bool coverage_violated(const Mdp& m, const RegionSpec& spec, std::uint64_t seed, std::uint64_t horizon,
                              Part part = Part::whole) {
    const Simulator sim(seed);
    const CounterStream actions(seed, streams::actions);
    VisitStats stats(m.layout());
    StateId s = 0;
    for (std::uint64_t t = 1; t <= horizon; ++t) {
        const auto a = static_cast<ActionId>(actions.uniform(t) * static_cast<double>(m.n_actions(s)));
        const PairId z = m.pair(s, a);
        const Transition tr = sim(m, z, t);
        stats.update(z, tr.reward, tr.next);
        const double r = part == Part::whole ? m.reward(z) : stats.r_hat(z);
        if (t < horizon && !pair_contains(spec, stats, z, r, m.row(z)))
            return true;
        s = tr.next;
    }
    return false;
}

/// Ceiling on the episode count after T steps for the rule.
inline double episode_ceiling(const EpisodeRule& rule, std::size_t n_pairs, std::uint64_t horizon) {
    const double z = static_cast<double>(n_pairs), t = static_cast<double>(horizon);
    if (rule.kind == RuleKind::DT)
        return z * std::log2(8.0 * t / z) + z;
    return z * std::log((2.0 * t + 64.0) / z) / std::log1p(rule.f(t));
}

/// Prefixes T of the trace whose episode count exceeds the ceiling.
inline std::size_t episode_bound_violations(const RunTrace& trace, const EpisodeRule& rule) {
    std::size_t bad = 0;
    for (std::uint64_t t = 1; t <= trace.horizon(); ++t)
        if (static_cast<double>(trace.steps[t - 1].episode + 1) > episode_ceiling(rule, trace.layout.n_pairs(), t))
            ++bad;
    return bad;
}

/// Checks a confusing-set witness against the definition, without the library's own checker.
inline std::string check_witness(const Mdp& m, const Mdp& w, const SolveResult& solved) {
    for (PairId z = 0; z < m.n_pairs(); ++z) {
        if (!(w.reward(z) > 0.0 && w.reward(z) < 1.0))
            return "reward outside (0,1) at " + std::to_string(z);
        for (StateId s = 0; s < m.n_states(); ++s)
            if (m.row(z)[s] > 0.0 && !(w.row(z)[s] > 0.0))
                return "support lost at " + std::to_string(z);
    }
    for (PairId z : solved.optimal_pairs) {
        if (w.reward(z) != m.reward(z))
            return "optimal reward moved at " + std::to_string(z);
        for (StateId s = 0; s < m.n_states(); ++s)
            if (w.row(z)[s] != m.row(z)[s])
                return "optimal row moved at " + std::to_string(z);
    }
    const auto ours = oracle::optimal_policies(m);
    for (const Policy& pi : oracle::optimal_policies(w))
        if (std::find(ours.begin(), ours.end(), pi) != ours.end())
            return "shared optimal policy";
    return {};
}

} // namespace support
