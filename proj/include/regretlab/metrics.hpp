#pragma once

// Pseudo-regret, exploration episodes, the regret-of-exploration proxy and
// visit-rate regimes.

#include "regretlab/learner.hpp"

#include <map>

namespace regretlab {

/// curve[t - 1] = sum of gaps over steps 1..t.
inline std::vector<double> regret_curve(const RunTrace& trace) {
    std::vector<double> curve(trace.horizon());
    double acc = 0.0;
    for (std::uint64_t t = 1; t <= trace.horizon(); ++t) {
        acc += trace.gap(t);
        curve[t - 1] = acc;
    }
    return curve;
}

/// Per-step gaps of a trace, in step order.
inline std::vector<double> gap_sequence(const RunTrace& trace) {
    std::vector<double> g(trace.horizon());
    for (std::uint64_t t = 1; t <= trace.horizon(); ++t)
        g[t - 1] = trace.gap(t);
    return g;
}

struct ExplorationLog {
    std::vector<std::size_t> episodes;
    std::vector<std::uint64_t> t_starts;
};

/// Episode policy with possibly unknown actions (-1), as rebuilt from visited states.
using PartialPolicy = std::vector<long>;

/// Rebuilds episode policies from the actions played. States never visited in an episode stay unknown.
inline std::vector<PartialPolicy> reconstruct_policies(const PairLayout& layout, std::span<const StepRecord> steps,
                                                       std::size_t n_episodes) {
    std::vector<PartialPolicy> out(n_episodes, PartialPolicy(layout.n_states(), -1));
    for (std::size_t i = 0; i < steps.size(); ++i) {
        const auto& r = steps[i];
        auto& slot = out.at(r.episode)[r.state];
        if (slot >= 0 && static_cast<ActionId>(slot) != r.action)
            throw AnalysisError("episode " + std::to_string(r.episode) + " plays two actions in state " +
                                std::to_string(r.state));
        slot = static_cast<long>(r.action);
    }
    return out;
}

namespace detail {

/// Completes a partial policy on the states reachable from s0, or throws naming the episode.
inline Policy complete_from(const Mdp& m, const PartialPolicy& partial, StateId s0, std::size_t episode) {
    Policy pi;
    pi.choice.assign(m.n_states(), 0);
    std::vector<char> seen(m.n_states(), 0);
    std::vector<StateId> stack{s0};
    seen[s0] = 1;
    while (!stack.empty()) {
        const StateId s = stack.back();
        stack.pop_back();
        if (partial[s] < 0)
            throw AnalysisError("cannot reconstruct the policy of episode " + std::to_string(episode) +
                                ": state " + std::to_string(s) + " is reachable but never visited");
        pi.choice[s] = static_cast<ActionId>(partial[s]);
        auto p = m.row(m.pair(s, pi(s)));
        for (StateId s2 = 0; s2 < m.n_states(); ++s2)
            if (p[s2] > 0.0 && !seen[s2]) {
                seen[s2] = 1;
                stack.push_back(s2);
            }
    }
    return pi;
}

} // namespace detail

/**
 * Flags episode k >= 1 when the previous policy is gain-optimal from the
 * state S_{t_k} and the new policy can reach a pair with positive gap from
 * that state.
 */
inline ExplorationLog detect_exploration_episodes(const Mdp& m, const SolveResult& solved,
                                                  std::span<const std::uint64_t> t_starts,
                                                  std::span<const StateId> start_states,
                                                  const std::vector<PartialPolicy>& policies) {
    ExplorationLog log;
    const double g_star = solved.optimal_gain();
    std::map<std::vector<ActionId>, std::vector<double>> gains;
    auto gain_of = [&](const Policy& pi) -> const std::vector<double>& {
        auto it = gains.find(pi.choice);
        if (it == gains.end())
            it = gains.emplace(pi.choice, policy_eval(m, pi).gain).first;
        return it->second;
    };
    for (std::size_t k = 1; k < t_starts.size(); ++k) {
        const StateId s = start_states[k];
        const Policy prev = detail::complete_from(m, policies[k - 1], s, k - 1);
        if (std::abs(gain_of(prev)[s] - g_star) > 1e-9 * (1.0 + std::abs(g_star)))
            continue;
        const Policy cur = detail::complete_from(m, policies[k], s, k);
        bool reaches_gap = false;
        for (PairId z : reach_set(m, cur, s))
            if (solved.gaps[z] > solved.weak_tol)
                reaches_gap = true;
        if (reaches_gap) {
            log.episodes.push_back(k);
            log.t_starts.push_back(t_starts[k]);
        }
    }
    return log;
}

inline ExplorationLog detect_exploration_episodes(const RunTrace& trace, const Mdp& m, const SolveResult& solved) {
    std::vector<std::uint64_t> t_starts;
    std::vector<StateId> states;
    std::vector<PartialPolicy> policies;
    for (const auto& e : trace.episodes) {
        t_starts.push_back(e.t_start);
        states.push_back(trace.steps[e.t_start - 1].state);
        policies.emplace_back(e.policy.choice.begin(), e.policy.choice.end());
    }
    return detect_exploration_episodes(m, solved, t_starts, states, policies);
}

/// One trace as seen by the proxy: per-step gaps and its exploration times.
struct ProxyInput {
    std::span<const double> gaps;
    std::span<const std::uint64_t> exploration_times;
};

struct ProxyResult {
    /// Average over traces of the per-trace max over exploration times.
    std::vector<double> mean_of_max;
    /// Max over aligned exploration indices of the across-trace mean.
    std::vector<double> max_of_mean;
    /// Traces without an exploration time at or after psi (they contribute zero).
    std::size_t traces_without_times = 0;
};

/**
 * Regret-of-exploration proxy. For offset o in 1..window, the forward regret
 * of exploration time tau is R(tau, tau + o) = sum of gaps over steps
 * tau..tau+o, truncated at the horizon. Traces are fed one at a time.
 */
class ProxyAccumulator {
public:
    ProxyAccumulator(std::uint64_t window, std::uint64_t psi) : window_(window), psi_(psi), best_(window) {
        if (window < 1)
            throw PreconditionError("proxy window must be at least 1");
        sum_best_.assign(window, 0.0);
    }

    void add(const ProxyInput& tr) {
        const std::uint64_t horizon = tr.gaps.size();
        if (psi_ >= horizon)
            throw PreconditionError("psi must be below the horizon");
        prefix_.assign(horizon + 1, 0.0);
        for (std::uint64_t t = 1; t <= horizon; ++t)
            prefix_[t] = prefix_[t - 1] + tr.gaps[t - 1];
        std::fill(best_.begin(), best_.end(), 0.0);
        std::size_t j = 0;
        for (std::uint64_t tau : tr.exploration_times) {
            if (tau < psi_ || tau > horizon)
                continue;
            // sums_[j]: across-trace sum of the j-th exploration curve, kept
            // only for indices every trace seen so far has.
            if (traces_ == 0)
                sums_.emplace_back(window_, 0.0);
            const bool keep = j < sums_.size();
            for (std::uint64_t o = 1; o <= window_; ++o) {
                const double r = prefix_[std::min(tau + o, horizon)] - prefix_[tau - 1];
                best_[o - 1] = std::max(best_[o - 1], r);
                if (keep)
                    sums_[j][o - 1] += r;
            }
            ++j;
        }
        if (j == 0)
            ++without_times_;
        sums_.resize(std::min(sums_.size(), j));
        for (std::uint64_t o = 0; o < window_; ++o)
            sum_best_[o] += best_[o];
        ++traces_;
    }

    std::size_t traces() const noexcept { return traces_; }

    ProxyResult result() const {
        if (traces_ == 0)
            throw PreconditionError("regexp_proxy needs at least one trace");
        const double share = 1.0 / static_cast<double>(traces_);
        ProxyResult out;
        out.traces_without_times = without_times_;
        out.mean_of_max.resize(window_);
        out.max_of_mean.assign(window_, 0.0);
        for (std::uint64_t o = 0; o < window_; ++o)
            out.mean_of_max[o] = sum_best_[o] * share;
        for (const auto& row : sums_)
            for (std::uint64_t o = 0; o < window_; ++o)
                out.max_of_mean[o] = std::max(out.max_of_mean[o], row[o] * share);
        return out;
    }

private:
    std::uint64_t window_, psi_;
    std::vector<double> best_, prefix_, sum_best_;
    std::vector<std::vector<double>> sums_;
    std::size_t traces_ = 0, without_times_ = 0;
};

inline ProxyResult regexp_proxy(std::span<const ProxyInput> traces, std::uint64_t window, std::uint64_t psi) {
    ProxyAccumulator acc(window, psi);
    for (const auto& tr : traces)
        acc.add(tr);
    return acc.result();
}

enum class Regime { linear, logarithmic, ambiguous };

inline const char* regime_name(Regime r) {
    switch (r) {
    case Regime::linear: return "linear";
    case Regime::logarithmic: return "logarithmic";
    case Regime::ambiguous: return "ambiguous";
    }
    return "?";
}

struct PairRegime {
    PairId pair;
    std::uint64_t visits;
    std::uint64_t visits_half;
    double per_log_t;
    double per_t;
    /// log-rate fitted on [T/2, T]: (N(T) - N(T/2)) / ln 2
    double lambda_hat;
    Regime regime;
};

/**
 * Classifies the growth of N_z(t) from the second half of the trace.
 * Linear when the second-half visit rate is at least 1/(50|Z|); otherwise
 * logarithmic when N(T)/ln T <= 50|Z| max(lambda_hat, 1); else ambiguous.
 */
inline std::vector<PairRegime> visit_regime(const PairLayout& layout, std::span<const PairId> pairs) {
    const std::uint64_t horizon = pairs.size();
    if (horizon < 2)
        throw PreconditionError("visit_regime needs at least two steps");
    const std::uint64_t half = horizon / 2;
    const std::size_t nz = layout.n_pairs();
    std::vector<std::uint64_t> n_half(nz, 0), n_full(nz, 0);
    for (std::uint64_t t = 1; t <= horizon; ++t) {
        ++n_full[pairs[t - 1]];
        if (t <= half)
            ++n_half[pairs[t - 1]];
    }
    const double log_t = std::log(static_cast<double>(horizon));
    const double scale = 50.0 * static_cast<double>(nz);
    std::vector<PairRegime> out;
    for (PairId z = 0; z < nz; ++z) {
        PairRegime r{z, n_full[z], n_half[z], static_cast<double>(n_full[z]) / log_t,
                     static_cast<double>(n_full[z]) / static_cast<double>(horizon), 0.0, Regime::ambiguous};
        const double late = static_cast<double>(n_full[z] - n_half[z]);
        r.lambda_hat = late / std::log(2.0);
        if (late / static_cast<double>(horizon - half) >= 1.0 / scale)
            r.regime = Regime::linear;
        else if (r.per_log_t <= scale * std::max(r.lambda_hat, 1.0))
            r.regime = Regime::logarithmic;
        out.push_back(r);
    }
    return out;
}

inline std::vector<PairRegime> visit_regime(const RunTrace& trace) {
    std::vector<PairId> pairs(trace.horizon());
    for (std::uint64_t t = 1; t <= trace.horizon(); ++t)
        pairs[t - 1] = trace.pair(t);
    return visit_regime(trace.layout, pairs);
}

} // namespace regretlab
