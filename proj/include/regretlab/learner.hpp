#pragma once

// The episodic optimistic learner and its episode-stopping rules.

#include "regretlab/envs.hpp"
#include "regretlab/evi.hpp"
#include "regretlab/planning.hpp"

#include <functional>

namespace regretlab {

enum class RuleKind { DT, VM };
enum class Schedule { sqrt_log_over_t, inv_log_sq, const_c };

struct EpisodeRule {
    RuleKind kind = RuleKind::DT;
    Schedule schedule = Schedule::sqrt_log_over_t;
    /// Value of f for the const_c schedule.
    double c = 0.5;

    static EpisodeRule doubling() { return {}; }
    static EpisodeRule vanishing(Schedule s = Schedule::sqrt_log_over_t, double c = 0.5) {
        return {RuleKind::VM, s, c};
    }

    double f(double t) const {
        switch (schedule) {
        case Schedule::sqrt_log_over_t: return std::sqrt(std::log1p(t) / (1.0 + t));
        case Schedule::inv_log_sq: {
            const double d = 1.0 + std::log1p(t);
            return 1.0 / (d * d);
        }
        case Schedule::const_c: return c;
        }
        return 0.0;
    }
};

inline const char* schedule_name(Schedule s) {
    switch (s) {
    case Schedule::sqrt_log_over_t: return "sqrt_log_over_t";
    case Schedule::inv_log_sq: return "inv_log_sq";
    case Schedule::const_c: return "const_c";
    }
    return "?";
}

inline std::optional<Schedule> parse_schedule(const std::string& s) {
    if (s == "sqrt_log_over_t") return Schedule::sqrt_log_over_t;
    if (s == "inv_log_sq") return Schedule::inv_log_sq;
    if (s == "const_c") return Schedule::const_c;
    return std::nullopt;
}

struct EpisodeState {
    std::size_t k = 0;
    std::uint64_t t_k = 1;
    std::vector<std::uint64_t> snapshot_visits;
    Policy policy;
    double policy_optimistic_gain = 0.0;
};

/// Evaluated before acting in `current` with the episode's action.
inline bool should_stop(const EpisodeRule& rule, const EpisodeState& ep, const VisitStats& stats, StateId current) {
    const PairId z = stats.layout().pair(current, ep.policy(current));
    const auto now = static_cast<double>(stats.visits(z));
    const auto then = static_cast<double>(ep.snapshot_visits[z]);
    if (rule.kind == RuleKind::DT)
        return now >= std::max(2.0 * then, 1.0);
    return now > (1.0 + rule.f(static_cast<double>(ep.t_k))) * std::max(1.0, then);
}

struct EviEpsilon {
    enum class Mode { one_over_sqrt_tk, fixed } mode = Mode::one_over_sqrt_tk;
    double value = 1e-10;

    double at(std::uint64_t t_k) const {
        return mode == Mode::fixed ? value : 1.0 / std::sqrt(static_cast<double>(t_k));
    }
};

struct RunConfig {
    std::uint64_t horizon = 1000;
    std::uint64_t seed = 0;
    RegionSpec region;
    EpisodeRule rule;
    EviEpsilon evi_epsilon;
    StateId initial_state = 0;
    std::size_t evi_max_iters = 100'000;
};

struct StepRecord {
    std::uint32_t state;
    std::uint32_t action;
    std::uint32_t episode;
};

struct EpisodeRecord {
    std::uint64_t t_start;
    Policy policy;
    std::uint64_t policy_hash;
    double optimistic_gain;
    std::size_t evi_iterations;
};

/// Everything logged by one run. Step t (1-based) is steps[t - 1].
struct RunTrace {
    PairLayout layout;
    std::vector<StepRecord> steps;
    std::vector<EpisodeRecord> episodes;
    /// Bellman gap of every pair in the true model.
    std::vector<double> gap_table;
    double optimal_gain = 0.0;
    std::string env_id;
    std::uint64_t config_fingerprint = 0;

    std::uint64_t horizon() const noexcept { return steps.size(); }
    PairId pair(std::uint64_t t) const { return layout.pair(steps[t - 1].state, steps[t - 1].action); }
    double gap(std::uint64_t t) const { return gap_table[pair(t)]; }
    bool episode_start(std::uint64_t t) const { return episodes[steps[t - 1].episode].t_start == t; }
    double optimistic_gain(std::uint64_t t) const { return episodes[steps[t - 1].episode].optimistic_gain; }
};

/// Optional callbacks; `episode_start` sees the statistics the episode's EVI call used.
struct RunObserver {
    std::function<void(const EpisodeState&, const VisitStats&, const EviResult&)> episode_start;
};

/**
 * Simulates `cfg.horizon` steps of the optimistic learner on m. `solved`
 * supplies the gap table; pass it to avoid re-solving m for every seed.
 */
inline RunTrace run_learner(const Mdp& m, const RunConfig& cfg, const SolveResult& solved,
                            const RunObserver& observer = {}) {
    if (cfg.horizon < 1)
        throw ConfigError("horizon must be at least 1");
    if (cfg.initial_state >= m.n_states())
        throw ConfigError("initial state out of range");
    cfg.region.ambient.validate(m.layout());
    if (cfg.region.radius_scale <= 0.0)
        throw ConfigError("radius_scale must be positive");

    RunTrace trace;
    trace.layout = m.layout();
    trace.gap_table = solved.gaps;
    trace.optimal_gain = solved.optimal_gain();
    trace.steps.reserve(cfg.horizon);

    VisitStats stats(m.layout());
    EpisodeState ep;
    const Simulator sim(cfg.seed);
    StateId s = cfg.initial_state;

    for (std::uint64_t t = 1; t <= cfg.horizon; ++t) {
        if (t == 1 || should_stop(cfg.rule, ep, stats, s)) {
            EviResult evi;
            try {
                evi = evi_solve(cfg.region, stats, t, cfg.evi_epsilon.at(t), cfg.evi_max_iters, false);
            } catch (const ConvergenceError& e) {
                throw ConvergenceError("episode " + std::to_string(trace.episodes.size()) + " at t=" +
                                           std::to_string(t) + ": " + e.what(),
                                       e.final_span(), e.iterations());
            }
            ep.k = trace.episodes.size();
            ep.t_k = t;
            ep.snapshot_visits = stats.visits();
            ep.policy = evi.policy;
            ep.policy_optimistic_gain = evi.optimistic_gain;
            trace.episodes.push_back({t, evi.policy, policy_hash(evi.policy), evi.optimistic_gain, evi.iterations});
            if (observer.episode_start)
                observer.episode_start(ep, stats, evi);
        }
        const ActionId a = ep.policy(s);
        const PairId z = m.pair(s, a);
        const Transition tr = sim(m, z, t);
        trace.steps.push_back({static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(a),
                               static_cast<std::uint32_t>(ep.k)});
        stats.update(z, tr.reward, tr.next);
        s = tr.next;
    }
    return trace;
}

inline RunTrace run_learner(const Mdp& m, const RunConfig& cfg, const RunObserver& observer = {}) {
    return run_learner(m, cfg, optimal_solve(m), observer);
}

/// Region used by UCYCLE: known kernel, Hoeffding rewards within the configured reward bounds.
inline RegionSpec ucycle_region(const Mdp& m, const RegionSpec& base) {
    RegionSpec r;
    r.preset = Preset::ucycle;
    r.family = Family::L1;
    r.radius_scale = base.radius_scale;
    r.ambient = AmbientSet::fixed_kernel(m);
    if (base.ambient.reward_bounds.size() == m.n_pairs())
        r.ambient.reward_bounds = base.ambient.reward_bounds;
    return r;
}

/// UCRL2 for deterministic transitions: known kernel, Hoeffding rewards, doubling trick.
inline RunTrace run_ucycle(const Mdp& m, const RunConfig& cfg, const SolveResult& solved,
                           const RunObserver& observer = {}) {
    if (!m.is_deterministic())
        throw ConfigError("UCYCLE requires deterministic transitions");
    RunConfig c = cfg;
    c.region = ucycle_region(m, cfg.region);
    c.rule = EpisodeRule::doubling();
    return run_learner(m, c, solved, observer);
}

inline RunTrace run_ucycle(const Mdp& m, const RunConfig& cfg, const RunObserver& observer = {}) {
    return run_ucycle(m, cfg, optimal_solve(m), observer);
}

} // namespace regretlab
