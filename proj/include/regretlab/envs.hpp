#pragma once

// Benchmark instances and the one-step simulator.

#include "regretlab/confidence.hpp"
#include "regretlab/planning.hpp"
#include "regretlab/rng.hpp"

#include <optional>

namespace regretlab {

enum class EnvKind { figure2_left, figure2_right, figure7_cycles, riverswim, random_ergodic };

struct EnvSpec {
    EnvKind kind = EnvKind::riverswim;
    /// riverswim chain length
    std::size_t n = 3;
    /// random_ergodic shape and seed
    std::size_t n_states = 5;
    std::size_t n_actions = 2;
    std::uint64_t seed = 0;
};

struct BuiltEnv {
    Mdp mdp;
    AmbientSet ambient;
    /// Rejected draws before a non-degenerate random_ergodic instance was found.
    std::size_t redraws = 0;
    std::string id;
};

inline const char* env_kind_name(EnvKind k) {
    switch (k) {
    case EnvKind::figure2_left: return "figure2_left";
    case EnvKind::figure2_right: return "figure2_right";
    case EnvKind::figure7_cycles: return "figure7_cycles";
    case EnvKind::riverswim: return "riverswim";
    case EnvKind::random_ergodic: return "random_ergodic";
    }
    return "?";
}

inline std::optional<EnvKind> parse_env_kind(std::string s) {
    std::replace(s.begin(), s.end(), '-', '_');
    if (s == "figure2_left") return EnvKind::figure2_left;
    if (s == "figure2_right") return EnvKind::figure2_right;
    if (s == "figure7_cycles" || s == "figure7") return EnvKind::figure7_cycles;
    if (s == "riverswim") return EnvKind::riverswim;
    if (s == "random_ergodic") return EnvKind::random_ergodic;
    return std::nullopt;
}

inline std::string env_id(const EnvSpec& spec) {
    switch (spec.kind) {
    case EnvKind::riverswim: return "riverswim(" + std::to_string(spec.n) + ")";
    case EnvKind::random_ergodic:
        return "random_ergodic(" + std::to_string(spec.n_states) + "," + std::to_string(spec.n_actions) + "," +
               std::to_string(spec.seed) + ")";
    default: return env_kind_name(spec.kind);
    }
}

namespace detail {

inline std::vector<double> dirac(std::size_t n, StateId s) {
    std::vector<double> row(n, 0.0);
    row[s] = 1.0;
    return row;
}

// Two states; action 0 loops, action 1 switches.
inline Mdp two_state(double loop0, double loop1, double switch0, double switch1) {
    return Mdp({2, 2}, {loop0, switch0, loop1, switch1},
               {dirac(2, 0), dirac(2, 1), dirac(2, 1), dirac(2, 0)});
}

inline Mdp figure7() {
    // Five-cycle 0->1->2->3->4->0; state 1 has a second action to 5, and 5 returns to 0.
    std::vector<std::vector<double>> rows{dirac(6, 1), dirac(6, 2), dirac(6, 5), dirac(6, 3),
                                          dirac(6, 4), dirac(6, 0), dirac(6, 0)};
    return Mdp({1, 2, 1, 1, 1, 1}, {0.1, 0.9, 0.95, 0.9, 0.9, 0.9, 0.8}, rows);
}

inline Mdp riverswim(std::size_t n) {
    if (n < 2)
        throw ConfigError("riverswim needs at least 2 states");
    std::vector<std::vector<double>> rows;
    std::vector<double> rewards;
    for (StateId s = 0; s < n; ++s) {
        rows.push_back(dirac(n, s == 0 ? 0 : s - 1));
        rewards.push_back(s == 0 ? 0.005 : 0.0);
        std::vector<double> right(n, 0.0);
        if (s == 0) {
            right[1] = 0.6;
            right[0] = 0.4;
        } else if (s == n - 1) {
            right[s] = 0.6;
            right[s - 1] = 0.4;
        } else {
            right[s + 1] = 0.6;
            right[s] = 0.35;
            right[s - 1] = 0.05;
        }
        rows.push_back(std::move(right));
        rewards.push_back(s == n - 1 ? 1.0 : 0.0);
    }
    return Mdp(std::vector<std::size_t>(n, 2), std::move(rewards), rows);
}

inline Mdp random_ergodic_draw(std::size_t ns, std::size_t na, SequentialStream& rng) {
    const std::size_t np = ns * na;
    std::vector<double> rewards(np), kernel(np * ns);
    for (PairId z = 0; z < np; ++z) {
        rewards[z] = rng.uniform();
        double total = 0.0;
        for (StateId s = 0; s < ns; ++s) {
            kernel[z * ns + s] = rng.exponential();
            total += kernel[z * ns + s];
        }
        for (StateId s = 0; s < ns; ++s)
            kernel[z * ns + s] /= total;
    }
    return Mdp(PairLayout(std::vector<std::size_t>(ns, na)), std::move(rewards), std::move(kernel));
}

} // namespace detail

/**
 * Builds an instance and its ambient set. The two-state and cycle examples get the
 * fixed-kernel ambient set (rewards free in [0,1]); RiverSwim and random
 * instances are unconstrained.
 */
inline BuiltEnv build(const EnvSpec& spec) {
    switch (spec.kind) {
    case EnvKind::figure2_left: {
        Mdp m = detail::two_state(0.5, 0.5, 0.1, 0.1);
        AmbientSet a = AmbientSet::fixed_kernel(m);
        return {std::move(m), std::move(a), 0, env_id(spec)};
    }
    case EnvKind::figure2_right: {
        Mdp m = detail::two_state(0.49, 0.51, 0.09, 0.08);
        AmbientSet a = AmbientSet::fixed_kernel(m);
        return {std::move(m), std::move(a), 0, env_id(spec)};
    }
    case EnvKind::figure7_cycles: {
        Mdp m = detail::figure7();
        AmbientSet a = AmbientSet::fixed_kernel(m);
        return {std::move(m), std::move(a), 0, env_id(spec)};
    }
    case EnvKind::riverswim: {
        Mdp m = detail::riverswim(spec.n);
        AmbientSet a = AmbientSet::unconstrained(m.layout());
        return {std::move(m), std::move(a), 0, env_id(spec)};
    }
    case EnvKind::random_ergodic: {
        if (spec.n_states < 2 || spec.n_actions < 1)
            throw ConfigError("random_ergodic needs at least 2 states and 1 action");
        SequentialStream rng(spec.seed, streams::instance);
        for (std::size_t redraws = 0; redraws < 1000; ++redraws) {
            Mdp m = detail::random_ergodic_draw(spec.n_states, spec.n_actions, rng);
            if (non_degenerate(m).flag) {
                AmbientSet a = AmbientSet::unconstrained(m.layout());
                return {std::move(m), std::move(a), redraws, env_id(spec)};
            }
        }
        throw InternalError("no non-degenerate draw in 1000 attempts");
    }
    }
    throw InternalError("unknown environment kind");
}

struct Transition {
    int reward;
    StateId next;
};

/// Bernoulli reward and next state of pair z from two independent uniforms.
inline Transition step(const Mdp& m, PairId z, double u_reward, double u_next) {
    Transition out{u_reward < m.reward(z) ? 1 : 0, 0};
    auto p = m.row(z);
    double cum = 0.0;
    std::size_t last = 0;
    for (StateId s = 0; s < p.size(); ++s) {
        if (p[s] <= 0.0)
            continue;
        last = s;
        cum += p[s];
        if (u_next < cum) {
            out.next = s;
            return out;
        }
    }
    out.next = last;
    return out;
}

/// Per-run source of simulator randomness: reward and transition substreams indexed by step.
class Simulator {
public:
    explicit Simulator(std::uint64_t seed) : rewards_(seed, streams::rewards), transitions_(seed, streams::transitions) {}

    Transition operator()(const Mdp& m, PairId z, std::uint64_t t) const {
        return step(m, z, rewards_.uniform(t), transitions_.uniform(t));
    }

private:
    CounterStream rewards_;
    CounterStream transitions_;
};

} // namespace regretlab
