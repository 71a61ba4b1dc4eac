#pragma once

// Visit statistics and confidence regions around the empirical model.

#include "regretlab/mdp.hpp"

#include <cstdint>
#include <limits>
#include <optional>

namespace regretlab {

inline constexpr double infinity = std::numeric_limits<double>::infinity();

/// Counts and sums observed by a learner. `t` is the index of the next step.
class VisitStats {
public:
    VisitStats() = default;
    explicit VisitStats(const PairLayout& layout)
        : layout_(layout), n_states_(layout.n_states()), visits_(layout.n_pairs(), 0), reward_sum_(layout.n_pairs(), 0.0),
          trans_(layout.n_pairs() * layout.n_states(), 0) {}

    void update(PairId z, int reward, StateId next) {
        if (reward != 0 && reward != 1)
            throw PreconditionError("rewards are Bernoulli");
        ++t_;
        ++visits_[z];
        reward_sum_[z] += reward;
        ++trans_[z * n_states_ + next];
    }

    std::uint64_t t() const noexcept { return t_; }
    const PairLayout& layout() const noexcept { return layout_; }
    std::size_t n_states() const noexcept { return n_states_; }
    std::size_t n_pairs() const noexcept { return visits_.size(); }
    std::uint64_t visits(PairId z) const { return visits_[z]; }
    const std::vector<std::uint64_t>& visits() const noexcept { return visits_; }
    double reward_sum(PairId z) const { return reward_sum_[z]; }
    std::uint64_t transitions(PairId z, StateId s) const { return trans_[z * n_states_ + s]; }

    /// Empirical reward mean; 0.5 when unvisited (display only).
    double r_hat(PairId z) const {
        return visits_[z] ? reward_sum_[z] / static_cast<double>(visits_[z]) : 0.5;
    }
    /// Empirical kernel row; uniform when unvisited (display only).
    std::vector<double> p_hat(PairId z) const {
        std::vector<double> p(n_states_);
        const auto n = visits_[z];
        for (StateId s = 0; s < n_states_; ++s)
            p[s] = n ? static_cast<double>(trans_[z * n_states_ + s]) / static_cast<double>(n)
                     : 1.0 / static_cast<double>(n_states_);
        return p;
    }

    bool operator==(const VisitStats&) const = default;

private:
    PairLayout layout_;
    std::uint64_t t_ = 1;
    std::size_t n_states_ = 0;
    std::vector<std::uint64_t> visits_;
    std::vector<double> reward_sum_;
    std::vector<std::uint64_t> trans_;
};

/**
 * Product-form prior on models: a reward interval and a set of allowed next
 * states for every pair.
 */
struct AmbientSet {
    std::vector<std::pair<double, double>> reward_bounds;
    /// support[z][s] != 0 iff s may follow z.
    std::vector<std::vector<char>> support;

    static AmbientSet unconstrained(const PairLayout& layout) {
        AmbientSet a;
        a.reward_bounds.assign(layout.n_pairs(), {0.0, 1.0});
        a.support.assign(layout.n_pairs(), std::vector<char>(layout.n_states(), 1));
        return a;
    }

    /// Supports fixed to those of `m`; rewards free in [0, 1].
    static AmbientSet fixed_kernel(const Mdp& m) {
        AmbientSet a;
        a.reward_bounds.assign(m.n_pairs(), {0.0, 1.0});
        a.support.resize(m.n_pairs());
        for (PairId z = 0; z < m.n_pairs(); ++z) {
            auto p = m.row(z);
            a.support[z].resize(m.n_states());
            for (StateId s = 0; s < m.n_states(); ++s)
                a.support[z][s] = p[s] > 0.0;
        }
        return a;
    }

    bool is_free(PairId z) const {
        return std::all_of(support[z].begin(), support[z].end(), [](char c) { return c != 0; });
    }

    void validate(const PairLayout& layout) const {
        if (reward_bounds.size() != layout.n_pairs() || support.size() != layout.n_pairs())
            throw ConfigError("ambient set covers " + std::to_string(reward_bounds.size()) + " pairs, model has " +
                              std::to_string(layout.n_pairs()));
        for (PairId z = 0; z < layout.n_pairs(); ++z) {
            const auto [lo, hi] = reward_bounds[z];
            if (!(0.0 <= lo && lo <= hi && hi <= 1.0))
                throw ConfigError("reward interval of pair " + std::to_string(z) + " is not a subset of [0,1]");
            if (support[z].size() != layout.n_states())
                throw ConfigError("support of pair " + std::to_string(z) + " has wrong length");
            if (std::none_of(support[z].begin(), support[z].end(), [](char c) { return c != 0; }))
                throw ConfigError("support of pair " + std::to_string(z) + " is empty");
        }
    }

    bool contains(PairId z, double r, std::span<const double> p, double tol = 1e-12) const {
        if (r < reward_bounds[z].first - tol || r > reward_bounds[z].second + tol)
            return false;
        for (StateId s = 0; s < p.size(); ++s)
            if (p[s] > 0.0 && !support[z][s])
                return false;
        return true;
    }

    bool contains(const Mdp& m) const {
        for (PairId z = 0; z < m.n_pairs(); ++z)
            if (!contains(z, m.reward(z), m.row(z)))
                return false;
        return true;
    }
};

enum class Family { KL, L1, BERNSTEIN };

/// `ucycle` keeps the kernel at its empirical (ambient-determined) value and
/// uses a Hoeffding reward interval of half-width sqrt(2 ln(|Z| t) / N).
enum class Preset { standard, ucycle };

struct RegionSpec {
    Family family = Family::KL;
    AmbientSet ambient;
    double radius_scale = 1.0;
    Preset preset = Preset::standard;
};

enum class Bound { reward, kernel };

inline const char* family_name(Family f) {
    switch (f) {
    case Family::KL: return "KL";
    case Family::L1: return "L1";
    case Family::BERNSTEIN: return "BERNSTEIN";
    }
    return "?";
}

inline std::optional<Family> parse_family(const std::string& s) {
    if (s == "KL") return Family::KL;
    if (s == "L1") return Family::L1;
    if (s == "BERNSTEIN") return Family::BERNSTEIN;
    return std::nullopt;
}

namespace detail {
inline double xlogx_ratio(double p, double q) {
    if (p == 0.0)
        return 0.0;
    if (q == 0.0)
        return infinity;
    return p * std::log(p / q);
}
} // namespace detail

/// kl(p, q) between Bernoulli distributions; +inf when q is on a boundary p is not.
inline double kl_bernoulli(double p, double q) {
    return detail::xlogx_ratio(p, q) + detail::xlogx_ratio(1.0 - p, 1.0 - q);
}

/// KL(p || q); +inf unless supp(p) is contained in supp(q).
inline double kl_categorical(std::span<const double> p, std::span<const double> q) {
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
        acc += detail::xlogx_ratio(p[i], q[i]);
    return acc;
}

/// ln(2 e t)
inline double confidence_level(std::uint64_t t) {
    return 1.0 + std::log(2.0) + std::log(static_cast<double>(t));
}

/**
 * Size of the region of a pair seen `n` times by step `t`.
 *
 * KL: threshold on n-normalized divergences. L1: kernel L1 radius and reward
 * half-width. BERNSTEIN: the scaled information level ln(2et)/n, turned into
 * per-coordinate widths by bernstein_width(). The ucycle preset returns the
 * Hoeffding reward half-width and 0 for the kernel. n = 0 gives +inf.
 */
inline double region_radius(const RegionSpec& spec, Bound kind, std::uint64_t t, std::uint64_t n,
                            std::size_t s_count, std::size_t pair_count = 0) {
    if (n == 0)
        return infinity;
    const double nn = static_cast<double>(n);
    const double c = spec.radius_scale;
    if (spec.preset == Preset::ucycle) {
        if (kind == Bound::kernel)
            return 0.0;
        const double zt = static_cast<double>(std::max<std::size_t>(pair_count, 1)) * static_cast<double>(t);
        return c * std::sqrt(2.0 * std::max(std::log(zt), 0.0) / nn);
    }
    const double f = confidence_level(t);
    switch (spec.family) {
    case Family::KL:
        return c * (kind == Bound::reward ? f : static_cast<double>(s_count) * f) / nn;
    case Family::L1:
        return kind == Bound::reward ? c * std::sqrt(f / (2.0 * nn))
                                     : c * std::sqrt(2.0 * (static_cast<double>(s_count) * std::log(2.0) + f) / nn);
    case Family::BERNSTEIN:
        return c * f / nn;
    }
    throw InternalError("unknown family");
}

/// Bernstein half-width of a coordinate with empirical mean `p` at level `rho`.
inline double bernstein_width(double p, double rho) {
    return std::sqrt(2.0 * p * (1.0 - p) * rho) + 7.0 * rho / 3.0;
}

/// Does (r, p) lie in the region of pair z? Ambient membership included.
inline bool pair_contains(const RegionSpec& spec, const VisitStats& stats, PairId z, double r,
                          std::span<const double> p, double tol = 1e-12) {
    if (!spec.ambient.contains(z, r, p, tol))
        return false;
    const std::uint64_t n = stats.visits(z);
    if (n == 0)
        return true;
    const std::size_t ns = stats.n_states();
    const std::uint64_t t = stats.t();
    const double rr = region_radius(spec, Bound::reward, t, n, ns, stats.n_pairs());
    const double kr = region_radius(spec, Bound::kernel, t, n, ns, stats.n_pairs());
    const double r_hat = stats.r_hat(z);
    const std::vector<double> p_hat = stats.p_hat(z);

    if (spec.preset == Preset::ucycle) {
        if (std::abs(r - r_hat) > rr + tol)
            return false;
        double l1 = 0.0;
        for (StateId s = 0; s < ns; ++s)
            l1 += std::abs(p[s] - p_hat[s]);
        return l1 <= kr + tol;
    }
    switch (spec.family) {
    case Family::KL:
        return kl_bernoulli(r_hat, r) <= rr + tol && kl_categorical(p_hat, p) <= kr + tol;
    case Family::L1: {
        if (std::abs(r - r_hat) > rr + tol)
            return false;
        double l1 = 0.0;
        for (StateId s = 0; s < ns; ++s)
            l1 += std::abs(p[s] - p_hat[s]);
        return l1 <= kr + tol;
    }
    case Family::BERNSTEIN:
        if (std::abs(r - r_hat) > bernstein_width(r_hat, rr) + tol)
            return false;
        for (StateId s = 0; s < ns; ++s)
            if (std::abs(p[s] - p_hat[s]) > bernstein_width(p_hat[s], kr) + tol)
                return false;
        return true;
    }
    return false;
}

/// Is the model m inside the confidence region built from `stats`?
inline bool contains(const RegionSpec& spec, const VisitStats& stats, const Mdp& m, double tol = 1e-12) {
    for (PairId z = 0; z < m.n_pairs(); ++z)
        if (!pair_contains(spec, stats, z, m.reward(z), m.row(z), tol))
            return false;
    return true;
}

} // namespace regretlab
