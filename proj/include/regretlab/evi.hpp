#pragma once

// Extended value iteration over a confidence region.

#include "regretlab/confidence.hpp"
#include "regretlab/planning.hpp"

#include <numeric>
#include <optional>

namespace regretlab {

namespace detail {

/// Highest-value state among `allowed` (lowest index on ties), or n if none.
inline std::size_t best_allowed(std::span<const char> allowed, std::span<const double> v) {
    std::size_t arg = allowed.size();
    for (std::size_t i = 0; i < allowed.size(); ++i)
        if (allowed[i] && (arg == allowed.size() || v[i] > v[arg]))
            arg = i;
    return arg;
}

} // namespace detail

/// Dirac mass on the best allowed state.
inline double ambient_kernel_max(std::span<const char> allowed, std::span<const double> v, std::span<double> q) {
    const std::size_t best = detail::best_allowed(allowed, v);
    if (best == allowed.size())
        throw ConfigError("empty ambient support");
    std::fill(q.begin(), q.end(), 0.0);
    q[best] = 1.0;
    return v[best];
}

/**
 * max q.v subject to KL(p_hat || q) <= eps, supp(q) within supp(p_hat) plus
 * the allowed states.
 *
 * Optimal q has the form q_i ~ p_hat_i / (nu - v_i) on supp(p_hat), with
 * possibly extra mass on the best allowed state J outside supp(p_hat) when
 * nu can be pinned at v_J. nu is found by bisection on the dual equation.
 */
inline double kl_kernel_max(std::span<const double> p_hat, std::span<const char> allowed,
                            std::span<const double> v, double eps, std::span<double> q) {
    const std::size_t n = p_hat.size();
    std::copy(p_hat.begin(), p_hat.end(), q.begin());
    double vmax = -infinity, vmin = infinity;
    for (std::size_t i = 0; i < n; ++i)
        if (p_hat[i] > 0.0) {
            vmax = std::max(vmax, v[i]);
            vmin = std::min(vmin, v[i]);
        }
    if (!(eps > 0.0))
        return detail::dot(q, v);

    std::size_t jbest = n;
    for (std::size_t i = 0; i < n; ++i)
        if (p_hat[i] == 0.0 && allowed[i] && (jbest == n || v[i] > v[jbest]))
            jbest = i;
    const bool has_j = jbest < n && v[jbest] > vmax;
    const double xj = has_j ? v[jbest] - vmax : 0.0;

    // f(x) = log sum p_i/(x - w_i) + sum p_i log(x - w_i), with w = v - vmax <= 0.
    auto f = [&](double x) {
        double s = 0.0, l = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (p_hat[i] > 0.0) {
                const double d = x - (v[i] - vmax);
                s += p_hat[i] / d;
                l += p_hat[i] * std::log(d);
            }
        return std::log(s) + l;
    };

    if (has_j) {
        const double fj = vmax > vmin ? f(xj) : 0.0;
        if (fj < eps) {
            double l = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                if (p_hat[i] > 0.0)
                    l += p_hat[i] * std::log(xj - (v[i] - vmax));
            const double lambda = std::exp(l - eps);
            double mass = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                if (p_hat[i] > 0.0) {
                    q[i] = lambda * p_hat[i] / (xj - (v[i] - vmax));
                    mass += q[i];
                }
            q[jbest] = std::max(0.0, 1.0 - mass);
            return detail::dot(q, v);
        }
    }
    if (!(vmax > vmin))
        return detail::dot(q, v);

    double lo = xj, hi = std::max(1.0, 2.0 * xj);
    while (f(hi) > eps) {
        lo = hi;
        hi *= 2.0;
    }
    while (hi - lo > 1e-12 * std::max(1.0, hi)) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi)
            break;
        (f(mid) > eps ? lo : hi) = mid;
    }
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        if (p_hat[i] > 0.0) {
            q[i] = p_hat[i] / (hi - (v[i] - vmax));
            total += q[i];
        }
    for (std::size_t i = 0; i < n; ++i)
        q[i] /= total;
    return detail::dot(q, v);
}

/// max q.v subject to ||q - p_hat||_1 <= radius over allowed states.
inline double l1_kernel_max(std::span<const double> p_hat, std::span<const char> allowed,
                            std::span<const double> v, double radius, std::span<double> q) {
    const std::size_t n = p_hat.size();
    std::copy(p_hat.begin(), p_hat.end(), q.begin());
    std::size_t best = n;
    for (std::size_t i = 0; i < n; ++i)
        if ((allowed[i] || p_hat[i] > 0.0) && (best == n || v[i] > v[best]))
            best = i;
    double excess = std::min(0.5 * radius, 1.0 - q[best]);
    if (!(excess > 0.0))
        return detail::dot(q, v);
    if (0.5 * radius >= 1.0 - q[best]) {
        std::fill(q.begin(), q.end(), 0.0);
        q[best] = 1.0;
        return v[best];
    }
    q[best] += excess;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    for (std::size_t i : order) {
        if (i == best || q[i] <= 0.0)
            continue;
        const double take = std::min(q[i], excess);
        q[i] -= take;
        excess -= take;
        if (excess <= 0.0)
            break;
    }
    return detail::dot(q, v);
}

/// max q.v over the simplex intersected with the box [lower, upper].
inline double box_kernel_max(std::span<const double> lower, std::span<const double> upper,
                             std::span<const double> v, std::span<double> q) {
    const std::size_t n = v.size();
    double rem = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        q[i] = lower[i];
        rem -= lower[i];
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });
    for (std::size_t i : order) {
        if (rem <= 0.0)
            break;
        const double add = std::min(upper[i] - lower[i], rem);
        q[i] += add;
        rem -= add;
    }
    return detail::dot(q, v);
}

/// Per-coordinate Bernstein box around p_hat at information level rho.
inline void bernstein_box(std::span<const double> p_hat, std::span<const char> allowed, double rho,
                          std::span<double> lower, std::span<double> upper) {
    for (std::size_t i = 0; i < p_hat.size(); ++i) {
        if (!allowed[i] && p_hat[i] == 0.0) {
            lower[i] = upper[i] = 0.0;
            continue;
        }
        const double w = bernstein_width(p_hat[i], rho);
        lower[i] = std::max(0.0, p_hat[i] - w);
        upper[i] = std::min(1.0, p_hat[i] + w);
    }
}

inline double bernstein_kernel_max(std::span<const double> p_hat, std::span<const char> allowed,
                                   std::span<const double> v, double rho, std::span<double> q) {
    std::vector<double> lower(p_hat.size()), upper(p_hat.size());
    bernstein_box(p_hat, allowed, rho, lower, upper);
    return box_kernel_max(lower, upper, v, q);
}

/// Largest plausible reward mean of pair z at step t.
inline double inner_max_reward(const RegionSpec& spec, const VisitStats& stats, PairId z, std::uint64_t t) {
    const auto [lo, hi] = spec.ambient.reward_bounds[z];
    const std::uint64_t n = stats.visits(z);
    if (n == 0)
        return hi;
    const double r_hat = stats.r_hat(z);
    const double rho = region_radius(spec, Bound::reward, t, n, stats.n_states(), stats.n_pairs());
    double up;
    if (rho == 0.0) {
        up = r_hat;
    } else if (spec.preset == Preset::ucycle || spec.family == Family::L1) {
        up = r_hat + rho;
    } else if (spec.family == Family::BERNSTEIN) {
        up = r_hat + bernstein_width(r_hat, rho);
    } else if (r_hat >= hi || kl_bernoulli(r_hat, hi) <= rho) {
        up = hi;
    } else {
        double a = r_hat, b = hi;
        while (b - a > 1e-12) {
            const double mid = 0.5 * (a + b);
            (kl_bernoulli(r_hat, mid) <= rho ? a : b) = mid;
        }
        up = a;
    }
    return std::clamp(up, lo, hi);
}

/// Maximizer and maximum of q.v over the kernel region of pair z at step t.
inline std::pair<std::vector<double>, double> inner_max_kernel(const RegionSpec& spec, const VisitStats& stats,
                                                                PairId z, std::uint64_t t,
                                                                std::span<const double> v) {
    const std::size_t ns = stats.n_states();
    const auto& allowed = spec.ambient.support[z];
    std::vector<double> q(ns);
    const std::uint64_t n = stats.visits(z);
    if (n == 0)
        return {q, ambient_kernel_max(allowed, v, q)};
    const std::vector<double> p_hat = stats.p_hat(z);
    const double rho = region_radius(spec, Bound::kernel, t, n, ns, stats.n_pairs());
    if (spec.preset == Preset::ucycle)
        return {q, l1_kernel_max(p_hat, allowed, v, rho, q)};
    double value = 0.0;
    switch (spec.family) {
    case Family::KL: value = kl_kernel_max(p_hat, allowed, v, rho, q); break;
    case Family::L1: value = l1_kernel_max(p_hat, allowed, v, rho, q); break;
    case Family::BERNSTEIN: value = bernstein_kernel_max(p_hat, allowed, v, rho, q); break;
    }
    return {q, value};
}

struct EviResult {
    Policy policy;
    double optimistic_gain = 0.0;
    std::vector<double> optimistic_bias;
    /// Maximizing reward and kernel of every pair at the final iterate.
    std::optional<Mdp> optimistic_model;
    std::size_t iterations = 0;
    double final_span = 0.0;
};

/**
 * Iterates u <- (B(t)u + u)/2 from u = 0 until span(u_{n+1} - u_n) < epsilon.
 * The optimistic gain is the midpoint of the range of B(t)u - u at the stop.
 */
inline EviResult evi_solve(const RegionSpec& spec, const VisitStats& stats, std::uint64_t t, double epsilon,
                           std::size_t max_iters = 100'000, bool with_model = true) {
    if (!(epsilon > 0.0))
        throw PreconditionError("evi_solve: epsilon must be positive");
    const std::size_t ns = stats.n_states();
    const std::size_t np = stats.n_pairs();
    if (spec.ambient.support.size() != np)
        throw ConfigError("ambient set does not match the statistics");

    const PairLayout& layout = stats.layout();

    enum class Mode { ambient, kl, l1, box };
    struct PairData {
        double reward;
        Mode mode;
        double rho;
        std::vector<double> p_hat, lower, upper;
    };
    std::vector<PairData> data(np);
    for (PairId z = 0; z < np; ++z) {
        auto& d = data[z];
        d.reward = inner_max_reward(spec, stats, z, t);
        const std::uint64_t n = stats.visits(z);
        if (n == 0) {
            d.mode = Mode::ambient;
            continue;
        }
        d.p_hat = stats.p_hat(z);
        d.rho = region_radius(spec, Bound::kernel, t, n, ns, np);
        if (spec.preset == Preset::ucycle || spec.family == Family::L1) {
            d.mode = Mode::l1;
        } else if (spec.family == Family::KL) {
            d.mode = Mode::kl;
        } else {
            d.mode = Mode::box;
            d.lower.resize(ns);
            d.upper.resize(ns);
            bernstein_box(d.p_hat, spec.ambient.support[z], d.rho, d.lower, d.upper);
        }
    }

    std::vector<double> q(ns);
    auto pair_value = [&](PairId z, std::span<const double> u) {
        const auto& d = data[z];
        const auto& allowed = spec.ambient.support[z];
        switch (d.mode) {
        case Mode::ambient: return d.reward + ambient_kernel_max(allowed, u, q);
        case Mode::kl: return d.reward + kl_kernel_max(d.p_hat, allowed, u, d.rho, q);
        case Mode::l1: return d.reward + l1_kernel_max(d.p_hat, allowed, u, d.rho, q);
        case Mode::box: return d.reward + box_kernel_max(d.lower, d.upper, u, q);
        }
        return 0.0;
    };

    std::vector<double> u(ns, 0.0), bu(ns, 0.0);
    Policy pi;
    pi.choice.assign(ns, 0);
    double last_span = infinity;
    for (std::size_t it = 1; it <= max_iters; ++it) {
        for (StateId s = 0; s < ns; ++s) {
            double best = -infinity;
            ActionId arg = 0;
            for (ActionId a = 0; a < layout.n_actions(s); ++a) {
                const double val = pair_value(layout.pair(s, a), u);
                if (val > best) {
                    best = val;
                    arg = a;
                }
            }
            bu[s] = best;
            pi.choice[s] = arg;
        }
        double lo = infinity, hi = -infinity;
        for (StateId s = 0; s < ns; ++s) {
            lo = std::min(lo, bu[s] - u[s]);
            hi = std::max(hi, bu[s] - u[s]);
        }
        last_span = 0.5 * (hi - lo);
        if (last_span < epsilon) {
            EviResult out;
            out.policy = std::move(pi);
            out.optimistic_gain = 0.5 * (lo + hi);
            out.iterations = it;
            out.final_span = last_span;
            if (with_model) {
                std::vector<double> rewards(np), kernel(np * ns);
                for (PairId z = 0; z < np; ++z) {
                    rewards[z] = data[z].reward;
                    pair_value(z, u);
                    std::copy(q.begin(), q.end(), kernel.begin() + static_cast<std::ptrdiff_t>(z * ns));
                }
                out.optimistic_model.emplace(layout, std::move(rewards), std::move(kernel),
                                             Validation::stochastic_only);
            }
            out.optimistic_bias = std::move(u);
            return out;
        }
        double base = infinity;
        for (StateId s = 0; s < ns; ++s) {
            u[s] = 0.5 * (u[s] + bu[s]);
            base = std::min(base, u[s]);
        }
        for (double& x : u)
            x -= base;
    }
    throw ConvergenceError("extended value iteration did not converge", last_span, max_iters);
}

} // namespace regretlab
