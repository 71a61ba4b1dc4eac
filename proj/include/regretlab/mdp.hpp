#pragma once

#include "regretlab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

namespace regretlab {

using StateId = std::size_t;
using ActionId = std::size_t;
/// Canonical pair index: pair-major order, states first then actions.
using PairId = std::size_t;

/**
 * Finite state-action index space.
 *
 * Pairs are numbered state by state, so the pairs of state s occupy the
 * contiguous range [first_pair(s), first_pair(s) + n_actions(s)). This
 * numbering is the canonical pair index used in files and CSV columns.
 */
class PairLayout {
public:
    PairLayout() = default;

    explicit PairLayout(std::vector<std::size_t> actions_per_state)
        : actions_(std::move(actions_per_state)) {
        if (actions_.empty())
            throw ModelError("layout needs at least one state");
        offsets_.assign(actions_.size() + 1, 0);
        for (std::size_t s = 0; s < actions_.size(); ++s) {
            if (actions_[s] == 0)
                throw ModelError("state " + std::to_string(s) + " has no action");
            offsets_[s + 1] = offsets_[s] + actions_[s];
        }
        pair_state_.resize(offsets_.back());
        for (std::size_t s = 0; s < actions_.size(); ++s)
            std::fill(pair_state_.begin() + static_cast<std::ptrdiff_t>(offsets_[s]),
                      pair_state_.begin() + static_cast<std::ptrdiff_t>(offsets_[s + 1]), s);
    }

    std::size_t n_states() const noexcept { return actions_.size(); }
    std::size_t n_pairs() const noexcept { return pair_state_.size(); }
    std::size_t n_actions(StateId s) const { return actions_[s]; }
    std::size_t max_actions() const { return *std::max_element(actions_.begin(), actions_.end()); }
    std::span<const std::size_t> actions_per_state() const noexcept { return actions_; }

    PairId first_pair(StateId s) const { return offsets_[s]; }
    PairId pair(StateId s, ActionId a) const { return offsets_[s] + a; }
    StateId state_of(PairId z) const { return pair_state_[z]; }
    ActionId action_of(PairId z) const { return z - offsets_[pair_state_[z]]; }

    bool operator==(const PairLayout& other) const { return actions_ == other.actions_; }

private:
    std::vector<std::size_t> actions_;
    std::vector<std::size_t> offsets_;
    std::vector<StateId> pair_state_;
};

/// Deterministic stationary policy.
struct Policy {
    std::vector<ActionId> choice;

    ActionId operator()(StateId s) const { return choice[s]; }
    std::size_t size() const noexcept { return choice.size(); }
    bool operator==(const Policy&) const = default;
};

inline void validate_policy(const PairLayout& layout, const Policy& pi) {
    if (pi.size() != layout.n_states())
        throw PreconditionError("policy covers " + std::to_string(pi.size()) + " states, model has " +
                                std::to_string(layout.n_states()));
    for (StateId s = 0; s < pi.size(); ++s)
        if (pi(s) >= layout.n_actions(s))
            throw PreconditionError("policy picks action " + std::to_string(pi(s)) +
                                    " unavailable at state " + std::to_string(s));
}

/// FNV-1a over the action table; stable across platforms and runs.
inline std::uint64_t policy_hash(const Policy& pi) {
    std::uint64_t h = 1469598103934665603ULL;
    for (ActionId a : pi.choice) {
        std::uint64_t x = static_cast<std::uint64_t>(a);
        for (int i = 0; i < 8; ++i) {
            h ^= (x >> (8 * i)) & 0xffU;
            h *= 1099511628211ULL;
        }
    }
    return h;
}

/// Number of deterministic policies, saturating at `cap`.
inline std::size_t policy_count(const PairLayout& layout, std::size_t cap = SIZE_MAX) {
    std::size_t count = 1;
    for (std::size_t a : layout.actions_per_state()) {
        if (count > cap / a)
            return cap;
        count *= a;
    }
    return count;
}

/**
 * Calls `fn(const Policy&)` for every policy whose action at state s lies in
 * `allowed[s]`. Enumeration is lexicographic with state 0 varying fastest.
 * Stops early when `fn` returns false.
 */
template <class Fn>
void for_each_policy(const std::vector<std::vector<ActionId>>& allowed, Fn&& fn) {
    const std::size_t n = allowed.size();
    for (const auto& choices : allowed)
        if (choices.empty())
            return;
    std::vector<std::size_t> idx(n, 0);
    Policy pi;
    pi.choice.resize(n);
    for (std::size_t s = 0; s < n; ++s)
        pi.choice[s] = allowed[s][0];
    while (true) {
        if constexpr (std::is_same_v<std::invoke_result_t<Fn, const Policy&>, bool>) {
            if (!fn(static_cast<const Policy&>(pi)))
                return;
        } else {
            fn(static_cast<const Policy&>(pi));
        }
        std::size_t s = 0;
        while (s < n) {
            if (++idx[s] < allowed[s].size()) {
                pi.choice[s] = allowed[s][idx[s]];
                break;
            }
            idx[s] = 0;
            pi.choice[s] = allowed[s][0];
            ++s;
        }
        if (s == n)
            return;
    }
}

inline std::vector<std::vector<ActionId>> all_actions(const PairLayout& layout) {
    std::vector<std::vector<ActionId>> allowed(layout.n_states());
    for (StateId s = 0; s < layout.n_states(); ++s) {
        allowed[s].resize(layout.n_actions(s));
        std::iota(allowed[s].begin(), allowed[s].end(), ActionId{0});
    }
    return allowed;
}

enum class Validation {
    full,          ///< stochastic rows, rewards in [0,1], communicating
    stochastic_only ///< skips the communicating check (optimistic or witness models)
};

/// True iff the union of transition supports is strongly connected.
inline bool is_communicating(const PairLayout& layout, std::span<const double> kernel) {
    const std::size_t n = layout.n_states();
    std::vector<std::vector<StateId>> out(n), in(n);
    for (PairId z = 0; z < layout.n_pairs(); ++z)
        for (StateId s2 = 0; s2 < n; ++s2)
            if (kernel[z * n + s2] > 0.0) {
                out[layout.state_of(z)].push_back(s2);
                in[s2].push_back(layout.state_of(z));
            }
    auto reaches_all = [n](const std::vector<std::vector<StateId>>& adj) {
        std::vector<char> seen(n, 0);
        std::vector<StateId> stack{0};
        seen[0] = 1;
        while (!stack.empty()) {
            StateId s = stack.back();
            stack.pop_back();
            for (StateId s2 : adj[s])
                if (!seen[s2]) {
                    seen[s2] = 1;
                    stack.push_back(s2);
                }
        }
        return std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; });
    };
    return reaches_all(out) && reaches_all(in);
}

/**
 * Finite MDP with Bernoulli reward means and categorical kernels.
 *
 * Immutable after construction. The kernel is stored dense, one row of
 * length n_states() per pair.
 */
class Mdp {
public:
    Mdp(PairLayout layout, std::vector<double> rewards, std::vector<double> kernel,
        Validation validation = Validation::full)
        : layout_(std::move(layout)), rewards_(std::move(rewards)), kernel_(std::move(kernel)) {
        validate(validation);
    }

    Mdp(std::vector<std::size_t> actions_per_state, std::vector<double> rewards,
        const std::vector<std::vector<double>>& rows, Validation validation = Validation::full)
        : layout_(std::move(actions_per_state)), rewards_(std::move(rewards)) {
        const std::size_t n = layout_.n_states();
        if (rows.size() != layout_.n_pairs())
            throw ModelError("expected " + std::to_string(layout_.n_pairs()) + " kernel rows, got " +
                             std::to_string(rows.size()));
        kernel_.reserve(rows.size() * n);
        for (std::size_t z = 0; z < rows.size(); ++z) {
            if (rows[z].size() != n)
                throw ModelError("kernel row " + std::to_string(z) + " has length " +
                                 std::to_string(rows[z].size()) + ", expected " + std::to_string(n));
            kernel_.insert(kernel_.end(), rows[z].begin(), rows[z].end());
        }
        validate(validation);
    }

    const PairLayout& layout() const noexcept { return layout_; }
    std::size_t n_states() const noexcept { return layout_.n_states(); }
    std::size_t n_pairs() const noexcept { return layout_.n_pairs(); }
    std::size_t n_actions(StateId s) const { return layout_.n_actions(s); }
    PairId pair(StateId s, ActionId a) const { return layout_.pair(s, a); }

    double reward(PairId z) const { return rewards_[z]; }
    std::span<const double> rewards() const noexcept { return rewards_; }
    std::span<const double> row(PairId z) const {
        return {kernel_.data() + z * n_states(), n_states()};
    }
    std::span<const double> kernel() const noexcept { return kernel_; }

    /// p(z) . v
    double expect(PairId z, std::span<const double> v) const {
        auto p = row(z);
        double acc = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i)
            acc += p[i] * v[i];
        return acc;
    }

    bool is_deterministic() const {
        return std::all_of(kernel_.begin(), kernel_.end(), [](double x) { return x == 0.0 || x == 1.0; });
    }

    Mdp with_rewards(std::vector<double> rewards, Validation validation = Validation::full) const {
        return Mdp(layout_, std::move(rewards), kernel_, validation);
    }

private:
    void validate(Validation validation) const {
        const std::size_t n = layout_.n_states();
        if (rewards_.size() != layout_.n_pairs())
            throw ModelError("expected " + std::to_string(layout_.n_pairs()) + " rewards, got " +
                             std::to_string(rewards_.size()));
        if (kernel_.size() != layout_.n_pairs() * n)
            throw ModelError("kernel has wrong size");
        for (PairId z = 0; z < layout_.n_pairs(); ++z) {
            const double r = rewards_[z];
            if (!(r >= 0.0 && r <= 1.0))
                throw ModelError("reward of pair " + std::to_string(z) + " outside [0,1]");
            double sum = 0.0;
            for (StateId s = 0; s < n; ++s) {
                const double p = kernel_[z * n + s];
                if (!(p >= 0.0) || !std::isfinite(p))
                    throw ModelError("negative or non-finite transition in row " + std::to_string(z));
                sum += p;
            }
            if (std::abs(sum - 1.0) > 1e-12)
                throw ModelError("kernel row " + std::to_string(z) + " sums to " + std::to_string(sum));
        }
        if (validation == Validation::full && !is_communicating(layout_, kernel_))
            throw ModelError("model is not communicating");
    }

    PairLayout layout_;
    std::vector<double> rewards_;
    std::vector<double> kernel_;
};

} // namespace regretlab
