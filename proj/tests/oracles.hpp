#pragma once

// Reference computations that share no code with the library's solvers.

#include "regretlab/mdp.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

using regretlab::Mdp;
using regretlab::Policy;

inline Eigen::MatrixXd transition_matrix(const Mdp& m, const Policy& pi) {
    const auto n = static_cast<Eigen::Index>(m.n_states());
    Eigen::MatrixXd p(n, n);
    for (Eigen::Index s = 0; s < n; ++s)
        for (Eigen::Index s2 = 0; s2 < n; ++s2)
            p(s, s2) = m.row(m.pair(static_cast<std::size_t>(s), pi(static_cast<std::size_t>(s))))[static_cast<std::size_t>(s2)];
    return p;
}

/// Cesaro limit matrix by repeated squaring of the lazy chain (I + P)/2.
inline Eigen::MatrixXd limit_matrix(const Eigen::MatrixXd& p) {
    Eigen::MatrixXd a = 0.5 * (Eigen::MatrixXd::Identity(p.rows(), p.cols()) + p);
    for (int i = 0; i < 80; ++i) {
        a = a * a;
        for (Eigen::Index r = 0; r < a.rows(); ++r)
            a.row(r) /= a.row(r).sum();
    }
    return a;
}

inline std::vector<double> gain(const Mdp& m, const Policy& pi) {
    const auto n = static_cast<Eigen::Index>(m.n_states());
    Eigen::VectorXd r(n);
    for (Eigen::Index s = 0; s < n; ++s)
        r(s) = m.reward(m.pair(static_cast<std::size_t>(s), pi(static_cast<std::size_t>(s))));
    Eigen::VectorXd g = limit_matrix(transition_matrix(m, pi)) * r;
    return {g.data(), g.data() + n};
}

/// max over deterministic policies of the gain at every state.
inline std::vector<double> brute_force_optimal_gain(const Mdp& m) {
    std::vector<double> best(m.n_states(), -1.0);
    regretlab::for_each_policy(regretlab::all_actions(m.layout()), [&](const Policy& pi) {
        const auto g = gain(m, pi);
        for (std::size_t s = 0; s < g.size(); ++s)
            best[s] = std::max(best[s], g[s]);
    });
    return best;
}

/// Policies whose gain is maximal from every state, within 1e-9.
inline std::vector<Policy> optimal_policies(const Mdp& m) {
    const auto best = brute_force_optimal_gain(m);
    std::vector<Policy> out;
    regretlab::for_each_policy(regretlab::all_actions(m.layout()), [&](const Policy& pi) {
        const auto g = gain(m, pi);
        for (std::size_t s = 0; s < g.size(); ++s)
            if (g[s] < best[s] - 1e-9)
                return;
        out.push_back(pi);
    });
    return out;
}

/// Grid over the simplex {q : q_i = k_i / res}; calls fn(q) for every point.
inline void simplex_grid(std::size_t dim, int res, const std::function<void(const std::vector<int>&)>& fn) {
    std::vector<int> k(dim, 0);
    std::function<void(std::size_t, int)> rec = [&](std::size_t i, int left) {
        if (i + 1 == dim) {
            k[i] = left;
            fn(k);
            return;
        }
        for (int x = 0; x <= left; ++x) {
            k[i] = x;
            rec(i + 1, left - x);
        }
    };
    rec(0, res);
}

enum class Constraint { kl, l1, box };

/**
 * Best q.v over grid points satisfying the region constraint around p_hat.
 * KL uses a table of log(k / res).
 */
inline double grid_max(const std::vector<double>& p_hat, const std::vector<double>& v, Constraint c, double radius,
                       int res, const std::vector<double>& lower = {}, const std::vector<double>& upper = {}) {
    std::vector<double> log_table(static_cast<std::size_t>(res) + 1);
    for (int k = 0; k <= res; ++k)
        log_table[static_cast<std::size_t>(k)] = k ? std::log(static_cast<double>(k) / res) : -INFINITY;
    double entropy = 0.0;
    for (double p : p_hat)
        if (p > 0.0)
            entropy += p * std::log(p);
    double best = -INFINITY;
    simplex_grid(p_hat.size(), res, [&](const std::vector<int>& k) {
        bool ok = true;
        double value = 0.0;
        switch (c) {
        case Constraint::kl: {
            double cross = 0.0;
            for (std::size_t i = 0; i < k.size(); ++i)
                if (p_hat[i] > 0.0) {
                    if (k[i] == 0) {
                        ok = false;
                        break;
                    }
                    cross += p_hat[i] * log_table[static_cast<std::size_t>(k[i])];
                }
            ok = ok && entropy - cross <= radius;
            break;
        }
        case Constraint::l1: {
            double l1 = 0.0;
            for (std::size_t i = 0; i < k.size(); ++i)
                l1 += std::abs(static_cast<double>(k[i]) / res - p_hat[i]);
            ok = l1 <= radius;
            break;
        }
        case Constraint::box:
            for (std::size_t i = 0; i < k.size() && ok; ++i) {
                const double q = static_cast<double>(k[i]) / res;
                ok = q >= lower[i] && q <= upper[i];
            }
            break;
        }
        if (!ok)
            return;
        for (std::size_t i = 0; i < k.size(); ++i)
            value += static_cast<double>(k[i]) / res * v[i];
        best = std::max(best, value);
    });
    return best;
}

/// Mean and batch-means standard error of a long correlated sequence.
struct BatchMeans {
    double mean;
    double stderr_;
};

inline BatchMeans batch_means(const std::vector<double>& x, std::size_t batches = 100) {
    const std::size_t size = x.size() / batches;
    std::vector<double> means(batches, 0.0);
    double total = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
        for (std::size_t i = 0; i < size; ++i)
            means[b] += x[b * size + i];
        means[b] /= static_cast<double>(size);
        total += means[b];
    }
    const double mean = total / static_cast<double>(batches);
    double var = 0.0;
    for (double mb : means)
        var += (mb - mean) * (mb - mean);
    var /= static_cast<double>(batches - 1);
    return {mean, std::sqrt(var / static_cast<double>(batches))};
}

/// Random model with dense kernels drawn from std::mt19937_64 (independent of the library's generator).
inline Mdp random_model(std::size_t ns, std::size_t na, std::mt19937_64& rng, bool sparse = false) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    while (true) {
        std::vector<std::vector<double>> rows;
        std::vector<double> rewards;
        for (std::size_t z = 0; z < ns * na; ++z) {
            rewards.push_back(unif(rng));
            std::vector<double> row(ns);
            double total = 0.0;
            for (auto& x : row) {
                x = (sparse && unif(rng) < 0.5) ? 0.0 : -std::log(1.0 - unif(rng));
                total += x;
            }
            if (total == 0.0) {
                row[z % ns] = 1.0;
                total = 1.0;
            }
            for (auto& x : row)
                x /= total;
            rows.push_back(row);
        }
        try {
            return Mdp(std::vector<std::size_t>(ns, na), rewards, rows);
        } catch (const regretlab::ModelError&) {
            continue;
        }
    }
}

inline Policy random_policy(const Mdp& m, std::mt19937_64& rng) {
    Policy pi;
    for (std::size_t s = 0; s < m.n_states(); ++s)
        pi.choice.push_back(std::uniform_int_distribution<std::size_t>(0, m.n_actions(s) - 1)(rng));
    return pi;
}

/// Full-support kernels and rewards in (0.05, 0.95).
inline Mdp interior_model(std::size_t ns, std::size_t na, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.05, 0.95), w(0.1, 1.0);
    std::vector<double> rewards;
    std::vector<std::vector<double>> rows;
    for (std::size_t z = 0; z < ns * na; ++z) {
        rewards.push_back(u(rng));
        std::vector<double> row(ns);
        double total = 0.0;
        for (auto& x : row)
            total += x = w(rng);
        for (auto& x : row)
            x /= total;
        rows.push_back(row);
    }
    return Mdp(std::vector<std::size_t>(ns, na), rewards, rows);
}

} // namespace oracle
