#pragma once

// Experiment configs, seeded sweeps on a worker pool, and the analysis pass
// over the persisted traces.

#include "regretlab/io.hpp"
#include "regretlab/metrics.hpp"

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <mutex>
#include <set>
#include <thread>

namespace regretlab {

inline constexpr const char* version = "0.1.0";

struct AlgorithmSpec {
    std::string name;
    /// UCYCLE: known kernel, Hoeffding rewards, doubling trick.
    bool ucycle = false;
    Family family = Family::KL;
    double radius_scale = 1.0;
    EpisodeRule rule;
    EviEpsilon evi_epsilon;
};

struct ProxySpec {
    std::uint64_t psi = 0;
    std::uint64_t window = 1;
};

struct AnalysisSet {
    bool regret = false;
    bool visit_regime = false;
    bool exploration_times = false;
    std::optional<ProxySpec> proxy;
};

/// Either a named environment or an instance file with an optional ambient set.
struct EnvSource {
    std::optional<EnvSpec> spec;
    /// random_ergodic only: draw a fresh instance per run, seeded by the run seed.
    bool per_run = false;
    std::filesystem::path instance;
    json ambient;
};

struct ExperimentConfig {
    std::string name;
    EnvSource env;
    std::vector<AlgorithmSpec> algorithms;
    std::uint64_t horizon = 0;
    std::vector<std::uint64_t> seeds;
    std::filesystem::path outputs = "out";
    AnalysisSet analyses;
    /// Sorted-key dump of the config as read.
    std::string canonical;
    std::uint64_t fingerprint = 0;
};

inline std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t x) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
    return buf;
}

namespace detail {

[[noreturn]] inline void bad_field(const std::string& field, const std::string& msg) {
    throw ConfigError("field `" + field + "`: " + msg);
}

inline void only_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!j.is_object())
        bad_field(where, "expected an object");
    for (const auto& [key, value] : j.items()) {
        bool known = false;
        for (const char* a : allowed)
            known |= key == a;
        if (!known)
            bad_field(where.empty() ? key : where + "." + key, "unknown field");
    }
}

template <class T>
T get_field(const json& j, const std::string& key, const std::string& where) {
    const std::string field = where.empty() ? key : where + "." + key;
    if (!j.contains(key))
        bad_field(field, "missing");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        bad_field(field, "has the wrong type");
    }
}

inline bool is_count(const json& v) {
    return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

inline std::uint64_t get_count(const json& j, const std::string& key, const std::string& where) {
    const std::string field = where.empty() ? key : where + "." + key;
    if (!j.contains(key))
        bad_field(field, "missing");
    if (!is_count(j.at(key)))
        bad_field(field, "must be a non-negative integer");
    return j.at(key).get<std::uint64_t>();
}

inline EnvSource parse_env(const json& j, const std::filesystem::path& base) {
    EnvSource src;
    if (j.contains("instance")) {
        only_keys(j, "env", {"instance", "ambient"});
        src.instance = base / get_field<std::string>(j, "instance", "env");
        src.ambient = j.value("ambient", json{{"kind", "free"}});
        if (src.ambient.is_string()) {
            // A file name or a kind.
            const auto text = src.ambient.get<std::string>();
            if (text.ends_with(".json"))
                src.ambient = (base / text).string();
            else
                src.ambient = json{{"kind", text}};
        }
        return src;
    }
    only_keys(j, "env", {"kind", "n", "states", "actions", "seed"});
    const auto kind = parse_env_kind(get_field<std::string>(j, "kind", "env"));
    if (!kind)
        bad_field("env.kind", "unknown environment `" + j.at("kind").get<std::string>() + "`");
    EnvSpec spec;
    spec.kind = *kind;
    if (j.contains("n"))
        spec.n = get_count(j, "n", "env");
    if (j.contains("states"))
        spec.n_states = get_count(j, "states", "env");
    if (j.contains("actions"))
        spec.n_actions = get_count(j, "actions", "env");
    if (j.contains("seed")) {
        if (j.at("seed") == "per_run") {
            if (spec.kind != EnvKind::random_ergodic)
                bad_field("env.seed", "`per_run` applies to random_ergodic only");
            src.per_run = true;
        } else {
            spec.seed = get_count(j, "seed", "env");
        }
    }
    if (spec.kind == EnvKind::riverswim && spec.n < 2)
        bad_field("env.n", "riverswim needs n >= 2");
    if (spec.kind == EnvKind::random_ergodic && (spec.n_states < 2 || spec.n_actions < 1))
        bad_field("env", "random_ergodic needs states >= 2 and actions >= 1");
    src.spec = spec;
    return src;
}

inline AlgorithmSpec parse_algorithm(const json& j, const std::string& where) {
    only_keys(j, where, {"name", "algorithm", "family", "radius_scale", "rule", "evi_epsilon"});
    AlgorithmSpec a;
    a.name = get_field<std::string>(j, "name", where);
    if (a.name.empty() || a.name.find_first_of("/\\") != std::string::npos || a.name == "." || a.name == "..")
        bad_field(where + ".name", "must be a plain directory name");
    const auto algo = j.value("algorithm", std::string("optimistic"));
    if (algo == "ucycle")
        a.ucycle = true;
    else if (algo != "optimistic")
        bad_field(where + ".algorithm", "expected `optimistic` or `ucycle`");
    if (j.contains("family")) {
        const auto f = parse_family(get_field<std::string>(j, "family", where));
        if (!f)
            bad_field(where + ".family", "expected KL, L1 or BERNSTEIN");
        a.family = *f;
    }
    if (j.contains("radius_scale")) {
        a.radius_scale = get_field<double>(j, "radius_scale", where);
        if (!(a.radius_scale > 0.0))
            bad_field(where + ".radius_scale", "must be positive");
    }
    if (j.contains("rule")) {
        json r = j.at("rule");
        if (r.is_string())
            r = json{{"kind", r}};
        const std::string rw = where + ".rule";
        only_keys(r, rw, {"kind", "f_schedule", "c"});
        const auto kind = get_field<std::string>(r, "kind", rw);
        if (kind == "DT") {
            a.rule = EpisodeRule::doubling();
        } else if (kind == "VM") {
            a.rule = EpisodeRule::vanishing();
        } else {
            bad_field(rw + ".kind", "expected DT or VM");
        }
        if (r.contains("f_schedule")) {
            const auto s = parse_schedule(get_field<std::string>(r, "f_schedule", rw));
            if (!s)
                bad_field(rw + ".f_schedule", "expected sqrt_log_over_t, inv_log_sq or const_c");
            a.rule.schedule = *s;
        }
        if (r.contains("c")) {
            a.rule.c = get_field<double>(r, "c", rw);
            if (!(a.rule.c >= 0.0 && a.rule.c <= 1.0))
                bad_field(rw + ".c", "must lie in [0, 1]");
        }
    }
    if (j.contains("evi_epsilon")) {
        const json& e = j.at("evi_epsilon");
        if (e.is_string() && e.get<std::string>() == "one_over_sqrt_tk") {
            a.evi_epsilon = {};
        } else if (e.is_number()) {
            a.evi_epsilon = {EviEpsilon::Mode::fixed, e.get<double>()};
            if (!(a.evi_epsilon.value > 0.0))
                bad_field(where + ".evi_epsilon", "must be positive");
        } else {
            bad_field(where + ".evi_epsilon", "expected a positive number or `one_over_sqrt_tk`");
        }
    }
    return a;
}

inline AnalysisSet parse_analyses(const json& j) {
    if (!j.is_array())
        bad_field("analyses", "expected a list");
    AnalysisSet a;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string where = "analyses[" + std::to_string(i) + "]";
        const json& item = j[i];
        if (item.is_string()) {
            const auto s = item.get<std::string>();
            if (s == "regret")
                a.regret = true;
            else if (s == "visit_regime")
                a.visit_regime = true;
            else if (s == "exploration_times")
                a.exploration_times = true;
            else if (s == "regexp_proxy")
                bad_field(where, "regexp_proxy needs {\"regexp_proxy\": {\"psi\": .., \"window\": ..}}");
            else
                bad_field(where, "unknown analysis `" + s + "`");
            continue;
        }
        only_keys(item, where, {"regexp_proxy"});
        const json& p = item.at("regexp_proxy");
        only_keys(p, where + ".regexp_proxy", {"psi", "window"});
        ProxySpec spec{get_count(p, "psi", where + ".regexp_proxy"), get_count(p, "window", where + ".regexp_proxy")};
        if (spec.window < 1)
            bad_field(where + ".regexp_proxy.window", "must be at least 1");
        a.proxy = spec;
    }
    return a;
}

} // namespace detail

/// `base` resolves relative instance paths.
inline ExperimentConfig parse_experiment_config(const json& j, const std::filesystem::path& base = ".") {
    detail::only_keys(j, "", {"name", "env", "algorithms", "horizon", "seeds", "outputs", "analyses"});
    ExperimentConfig cfg;
    cfg.name = detail::get_field<std::string>(j, "name", "");
    if (cfg.name.empty() || cfg.name.find_first_of("/\\") != std::string::npos || cfg.name == "." || cfg.name == "..")
        detail::bad_field("name", "must be a plain directory name");
    if (!j.contains("env"))
        detail::bad_field("env", "missing");
    cfg.env = detail::parse_env(j.at("env"), base);

    if (!j.contains("algorithms") || !j.at("algorithms").is_array() || j.at("algorithms").empty())
        detail::bad_field("algorithms", "expected a non-empty list");
    std::set<std::string> names;
    for (std::size_t i = 0; i < j.at("algorithms").size(); ++i) {
        const std::string where = "algorithms[" + std::to_string(i) + "]";
        cfg.algorithms.push_back(detail::parse_algorithm(j.at("algorithms")[i], where));
        if (!names.insert(cfg.algorithms.back().name).second)
            detail::bad_field(where + ".name", "duplicate algorithm name `" + cfg.algorithms.back().name + "`");
    }

    cfg.horizon = detail::get_count(j, "horizon", "");
    if (cfg.horizon < 1)
        detail::bad_field("horizon", "must be at least 1");

    if (!j.contains("seeds"))
        detail::bad_field("seeds", "missing");
    const json& seeds = j.at("seeds");
    if (detail::is_count(seeds)) {
        const auto n = seeds.get<std::uint64_t>();
        if (n < 1)
            detail::bad_field("seeds", "need at least one seed");
        for (std::uint64_t s = 0; s < n; ++s)
            cfg.seeds.push_back(s);
    } else if (seeds.is_array() && !seeds.empty()) {
        std::set<std::uint64_t> seen;
        for (std::size_t i = 0; i < seeds.size(); ++i) {
            if (!detail::is_count(seeds[i]))
                detail::bad_field("seeds[" + std::to_string(i) + "]", "must be a non-negative integer");
            const auto s = seeds[i].get<std::uint64_t>();
            if (!seen.insert(s).second)
                detail::bad_field("seeds[" + std::to_string(i) + "]", "duplicate seed " + std::to_string(s));
            cfg.seeds.push_back(s);
        }
    } else {
        detail::bad_field("seeds", "expected a positive count or a non-empty list");
    }

    if (j.contains("outputs"))
        cfg.outputs = detail::get_field<std::string>(j, "outputs", "");
    if (j.contains("analyses"))
        cfg.analyses = detail::parse_analyses(j.at("analyses"));
    if (cfg.analyses.proxy && cfg.analyses.proxy->psi >= cfg.horizon)
        detail::bad_field("analyses", "regexp_proxy psi must be below the horizon");

    cfg.canonical = j.dump();
    cfg.fingerprint = fnv1a(cfg.canonical);
    return cfg;
}

inline ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    try {
        return parse_experiment_config(j, path.parent_path());
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

/// `run_seed` replaces the instance seed of per-run environments.
inline BuiltEnv resolve_env(const EnvSource& src, std::uint64_t run_seed = 0) {
    if (src.spec) {
        EnvSpec spec = *src.spec;
        if (src.per_run)
            spec.seed = run_seed;
        return build(spec);
    }
    Mdp m = instance_from_json(read_json_file(src.instance));
    AmbientSet a = src.ambient.is_string() ? ambient_from_json(read_json_file(src.ambient.get<std::string>()), m)
                                           : ambient_from_json(src.ambient, m);
    return {std::move(m), std::move(a), 0, src.instance.stem().string()};
}

/// Output root: REGRETLAB_OUT when set, else the config's `outputs`.
inline std::filesystem::path output_root(const ExperimentConfig& cfg) {
    if (const char* env = std::getenv("REGRETLAB_OUT"); env && *env)
        return env;
    return cfg.outputs;
}

inline unsigned default_jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

/// Runs fn(i) for i in [0, n) on `jobs` threads. Returns the error text per failed index.
inline std::vector<std::string> parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn) {
    std::vector<std::string> errors(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        }
    };
    const unsigned threads = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, jobs), n));
    std::vector<std::thread> pool;
    for (unsigned k = 1; k < threads; ++k)
        pool.emplace_back(worker);
    worker();
    for (auto& th : pool)
        th.join();
    return errors;
}

inline RunTrace run_algorithm(const AlgorithmSpec& algo, const BuiltEnv& env, const SolveResult& solved,
                              std::uint64_t horizon, std::uint64_t seed) {
    RunConfig rc;
    rc.horizon = horizon;
    rc.seed = seed;
    rc.region = {algo.family, env.ambient, algo.radius_scale};
    rc.rule = algo.rule;
    rc.evi_epsilon = algo.evi_epsilon;
    RunTrace tr = algo.ucycle ? run_ucycle(env.mdp, rc, solved) : run_learner(env.mdp, rc, solved);
    tr.env_id = env.id;
    return tr;
}

struct RunFailure {
    std::string run_id;
    std::string message;
};

struct ExperimentOutcome {
    std::filesystem::path dir;
    std::vector<RunFailure> failures;
};

// ---------------------------------------------------------------------------
// Analysis pass

inline constexpr const char* regret_header = "t,mean,stderr";
inline constexpr const char* proxy_header = "offset,mean_of_max,max_of_mean";
inline constexpr const char* regime_header = "seed,pair,state,action,visits,visits_over_log_t,visits_over_t,regime";
inline constexpr const char* exploration_header = "seed,episode,t_start";

/// Rows of regret.csv: t = 1, every multiple of the stride, and T. The stride keeps the file near 10^4 rows.
inline std::uint64_t regret_stride(std::uint64_t horizon) { return std::max<std::uint64_t>(1, horizon / 10'000); }

namespace detail {

inline std::vector<PartialPolicy> read_policies(const std::filesystem::path& path, std::size_t n_states) {
    const json j = read_json_file(path);
    std::vector<PartialPolicy> out;
    try {
        for (const auto& e : j.at("episodes")) {
            auto choice = e.at("policy").get<std::vector<long>>();
            if (choice.size() != n_states)
                throw AnalysisError(path.string() + ": policy of episode " + std::to_string(out.size()) +
                                    " has the wrong length");
            out.push_back(std::move(choice));
        }
    } catch (const json::exception& e) {
        throw AnalysisError(path.string() + ": " + e.what());
    }
    return out;
}

} // namespace detail

struct AnalyzeOptions {
    AnalysisSet analyses;
    unsigned jobs = 1;
};

/**
 * Reads an experiment directory written by run_experiment() and writes the
 * requested analysis CSVs into each algorithm directory. Seeds are folded in
 * manifest order, so results do not depend on `jobs`.
 */
inline void analyze_experiment(const std::filesystem::path& dir, const AnalyzeOptions& opt) {
    namespace fs = std::filesystem;
    const json manifest = read_json_file(dir / "manifest.json");
    const bool per_run = manifest.value("per_run_instances", false);
    std::vector<std::string> algos;
    std::vector<std::uint64_t> seeds;
    try {
        for (const auto& a : manifest.at("algorithms"))
            algos.push_back(a.get<std::string>());
        seeds = manifest.at("seeds").get<std::vector<std::uint64_t>>();
    } catch (const json::exception& e) {
        throw AnalysisError((dir / "manifest.json").string() + ": " + e.what());
    }
    // One model per seed for per-run instances, otherwise a shared one.
    std::vector<Mdp> models;
    std::vector<SolveResult> solves;
    for (std::size_t i = 0; i < (per_run ? seeds.size() : 1); ++i) {
        const fs::path file = per_run ? dir / "instances" / (std::to_string(seeds[i]) + ".json") : dir / "instance.json";
        models.push_back(instance_from_json(read_json_file(file)));
        solves.push_back(optimal_solve(models.back()));
    }
    const AnalysisSet& want = opt.analyses;
    const bool need_exploration = want.exploration_times || want.proxy;

    auto errors = parallel_for(algos.size(), opt.jobs, [&](std::size_t ai) {
        const fs::path adir = dir / algos[ai];
        std::vector<double> sum, sumsq;
        std::optional<ProxyAccumulator> proxy;
        if (want.proxy)
            proxy.emplace(want.proxy->window, want.proxy->psi);
        std::string regimes = std::string(regime_header) + "\n";
        std::string explorations = std::string(exploration_header) + "\n";
        std::uint64_t horizon = 0;

        for (std::size_t si = 0; si < seeds.size(); ++si) {
            const std::uint64_t seed = seeds[si];
            const Mdp& m = models[per_run ? si : 0];
            const SolveResult& solved = solves[per_run ? si : 0];
            const std::string stem = std::to_string(seed);
            const TraceTable tab = read_trace_csv(adir / (stem + ".csv"));
            if (horizon == 0)
                horizon = tab.horizon();
            if (tab.horizon() != horizon || horizon == 0)
                throw AnalysisError((adir / (stem + ".csv")).string() + ": horizon differs from the other seeds");
            for (std::uint64_t t = 0; t < horizon; ++t)
                if (tab.state[t] >= m.n_states() || tab.action[t] >= m.layout().n_actions(tab.state[t]))
                    throw AnalysisError((adir / (stem + ".csv")).string() + ": step " + std::to_string(t + 1) +
                                        " names a pair outside the instance");

            if (want.regret) {
                if (sum.empty()) {
                    sum.assign(horizon, 0.0);
                    sumsq.assign(horizon, 0.0);
                }
                double r = 0.0;
                for (std::uint64_t t = 0; t < horizon; ++t) {
                    r += tab.gap[t];
                    sum[t] += r;
                    sumsq[t] += r * r;
                }
            }

            std::vector<std::uint64_t> times;
            if (need_exploration) {
                const auto policies = detail::read_policies(adir / (stem + ".policies.json"), m.n_states());
                std::vector<std::uint64_t> starts;
                std::vector<StateId> states;
                for (std::uint64_t t = 1; t <= horizon; ++t)
                    if (tab.episode_start[t - 1]) {
                        starts.push_back(t);
                        states.push_back(tab.state[t - 1]);
                    }
                if (starts.size() != policies.size())
                    throw AnalysisError((adir / (stem + ".policies.json")).string() +
                                        ": episode count differs from the trace");
                const ExplorationLog log = detect_exploration_episodes(m, solved, starts, states, policies);
                times = log.t_starts;
                for (std::size_t i = 0; i < log.episodes.size(); ++i)
                    explorations += stem + "," + std::to_string(log.episodes[i]) + "," +
                                    std::to_string(log.t_starts[i]) + "\n";
            }
            if (proxy)
                proxy->add({tab.gap, times});

            if (want.visit_regime) {
                std::vector<PairId> pairs(horizon);
                for (std::uint64_t t = 0; t < horizon; ++t)
                    pairs[t] = m.pair(tab.state[t], tab.action[t]);
                for (const PairRegime& r : visit_regime(m.layout(), pairs))
                    regimes += stem + "," + std::to_string(r.pair) + "," +
                               std::to_string(m.layout().state_of(r.pair)) + "," +
                               std::to_string(m.layout().action_of(r.pair)) + "," + std::to_string(r.visits) + "," +
                               format_double(r.per_log_t) + "," + format_double(r.per_t) + "," +
                               regime_name(r.regime) + "\n";
            }
        }

        if (want.regret) {
            std::string out = std::string(regret_header) + "\n";
            const double n = static_cast<double>(seeds.size());
            const std::uint64_t stride = regret_stride(horizon);
            for (std::uint64_t t = 1; t <= horizon; ++t) {
                if (t != 1 && t % stride != 0 && t != horizon)
                    continue;
                const double mean = sum[t - 1] / n;
                const double var = n > 1 ? std::max(0.0, (sumsq[t - 1] - n * mean * mean) / (n - 1)) : 0.0;
                out += std::to_string(t) + "," + format_double(mean) + "," + format_double(std::sqrt(var / n)) + "\n";
            }
            write_text_file(adir / "regret.csv", out);
        }
        if (proxy) {
            const ProxyResult r = proxy->result();
            std::string out = std::string(proxy_header) + "\n";
            for (std::size_t o = 0; o < r.mean_of_max.size(); ++o)
                out += std::to_string(o + 1) + "," + format_double(r.mean_of_max[o]) + "," +
                       format_double(r.max_of_mean[o]) + "\n";
            write_text_file(adir / "regexp_proxy.csv", out);
        }
        if (want.visit_regime)
            write_text_file(adir / "visit_regime.csv", regimes);
        if (want.exploration_times)
            write_text_file(adir / "exploration_times.csv", explorations);
    });
    for (std::size_t i = 0; i < errors.size(); ++i)
        if (!errors[i].empty())
            throw AnalysisError(algos[i] + ": " + errors[i]);
}

// ---------------------------------------------------------------------------
// Sweeps

/// Runs every (algorithm, seed) pair, writes traces and the manifest, then the configured analyses.
inline ExperimentOutcome run_experiment(const ExperimentConfig& cfg, unsigned jobs, std::ostream* log = nullptr) {
    namespace fs = std::filesystem;
    using clock = std::chrono::steady_clock;
    const auto started = clock::now();

    const bool per_run = cfg.env.per_run;
    std::vector<BuiltEnv> envs;
    std::vector<SolveResult> solves;
    for (std::size_t i = 0; i < (per_run ? cfg.seeds.size() : 1); ++i) {
        envs.push_back(resolve_env(cfg.env, cfg.seeds[i]));
        solves.push_back(optimal_solve(envs.back().mdp));
    }
    for (const auto& a : cfg.algorithms)
        for (const auto& env : envs)
            if (a.ucycle && !env.mdp.is_deterministic())
                throw ConfigError("algorithm `" + a.name + "`: UCYCLE requires deterministic transitions");

    ExperimentOutcome outcome;
    outcome.dir = output_root(cfg) / cfg.name;
    fs::create_directories(outcome.dir);
    if (per_run)
        fs::create_directories(outcome.dir / "instances");
    for (std::size_t i = 0; i < envs.size(); ++i) {
        const fs::path stem = per_run ? outcome.dir / "instances" / std::to_string(cfg.seeds[i]) : outcome.dir / "instance";
        write_text_file(stem.string() + ".json", instance_to_json(envs[i].mdp).dump(2) + "\n");
        write_text_file(per_run ? stem.string() + ".ambient.json" : (outcome.dir / "ambient.json").string(),
                        ambient_to_json(envs[i].ambient).dump(2) + "\n");
    }
    for (const auto& a : cfg.algorithms)
        fs::create_directories(outcome.dir / a.name);

    const std::size_t n_runs = cfg.algorithms.size() * cfg.seeds.size();
    std::vector<double> wall(n_runs, 0.0);
    std::vector<std::size_t> episodes(n_runs, 0);
    std::mutex log_mutex;
    const auto errors = parallel_for(n_runs, jobs, [&](std::size_t i) {
        const AlgorithmSpec& algo = cfg.algorithms[i / cfg.seeds.size()];
        const std::size_t si = i % cfg.seeds.size();
        const std::uint64_t seed = cfg.seeds[si];
        const auto t0 = clock::now();
        RunTrace tr = run_algorithm(algo, envs[per_run ? si : 0], solves[per_run ? si : 0], cfg.horizon, seed);
        tr.config_fingerprint = cfg.fingerprint;
        const fs::path base = outcome.dir / algo.name / std::to_string(seed);
        write_trace_csv(tr, base.string() + ".csv");
        write_text_file(base.string() + ".episodes.csv", episodes_csv(tr));
        write_text_file(base.string() + ".policies.json", policies_json(tr).dump() + "\n");
        wall[i] = std::chrono::duration<double>(clock::now() - t0).count();
        episodes[i] = tr.episodes.size();
        if (log) {
            std::lock_guard lock(log_mutex);
            *log << algo.name << "/" << seed << ": " << tr.episodes.size() << " episodes, regret "
                 << format_double(regret_curve(tr).back()) << ", " << format_double(wall[i]) << " s\n";
        }
    });

    json runs = json::array();
    for (std::size_t i = 0; i < n_runs; ++i) {
        const std::string run_id = cfg.algorithms[i / cfg.seeds.size()].name + "/" +
                                   std::to_string(cfg.seeds[i % cfg.seeds.size()]);
        if (!errors[i].empty())
            outcome.failures.push_back({run_id, errors[i]});
        runs.push_back({{"run", run_id},
                        {"trace", run_id + ".csv"},
                        {"episodes", episodes[i]},
                        {"wall_seconds", wall[i]},
                        {"ok", errors[i].empty()}});
    }
    json algos = json::array();
    for (const auto& a : cfg.algorithms)
        algos.push_back(a.name);
    json manifest = {{"name", cfg.name},
                     {"version", version},
                     {"config_fingerprint", hex64(cfg.fingerprint)},
                     {"config", json::parse(cfg.canonical)},
                     {"env_id", per_run ? "random_ergodic(" + std::to_string(envs[0].mdp.n_states()) + "," +
                                              std::to_string(cfg.env.spec->n_actions) + ",per_run)"
                                        : envs[0].id},
                     {"per_run_instances", per_run},
                     {"optimal_gain", per_run ? json(nullptr) : json(solves[0].optimal_gain())},
                     {"horizon", cfg.horizon},
                     {"algorithms", algos},
                     {"seeds", cfg.seeds},
                     {"jobs", jobs},
                     {"runs", runs}};

    if (outcome.failures.empty()) {
        const AnalysisSet& a = cfg.analyses;
        if (a.regret || a.visit_regime || a.exploration_times || a.proxy) {
            write_text_file(outcome.dir / "manifest.json", manifest.dump(2) + "\n");
            analyze_experiment(outcome.dir, {a, jobs});
        }
    }
    manifest["wall_seconds"] = std::chrono::duration<double>(clock::now() - started).count();
    write_text_file(outcome.dir / "manifest.json", manifest.dump(2) + "\n");
    return outcome;
}

/// Analyses recorded in a manifest's config.
inline AnalysisSet manifest_analyses(const json& manifest) {
    try {
        const json& c = manifest.at("config");
        return c.contains("analyses") ? detail::parse_analyses(c.at("analyses")) : AnalysisSet{};
    } catch (const json::exception& e) {
        throw AnalysisError(std::string("manifest: ") + e.what());
    }
}

} // namespace regretlab
