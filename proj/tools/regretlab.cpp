// regretlab: run seeded sweeps, classify instances, generate environments,
// and re-run analyses over a finished experiment directory.

#include "regretlab/regretlab.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace fs = std::filesystem;
using namespace regretlab;

namespace {

constexpr int exit_run_failure = 1;
constexpr int exit_bad_input = 2;
constexpr int exit_degenerate = 3;

int cmd_run(const std::string& config_path, unsigned jobs) {
    ExperimentConfig cfg;
    try {
        cfg = load_experiment_config(config_path);
    } catch (const Error& e) {
        std::cerr << "invalid config: " << e.what() << "\n";
        return exit_bad_input;
    }
    try {
        const auto outcome = run_experiment(cfg, jobs, &std::cerr);
        for (const auto& f : outcome.failures)
            std::cerr << "run " << f.run_id << " failed: " << f.message << "\n";
        if (!outcome.failures.empty())
            return exit_run_failure;
        std::cout << outcome.dir.string() << "\n";
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "invalid config: " << e.what() << "\n";
        return exit_bad_input;
    } catch (const ModelError& e) {
        std::cerr << "invalid config: " << e.what() << "\n";
        return exit_bad_input;
    } catch (const std::exception& e) {
        std::cerr << "experiment failed: " << e.what() << "\n";
        return exit_run_failure;
    }
}

int cmd_check(const std::string& instance_path, const std::string& ambient_path) {
    std::optional<Mdp> loaded;
    AmbientSet ambient;
    try {
        loaded = instance_from_json(read_json_file(instance_path));
        ambient = ambient_path.empty() ? AmbientSet::unconstrained(loaded->layout())
                                       : ambient_from_json(read_json_file(ambient_path), *loaded);
    } catch (const Error& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return exit_bad_input;
    }
    const Mdp& m = *loaded;
    if (!ambient.contains(m)) {
        std::cerr << "invalid input: the instance lies outside the ambient set\n";
        return exit_bad_input;
    }
    const ClassificationReport r = classify(m, ambient);
    json out = {{"instance", instance_path},
                {"non_degenerate", r.non_degenerate},
                {"interior", r.interior},
                {"optimal_gain", r.optimal_gain},
                {"diameter", std::isfinite(r.diameter) ? json(r.diameter) : json(nullptr)}};
    if (!r.non_degenerate) {
        out["degeneracy_report"] = r.degeneracy_report;
        out["confusing_set_empty"] = nullptr;
        out["explorative"] = nullptr;
        std::cout << out.dump(2) << "\n";
        std::cerr << "confusing-set test refused: the instance is degenerate (" << r.degeneracy_report << ")\n";
        return exit_degenerate;
    }
    const ConfusingSetResult& c = *r.confusing;
    out["verdict"] = verdict_name(c.verdict);
    out["confusing_set_empty"] = r.confusing_set_empty() ? json(*r.confusing_set_empty()) : json(nullptr);
    out["explorative"] = r.explorative() ? json(*r.explorative()) : json(nullptr);
    out["explorative_criterion"] = "non-empty confusing set (valid for non-degenerate instances)";
    out["best_sup_gain"] = c.best_sup_gain;
    out["candidates_checked"] = c.candidates_checked;
    if (c.witness) {
        out["witness"] = {{"policy", describe_policy(*c.witness_policy)},
                          {"gain", c.witness_gain},
                          {"model", instance_to_json(*c.witness)}};
    }
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_env_gen(const std::string& kind_name, const EnvSpec& args, const std::string& out_path,
                const std::string& ambient_out) {
    const auto kind = parse_env_kind(kind_name);
    if (!kind) {
        std::cerr << "unknown environment `" << kind_name << "`\n";
        return exit_bad_input;
    }
    EnvSpec spec = args;
    spec.kind = *kind;
    try {
        const BuiltEnv env = build(spec);
        write_text_file(out_path, instance_to_json(env.mdp).dump(2) + "\n");
        if (!ambient_out.empty())
            write_text_file(ambient_out, ambient_to_json(env.ambient).dump(2) + "\n");
        std::cerr << env.id << " -> " << out_path << "\n";
        return 0;
    } catch (const Error& e) {
        std::cerr << "bad environment spec: " << e.what() << "\n";
        return exit_bad_input;
    }
}

int cmd_analyze(const std::string& dir, std::optional<std::uint64_t> psi, std::optional<std::uint64_t> window,
                unsigned jobs) {
    try {
        AnalyzeOptions opt;
        opt.jobs = jobs;
        opt.analyses = manifest_analyses(read_json_file(fs::path(dir) / "manifest.json"));
        if (psi || window) {
            if (!psi || !window || *window < 1) {
                std::cerr << "--proxy-psi and --proxy-window (>= 1) go together\n";
                return exit_bad_input;
            }
            opt.analyses.proxy = ProxySpec{*psi, *window};
        }
        analyze_experiment(dir, opt);
        std::cout << dir << "\n";
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return exit_bad_input;
    } catch (const std::exception& e) {
        std::cerr << "analysis failed: " << e.what() << "\n";
        return exit_run_failure;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Regret experiments on average-reward tabular MDPs"};
    app.require_subcommand(1);

    std::string config_path;
    unsigned jobs = default_jobs();
    auto* run = app.add_subcommand("run", "Run every (algorithm, seed) pair of a config");
    run->add_option("config", config_path, "Experiment config (JSON)")->required();
    run->add_option("--jobs,-j", jobs, "Worker threads")->check(CLI::PositiveNumber);

    std::string instance_path, ambient_path;
    auto* check = app.add_subcommand("check", "Classify an instance");
    check->add_option("instance", instance_path, "Instance file (JSON)")->required();
    check->add_option("--ambient", ambient_path, "Ambient set file (JSON); free when omitted");

    std::string kind_name, out_path, ambient_out;
    EnvSpec spec;
    auto* env = app.add_subcommand("env", "Environment tools");
    env->require_subcommand(1);
    auto* gen = env->add_subcommand("gen", "Write an instance file");
    gen->add_option("kind", kind_name, "figure2_left, figure2_right, figure7, riverswim, random-ergodic")->required();
    gen->add_option("--n", spec.n, "RiverSwim length");
    gen->add_option("--states", spec.n_states, "random-ergodic states");
    gen->add_option("--actions", spec.n_actions, "random-ergodic actions per state");
    gen->add_option("--seed", spec.seed, "random-ergodic seed");
    gen->add_option("-o,--output", out_path, "Instance file to write")->required();
    gen->add_option("--ambient-out", ambient_out, "Also write the default ambient set");

    std::string run_dir;
    std::optional<std::uint64_t> psi, window;
    auto* analyze = app.add_subcommand("analyze", "Recompute analysis CSVs of an experiment directory");
    analyze->add_option("run-dir", run_dir, "Experiment directory (contains manifest.json)")->required();
    analyze->add_option("--proxy-psi", psi, "Ignore exploration times before this step");
    analyze->add_option("--proxy-window", window, "Proxy window length in steps");
    analyze->add_option("--jobs,-j", jobs, "Worker threads")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_bad_input;
    }

    if (*run)
        return cmd_run(config_path, jobs);
    if (*check)
        return cmd_check(instance_path, ambient_path);
    if (*gen)
        return cmd_env_gen(kind_name, spec, out_path, ambient_out);
    return cmd_analyze(run_dir, psi, window, jobs);
}
