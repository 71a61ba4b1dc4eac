#pragma once

// File formats: JSON instances and ambient sets, CSV traces and summaries.

#include "regretlab/learner.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace regretlab {

using json = nlohmann::json;

/// Shortest exact decimal form used in every CSV: 17 significant digits.
inline std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw ConfigError("cannot write " + path.string());
    out << text;
    if (!out)
        throw ConfigError("write failed: " + path.string());
}

inline json instance_to_json(const Mdp& m) {
    json j;
    j["states"] = m.n_states();
    j["actions"] = std::vector<std::size_t>(m.layout().actions_per_state().begin(),
                                            m.layout().actions_per_state().end());
    j["rewards"] = std::vector<double>(m.rewards().begin(), m.rewards().end());
    json rows = json::array();
    for (PairId z = 0; z < m.n_pairs(); ++z)
        rows.push_back(std::vector<double>(m.row(z).begin(), m.row(z).end()));
    j["kernel"] = rows;
    return j;
}

inline Mdp instance_from_json(const json& j) {
    try {
        const auto states = j.at("states").get<std::size_t>();
        auto actions = j.at("actions").get<std::vector<std::size_t>>();
        if (actions.size() != states)
            throw ModelError("`actions` lists " + std::to_string(actions.size()) + " states, `states` is " +
                             std::to_string(states));
        return Mdp(std::move(actions), j.at("rewards").get<std::vector<double>>(),
                   j.at("kernel").get<std::vector<std::vector<double>>>());
    } catch (const json::exception& e) {
        throw ModelError(std::string("malformed instance: ") + e.what());
    }
}

inline json ambient_to_json(const AmbientSet& a) {
    json j;
    json bounds = json::array(), supports = json::array();
    for (std::size_t z = 0; z < a.reward_bounds.size(); ++z) {
        bounds.push_back({a.reward_bounds[z].first, a.reward_bounds[z].second});
        if (a.is_free(z)) {
            supports.push_back("free");
        } else {
            json states = json::array();
            for (StateId s = 0; s < a.support[z].size(); ++s)
                if (a.support[z][s])
                    states.push_back(s);
            supports.push_back(states);
        }
    }
    j["reward_bounds"] = bounds;
    j["kernel_support"] = supports;
    return j;
}

/**
 * Either {"kind": "free" | "fixed_kernel"} or explicit per-pair
 * "reward_bounds" ([lo, hi]) and "kernel_support" ("free" or a state list).
 */
inline AmbientSet ambient_from_json(const json& j, const Mdp& m) {
    try {
        if (j.contains("kind")) {
            const auto kind = j.at("kind").get<std::string>();
            if (kind == "free")
                return AmbientSet::unconstrained(m.layout());
            if (kind == "fixed_kernel")
                return AmbientSet::fixed_kernel(m);
            throw ConfigError("unknown ambient kind `" + kind + "`");
        }
        AmbientSet a = AmbientSet::unconstrained(m.layout());
        if (j.contains("reward_bounds")) {
            const auto& b = j.at("reward_bounds");
            if (b.size() != m.n_pairs())
                throw ConfigError("`reward_bounds` needs one interval per pair");
            for (std::size_t z = 0; z < m.n_pairs(); ++z)
                a.reward_bounds[z] = {b[z].at(0).get<double>(), b[z].at(1).get<double>()};
        }
        if (j.contains("kernel_support")) {
            const auto& k = j.at("kernel_support");
            if (k.size() != m.n_pairs())
                throw ConfigError("`kernel_support` needs one entry per pair");
            for (std::size_t z = 0; z < m.n_pairs(); ++z) {
                if (k[z].is_string() && k[z].get<std::string>() == "free")
                    continue;
                std::fill(a.support[z].begin(), a.support[z].end(), 0);
                for (auto s : k[z].get<std::vector<std::size_t>>()) {
                    if (s >= m.n_states())
                        throw ConfigError("kernel_support of pair " + std::to_string(z) + " names state " +
                                          std::to_string(s));
                    a.support[z][s] = 1;
                }
            }
        }
        a.validate(m.layout());
        return a;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed ambient set: ") + e.what());
    }
}

inline constexpr const char* trace_header = "t,state,action,gap,episode,episode_start,optimistic_gain";
inline constexpr const char* episodes_header = "episode,t_start,policy_hash,optimistic_gain";

inline void write_trace_csv(const RunTrace& trace, const std::filesystem::path& path) {
    std::FILE* f = std::fopen(path.string().c_str(), "wb");
    if (!f)
        throw ConfigError("cannot write " + path.string());
    std::vector<char> buffer(1 << 20);
    std::setvbuf(f, buffer.data(), _IOFBF, buffer.size());
    std::vector<std::string> gap_text, gain_text;
    for (double g : trace.gap_table)
        gap_text.push_back(format_double(g));
    for (const auto& e : trace.episodes)
        gain_text.push_back(format_double(e.optimistic_gain));
    std::fprintf(f, "%s\n", trace_header);
    for (std::uint64_t t = 1; t <= trace.horizon(); ++t) {
        const auto& r = trace.steps[t - 1];
        std::fprintf(f, "%llu,%u,%u,%s,%u,%d,%s\n", static_cast<unsigned long long>(t), r.state, r.action,
                     gap_text[trace.pair(t)].c_str(), r.episode, trace.episode_start(t) ? 1 : 0,
                     gain_text[r.episode].c_str());
    }
    const bool failed = std::ferror(f) != 0;
    std::fclose(f);
    if (failed)
        throw ConfigError("write failed: " + path.string());
}

inline std::string episodes_csv(const RunTrace& trace) {
    std::ostringstream os;
    os << episodes_header << '\n';
    for (std::size_t k = 0; k < trace.episodes.size(); ++k) {
        const auto& e = trace.episodes[k];
        os << k << ',' << e.t_start << ',' << e.policy_hash << ',' << format_double(e.optimistic_gain) << '\n';
    }
    return os.str();
}

inline json policies_json(const RunTrace& trace) {
    json eps = json::array();
    for (std::size_t k = 0; k < trace.episodes.size(); ++k)
        eps.push_back({{"episode", k}, {"t_start", trace.episodes[k].t_start}, {"policy", trace.episodes[k].policy.choice}});
    return {{"env_id", trace.env_id},
            {"actions", std::vector<std::size_t>(trace.layout.actions_per_state().begin(),
                                                 trace.layout.actions_per_state().end())},
            {"episodes", eps}};
}

/// Column view of a trace CSV.
struct TraceTable {
    std::vector<std::uint32_t> state, action, episode;
    std::vector<char> episode_start;
    std::vector<double> gap, optimistic_gain;

    std::uint64_t horizon() const noexcept { return gap.size(); }
};

inline TraceTable read_trace_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw AnalysisError("cannot open " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto eol = text.find('\n');
    if (eol == std::string::npos || text.compare(0, eol, trace_header) != 0)
        throw AnalysisError(path.string() + ": unexpected header");
    TraceTable tab;
    const char* p = text.c_str() + eol + 1;
    const char* end = text.c_str() + text.size();
    std::uint64_t expected = 1;
    while (p < end) {
        char* q;
        const auto t = std::strtoull(p, &q, 10);
        if (q == p || *q != ',' || t != expected)
            throw AnalysisError(path.string() + ": malformed row " + std::to_string(expected));
        tab.state.push_back(static_cast<std::uint32_t>(std::strtoul(q + 1, &q, 10)));
        tab.action.push_back(static_cast<std::uint32_t>(std::strtoul(q + 1, &q, 10)));
        tab.gap.push_back(std::strtod(q + 1, &q));
        tab.episode.push_back(static_cast<std::uint32_t>(std::strtoul(q + 1, &q, 10)));
        tab.episode_start.push_back(static_cast<char>(std::strtol(q + 1, &q, 10)));
        tab.optimistic_gain.push_back(std::strtod(q + 1, &q));
        if (*q == '\r')
            ++q;
        if (*q != '\n' && q != end)
            throw AnalysisError(path.string() + ": malformed row " + std::to_string(expected));
        p = q + 1;
        ++expected;
    }
    return tab;
}

} // namespace regretlab
