#include "ctd3/config.hpp"

#include <charconv>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "text_util.hpp"

namespace ctd3 {

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const char* expected) {
    throw std::invalid_argument("config: key '" + key + "' expects " + expected +
                                ", got '" + value + "'");
}

double to_double(const std::string& key, const std::string& value) {
    double v = 0.0;
    const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
    if (res.ec != std::errc() || res.ptr != value.data() + value.size())
        bad_value(key, value, "a number");
    return v;
}

std::uint64_t to_count(const std::string& key, const std::string& value) {
    std::uint64_t v = 0;
    const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
    if (res.ec != std::errc() || res.ptr != value.data() + value.size())
        bad_value(key, value, "a non-negative integer");
    return v;
}

bool to_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    bad_value(key, value, "true or false");
}

std::vector<std::size_t> to_sizes(const std::string& key, const std::string& value) {
    std::vector<std::size_t> out;
    std::size_t pos = 0;
    while (pos <= value.size()) {
        const auto comma = value.find(',', pos);
        const std::string item =
            trim(value.substr(pos, comma == std::string::npos ? value.size() - pos
                                                              : comma - pos));
        if (!item.empty()) out.push_back(to_count(key, item));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return out;
}

std::string join_sizes(const std::vector<std::size_t>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(v[i]);
    }
    return out;
}

} // namespace

void set_config_value(RunConfig& cfg, const std::string& section, const std::string& key,
                      const std::string& value) {
    if (section == "run") {
        if (key == "env") cfg.env_id = value;
        else if (key == "seed") cfg.seed = to_count(key, value);
        else if (key == "steps") cfg.total_steps = to_count(key, value);
        else if (key == "eval_interval") cfg.eval_interval = to_count(key, value);
        else if (key == "eval_episodes") cfg.eval_episodes = to_count(key, value);
        else if (key == "out") cfg.out_dir = value;
        else
            throw std::invalid_argument("config: unknown key '" + key + "' in [run]");
        return;
    }
    if (section == "agent") {
        AgentConfig& a = cfg.agent;
        if (key == "gamma_q") a.gamma_q = to_double(key, value);
        else if (key == "tau") a.tau = to_double(key, value);
        else if (key == "policy_delay") a.policy_delay = to_count(key, value);
        else if (key == "explore_noise") a.explore_noise = to_double(key, value);
        else if (key == "target_noise") a.target_noise = to_double(key, value);
        else if (key == "noise_clip") a.noise_clip = to_double(key, value);
        else if (key == "batch_size") a.batch_size = to_count(key, value);
        else if (key == "gamma_d0") a.gamma_d0 = to_double(key, value);
        else if (key == "gamma_d_half_life") a.gamma_d_half_life = to_count(key, value);
        else if (key == "cutoff") a.cutoff = to_double(key, value);
        else if (key == "adaptive_cutoff") a.adaptive_cutoff = to_bool(key, value);
        else if (key == "cutoff_quantile") a.cutoff_quantile = to_double(key, value);
        else if (key == "lr_actor") a.lr_actor = to_double(key, value);
        else if (key == "lr_critic") a.lr_critic = to_double(key, value);
        else if (key == "lr_director") a.lr_director = to_double(key, value);
        else if (key == "adcf") a.adcf = to_bool(key, value);
        else if (key == "idem") a.idem = to_bool(key, value);
        else if (key == "warmup") a.warmup = to_count(key, value);
        else if (key == "hidden") a.hidden = to_sizes(key, value);
        else if (key == "main_capacity") a.main_capacity = to_count(key, value);
        else if (key == "side_capacity") a.side_capacity = to_count(key, value);
        else if (key == "literal_target_schedule")
            a.literal_target_schedule = to_bool(key, value);
        else if (key == "single_critic_per_step")
            a.single_critic_per_step = to_bool(key, value);
        else if (key == "recompute_critic_actions")
            a.recompute_critic_actions = to_bool(key, value);
        else
            throw std::invalid_argument("config: unknown key '" + key + "' in [agent]");
        return;
    }
    throw std::invalid_argument("config: unknown section [" + section + "]");
}

RunConfig parse_run_config(std::istream& in) {
    return parse_run_config(in, RunConfig{});
}

RunConfig parse_run_config(std::istream& in, RunConfig start) {
    RunConfig cfg = std::move(start);
    std::string line;
    std::string section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        try {
            if (t.front() == '[') {
                if (t.back() != ']')
                    throw std::invalid_argument("config: unterminated section header '" + t +
                                                "'");
                section = trim(t.substr(1, t.size() - 2));
                if (section != "run" && section != "agent")
                    throw std::invalid_argument("config: unknown section [" + section + "]");
                continue;
            }
            const auto eq = t.find('=');
            if (eq == std::string::npos)
                throw std::invalid_argument("config: expected 'key = value', got '" + t + "'");
            const std::string key = trim(t.substr(0, eq));
            const std::string value = trim(t.substr(eq + 1));
            if (key.empty())
                throw std::invalid_argument("config: empty key before '='");
            if (section.empty())
                throw std::invalid_argument("config: key '" + key +
                                            "' appears before any [run] or [agent] section");
            set_config_value(cfg, section, key, value);
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return cfg;
}

void write_run_config(std::ostream& out, const RunConfig& cfg) {
    char buf[40];
    auto d = [&](double v) { return std::string(format_double(buf, v)); };
    auto b = [](bool v) { return v ? "true" : "false"; };

    out << "[run]\n";
    out << "env = " << cfg.env_id << '\n';
    out << "seed = " << cfg.seed << '\n';
    out << "steps = " << cfg.total_steps << '\n';
    out << "eval_interval = " << cfg.eval_interval << '\n';
    out << "eval_episodes = " << cfg.eval_episodes << '\n';
    out << "out = " << cfg.out_dir << '\n';
    out << '\n';

    const AgentConfig& a = cfg.agent;
    out << "[agent]\n";
    out << "gamma_q = " << d(a.gamma_q) << '\n';
    out << "tau = " << d(a.tau) << '\n';
    out << "policy_delay = " << a.policy_delay << '\n';
    out << "explore_noise = " << d(a.explore_noise) << '\n';
    out << "target_noise = " << d(a.target_noise) << '\n';
    out << "noise_clip = " << d(a.noise_clip) << '\n';
    out << "batch_size = " << a.batch_size << '\n';
    out << "gamma_d0 = " << d(a.gamma_d0) << '\n';
    out << "gamma_d_half_life = " << a.gamma_d_half_life << '\n';
    out << "cutoff = " << d(a.cutoff) << '\n';
    out << "adaptive_cutoff = " << b(a.adaptive_cutoff) << '\n';
    out << "cutoff_quantile = " << d(a.cutoff_quantile) << '\n';
    out << "lr_actor = " << d(a.lr_actor) << '\n';
    out << "lr_critic = " << d(a.lr_critic) << '\n';
    out << "lr_director = " << d(a.lr_director) << '\n';
    out << "adcf = " << b(a.adcf) << '\n';
    out << "idem = " << b(a.idem) << '\n';
    out << "warmup = " << a.warmup << '\n';
    out << "hidden = " << join_sizes(a.hidden) << '\n';
    out << "main_capacity = " << a.main_capacity << '\n';
    out << "side_capacity = " << a.side_capacity << '\n';
    out << "literal_target_schedule = " << b(a.literal_target_schedule) << '\n';
    out << "single_critic_per_step = " << b(a.single_critic_per_step) << '\n';
    out << "recompute_critic_actions = " << b(a.recompute_critic_actions) << '\n';
}

} // namespace ctd3
