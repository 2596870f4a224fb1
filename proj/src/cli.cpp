#include "ctd3/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "ctd3/agent.hpp"
#include "ctd3/config.hpp"
#include "ctd3/env.hpp"
#include "ctd3/harness.hpp"
#include "ctd3/nn.hpp"
#include "ctd3/replay.hpp"
#include "ctd3/rng.hpp"
#include "text_util.hpp"

namespace ctd3 {

namespace {

// Options shared by train and ablate. Option pointers are kept so overrides
// apply only when the flag was actually given; file values win otherwise.
struct CommonOpts {
    std::string config_path;
    std::string env_id;
    std::uint64_t seed = 0;
    std::uint64_t steps = 0;
    bool adcf = true;
    bool idem = true;
    double cutoff = 0.0;
    std::string out_dir;

    CLI::Option* config = nullptr;
    CLI::Option* env = nullptr;
    CLI::Option* seed_opt = nullptr;
    CLI::Option* steps_opt = nullptr;
    CLI::Option* adcf_opt = nullptr;
    CLI::Option* idem_opt = nullptr;
    CLI::Option* cutoff_opt = nullptr;
    CLI::Option* out = nullptr;
};

void add_common_options(CLI::App& sub, CommonOpts& o) {
    o.config = sub.add_option("--config", o.config_path,
                              "config file (`key = value` under [run]/[agent])");
    o.env = sub.add_option("--env", o.env_id, "environment id: pendulum or pointmass");
    o.seed_opt = sub.add_option("--seed", o.seed, "run seed");
    o.steps_opt = sub.add_option("--steps", o.steps, "total environment steps");
    o.adcf_opt = sub.add_flag("--adcf,!--no-adcf", o.adcf, "director term in the actor objective");
    o.idem_opt = sub.add_flag("--idem,!--no-idem", o.idem, "averaged-min four-target rule");
    o.cutoff_opt = sub.add_option("--cutoff", o.cutoff, "reward cutoff between high and low");
    o.out = sub.add_option("--out", o.out_dir, "output directory");
}

std::uint64_t seed_from_env(const char* text) {
    std::string_view sv(text);
    std::uint64_t value = 0;
    const auto [ptr, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), value);
    if (ec != std::errc{} || ptr != sv.data() + sv.size())
        throw std::invalid_argument("ADC_SEED must be a non-negative integer, got '" +
                                    std::string(sv) + "'");
    return value;
}

// Precedence: flags beat the config file, the file beats ADC_SEED, and
// ADC_SEED beats the built-in defaults.
RunConfig build_run_config(const CommonOpts& o) {
    RunConfig cfg;
    if (const char* env_seed = std::getenv("ADC_SEED")) cfg.seed = seed_from_env(env_seed);
    if (o.config->count() > 0) {
        std::ifstream in(o.config_path);
        if (!in) throw std::invalid_argument("cannot open config file '" + o.config_path + "'");
        cfg = parse_run_config(in, std::move(cfg));
    }
    if (o.env->count() > 0) cfg.env_id = o.env_id;
    if (o.seed_opt->count() > 0) cfg.seed = o.seed;
    if (o.steps_opt->count() > 0) cfg.total_steps = o.steps;
    if (o.adcf_opt->count() > 0) cfg.agent.adcf = o.adcf;
    if (o.idem_opt->count() > 0) cfg.agent.idem = o.idem;
    if (o.cutoff_opt->count() > 0) cfg.agent.cutoff = o.cutoff;
    if (o.out->count() > 0) cfg.out_dir = o.out_dir;
    return cfg;
}

int run_train(const CommonOpts& o, std::ostream& out) {
    const RunResult res = run_training(build_run_config(o));
    out << "metrics: " << res.metrics_path << '\n';
    out << "checkpoint: " << res.checkpoint_path << '\n';
    out << "final_smooth_return: " << format_double(res.final_smooth_return) << '\n';
    return 0;
}

int run_ablate(const CommonOpts& o, std::ostream& out) {
    const AblationResult res = run_ablation(build_run_config(o));
    bool any_failed = false;
    for (const auto& row : res.rows) {
        if (row.failed) {
            any_failed = true;
            out << row.variant << ": failed (" << row.error << ")\n";
        } else {
            out << row.variant << ": " << format_double(row.final_smooth_return) << '\n';
        }
    }
    out << "summary: " << res.summary_path << '\n';
    return any_failed ? 1 : 0;
}

int run_eval(const std::string& checkpoint_path, const std::string& env_id,
             std::size_t episodes, std::uint64_t seed, std::ostream& out, std::ostream& err) {
    std::ifstream in(checkpoint_path);
    if (!in) {
        err << "error: cannot open checkpoint '" << checkpoint_path << "'\n";
        return 1;
    }
    const auto env = make_env(env_id);
    AgentConfig cfg;
    cfg.hidden = {8}; // replaced wholesale by load()
    cfg.adcf = false;
    cfg.idem = false;
    Ctd3Agent agent(env->spec(), cfg, 0);
    agent.load(in);
    out << format_double(evaluate(agent, *env, episodes, seed)) << '\n';
    return 0;
}

// --- grad-check ------------------------------------------------------------
// Finite-difference verification of the three analytic gradient paths
// (critic loss, director value, actor objective) on small all-tanh networks;
// relu kinks would poison central differences.

Mlp smooth_net(std::vector<std::size_t> dims, std::vector<Activation> acts, Rng& rng) {
    return Mlp::init(dims, acts, rng);
}

void make_smooth(Ctd3Agent& agent, Rng& rng) {
    const EnvSpec& spec = agent.env_spec();
    const std::size_t so = spec.obs_dim;
    const std::size_t sa = spec.obs_dim + spec.action_dim;
    agent.actor = smooth_net({so, 5, spec.action_dim}, {Activation::tanh, Activation::tanh}, rng);
    agent.q1 = smooth_net({sa, 6, 1}, {Activation::tanh, Activation::identity}, rng);
    agent.q2 = smooth_net({sa, 6, 1}, {Activation::tanh, Activation::identity}, rng);
    agent.director = smooth_net({sa, 4, 1}, {Activation::tanh, Activation::sigmoid}, rng);
}

struct FdBatch {
    std::vector<Transition> storage;
    std::vector<const Transition*> ptrs;
};

FdBatch random_batch(const EnvSpec& spec, std::size_t n, Rng& rng) {
    FdBatch b;
    b.storage.resize(n);
    for (auto& tr : b.storage) {
        tr.state.resize(spec.obs_dim);
        tr.next_state.resize(spec.obs_dim);
        tr.action.resize(spec.action_dim);
        for (auto& v : tr.state) v = rng.normal(0.0, 1.0);
        for (auto& v : tr.next_state) v = rng.normal(0.0, 1.0);
        for (std::size_t j = 0; j < spec.action_dim; ++j) {
            const double lo = spec.action_low[j];
            const double hi = spec.action_high[j];
            tr.action[j] = lo + rng.uniform01() * (hi - lo);
        }
        tr.reward = rng.normal(0.0, 1.0);
        tr.terminal = rng.uniform01() < 0.25;
    }
    b.ptrs.reserve(n);
    for (const auto& tr : b.storage) b.ptrs.push_back(&tr);
    return b;
}

// Worst relative gap between analytic and central-difference gradients over
// every parameter of net; eval() re-evaluates the objective in place.
double fd_objective_gap(Mlp& net, const MlpGrads& analytic,
                        const std::function<double()>& eval) {
    const double h = 1e-5;
    double worst = 0.0;
    auto check = [&](double& param, double g) {
        const double orig = param;
        param = orig + h;
        const double fp = eval();
        param = orig - h;
        const double fm = eval();
        param = orig;
        const double fd = (fp - fm) / (2.0 * h);
        const double denom = std::max({1.0, std::abs(fd), std::abs(g)});
        worst = std::max(worst, std::abs(fd - g) / denom);
    };
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        Layer& layer = net.layers[l];
        const LayerGrads& gl = analytic.layers[l];
        for (std::size_t i = 0; i < layer.weight.data.size(); ++i)
            check(layer.weight.data[i], gl.weight.data[i]);
        for (std::size_t i = 0; i < layer.bias.size(); ++i) check(layer.bias[i], gl.bias[i]);
    }
    return worst;
}

int run_grad_check(std::size_t instances, std::ostream& out) {
    const double threshold = 1e-4;
    double critic1 = 0.0, critic2 = 0.0, director = 0.0, actor = 0.0;
    const auto env = make_env("pendulum");
    for (std::size_t i = 0; i < instances; ++i) {
        Rng rng(mix_seed(9000, i));
        AgentConfig cfg;
        cfg.hidden = {8};
        cfg.batch_size = 4;
        cfg.warmup = 0;
        cfg.adcf = true;
        cfg.idem = true;
        cfg.gamma_d_half_life = 10;
        Ctd3Agent agent(env->spec(), cfg, i);
        make_smooth(agent, rng);

        const FdBatch main_b = random_batch(env->spec(), 5, rng);
        const FdBatch high_b = random_batch(env->spec(), 4, rng);
        const FdBatch low_b = random_batch(env->spec(), 3, rng);
        std::vector<double> y(main_b.ptrs.size());
        for (auto& v : y) v = rng.normal(0.0, 1.0);

        MlpGrads g;
        agent.critic_grads(1, main_b.ptrs, y, g);
        critic1 = std::max(critic1, fd_objective_gap(agent.q1, g, [&] {
            return agent.critic_loss(1, main_b.ptrs, y);
        }));
        agent.critic_grads(2, main_b.ptrs, y, g);
        critic2 = std::max(critic2, fd_objective_gap(agent.q2, g, [&] {
            return agent.critic_loss(2, main_b.ptrs, y);
        }));
        agent.director_grads(high_b.ptrs, low_b.ptrs, g);
        director = std::max(director, fd_objective_gap(*agent.director, g, [&] {
            return agent.director_value(high_b.ptrs, low_b.ptrs);
        }));
        const std::uint64_t t = 3; // nonzero director weight
        agent.actor_grads(main_b.ptrs, t, g);
        actor = std::max(actor, fd_objective_gap(agent.actor, g, [&] {
            return agent.actor_objective(main_b.ptrs, t);
        }));
    }
    out << "critic1 max_rel_err " << format_double(critic1) << '\n';
    out << "critic2 max_rel_err " << format_double(critic2) << '\n';
    out << "director max_rel_err " << format_double(director) << '\n';
    out << "actor max_rel_err " << format_double(actor) << '\n';
    const double worst = std::max({critic1, critic2, director, actor});
    const bool ok = worst <= threshold;
    out << "grad-check " << (ok ? "PASS" : "FAIL") << " (max " << format_double(worst)
        << ", threshold " << format_double(threshold) << ")\n";
    return ok ? 0 : 1;
}

} // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"CTD3 trainer: train, evaluate, ablate, or self-check gradients"};
    app.require_subcommand(1);

    CLI::App* train = app.add_subcommand("train", "run one training job");
    CommonOpts train_opts;
    add_common_options(*train, train_opts);

    CLI::App* ablate = app.add_subcommand("ablate", "run all four flag arms and a summary");
    CommonOpts ablate_opts;
    add_common_options(*ablate, ablate_opts);

    CLI::App* eval = app.add_subcommand("eval", "print a checkpoint's mean return");
    std::string checkpoint_path;
    std::string eval_env = "pendulum";
    std::size_t eval_episodes = 10;
    std::uint64_t eval_seed = 0;
    eval->add_option("--checkpoint", checkpoint_path, "agent checkpoint file")->required();
    eval->add_option("--env", eval_env, "environment id: pendulum or pointmass");
    eval->add_option("--episodes", eval_episodes, "evaluation episodes");
    eval->add_option("--seed", eval_seed, "evaluation seed");

    CLI::App* grad_check =
        app.add_subcommand("grad-check", "finite-difference check of all gradient paths");
    std::size_t gc_instances = 10;
    grad_check->add_option("--instances", gc_instances, "randomized instances per path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        if (train->parsed()) return run_train(train_opts, out);
        if (ablate->parsed()) return run_ablate(ablate_opts, out);
        if (eval->parsed())
            return run_eval(checkpoint_path, eval_env, eval_episodes, eval_seed, out, err);
        if (grad_check->parsed()) return run_grad_check(gc_instances, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    err << "error: no command dispatched\n";
    return 1;
}

} // namespace ctd3
