#include "ctd3/harness.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "ctd3/config.hpp"
#include "ctd3/replay.hpp"
#include "ctd3/rng.hpp"
#include "text_util.hpp"

namespace fs = std::filesystem;

namespace ctd3 {

// Per-run rng stream tags: 2 drives training (warmup actions, exploration,
// batch draws, smoothing noise), 3 seeds the fixed evaluation episode set,
// 4 seeds the adaptive-cutoff reservoir. Training episode resets use
// mix_seed(seed, episode_index) directly.
namespace {
constexpr std::uint64_t kTrainStream = 2;
constexpr std::uint64_t kEvalStream = 3;
constexpr std::uint64_t kReservoirStream = 4;
} // namespace

RunConfig resolve(const RunConfig& cfg) {
    RunConfig r = cfg;
    if (r.eval_interval < 1)
        throw std::invalid_argument("run config: eval_interval must be >= 1");
    if (r.total_steps < r.agent.warmup)
        throw std::invalid_argument("run config: total_steps (" +
                                    std::to_string(r.total_steps) +
                                    ") must be >= warmup (" +
                                    std::to_string(r.agent.warmup) + ")");
    if (r.total_steps % r.eval_interval != 0)
        throw std::invalid_argument("run config: eval_interval must divide total_steps");
    if (r.eval_episodes < 1)
        throw std::invalid_argument("run config: eval_episodes must be >= 1");
    if (std::isnan(r.agent.cutoff)) r.agent.cutoff = default_cutoff(r.env_id);
    if (r.agent.gamma_d_half_life == 0)
        r.agent.gamma_d_half_life = std::max<std::uint64_t>(1, r.total_steps / 5);
    return r;
}

double evaluate(const Ctd3Agent& agent, Env& env, std::size_t episodes, std::uint64_t seed) {
    if (episodes < 1) throw std::invalid_argument("evaluate: episodes must be >= 1");
    Rng unused(0); // the greedy path draws nothing
    double total = 0.0;
    for (std::size_t ep = 0; ep < episodes; ++ep) {
        auto obs = env.reset(mix_seed(seed, ep));
        double ep_return = 0.0;
        while (true) {
            const auto action = agent.select_action(obs, false, unused);
            const auto sr = env.step(action);
            ep_return += sr.reward;
            obs = sr.observation;
            if (sr.done) break;
        }
        total += ep_return;
    }
    return total / static_cast<double>(episodes);
}

std::vector<double> smooth(const std::vector<double>& series, std::size_t window) {
    if (window < 1) throw std::invalid_argument("smooth: window must be >= 1");
    std::vector<double> out(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) {
        const std::size_t lo = i + 1 > window ? i + 1 - window : 0;
        double sum = 0.0;
        for (std::size_t j = lo; j <= i; ++j) sum += series[j];
        out[i] = sum / static_cast<double>(i - lo + 1);
    }
    return out;
}

namespace {

void write_metrics_row(std::ofstream& csv, const MetricsRow& row) {
    char buf[40];
    csv << row.step;
    csv << ',' << format_double(buf, row.return_raw);
    csv << ',' << format_double(buf, row.return_smooth);
    csv << ',' << format_double(buf, row.loss_q1);
    csv << ',' << format_double(buf, row.loss_q2);
    csv << ',' << format_double(buf, row.director_v);
    csv << ',' << format_double(buf, row.actor_j);
    csv << ',' << format_double(buf, row.gamma_d);
    csv << ',' << row.buf_main << ',' << row.buf_high << ',' << row.buf_low;
    csv << '\n';
    csv.flush(); // partial metrics must survive an abort
}

} // namespace

RunResult run_training(const RunConfig& cfg) {
    const RunConfig r = resolve(cfg);
    fs::create_directories(r.out_dir);

    RunResult out;
    out.metrics_path = (fs::path(r.out_dir) / "metrics.csv").string();
    out.checkpoint_path = (fs::path(r.out_dir) / "checkpoint.txt").string();
    out.config_path = (fs::path(r.out_dir) / "config.txt").string();

    {
        std::ofstream echo(out.config_path);
        if (!echo) throw std::runtime_error("cannot write " + out.config_path);
        write_run_config(echo, r);
    }

    auto env = make_env(r.env_id);
    auto eval_env = make_env(r.env_id);
    const EnvSpec spec = env->spec();
    Ctd3Agent agent(spec, r.agent, r.seed);

    TripleReplayConfig bc;
    bc.main_capacity = r.agent.main_capacity;
    bc.side_capacity = r.agent.side_capacity;
    bc.cutoff = r.agent.cutoff;
    bc.adaptive = r.agent.adaptive_cutoff;
    bc.quantile = r.agent.cutoff_quantile;
    bc.reservoir_seed = mix_seed(r.seed, kReservoirStream);
    TripleReplay buffers(bc);

    std::ofstream csv(out.metrics_path);
    if (!csv) throw std::runtime_error("cannot write " + out.metrics_path);
    csv << kMetricsHeader << '\n';
    csv.flush();

    Rng train_rng(mix_seed(r.seed, kTrainStream));
    const std::uint64_t eval_seed = mix_seed(r.seed, kEvalStream);

    std::uint64_t episode = 0;
    auto obs = env->reset(mix_seed(r.seed, episode));

    std::vector<double> raw_returns;
    // most recent values of each intermittent quantity, carried between rows
    double loss_q1 = 0.0, loss_q2 = 0.0, director_v = 0.0, actor_j = 0.0, gamma_d = 0.0;

    for (std::uint64_t t = 1; t <= r.total_steps; ++t) {
        std::vector<double> action(spec.action_dim);
        if (t <= r.agent.warmup) {
            for (std::size_t j = 0; j < spec.action_dim; ++j)
                action[j] = train_rng.uniform(spec.action_low[j], spec.action_high[j]);
        } else {
            action = agent.select_action(obs, true, train_rng);
        }

        const auto sr = env->step(action);
        Transition tr;
        tr.state = std::move(obs);
        tr.action = std::move(action);
        tr.reward = sr.reward;
        tr.next_state = sr.observation;
        tr.truncated = sr.done;

        const StepReport rep = agent.train_step(buffers, std::move(tr), train_rng);
        if (rep.learned) {
            loss_q1 = rep.loss_q1;
            loss_q2 = rep.loss_q2;
        }
        if (rep.director_updated) director_v = rep.director_v;
        if (rep.actor_updated) actor_j = rep.actor_j;
        gamma_d = rep.gamma_d;

        obs = sr.observation;
        if (sr.done) obs = env->reset(mix_seed(r.seed, ++episode));

        if (t % r.eval_interval == 0) {
            const double raw = evaluate(agent, *eval_env, r.eval_episodes, eval_seed);
            raw_returns.push_back(raw);
            MetricsRow row;
            row.step = t;
            row.return_raw = raw;
            row.return_smooth = smooth(raw_returns, kSmoothWindow).back();
            row.loss_q1 = loss_q1;
            row.loss_q2 = loss_q2;
            row.director_v = director_v;
            row.actor_j = actor_j;
            row.gamma_d = gamma_d;
            row.buf_main = buffers.main().size();
            row.buf_high = buffers.high().size();
            row.buf_low = buffers.low().size();
            write_metrics_row(csv, row);
            out.metrics.push_back(row);
        }
    }

    {
        std::ofstream ck(out.checkpoint_path);
        if (!ck) throw std::runtime_error("cannot write " + out.checkpoint_path);
        agent.save(ck);
    }

    out.final_smooth_return = out.metrics.empty()
                                  ? std::numeric_limits<double>::quiet_NaN()
                                  : out.metrics.back().return_smooth;
    return out;
}

AblationResult run_ablation(const RunConfig& base) {
    AblationResult result;
    fs::create_directories(base.out_dir);
    result.summary_path = (fs::path(base.out_dir) / "summary.csv").string();

    for (const AblationArm& arm : kAblationArms) {
        RunConfig cfg = base;
        cfg.agent.adcf = arm.adcf;
        cfg.agent.idem = arm.idem;
        cfg.out_dir = (fs::path(base.out_dir) / arm.variant).string();

        AblationResult::Row row;
        row.variant = arm.variant;
        row.env = base.env_id;
        row.seed = base.seed;
        try {
            row.final_smooth_return = run_training(cfg).final_smooth_return;
        } catch (const std::exception& e) {
            row.failed = true;
            row.error = e.what();
            row.final_smooth_return = std::numeric_limits<double>::quiet_NaN();
            try {
                fs::create_directories(cfg.out_dir);
                std::ofstream err((fs::path(cfg.out_dir) / "error.txt").string());
                err << e.what() << '\n';
            } catch (...) {
                // best effort; the summary row already records the failure
            }
        }
        result.rows.push_back(std::move(row));
    }

    std::ofstream summary(result.summary_path);
    if (!summary) throw std::runtime_error("cannot write " + result.summary_path);
    summary << "variant,env,seed,final_smooth_return\n";
    char buf[40];
    for (const auto& row : result.rows)
        summary << row.variant << ',' << row.env << ',' << row.seed << ','
                << format_double(buf, row.final_smooth_return) << '\n';
    return result;
}

} // namespace ctd3
