#pragma once

// Training orchestration: the env-step loop, periodic deterministic
// evaluation, incremental metrics CSV, checkpointing, and the four-arm
// ablation runner (td3, td3_adcf, td3_idem, ctd3).

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ctd3/agent.hpp"
#include "ctd3/env.hpp"

namespace ctd3 {

struct RunConfig {
    std::string env_id = "pendulum";
    std::uint64_t seed = 0;
    std::uint64_t total_steps = 50000;
    std::uint64_t eval_interval = 1000;
    std::size_t eval_episodes = 10;
    AgentConfig agent;
    std::string out_dir = "runs/out";
};

struct MetricsRow {
    std::uint64_t step = 0;
    double return_raw = 0.0;
    double return_smooth = 0.0;
    double loss_q1 = 0.0;
    double loss_q2 = 0.0;
    double director_v = 0.0;
    double actor_j = 0.0;
    double gamma_d = 0.0;
    std::size_t buf_main = 0;
    std::size_t buf_high = 0;
    std::size_t buf_low = 0;
};

inline constexpr std::size_t kSmoothWindow = 20;
inline constexpr char kMetricsHeader[] =
    "step,return_raw,return_smooth,loss_q1,loss_q2,director_v,actor_j,gamma_d,"
    "buf_main,buf_high,buf_low";

// Copy of cfg with the deferred defaults filled in: NaN cutoff becomes the
// environment default, half-life 0 becomes 20% of the step budget. Throws on
// invalid budgets (total_steps < warmup, eval interval not dividing the
// budget, zero episodes).
RunConfig resolve(const RunConfig& cfg);

// Mean undiscounted return of the deterministic policy over fresh episodes
// seeded mix_seed(seed, episode). The agent is not modified.
double evaluate(const Ctd3Agent& agent, Env& env, std::size_t episodes, std::uint64_t seed);

// Trailing mean: out[i] averages in[max(0, i-window+1) .. i].
std::vector<double> smooth(const std::vector<double>& series, std::size_t window);

struct RunResult {
    std::vector<MetricsRow> metrics;
    double final_smooth_return = 0.0; // last row's smoothed return
    std::string metrics_path;
    std::string checkpoint_path;
    std::string config_path;
};

// Runs the full training loop, writing metrics.csv (flushed row by row, so
// partial results survive an abort), config.txt (re-runnable echo), and
// checkpoint.txt under cfg.out_dir.
RunResult run_training(const RunConfig& cfg);

struct AblationArm {
    const char* variant;
    bool adcf;
    bool idem;
};

inline constexpr std::array<AblationArm, 4> kAblationArms{{
    {"td3", false, false},
    {"td3_adcf", true, false},
    {"td3_idem", false, true},
    {"ctd3", true, true},
}};

struct AblationResult {
    struct Row {
        std::string variant;
        std::string env;
        std::uint64_t seed = 0;
        double final_smooth_return = 0.0;
        bool failed = false;
        std::string error;
    };
    std::vector<Row> rows; // one per arm, in kAblationArms order
    std::string summary_path;
};

// Runs all four flag combinations of base (same seed, own subdirectory per
// arm) and writes {out_dir}/summary.csv. A failing arm is recorded in its
// row and the remaining arms still run.
AblationResult run_ablation(const RunConfig& base);

} // namespace ctd3
