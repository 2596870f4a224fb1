#pragma once

// The CTD3 algorithm core: actor, two critics with twin target pairs, target
// actor, and (optionally) a director network that scores actions against a
// reward cutoff and steers the actor early in training. Two feature flags
// reduce it to TD3 (both off), TD3+ADCF, or TD3+IDEM.
//
// The agent owns no buffers and no training rng: the caller hands both in,
// so a whole run is a pure function of (config, seed).

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "ctd3/env.hpp"
#include "ctd3/nn.hpp"
#include "ctd3/replay.hpp"
#include "ctd3/rng.hpp"

namespace ctd3 {

struct AgentConfig {
    double gamma_q = 0.99; // discount
    double tau = 0.005;    // soft-update mix
    std::size_t policy_delay = 2;

    // Exploration noise std in action units; negative means auto
    // (0.1 * half-range per dimension).
    double explore_noise = -1.0;
    // Target smoothing noise and clip as fractions of each dimension's
    // half-range (TD3 scales both by max_action).
    double target_noise = 0.2;
    double noise_clip = 0.5;

    std::size_t batch_size = 256;

    double gamma_d0 = 1.0;
    // Half-life of the director weight in env steps; 0 means "auto", which
    // the run harness resolves to 20% of the total step budget.
    std::size_t gamma_d_half_life = 0;

    // Reward cutoff R; NaN means "use the environment's default". Resolved
    // by the harness before buffers are built.
    double cutoff = std::numeric_limits<double>::quiet_NaN();
    bool adaptive_cutoff = false;
    double cutoff_quantile = 0.5;

    double lr_actor = 3e-4;
    double lr_critic = 3e-4;
    double lr_director = 3e-4;

    bool adcf = true; // director term in the actor objective
    bool idem = true; // averaged-min four-target rule

    std::size_t warmup = 1000;
    std::vector<std::size_t> hidden = {256, 256};

    std::size_t main_capacity = 1000000;
    std::size_t side_capacity = 100000;

    // Compatibility switches for the pseudocode's literal readings; all off
    // by default.
    bool literal_target_schedule = false;  // odd t: both targets of critic 1
    bool single_critic_per_step = false;   // train only one critic per step
    bool recompute_critic_actions = false; // critic loss on mu(s)+eps, not stored a
};

struct StepReport {
    bool learned = false; // false during warmup or while the main buffer is short
    bool director_updated = false;
    bool actor_updated = false;
    double loss_q1 = 0.0;
    double loss_q2 = 0.0;
    double director_v = 0.0;
    double actor_j = 0.0;
    double gamma_d = 0.0;
};

class Ctd3Agent {
public:
    // Network parameters are drawn from mix_seed(seed, 1) in a fixed order
    // (actor, q1, q2, director); every target starts as an exact copy.
    Ctd3Agent(const EnvSpec& env, AgentConfig cfg, std::uint64_t seed);

    // mu(obs), plus per-dimension Normal(0, sigma) noise when exploring;
    // always clamped to the action bounds.
    std::vector<double> select_action(std::span<const double> obs, bool explore,
                                      Rng& rng) const;

    // mu'(next_obs) + clip(eps, -c, c), clamped to bounds.
    std::vector<double> smoothed_target_action(std::span<const double> next_obs,
                                               Rng& rng) const;

    // Bootstrapped regression targets for a main-buffer batch. With idem on:
    // min of the two per-critic target averages; off: plain min of the two
    // single targets. Terminal transitions keep only their reward.
    std::vector<double> compute_target(const std::vector<const Transition*>& batch,
                                       Rng& rng);

    // One Adam step on each critic against the shared y. Returns both MSE
    // losses (evaluated before the step). Throws on non-finite loss before
    // touching any parameter.
    std::pair<double, double> update_critics(const std::vector<const Transition*>& batch,
                                             const std::vector<double>& y, Rng& rng);

    // One Adam ascent step on V = mean D(s_h, a_h) + mean(1 - D(s_l, a_l)).
    double update_director(const std::vector<const Transition*>& high_batch,
                           const std::vector<const Transition*>& low_batch);

    // One Adam ascent step on J = gamma_d(t) mean D(s, mu(s)) + mean Q1(s, mu(s)),
    // director term only with adcf; critics and director stay frozen. Ends
    // with the target-actor soft update.
    double update_actor(const std::vector<const Transition*>& batch, std::uint64_t t);

    // Target-critic schedule. idem on: odd t is critic 1's occasion, even t
    // critic 2's; within a critic the two targets take turns. idem off: both
    // single targets move every policy_delay steps (TD3 cadence).
    void update_targets(std::uint64_t t);

    static double director_weight(const AgentConfig& cfg, std::uint64_t t);

    // Full Algorithm-1 loop body for one environment transition.
    StepReport train_step(TripleReplay& buffers, Transition tr, Rng& rng);

    // Pure objective evaluations and their analytic parameter gradients
    // (ascent direction for director/actor); used by the gradient oracles
    // and the grad-check command. No parameters are modified.
    double critic_loss(int which, const std::vector<const Transition*>& batch,
                       const std::vector<double>& y) const;
    double critic_grads(int which, const std::vector<const Transition*>& batch,
                        const std::vector<double>& y, MlpGrads& out) const;
    double director_value(const std::vector<const Transition*>& high_batch,
                          const std::vector<const Transition*>& low_batch) const;
    double director_grads(const std::vector<const Transition*>& high_batch,
                          const std::vector<const Transition*>& low_batch,
                          MlpGrads& out) const;
    double actor_objective(const std::vector<const Transition*>& batch,
                           std::uint64_t t) const;
    double actor_grads(const std::vector<const Transition*>& batch, std::uint64_t t,
                       MlpGrads& out) const;

    // Checkpoint: one header line (config hash, step and occasion counters,
    // feature flags) followed by the member networks in nn checkpoint
    // format. load() replaces the networks wholesale after checking their
    // dimensions against the environment, so evaluation works even if the
    // configured hidden sizes differ from the file's.
    void save(std::ostream& out) const;
    void load(std::istream& in);

    const AgentConfig& config() const { return cfg_; }
    const EnvSpec& env_spec() const { return env_; }
    std::uint64_t steps() const { return t_; }

    // Networks are public: tests overwrite them to build oracle scenarios
    // and the checkpoint round-trip inspects them directly.
    Mlp actor, actor_target;
    Mlp q1, q2;
    Mlp qt11, qt21;                // single targets (and first of each pair)
    std::optional<Mlp> qt12, qt22; // second of each pair, idem only
    std::optional<Mlp> director;

private:
    void build_critic_input(const std::vector<const Transition*>& batch, Tensor2& x) const;
    double critic_loss_impl(const Mlp& critic, const Tensor2& x,
                            const std::vector<double>& y, MlpGrads* grads) const;
    double actor_objective_impl(const std::vector<const Transition*>& batch, std::uint64_t t,
                                MlpGrads* grads) const;
    double director_value_impl(const std::vector<const Transition*>& high_batch,
                               const std::vector<const Transition*>& low_batch,
                               MlpGrads* grads) const;

    EnvSpec env_;
    AgentConfig cfg_;
    std::vector<double> sigma_;        // exploration noise std per dim
    std::vector<double> target_sigma_; // smoothing noise std per dim
    std::vector<double> clip_;         // smoothing clip per dim
    std::vector<double> center_, half_;

    AdamState actor_adam_, q1_adam_, q2_adam_, director_adam_;
    std::uint64_t t_ = 0;  // env steps seen
    std::uint64_t k1_ = 0; // critic 1 target-update occasions
    std::uint64_t k2_ = 0; // critic 2 target-update occasions

    mutable MlpCache cache_a_, cache_b_, cache_c_, cache_d_;
    mutable MlpGrads scratch_grads_, scratch_grads2_;
    mutable Tensor2 scratch_x_, scratch_up_, scratch_dx_;
};

std::uint64_t config_hash(const AgentConfig& cfg);

// Per-environment default reward cutoff (roughly the top third of
// random-policy rewards classify as high).
double default_cutoff(std::string_view env_id);

} // namespace ctd3
