#include "ctd3/agent.hpp"

#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "ctd3/kernels.hpp"
#include "text_util.hpp"

namespace ctd3 {

namespace {

double clamp(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

void require(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("AgentConfig: ") + what);
}

void ensure_shape(Tensor2& t, std::size_t r, std::size_t c) {
    t.rows = r;
    t.cols = c;
    t.data.resize(r * c);
}

void scale_grads(MlpGrads& g, double factor) {
    for (auto& l : g.layers) {
        for (double& v : l.weight.data) v *= factor;
        for (double& v : l.bias) v *= factor;
    }
}

void accumulate_grads(MlpGrads& into, const MlpGrads& from) {
    for (std::size_t l = 0; l < into.layers.size(); ++l) {
        for (std::size_t i = 0; i < into.layers[l].weight.size(); ++i)
            into.layers[l].weight.data[i] += from.layers[l].weight.data[i];
        for (std::size_t i = 0; i < into.layers[l].bias.size(); ++i)
            into.layers[l].bias[i] += from.layers[l].bias[i];
    }
}

Mlp build_net(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out,
              Activation head, Rng& rng) {
    std::vector<std::size_t> dims;
    dims.push_back(in);
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(out);
    std::vector<Activation> acts(hidden.size(), Activation::relu);
    acts.push_back(head);
    return Mlp::init(dims, acts, rng);
}

} // namespace

// Cutoffs are set so the high class covers the approach to the goal, not just
// near-goal states; a tight cutoff starves the director of action variety.
double default_cutoff(std::string_view env_id) {
    if (env_id == "pendulum") return -1.0;
    if (env_id == "pointmass") return -0.6;
    throw std::invalid_argument("no default cutoff for environment '" + std::string(env_id) +
                                "'");
}

std::uint64_t config_hash(const AgentConfig& cfg) {
    std::ostringstream ss;
    char buf[40];
    auto d = [&](double v) { ss << format_double(buf, v) << '|'; };
    d(cfg.gamma_q);
    d(cfg.tau);
    ss << cfg.policy_delay << '|';
    d(cfg.explore_noise);
    d(cfg.target_noise);
    d(cfg.noise_clip);
    ss << cfg.batch_size << '|';
    d(cfg.gamma_d0);
    ss << cfg.gamma_d_half_life << '|';
    d(cfg.cutoff);
    ss << cfg.adaptive_cutoff << '|';
    d(cfg.cutoff_quantile);
    d(cfg.lr_actor);
    d(cfg.lr_critic);
    d(cfg.lr_director);
    ss << cfg.adcf << '|' << cfg.idem << '|' << cfg.warmup << '|';
    for (auto h : cfg.hidden) ss << h << ',';
    ss << '|' << cfg.main_capacity << '|' << cfg.side_capacity << '|'
       << cfg.literal_target_schedule << '|' << cfg.single_critic_per_step << '|'
       << cfg.recompute_critic_actions;
    const std::string s = ss.str();
    std::uint64_t h = 0xcbf29ce484222325ULL; // FNV-1a
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

double Ctd3Agent::director_weight(const AgentConfig& cfg, std::uint64_t t) {
    if (cfg.gamma_d_half_life == 0) return 0.0;
    return cfg.gamma_d0 *
           std::exp2(-static_cast<double>(t) / static_cast<double>(cfg.gamma_d_half_life));
}

Ctd3Agent::Ctd3Agent(const EnvSpec& env, AgentConfig cfg, std::uint64_t seed)
    : env_(env), cfg_(std::move(cfg)) {
    require(cfg_.gamma_q > 0.0 && cfg_.gamma_q < 1.0, "gamma_q must lie in (0,1)");
    require(cfg_.tau > 0.0 && cfg_.tau <= 1.0, "tau must lie in (0,1]");
    require(cfg_.policy_delay >= 1, "policy_delay must be >= 1");
    require(cfg_.batch_size >= 1, "batch_size must be >= 1");
    require(cfg_.target_noise >= 0.0, "target_noise must be >= 0");
    require(cfg_.noise_clip >= 0.0, "noise_clip must be >= 0");
    require(cfg_.gamma_d0 >= 0.0, "gamma_d0 must be >= 0");
    require(cfg_.lr_actor > 0.0 && cfg_.lr_critic > 0.0 && cfg_.lr_director > 0.0,
            "learning rates must be > 0");
    require(!cfg_.adcf || cfg_.gamma_d_half_life >= 1,
            "gamma_d_half_life is unresolved (0); the run harness sets it to 20% of the "
            "step budget");
    require(env_.obs_dim >= 1 && env_.action_dim >= 1, "environment dims must be >= 1");
    require(env_.action_low.size() == env_.action_dim &&
                env_.action_high.size() == env_.action_dim,
            "action bound lengths must match action_dim");
    for (std::size_t j = 0; j < env_.action_dim; ++j)
        require(env_.action_low[j] < env_.action_high[j],
                "action_low must be < action_high per dimension");

    center_.resize(env_.action_dim);
    half_.resize(env_.action_dim);
    sigma_.resize(env_.action_dim);
    target_sigma_.resize(env_.action_dim);
    clip_.resize(env_.action_dim);
    for (std::size_t j = 0; j < env_.action_dim; ++j) {
        center_[j] = 0.5 * (env_.action_low[j] + env_.action_high[j]);
        half_[j] = 0.5 * (env_.action_high[j] - env_.action_low[j]);
        sigma_[j] = cfg_.explore_noise < 0.0 ? 0.1 * half_[j] : cfg_.explore_noise;
        target_sigma_[j] = cfg_.target_noise * half_[j];
        clip_[j] = cfg_.noise_clip * half_[j];
    }

    Rng init_rng(mix_seed(seed, 1));
    const std::size_t in_sa = env_.obs_dim + env_.action_dim;
    actor = build_net(env_.obs_dim, cfg_.hidden, env_.action_dim, Activation::tanh, init_rng);
    q1 = build_net(in_sa, cfg_.hidden, 1, Activation::identity, init_rng);
    q2 = build_net(in_sa, cfg_.hidden, 1, Activation::identity, init_rng);
    if (cfg_.adcf)
        director = build_net(in_sa, cfg_.hidden, 1, Activation::sigmoid, init_rng);

    actor_target = actor;
    qt11 = q1;
    qt21 = q2;
    if (cfg_.idem) {
        qt12 = q1;
        qt22 = q2;
    }

    actor_adam_ = AdamState::for_net(actor);
    q1_adam_ = AdamState::for_net(q1);
    q2_adam_ = AdamState::for_net(q2);
    if (director) director_adam_ = AdamState::for_net(*director);
}

std::vector<double> Ctd3Agent::select_action(std::span<const double> obs, bool explore,
                                             Rng& rng) const {
    auto out = actor.forward(obs);
    for (std::size_t j = 0; j < out.size(); ++j) {
        double a = center_[j] + half_[j] * out[j];
        if (explore) a += rng.normal(0.0, sigma_[j]);
        out[j] = clamp(a, env_.action_low[j], env_.action_high[j]);
    }
    return out;
}

std::vector<double> Ctd3Agent::smoothed_target_action(std::span<const double> next_obs,
                                                      Rng& rng) const {
    auto out = actor_target.forward(next_obs);
    for (std::size_t j = 0; j < out.size(); ++j) {
        const double a = center_[j] + half_[j] * out[j];
        const double eps = clamp(rng.normal(0.0, target_sigma_[j]), -clip_[j], clip_[j]);
        out[j] = clamp(a + eps, env_.action_low[j], env_.action_high[j]);
    }
    return out;
}

std::vector<double> Ctd3Agent::compute_target(const std::vector<const Transition*>& batch,
                                              Rng& rng) {
    const std::size_t n = batch.size();
    const std::size_t obs = env_.obs_dim;
    const std::size_t act = env_.action_dim;

    // batched target-actor pass, then per-row clipped smoothing noise in row
    // order (the same draw sequence as per-sample smoothed_target_action)
    Tensor2 next_states(n, obs);
    for (std::size_t i = 0; i < n; ++i)
        std::memcpy(next_states.row(i), batch[i]->next_state.data(), obs * sizeof(double));
    const Tensor2& mu = actor_target.forward_batch(next_states, cache_a_);

    ensure_shape(scratch_x_, n, obs + act);
    for (std::size_t i = 0; i < n; ++i) {
        double* row = scratch_x_.row(i);
        std::memcpy(row, batch[i]->next_state.data(), obs * sizeof(double));
        for (std::size_t j = 0; j < act; ++j) {
            const double a = center_[j] + half_[j] * mu.at(i, j);
            const double eps =
                clamp(rng.normal(0.0, target_sigma_[j]), -clip_[j], clip_[j]);
            row[obs + j] = clamp(a + eps, env_.action_low[j], env_.action_high[j]);
        }
    }

    std::vector<double> y(n);
    if (cfg_.idem) {
        const Tensor2& a11 = qt11.forward_batch(scratch_x_, cache_a_);
        const Tensor2& a12 = qt12->forward_batch(scratch_x_, cache_b_);
        const Tensor2& a21 = qt21.forward_batch(scratch_x_, cache_c_);
        const Tensor2& a22 = qt22->forward_batch(scratch_x_, cache_d_);
        for (std::size_t i = 0; i < n; ++i) {
            const double q = std::min(0.5 * (a11.at(i, 0) + a12.at(i, 0)),
                                      0.5 * (a21.at(i, 0) + a22.at(i, 0)));
            const double mask = batch[i]->terminal ? 0.0 : 1.0;
            y[i] = batch[i]->reward + cfg_.gamma_q * q * mask;
        }
    } else {
        const Tensor2& t1 = qt11.forward_batch(scratch_x_, cache_a_);
        const Tensor2& t2 = qt21.forward_batch(scratch_x_, cache_b_);
        for (std::size_t i = 0; i < n; ++i) {
            const double q = std::min(t1.at(i, 0), t2.at(i, 0));
            const double mask = batch[i]->terminal ? 0.0 : 1.0;
            y[i] = batch[i]->reward + cfg_.gamma_q * q * mask;
        }
    }
    return y;
}

void Ctd3Agent::build_critic_input(const std::vector<const Transition*>& batch,
                                   Tensor2& x) const {
    const std::size_t obs = env_.obs_dim;
    const std::size_t act = env_.action_dim;
    ensure_shape(x, batch.size(), obs + act);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        double* row = x.row(i);
        std::memcpy(row, batch[i]->state.data(), obs * sizeof(double));
        std::memcpy(row + obs, batch[i]->action.data(), act * sizeof(double));
    }
}

double Ctd3Agent::critic_loss_impl(const Mlp& critic, const Tensor2& x,
                                   const std::vector<double>& y, MlpGrads* grads) const {
    if (y.size() != x.rows)
        throw std::invalid_argument("critic loss: " + std::to_string(y.size()) +
                                    " targets for " + std::to_string(x.rows) + " rows");
    const Tensor2& out = critic.forward_batch(x, cache_a_);
    const double loss = kernels::mse(out.data.data(), y.data(), y.size());
    if (grads) {
        const double scale = 2.0 / static_cast<double>(y.size());
        ensure_shape(scratch_up_, y.size(), 1);
        for (std::size_t i = 0; i < y.size(); ++i)
            scratch_up_.data[i] = scale * (out.data[i] - y[i]);
        critic.backward_batch(cache_a_, scratch_up_, *grads, nullptr);
    }
    return loss;
}

double Ctd3Agent::critic_loss(int which, const std::vector<const Transition*>& batch,
                              const std::vector<double>& y) const {
    Tensor2 x;
    build_critic_input(batch, x);
    return critic_loss_impl(which == 1 ? q1 : q2, x, y, nullptr);
}

double Ctd3Agent::critic_grads(int which, const std::vector<const Transition*>& batch,
                               const std::vector<double>& y, MlpGrads& out) const {
    Tensor2 x;
    build_critic_input(batch, x);
    return critic_loss_impl(which == 1 ? q1 : q2, x, y, &out);
}

std::pair<double, double> Ctd3Agent::update_critics(
    const std::vector<const Transition*>& batch, const std::vector<double>& y, Rng& rng) {
    build_critic_input(batch, scratch_x_);
    if (cfg_.recompute_critic_actions) {
        // Algorithm-1 literal reading: regress on mu(s) + eps instead of the
        // stored action.
        const std::size_t obs = env_.obs_dim;
        const std::size_t act = env_.action_dim;
        Tensor2 states(batch.size(), obs);
        for (std::size_t i = 0; i < batch.size(); ++i)
            std::memcpy(states.row(i), batch[i]->state.data(), obs * sizeof(double));
        const Tensor2& mu = actor.forward_batch(states, cache_a_);
        for (std::size_t i = 0; i < batch.size(); ++i)
            for (std::size_t j = 0; j < act; ++j) {
                const double a = center_[j] + half_[j] * mu.at(i, j) +
                                 rng.normal(0.0, sigma_[j]);
                scratch_x_.at(i, obs + j) = clamp(a, env_.action_low[j], env_.action_high[j]);
            }
    }

    const double loss1 = critic_loss_impl(q1, scratch_x_, y, &scratch_grads_);
    if (!std::isfinite(loss1))
        throw std::runtime_error("update_critics: non-finite loss on critic 1");
    const double loss2 = critic_loss_impl(q2, scratch_x_, y, &scratch_grads2_);
    if (!std::isfinite(loss2))
        throw std::runtime_error("update_critics: non-finite loss on critic 2");

    const bool do_q1 = !cfg_.single_critic_per_step || t_ % 2 == 1;
    const bool do_q2 = !cfg_.single_critic_per_step || t_ % 2 == 0;
    if (do_q1) adam_step(q1, scratch_grads_, q1_adam_, cfg_.lr_critic);
    if (do_q2) adam_step(q2, scratch_grads2_, q2_adam_, cfg_.lr_critic);
    return {loss1, loss2};
}

double Ctd3Agent::director_value_impl(const std::vector<const Transition*>& high_batch,
                                      const std::vector<const Transition*>& low_batch,
                                      MlpGrads* grads) const {
    if (!director) throw std::logic_error("director update requested but adcf is disabled");
    if (high_batch.empty() || low_batch.empty())
        throw std::invalid_argument("director update needs non-empty batches");

    Tensor2 x;
    build_critic_input(high_batch, x);
    const Tensor2& dh = director->forward_batch(x, cache_c_);
    double v = 0.0;
    for (std::size_t i = 0; i < dh.rows; ++i) v += dh.at(i, 0);
    v /= static_cast<double>(dh.rows);
    if (grads) {
        ensure_shape(scratch_up_, dh.rows, 1);
        std::fill(scratch_up_.data.begin(), scratch_up_.data.end(),
                  1.0 / static_cast<double>(dh.rows));
        director->backward_batch(cache_c_, scratch_up_, *grads, nullptr);
    }

    build_critic_input(low_batch, x);
    const Tensor2& dl = director->forward_batch(x, cache_c_);
    double vl = 0.0;
    for (std::size_t i = 0; i < dl.rows; ++i) vl += dl.at(i, 0);
    vl /= static_cast<double>(dl.rows);
    v += 1.0 - vl;
    if (grads) {
        ensure_shape(scratch_up_, dl.rows, 1);
        std::fill(scratch_up_.data.begin(), scratch_up_.data.end(),
                  -1.0 / static_cast<double>(dl.rows));
        director->backward_batch(cache_c_, scratch_up_, scratch_grads2_, nullptr);
        accumulate_grads(*grads, scratch_grads2_);
    }
    return v;
}

double Ctd3Agent::director_value(const std::vector<const Transition*>& high_batch,
                                 const std::vector<const Transition*>& low_batch) const {
    return director_value_impl(high_batch, low_batch, nullptr);
}

double Ctd3Agent::director_grads(const std::vector<const Transition*>& high_batch,
                                 const std::vector<const Transition*>& low_batch,
                                 MlpGrads& out) const {
    return director_value_impl(high_batch, low_batch, &out);
}

double Ctd3Agent::update_director(const std::vector<const Transition*>& high_batch,
                                  const std::vector<const Transition*>& low_batch) {
    const double v = director_value_impl(high_batch, low_batch, &scratch_grads_);
    if (!std::isfinite(v))
        throw std::runtime_error("update_director: non-finite objective");
    scale_grads(scratch_grads_, -1.0); // ascend
    adam_step(*director, scratch_grads_, director_adam_, cfg_.lr_director);
    return v;
}

double Ctd3Agent::actor_objective_impl(const std::vector<const Transition*>& batch,
                                       std::uint64_t t, MlpGrads* grads) const {
    const std::size_t n = batch.size();
    const std::size_t obs = env_.obs_dim;
    const std::size_t act = env_.action_dim;

    Tensor2 states(n, obs);
    for (std::size_t i = 0; i < n; ++i)
        std::memcpy(states.row(i), batch[i]->state.data(), obs * sizeof(double));
    const Tensor2& mu = actor.forward_batch(states, cache_a_);

    ensure_shape(scratch_x_, n, obs + act);
    for (std::size_t i = 0; i < n; ++i) {
        double* row = scratch_x_.row(i);
        std::memcpy(row, batch[i]->state.data(), obs * sizeof(double));
        for (std::size_t j = 0; j < act; ++j) row[obs + j] = center_[j] + half_[j] * mu.at(i, j);
    }

    const double inv_n = 1.0 / static_cast<double>(n);
    Tensor2 d_action; // dJ/da, accumulated across the Q and director terms
    if (grads) ensure_shape(d_action, n, act);

    const Tensor2& qv = q1.forward_batch(scratch_x_, cache_b_);
    double j_val = 0.0;
    for (std::size_t i = 0; i < n; ++i) j_val += qv.at(i, 0);
    j_val *= inv_n;
    if (grads) {
        ensure_shape(scratch_up_, n, 1);
        std::fill(scratch_up_.data.begin(), scratch_up_.data.end(), inv_n);
        q1.backward_batch(cache_b_, scratch_up_, scratch_grads_, &scratch_dx_);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < act; ++j) d_action.at(i, j) = scratch_dx_.at(i, obs + j);
    }

    const double gd = director_weight(cfg_, t);
    if (cfg_.adcf) {
        if (!director) throw std::logic_error("adcf enabled but director missing");
        const Tensor2& dv = director->forward_batch(scratch_x_, cache_c_);
        double dmean = 0.0;
        for (std::size_t i = 0; i < n; ++i) dmean += dv.at(i, 0);
        dmean *= inv_n;
        j_val += gd * dmean;
        if (grads) {
            ensure_shape(scratch_up_, n, 1);
            std::fill(scratch_up_.data.begin(), scratch_up_.data.end(), gd * inv_n);
            Tensor2 dir_dx;
            director->backward_batch(cache_c_, scratch_up_, scratch_grads2_, &dir_dx);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < act; ++j)
                    d_action.at(i, j) += dir_dx.at(i, obs + j);
        }
    }

    if (grads) {
        // chain through the bound scaling a = center + half * mu
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < act; ++j) d_action.at(i, j) *= half_[j];
        actor.backward_batch(cache_a_, d_action, *grads, nullptr);
    }
    return j_val;
}

double Ctd3Agent::actor_objective(const std::vector<const Transition*>& batch,
                                  std::uint64_t t) const {
    return actor_objective_impl(batch, t, nullptr);
}

double Ctd3Agent::actor_grads(const std::vector<const Transition*>& batch, std::uint64_t t,
                              MlpGrads& out) const {
    return actor_objective_impl(batch, t, &out);
}

double Ctd3Agent::update_actor(const std::vector<const Transition*>& batch, std::uint64_t t) {
    const double j = actor_objective_impl(batch, t, &scratch_grads_);
    if (!std::isfinite(j)) throw std::runtime_error("update_actor: non-finite objective");
    scale_grads(scratch_grads_, -1.0); // ascend
    adam_step(actor, scratch_grads_, actor_adam_, cfg_.lr_actor);
    soft_update(actor_target, actor, cfg_.tau);
    return j;
}

void Ctd3Agent::update_targets(std::uint64_t t) {
    if (cfg_.idem) {
        if (cfg_.literal_target_schedule) {
            // Algorithm 1 verbatim: both of one critic's targets per step.
            if (t % 2 == 1) {
                soft_update(qt11, q1, cfg_.tau);
                soft_update(*qt12, q1, cfg_.tau);
            } else {
                soft_update(qt21, q2, cfg_.tau);
                soft_update(*qt22, q2, cfg_.tau);
            }
            return;
        }
        if (t % 2 == 1) {
            ++k1_;
            soft_update(k1_ % 2 == 1 ? qt11 : *qt12, q1, cfg_.tau);
        } else {
            ++k2_;
            soft_update(k2_ % 2 == 1 ? qt21 : *qt22, q2, cfg_.tau);
        }
        return;
    }
    // TD3 cadence: both single targets move with the delayed policy update.
    if (t % cfg_.policy_delay == 0) {
        soft_update(qt11, q1, cfg_.tau);
        soft_update(qt21, q2, cfg_.tau);
    }
}

StepReport Ctd3Agent::train_step(TripleReplay& buffers, Transition tr, Rng& rng) {
    ++t_;
    StepReport rep;
    rep.gamma_d = director_weight(cfg_, t_);

    const double reward = tr.reward;
    buffers.classify_and_store(std::move(tr));
    if (buffers.adaptive()) buffers.update_cutoff(std::span<const double>(&reward, 1));

    if (t_ <= cfg_.warmup) return rep;

    if (cfg_.adcf && buffers.high().size() >= cfg_.batch_size &&
        buffers.low().size() >= cfg_.batch_size) {
        const auto hb = sample(buffers.high(), cfg_.batch_size, rng);
        const auto lb = sample(buffers.low(), cfg_.batch_size, rng);
        rep.director_v = update_director(*hb, *lb);
        rep.director_updated = true;
    }

    const auto mb = sample(buffers.main(), cfg_.batch_size, rng);
    if (!mb) return rep;
    rep.learned = true;

    const auto y = compute_target(*mb, rng);
    const auto [l1, l2] = update_critics(*mb, y, rng);
    rep.loss_q1 = l1;
    rep.loss_q2 = l2;

    if (t_ % cfg_.policy_delay == 0) {
        rep.actor_j = update_actor(*mb, t_);
        rep.actor_updated = true;
    }
    update_targets(t_);
    return rep;
}

// ---------------------------------------------------------------------------
// Checkpointing
// ---------------------------------------------------------------------------

void Ctd3Agent::save(std::ostream& out) const {
    out << "CTD3 v1 hash " << config_hash(cfg_) << " t " << t_ << " occ1 " << k1_
        << " occ2 " << k2_ << " adcf " << (director ? 1 : 0) << " idem "
        << (cfg_.idem ? 1 : 0) << '\n';
    save_mlp(out, actor);
    save_mlp(out, actor_target);
    save_mlp(out, q1);
    save_mlp(out, q2);
    save_mlp(out, qt11);
    save_mlp(out, qt21);
    if (cfg_.idem) {
        save_mlp(out, *qt12);
        save_mlp(out, *qt22);
    }
    if (director) save_mlp(out, *director);
}

void Ctd3Agent::load(std::istream& in) {
    std::string magic, version;
    if (!(in >> magic >> version) || magic != "CTD3" || version != "v1")
        throw std::runtime_error("agent checkpoint: bad header '" + magic + " " + version +
                                 "'");
    std::string key;
    std::uint64_t file_hash = 0, t = 0, k1 = 0, k2 = 0;
    int adcf = 0, idem = 0;
    auto read_kv = [&](const char* want, auto& dst) {
        if (!(in >> key) || key != want)
            throw std::runtime_error("agent checkpoint: expected '" + std::string(want) +
                                     "', found '" + key + "'");
        if (!(in >> dst))
            throw std::runtime_error("agent checkpoint: bad value for '" + std::string(want) +
                                     "'");
    };
    read_kv("hash", file_hash);
    read_kv("t", t);
    read_kv("occ1", k1);
    read_kv("occ2", k2);
    read_kv("adcf", adcf);
    read_kv("idem", idem);

    auto expect_dims = [&](const Mlp& net, std::size_t in_dim, std::size_t out_dim,
                           const char* what) {
        if (net.input_dim() != in_dim || net.output_dim() != out_dim)
            throw std::runtime_error(std::string("agent checkpoint: ") + what + " is " +
                                     std::to_string(net.input_dim()) + "->" +
                                     std::to_string(net.output_dim()) + " but environment needs " +
                                     std::to_string(in_dim) + "->" + std::to_string(out_dim));
    };
    const std::size_t in_sa = env_.obs_dim + env_.action_dim;

    Mlp new_actor = load_mlp(in);
    expect_dims(new_actor, env_.obs_dim, env_.action_dim, "actor");
    Mlp new_actor_target = load_mlp(in);
    if (!new_actor_target.same_architecture(new_actor))
        throw std::runtime_error("agent checkpoint: target actor architecture differs from actor");
    Mlp new_q1 = load_mlp(in);
    expect_dims(new_q1, in_sa, 1, "critic 1");
    Mlp new_q2 = load_mlp(in);
    expect_dims(new_q2, in_sa, 1, "critic 2");
    Mlp new_qt11 = load_mlp(in);
    Mlp new_qt21 = load_mlp(in);
    if (!new_qt11.same_architecture(new_q1) || !new_qt21.same_architecture(new_q2))
        throw std::runtime_error("agent checkpoint: target critic architecture differs from critic");

    std::optional<Mlp> new_qt12, new_qt22, new_director;
    if (idem) {
        new_qt12 = load_mlp(in);
        new_qt22 = load_mlp(in);
        if (!new_qt12->same_architecture(new_q1) || !new_qt22->same_architecture(new_q2))
            throw std::runtime_error(
                "agent checkpoint: target critic architecture differs from critic");
    }
    if (adcf) {
        new_director = load_mlp(in);
        expect_dims(*new_director, in_sa, 1, "director");
    }

    actor = std::move(new_actor);
    actor_target = std::move(new_actor_target);
    q1 = std::move(new_q1);
    q2 = std::move(new_q2);
    qt11 = std::move(new_qt11);
    qt21 = std::move(new_qt21);
    qt12 = std::move(new_qt12);
    qt22 = std::move(new_qt22);
    director = std::move(new_director);
    cfg_.adcf = adcf != 0;
    cfg_.idem = idem != 0;
    t_ = t;
    k1_ = k1;
    k2_ = k2;

    // optimizer moments are not part of the format; fresh states
    actor_adam_ = AdamState::for_net(actor);
    q1_adam_ = AdamState::for_net(q1);
    q2_adam_ = AdamState::for_net(q2);
    if (director) director_adam_ = AdamState::for_net(*director);
}

} // namespace ctd3
