#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "ctd3/agent.hpp"
#include "ctd3/env.hpp"
#include "ctd3/replay.hpp"
#include "ctd3/rng.hpp"
#include "support/reference_td3.hpp"
#include "support/target_oracle.hpp"

using namespace ctd3;

namespace {

bool params_equal(const Mlp& a, const Mlp& b) {
    if (!a.same_architecture(b)) return false;
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        if (a.layers[l].weight.data != b.layers[l].weight.data) return false;
        if (a.layers[l].bias != b.layers[l].bias) return false;
    }
    return true;
}

double max_param_gap(const Mlp& a, const Mlp& b) {
    double worst = 0.0;
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        for (std::size_t i = 0; i < a.layers[l].weight.size(); ++i)
            worst = std::max(worst, std::abs(a.layers[l].weight.data[i] -
                                             b.layers[l].weight.data[i]));
        for (std::size_t i = 0; i < a.layers[l].bias.size(); ++i)
            worst = std::max(worst, std::abs(a.layers[l].bias[i] - b.layers[l].bias[i]));
    }
    return worst;
}

Mlp mk_mlp(std::vector<std::size_t> dims, std::vector<Activation> acts, Rng& rng) {
    return Mlp::init(dims, acts, rng);
}

// Single-layer net that ignores its input: zero weights, fixed bias.
Mlp constant_net(std::size_t in_dim, double bias, Activation head) {
    Rng rng(1);
    Mlp net = mk_mlp({in_dim, 1}, {head}, rng);
    std::fill(net.layers[0].weight.data.begin(), net.layers[0].weight.data.end(), 0.0);
    net.layers[0].bias[0] = bias;
    return net;
}

void zero_params(Mlp& net) {
    for (auto& l : net.layers) {
        std::fill(l.weight.data.begin(), l.weight.data.end(), 0.0);
        std::fill(l.bias.begin(), l.bias.end(), 0.0);
    }
}

void jitter_params(Mlp& net, Rng& rng, double scale) {
    for (auto& l : net.layers) {
        for (double& v : l.weight.data) v += rng.uniform(-scale, scale);
        for (double& v : l.bias) v += rng.uniform(-scale, scale);
    }
}

struct BatchFixture {
    std::vector<Transition> storage;
    std::vector<const Transition*> ptrs;
};

BatchFixture random_batch(const EnvSpec& spec, std::size_t n, Rng& rng,
                          bool with_terminals = false) {
    BatchFixture b;
    b.storage.resize(n);
    for (auto& tr : b.storage) {
        tr.state.resize(spec.obs_dim);
        tr.next_state.resize(spec.obs_dim);
        tr.action.resize(spec.action_dim);
        for (auto& v : tr.state) v = rng.uniform(-1.5, 1.5);
        for (auto& v : tr.next_state) v = rng.uniform(-1.5, 1.5);
        for (std::size_t j = 0; j < spec.action_dim; ++j)
            tr.action[j] = rng.uniform(spec.action_low[j], spec.action_high[j]);
        tr.reward = rng.uniform(-5.0, 1.0);
        tr.terminal = with_terminals && rng.uniform01() < 0.3;
    }
    for (const auto& tr : b.storage) b.ptrs.push_back(&tr);
    return b;
}

// Central finite differences of eval() over every parameter of net.
template <typename F>
MlpGrads fd_param_grads(Mlp& net, F&& eval, double h = 1e-5) {
    MlpGrads out = net.make_grads();
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        auto probe = [&](double& p, double& slot) {
            const double save = p;
            p = save + h;
            const double up = eval();
            p = save - h;
            const double dn = eval();
            p = save;
            slot = (up - dn) / (2.0 * h);
        };
        for (std::size_t i = 0; i < net.layers[l].weight.size(); ++i)
            probe(net.layers[l].weight.data[i], out.layers[l].weight.data[i]);
        for (std::size_t i = 0; i < net.layers[l].bias.size(); ++i)
            probe(net.layers[l].bias[i], out.layers[l].bias[i]);
    }
    return out;
}

double max_grad_gap(const MlpGrads& a, const MlpGrads& b) {
    double worst = 0.0;
    auto gap = [&](double x, double y) {
        worst = std::max(worst, std::abs(x - y) / std::max({1.0, std::abs(x), std::abs(y)}));
    };
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        for (std::size_t i = 0; i < a.layers[l].weight.size(); ++i)
            gap(a.layers[l].weight.data[i], b.layers[l].weight.data[i]);
        for (std::size_t i = 0; i < a.layers[l].bias.size(); ++i)
            gap(a.layers[l].bias[i], b.layers[l].bias[i]);
    }
    return worst;
}

AgentConfig small_cfg(bool adcf, bool idem) {
    AgentConfig cfg;
    cfg.adcf = adcf;
    cfg.idem = idem;
    cfg.hidden = {8};
    cfg.batch_size = 4;
    cfg.warmup = 0;
    if (adcf) cfg.gamma_d_half_life = 10;
    return cfg;
}

EnvSpec pendulum_spec() { return make_env("pendulum")->spec(); }

// Smooth (tanh-hidden) replacements so finite differences stay clean near
// every probe point.
void make_smooth(Ctd3Agent& agent, const EnvSpec& spec, std::uint64_t seed) {
    Rng rng(seed);
    const std::size_t sa = spec.obs_dim + spec.action_dim;
    agent.actor = mk_mlp({spec.obs_dim, 5, spec.action_dim},
                         {Activation::tanh, Activation::tanh}, rng);
    agent.q1 = mk_mlp({sa, 6, 1}, {Activation::tanh, Activation::identity}, rng);
    agent.q2 = mk_mlp({sa, 6, 1}, {Activation::tanh, Activation::identity}, rng);
    if (agent.director)
        agent.director = mk_mlp({sa, 4, 1}, {Activation::tanh, Activation::sigmoid}, rng);
}

} // namespace

TEST_CASE("configs are validated with the offending field named") {
    const EnvSpec spec = pendulum_spec();
    auto expect_reject = [&](AgentConfig cfg, const char* needle) {
        try {
            Ctd3Agent agent(spec, cfg, 0);
            FAIL_CHECK("config accepted but should mention " << needle);
        } catch (const std::invalid_argument& e) {
            CHECK(std::string(e.what()).find(needle) != std::string::npos);
        }
    };
    AgentConfig cfg = small_cfg(true, true);
    cfg.gamma_q = 1.0;
    expect_reject(cfg, "gamma_q");
    cfg = small_cfg(true, true);
    cfg.tau = 0.0;
    expect_reject(cfg, "tau");
    cfg = small_cfg(true, true);
    cfg.policy_delay = 0;
    expect_reject(cfg, "policy_delay");
    cfg = small_cfg(true, true);
    cfg.batch_size = 0;
    expect_reject(cfg, "batch_size");
    cfg = small_cfg(true, true);
    cfg.gamma_d_half_life = 0;
    expect_reject(cfg, "gamma_d_half_life");
    cfg = small_cfg(true, true);
    cfg.lr_actor = 0.0;
    expect_reject(cfg, "learning rates");
}

TEST_CASE("every target network starts as an exact copy of its source") {
    Ctd3Agent agent(pendulum_spec(), small_cfg(true, true), 3);
    CHECK(params_equal(agent.actor_target, agent.actor));
    CHECK(params_equal(agent.qt11, agent.q1));
    CHECK(params_equal(*agent.qt12, agent.q1));
    CHECK(params_equal(agent.qt21, agent.q2));
    CHECK(params_equal(*agent.qt22, agent.q2));
    CHECK(agent.director.has_value());

    Ctd3Agent plain(pendulum_spec(), small_cfg(false, false), 3);
    CHECK(!plain.director.has_value());
    CHECK(!plain.qt12.has_value());
    CHECK(!plain.qt22.has_value());
}

TEST_CASE("zero exploration noise makes both action modes identical") {
    AgentConfig cfg = small_cfg(false, false);
    cfg.explore_noise = 0.0;
    Ctd3Agent agent(pendulum_spec(), cfg, 11);
    Rng rng(5);
    const std::vector<double> obs{0.3, -0.2, 1.1};
    const auto greedy = agent.select_action(obs, false, rng);
    const auto noisy = agent.select_action(obs, true, rng);
    REQUIRE(greedy.size() == noisy.size());
    for (std::size_t j = 0; j < greedy.size(); ++j) CHECK(greedy[j] == noisy[j]);
}

TEST_CASE("greedy actions repeat exactly and noisy actions respect the bounds") {
    const EnvSpec spec = pendulum_spec();
    Ctd3Agent agent(spec, small_cfg(false, false), 12);
    Rng rng(6);
    const std::vector<double> obs{-0.9, 0.4, 3.0};
    const auto a1 = agent.select_action(obs, false, rng);
    const auto a2 = agent.select_action(obs, false, rng);
    CHECK(a1 == a2);

    for (int i = 0; i < 10000; ++i) {
        const std::vector<double> o{rng.uniform(-1, 1), rng.uniform(-1, 1),
                                    rng.uniform(-8, 8)};
        const auto a = agent.select_action(o, true, rng);
        for (std::size_t j = 0; j < a.size(); ++j) {
            CHECK(a[j] >= spec.action_low[j]);
            CHECK(a[j] <= spec.action_high[j]);
        }
    }
}

TEST_CASE("zero smoothing noise reproduces the target actor exactly") {
    const EnvSpec spec = pendulum_spec();
    AgentConfig cfg = small_cfg(false, true);
    cfg.target_noise = 0.0;
    Ctd3Agent agent(spec, cfg, 13);
    Rng rng(7);
    const std::vector<double> obs{0.1, 0.2, -0.5};
    const auto a = agent.smoothed_target_action(obs, rng);
    const auto mu = agent.actor_target.forward(obs);
    for (std::size_t j = 0; j < a.size(); ++j) {
        const double center = 0.5 * (spec.action_low[j] + spec.action_high[j]);
        const double half = 0.5 * (spec.action_high[j] - spec.action_low[j]);
        CHECK(a[j] ==
              std::clamp(center + half * mu[j], spec.action_low[j], spec.action_high[j]));
    }
}

TEST_CASE("smoothing noise saturates exactly at the clip and never beyond") {
    const EnvSpec spec = pendulum_spec();
    AgentConfig cfg = small_cfg(false, true);
    cfg.target_noise = 2.0; // huge: most draws clip
    cfg.noise_clip = 0.25;  // c = 0.5 in action units (half-range 2)
    Ctd3Agent agent(spec, cfg, 14);
    zero_params(agent.actor_target); // tanh(0) = 0, so the clean action is 0

    const double c = cfg.noise_clip * 2.0;
    Rng rng(8);
    int saturated = 0;
    const std::vector<double> obs{0.0, 0.0, 0.0};
    for (int i = 0; i < 100000; ++i) {
        const auto a = agent.smoothed_target_action(obs, rng);
        REQUIRE(std::abs(a[0]) <= c);
        if (std::abs(a[0]) == c) ++saturated; // clipped draws land exactly on +-c
    }
    CHECK(saturated > 50000);
}

TEST_CASE("constant-bias target critics force the textbook bootstrap value") {
    const EnvSpec spec = pendulum_spec();
    Ctd3Agent agent(spec, small_cfg(false, true), 15);
    const std::size_t sa = spec.obs_dim + spec.action_dim;
    agent.qt11 = constant_net(sa, 2.0, Activation::identity);
    agent.qt12 = constant_net(sa, 4.0, Activation::identity);
    agent.qt21 = constant_net(sa, 10.0, Activation::identity);
    agent.qt22 = constant_net(sa, 0.0, Activation::identity);

    Transition tr;
    tr.state = {0, 0, 0};
    tr.action = {0};
    tr.reward = 1.0;
    tr.next_state = {0.5, 0.5, 0.5};
    std::vector<const Transition*> batch{&tr};

    Rng rng(9);
    auto y = agent.compute_target(batch, rng);
    REQUIRE(y.size() == 1);
    CHECK(y[0] == 1.0 + 0.99 * 3.0); // min((2+4)/2, (10+0)/2) = 3
    CHECK(y[0] == doctest::Approx(3.97));

    tr.terminal = true;
    y = agent.compute_target(batch, rng);
    CHECK(y[0] == 1.0); // terminal masks the bootstrap entirely
}

TEST_CASE("target values match a straight-line recomputation in both ensemble modes") {
    CHECK(testing::target_oracle_max_err(1000, true, 42) <= 1e-12);
    CHECK(testing::target_oracle_max_err(1000, false, 43) <= 1e-12);
}

TEST_CASE("critics already matching the target keep zero loss and fixed parameters") {
    const EnvSpec spec = pendulum_spec();
    Ctd3Agent agent(spec, small_cfg(false, true), 16);
    // keep the architecture (the optimizer state matches it); zeroed weights
    // with a head bias make the critic constant
    zero_params(agent.q1);
    zero_params(agent.q2);
    agent.q1.layers.back().bias[0] = 0.7;
    agent.q2.layers.back().bias[0] = 0.7;
    const Mlp before1 = agent.q1;
    const Mlp before2 = agent.q2;

    Rng rng(10);
    auto batch = random_batch(spec, 6, rng);
    const std::vector<double> y(6, 0.7);
    const auto [l1, l2] = agent.update_critics(batch.ptrs, y, rng);
    CHECK(l1 == 0.0);
    CHECK(l2 == 0.0);
    CHECK(params_equal(agent.q1, before1));
    CHECK(params_equal(agent.q2, before2));
}

TEST_CASE("critic loss equals the hand-computed mean squared error") {
    const EnvSpec spec = pendulum_spec();
    Ctd3Agent agent(spec, small_cfg(false, true), 17);
    Rng rng(11);
    auto batch = random_batch(spec, 9, rng);
    std::vector<double> y(9);
    for (auto& v : y) v = rng.uniform(-3.0, 3.0);

    for (int which = 1; which <= 2; ++which) {
        const Mlp& net = which == 1 ? agent.q1 : agent.q2;
        double expect = 0.0;
        for (std::size_t i = 0; i < batch.ptrs.size(); ++i) {
            std::vector<double> xa(batch.ptrs[i]->state);
            xa.insert(xa.end(), batch.ptrs[i]->action.begin(), batch.ptrs[i]->action.end());
            const double d = net.forward(xa)[0] - y[i];
            expect += d * d;
        }
        expect /= static_cast<double>(batch.ptrs.size());
        CHECK(std::abs(agent.critic_loss(which, batch.ptrs, y) - expect) <= 1e-12);
    }
}

TEST_CASE("a critic step lowers the regression loss on its own batch") {
    Rng meta(12);
    const EnvSpec spec = pendulum_spec();
    for (int rep = 0; rep < 100; ++rep) {
        AgentConfig cfg = small_cfg(false, true);
        cfg.lr_critic = 1e-4;
        Ctd3Agent agent(spec, cfg, meta.raw());
        auto batch = random_batch(spec, 8, meta);
        std::vector<double> y(8);
        for (auto& v : y) v = meta.uniform(-3.0, 3.0);

        const double before1 = agent.critic_loss(1, batch.ptrs, y);
        const double before2 = agent.critic_loss(2, batch.ptrs, y);
        agent.update_critics(batch.ptrs, y, meta);
        CHECK(agent.critic_loss(1, batch.ptrs, y) < before1);
        CHECK(agent.critic_loss(2, batch.ptrs, y) < before2);
    }
}

TEST_CASE("director objective hits its bounds on saturated and indifferent directors") {
    const EnvSpec spec = pendulum_spec();
    Ctd3Agent agent(spec, small_cfg(true, true), 18);
    const std::size_t sa = spec.obs_dim + spec.action_dim;

    // Saturating stub: reads only the action and maps sign(+-1) to exactly 1/0.
    Rng rng(13);
    Mlp judge = mk_mlp({sa, 1}, {Activation::sigmoid}, rng);
    std::fill(judge.layers[0].weight.data.begin(), judge.layers[0].weight.data.end(), 0.0);
    judge.layers[0].weight.at(0, spec.obs_dim) = 1000.0;
    judge.layers[0].bias[0] = 0.0;
    agent.director = judge;

    auto high = random_batch(spec, 5, rng);
    auto low = random_batch(spec, 7, rng);
    for (auto& tr : high.storage) tr.action[0] = 1.0;
    for (auto& tr : low.storage) tr.action[0] = -1.0;
    CHECK(agent.director_value(high.ptrs, low.ptrs) == 2.0);

    agent.director = constant_net(sa, 0.0, Activation::sigmoid); // D = 0.5 everywhere
    CHECK(agent.director_value(high.ptrs, low.ptrs) == 1.0);
}

TEST_CASE("director output keeps the objective inside [0, 2]") {
    Rng meta(14);
    const EnvSpec spec = pendulum_spec();
    for (int rep = 0; rep < 50; ++rep) {
        Ctd3Agent agent(spec, small_cfg(true, true), meta.raw());
        auto high = random_batch(spec, 4, meta);
        auto low = random_batch(spec, 4, meta);
        const double v = agent.director_value(high.ptrs, low.ptrs);
        CHECK(v >= 0.0);
        CHECK(v <= 2.0);
    }
}

TEST_CASE("critic gradients match central finite differences") {
    Rng meta(15);
    const EnvSpec spec = pendulum_spec();
    for (int rep = 0; rep < 20; ++rep) {
        Ctd3Agent agent(spec, small_cfg(false, true), meta.raw());
        make_smooth(agent, spec, meta.raw());
        auto batch = random_batch(spec, 5, meta);
        std::vector<double> y(5);
        for (auto& v : y) v = meta.uniform(-2.0, 2.0);

        MlpGrads analytic = agent.q1.make_grads();
        agent.critic_grads(1, batch.ptrs, y, analytic);
        const MlpGrads fd = fd_param_grads(
            agent.q1, [&] { return agent.critic_loss(1, batch.ptrs, y); });
        CHECK(max_grad_gap(analytic, fd) <= 1e-4);
    }
}

TEST_CASE("director gradients match central finite differences") {
    Rng meta(16);
    const EnvSpec spec = pendulum_spec();
    for (int rep = 0; rep < 20; ++rep) {
        Ctd3Agent agent(spec, small_cfg(true, true), meta.raw());
        make_smooth(agent, spec, meta.raw());
        auto high = random_batch(spec, 4, meta);
        auto low = random_batch(spec, 6, meta);

        MlpGrads analytic = agent.director->make_grads();
        agent.director_grads(high.ptrs, low.ptrs, analytic);
        const MlpGrads fd = fd_param_grads(
            *agent.director, [&] { return agent.director_value(high.ptrs, low.ptrs); });
        CHECK(max_grad_gap(analytic, fd) <= 1e-4);
    }
}

TEST_CASE("actor gradients match central finite differences with both terms active") {
    Rng meta(17);
    const EnvSpec spec = pendulum_spec();
    for (int rep = 0; rep < 20; ++rep) {
        AgentConfig cfg = small_cfg(true, true);
        cfg.gamma_d0 = 0.9;
        cfg.gamma_d_half_life = 7;
        Ctd3Agent agent(spec, cfg, meta.raw());
        make_smooth(agent, spec, meta.raw());
        auto batch = random_batch(spec, 5, meta);
        const std::uint64_t t = 3; // gamma_d(t) strictly between 0 and gamma_d0

        MlpGrads analytic = agent.actor.make_grads();
        agent.actor_grads(batch.ptrs, t, analytic);
        const MlpGrads fd =
            fd_param_grads(agent.actor, [&] { return agent.actor_objective(batch.ptrs, t); });
        CHECK(max_grad_gap(analytic, fd) <= 1e-4);
    }
}

TEST_CASE("without the director the actor objective is the plain critic mean") {
    const EnvSpec spec = pendulum_spec();
    Ctd3Agent agent(spec, small_cfg(false, false), 19);
    Rng rng(18);
    auto batch = random_batch(spec, 7, rng);

    double expect = 0.0;
    for (const Transition* tr : batch.ptrs) {
        const auto mu = agent.actor.forward(tr->state);
        std::vector<double> xa(tr->state);
        for (std::size_t j = 0; j < mu.size(); ++j) {
            const double center = 0.5 * (spec.action_low[j] + spec.action_high[j]);
            const double half = 0.5 * (spec.action_high[j] - spec.action_low[j]);
            xa.push_back(center + half * mu[j]);
        }
        expect += agent.q1.forward(xa)[0];
    }
    expect /= static_cast<double>(batch.ptrs.size());
    CHECK(std::abs(agent.actor_objective(batch.ptrs, 12345) - expect) <= 1e-12);
}

TEST_CASE("each update touches only its own network") {
    const EnvSpec spec = pendulum_spec();
    Ctd3Agent agent(spec, small_cfg(true, true), 20);
    Rng rng(19);
    auto batch = random_batch(spec, 6, rng);
    auto high = random_batch(spec, 6, rng);
    auto low = random_batch(spec, 6, rng);
    std::vector<double> y(6);
    for (auto& v : y) v = rng.uniform(-2.0, 2.0);

    SUBCASE("actor step freezes critics and director") {
        const Mlp q1 = agent.q1, q2 = agent.q2, dir = *agent.director;
        const Mlp at = agent.actor_target, a = agent.actor;
        agent.update_actor(batch.ptrs, 4);
        CHECK(params_equal(agent.q1, q1));
        CHECK(params_equal(agent.q2, q2));
        CHECK(params_equal(*agent.director, dir));
        CHECK(!params_equal(agent.actor, a));
        CHECK(!params_equal(agent.actor_target, at)); // trailing soft update
    }
    SUBCASE("director step freezes actor and critics") {
        const Mlp q1 = agent.q1, q2 = agent.q2, a = agent.actor;
        agent.update_director(high.ptrs, low.ptrs);
        CHECK(params_equal(agent.q1, q1));
        CHECK(params_equal(agent.q2, q2));
        CHECK(params_equal(agent.actor, a));
    }
    SUBCASE("critic step freezes actor, director, and all targets") {
        const Mlp a = agent.actor, dir = *agent.director;
        const Mlp t11 = agent.qt11, t12 = *agent.qt12, t21 = agent.qt21, t22 = *agent.qt22;
        agent.update_critics(batch.ptrs, y, rng);
        CHECK(params_equal(agent.actor, a));
        CHECK(params_equal(*agent.director, dir));
        CHECK(params_equal(agent.qt11, t11));
        CHECK(params_equal(*agent.qt12, t12));
        CHECK(params_equal(agent.qt21, t21));
        CHECK(params_equal(*agent.qt22, t22));
    }
}

TEST_CASE("director weight follows the half-life schedule") {
    AgentConfig cfg;
    cfg.gamma_d0 = 0.8;
    cfg.gamma_d_half_life = 100;
    CHECK(Ctd3Agent::director_weight(cfg, 0) == 0.8);
    CHECK(Ctd3Agent::director_weight(cfg, 100) == 0.4);
    CHECK(Ctd3Agent::director_weight(cfg, 1000) == 0.8 / 1024.0);
    for (std::uint64_t t = 1; t < 300; ++t)
        CHECK(Ctd3Agent::director_weight(cfg, t) <= Ctd3Agent::director_weight(cfg, t - 1));
    cfg.gamma_d_half_life = 0;
    CHECK(Ctd3Agent::director_weight(cfg, 0) == 0.0);
}

TEST_CASE("target updates alternate between each critic's two targets") {
    const EnvSpec spec = pendulum_spec();
    Ctd3Agent agent(spec, small_cfg(true, true), 21);
    Rng rng(20);
    jitter_params(agent.q1, rng, 0.05);
    jitter_params(agent.q2, rng, 0.05);

    auto snap = [&] {
        return std::array<Mlp, 4>{agent.qt11, *agent.qt12, agent.qt21, *agent.qt22};
    };
    auto expect_moved = [&](const std::array<Mlp, 4>& before, int moved) {
        const std::array<const Mlp*, 4> now{&agent.qt11, &*agent.qt12, &agent.qt21,
                                            &*agent.qt22};
        for (int i = 0; i < 4; ++i) {
            if (i == moved)
                CHECK(!params_equal(*now[i], before[i]));
            else
                CHECK(params_equal(*now[i], before[i]));
        }
    };

    auto s = snap();
    agent.update_targets(1); // critic 1, first occasion: target A
    expect_moved(s, 0);
    // A moved exactly tau of the way to the critic
    Mlp replay = s[0];
    soft_update(replay, agent.q1, agent.config().tau);
    CHECK(params_equal(agent.qt11, replay));

    s = snap();
    agent.update_targets(2); // critic 2, first occasion: target A
    expect_moved(s, 2);
    s = snap();
    agent.update_targets(3); // critic 1, second occasion: target B
    expect_moved(s, 1);
    s = snap();
    agent.update_targets(4); // critic 2, second occasion: target B
    expect_moved(s, 3);
}

TEST_CASE("replayed soft-update sequences reproduce the target parameters") {
    const EnvSpec spec = pendulum_spec();
    Ctd3Agent agent(spec, small_cfg(true, true), 22);
    Rng rng(21);

    Mlp s11 = agent.qt11, s12 = *agent.qt12, s21 = agent.qt21, s22 = *agent.qt22;
    std::uint64_t k1 = 0, k2 = 0;
    for (std::uint64_t t = 1; t <= 40; ++t) {
        jitter_params(agent.q1, rng, 0.02);
        jitter_params(agent.q2, rng, 0.02);
        agent.update_targets(t);
        if (t % 2 == 1) {
            ++k1;
            soft_update(k1 % 2 == 1 ? s11 : s12, agent.q1, agent.config().tau);
        } else {
            ++k2;
            soft_update(k2 % 2 == 1 ? s21 : s22, agent.q2, agent.config().tau);
        }
    }
    CHECK(max_param_gap(agent.qt11, s11) <= 1e-12);
    CHECK(max_param_gap(*agent.qt12, s12) <= 1e-12);
    CHECK(max_param_gap(agent.qt21, s21) <= 1e-12);
    CHECK(max_param_gap(*agent.qt22, s22) <= 1e-12);

    // the two histories are genuinely different once the critic moved
    CHECK(!params_equal(agent.qt11, *agent.qt12));
    CHECK(!params_equal(agent.qt21, *agent.qt22));
}

TEST_CASE("unit tau makes the targets snap to the critic as of their own occasion") {
    const EnvSpec spec = pendulum_spec();
    AgentConfig cfg = small_cfg(true, true);
    cfg.tau = 1.0;
    Ctd3Agent agent(spec, cfg, 23);
    Rng rng(22);

    jitter_params(agent.q1, rng, 0.1);
    const Mlp q1_at_t1 = agent.q1;
    agent.update_targets(1);
    CHECK(params_equal(agent.qt11, q1_at_t1));

    jitter_params(agent.q1, rng, 0.1);
    const Mlp q1_at_t3 = agent.q1;
    agent.update_targets(3);
    CHECK(params_equal(*agent.qt12, q1_at_t3));
    CHECK(params_equal(agent.qt11, q1_at_t1)); // A still holds the older snapshot
    CHECK(!params_equal(agent.qt11, *agent.qt12));
}

TEST_CASE("literal schedule moves both of one critic's targets together") {
    const EnvSpec spec = pendulum_spec();
    AgentConfig cfg = small_cfg(true, true);
    cfg.literal_target_schedule = true;
    Ctd3Agent agent(spec, cfg, 24);
    Rng rng(23);
    jitter_params(agent.q1, rng, 0.05);

    agent.update_targets(1);
    CHECK(params_equal(agent.qt11, *agent.qt12)); // started equal, moved equally
    jitter_params(agent.q1, rng, 0.05);
    agent.update_targets(3);
    CHECK(params_equal(agent.qt11, *agent.qt12)); // and stay pairwise identical
}

TEST_CASE("training steps during warmup only store transitions") {
    const EnvSpec spec = pendulum_spec();
    AgentConfig cfg = small_cfg(true, true);
    cfg.warmup = 50;
    Ctd3Agent agent(spec, cfg, 25);
    TripleReplayConfig bcfg;
    bcfg.cutoff = -1.0;
    TripleReplay buffers(bcfg);

    const Mlp a = agent.actor, q1 = agent.q1, q2 = agent.q2, dir = *agent.director;
    const Mlp t11 = agent.qt11, t21 = agent.qt21;

    Rng rng(24);
    for (int t = 0; t < 50; ++t) {
        auto batch = random_batch(spec, 1, rng);
        const auto rep = agent.train_step(buffers, batch.storage[0], rng);
        CHECK(!rep.learned);
        CHECK(!rep.director_updated);
        CHECK(!rep.actor_updated);
        CHECK(rep.gamma_d == Ctd3Agent::director_weight(agent.config(), agent.steps()));
    }
    CHECK(buffers.main().size() == 50);
    CHECK(buffers.high().size() + buffers.low().size() == 50);
    CHECK(params_equal(agent.actor, a));
    CHECK(params_equal(agent.q1, q1));
    CHECK(params_equal(agent.q2, q2));
    CHECK(params_equal(*agent.director, dir));
    CHECK(params_equal(agent.qt11, t11));
    CHECK(params_equal(agent.qt21, t21));
}

TEST_CASE("train_step learns after warmup and reports the director schedule") {
    const EnvSpec spec = pendulum_spec();
    AgentConfig cfg = small_cfg(true, true);
    cfg.warmup = 8;
    cfg.batch_size = 4;
    cfg.gamma_d_half_life = 5;
    Ctd3Agent agent(spec, cfg, 26);
    TripleReplayConfig bcfg;
    bcfg.cutoff = -1.0;
    TripleReplay buffers(bcfg);

    Rng rng(25);
    bool saw_learning = false, saw_actor = false, saw_director = false;
    for (int t = 1; t <= 60; ++t) {
        auto batch = random_batch(spec, 1, rng);
        // rewards straddle the cutoff so both side buffers fill
        batch.storage[0].reward = (t % 2 == 0) ? 0.0 : -3.0;
        const auto rep = agent.train_step(buffers, batch.storage[0], rng);
        CHECK(rep.gamma_d == Ctd3Agent::director_weight(cfg, static_cast<std::uint64_t>(t)));
        if (rep.learned) saw_learning = true;
        if (rep.actor_updated) {
            saw_actor = true;
            CHECK(agent.steps() % cfg.policy_delay == 0);
        }
        if (rep.director_updated) {
            saw_director = true;
            CHECK(rep.director_v >= 0.0);
            CHECK(rep.director_v <= 2.0);
        }
    }
    CHECK(saw_learning);
    CHECK(saw_actor);
    CHECK(saw_director);
    CHECK(agent.steps() == 60);
}

TEST_CASE("flags-off training reproduces reference TD3 bit for bit over 1000 steps") {
    auto env = make_env("pendulum");
    const EnvSpec spec = env->spec();
    const std::uint64_t seed = 2;

    AgentConfig cfg;
    cfg.adcf = false;
    cfg.idem = false;
    cfg.hidden = {64, 64};
    cfg.batch_size = 64;
    cfg.warmup = 100;
    cfg.main_capacity = 100000;
    cfg.side_capacity = 10000;
    Ctd3Agent agent(spec, cfg, seed);

    testing::ReferenceTd3Config rcfg;
    rcfg.hidden = {64, 64};
    rcfg.batch_size = 64;
    rcfg.warmup = 100;
    rcfg.main_capacity = 100000;
    testing::ReferenceTd3 ref(spec, rcfg, seed);

    CHECK(params_equal(agent.actor, ref.actor));
    CHECK(params_equal(agent.q1, ref.q1));
    CHECK(params_equal(agent.q2, ref.q2));

    TripleReplayConfig bcfg;
    bcfg.main_capacity = 100000;
    bcfg.side_capacity = 10000;
    bcfg.cutoff = -1.0;
    TripleReplay buffers(bcfg);

    Rng rng_a(mix_seed(seed, 7));
    Rng rng_b(mix_seed(seed, 7));
    std::uint64_t ep = 0;
    auto obs = env->reset(mix_seed(seed, ep));

    for (int t = 1; t <= 1000; ++t) {
        std::vector<double> act_a(spec.action_dim), act_b(spec.action_dim);
        if (t <= 100) {
            for (std::size_t j = 0; j < spec.action_dim; ++j) {
                act_a[j] = rng_a.uniform(spec.action_low[j], spec.action_high[j]);
                act_b[j] = rng_b.uniform(spec.action_low[j], spec.action_high[j]);
            }
        } else {
            act_a = agent.select_action(obs, true, rng_a);
            act_b = ref.select_action(obs, true, rng_b);
        }
        REQUIRE(act_a == act_b);

        const auto sr = env->step(act_a);
        Transition tr;
        tr.state = obs;
        tr.action = act_a;
        tr.reward = sr.reward;
        tr.next_state = sr.observation;
        tr.truncated = sr.done;

        const auto rep = agent.train_step(buffers, tr, rng_a);
        const auto rrep = ref.train_step(std::move(tr), rng_b);
        REQUIRE(rep.learned == rrep.learned);
        REQUIRE(rep.loss_q1 == rrep.loss_q1);
        REQUIRE(rep.loss_q2 == rrep.loss_q2);
        CHECK(!rep.director_updated);

        if (t % 200 == 0) {
            REQUIRE(params_equal(agent.actor, ref.actor));
            REQUIRE(params_equal(agent.q1, ref.q1));
            REQUIRE(params_equal(agent.q2, ref.q2));
        }

        obs = sr.observation;
        if (sr.done) obs = env->reset(mix_seed(seed, ++ep));
    }

    CHECK(params_equal(agent.actor, ref.actor));
    CHECK(params_equal(agent.actor_target, ref.actor_target));
    CHECK(params_equal(agent.q1, ref.q1));
    CHECK(params_equal(agent.q2, ref.q2));
    CHECK(params_equal(agent.qt11, ref.qt1));
    CHECK(params_equal(agent.qt21, ref.qt2));
}

namespace {

// Full-feature driver used by the determinism check.
std::vector<StepReport> run_trace(std::uint64_t seed, int steps) {
    auto env = make_env("pendulum");
    const EnvSpec spec = env->spec();
    AgentConfig cfg;
    cfg.hidden = {32, 32};
    cfg.batch_size = 32;
    cfg.warmup = 64;
    cfg.gamma_d_half_life = 200;
    cfg.main_capacity = 100000;
    cfg.side_capacity = 10000;
    Ctd3Agent agent(spec, cfg, seed);

    TripleReplayConfig bcfg;
    bcfg.main_capacity = 100000;
    bcfg.side_capacity = 10000;
    bcfg.cutoff = -1.0;
    TripleReplay buffers(bcfg);

    Rng rng(mix_seed(seed, 7));
    std::uint64_t ep = 0;
    auto obs = env->reset(mix_seed(seed, ep));
    std::vector<StepReport> reports;
    for (int t = 1; t <= steps; ++t) {
        std::vector<double> act(spec.action_dim);
        if (t <= 64)
            for (std::size_t j = 0; j < spec.action_dim; ++j)
                act[j] = rng.uniform(spec.action_low[j], spec.action_high[j]);
        else
            act = agent.select_action(obs, true, rng);
        const auto sr = env->step(act);
        Transition tr;
        tr.state = obs;
        tr.action = act;
        tr.reward = sr.reward;
        tr.next_state = sr.observation;
        tr.truncated = sr.done;
        reports.push_back(agent.train_step(buffers, std::move(tr), rng));
        obs = sr.observation;
        if (sr.done) obs = env->reset(mix_seed(seed, ++ep));
    }
    return reports;
}

} // namespace

TEST_CASE("identical seeds give bit-identical step reports for 1000 steps") {
    const auto a = run_trace(5, 1000);
    const auto b = run_trace(5, 1000);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].learned == b[i].learned);
        CHECK(a[i].director_updated == b[i].director_updated);
        CHECK(a[i].actor_updated == b[i].actor_updated);
        CHECK(a[i].loss_q1 == b[i].loss_q1);
        CHECK(a[i].loss_q2 == b[i].loss_q2);
        CHECK(a[i].director_v == b[i].director_v);
        CHECK(a[i].actor_j == b[i].actor_j);
        CHECK(a[i].gamma_d == b[i].gamma_d);
    }
}

TEST_CASE("checkpoints restore every network exactly") {
    const EnvSpec spec = pendulum_spec();
    Ctd3Agent agent(spec, small_cfg(true, true), 30);
    Rng rng(29);
    jitter_params(agent.q1, rng, 0.05);
    jitter_params(agent.actor, rng, 0.05);
    agent.update_targets(1);
    agent.update_targets(2);

    std::stringstream file;
    agent.save(file);

    Ctd3Agent other(spec, small_cfg(true, true), 999);
    CHECK(!params_equal(other.actor, agent.actor));
    other.load(file);
    CHECK(params_equal(other.actor, agent.actor));
    CHECK(params_equal(other.actor_target, agent.actor_target));
    CHECK(params_equal(other.q1, agent.q1));
    CHECK(params_equal(other.q2, agent.q2));
    CHECK(params_equal(other.qt11, agent.qt11));
    CHECK(params_equal(*other.qt12, *agent.qt12));
    CHECK(params_equal(other.qt21, agent.qt21));
    CHECK(params_equal(*other.qt22, *agent.qt22));
    CHECK(params_equal(*other.director, *agent.director));
    CHECK(other.steps() == agent.steps());

    const std::vector<double> obs{0.2, -0.1, 0.4};
    Rng r1(1), r2(1);
    CHECK(agent.select_action(obs, false, r1) == other.select_action(obs, false, r2));
}

TEST_CASE("checkpoints carry the feature flags of the saved agent") {
    const EnvSpec spec = pendulum_spec();
    Ctd3Agent td3(spec, small_cfg(false, false), 31);
    std::stringstream file;
    td3.save(file);

    Ctd3Agent full(spec, small_cfg(true, true), 32);
    full.load(file);
    CHECK(!full.director.has_value());
    CHECK(!full.qt12.has_value());
    CHECK(!full.qt22.has_value());
    CHECK(!full.config().adcf);
    CHECK(!full.config().idem);
}

TEST_CASE("checkpoints with mismatched dimensions are rejected") {
    Ctd3Agent pend(pendulum_spec(), small_cfg(false, false), 33);
    std::stringstream file;
    pend.save(file);

    const EnvSpec pm = make_env("pointmass")->spec();
    Ctd3Agent other(pm, small_cfg(false, false), 34);
    CHECK_THROWS_AS(other.load(file), std::runtime_error);

    std::stringstream junk("BOGUS v9 x");
    CHECK_THROWS_AS(other.load(junk), std::runtime_error);
}

TEST_CASE("director update without a director is a logic error") {
    const EnvSpec spec = pendulum_spec();
    Ctd3Agent agent(spec, small_cfg(false, false), 35);
    Rng rng(30);
    auto high = random_batch(spec, 2, rng);
    auto low = random_batch(spec, 2, rng);
    CHECK_THROWS_AS(agent.update_director(high.ptrs, low.ptrs), std::logic_error);
}

TEST_CASE("environment default cutoffs are fixed constants") {
    CHECK(default_cutoff("pendulum") == -1.0);
    CHECK(default_cutoff("pointmass") == -0.6);
    CHECK_THROWS_AS(default_cutoff("lander"), std::invalid_argument);
}

TEST_CASE("config hashes separate distinct configurations") {
    AgentConfig a = small_cfg(true, true);
    AgentConfig b = a;
    CHECK(config_hash(a) == config_hash(b));
    b.gamma_q = 0.95;
    CHECK(config_hash(a) != config_hash(b));
    b = a;
    b.idem = false;
    CHECK(config_hash(a) != config_hash(b));
}
