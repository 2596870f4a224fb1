#include "ctd3/env.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "ctd3/rng.hpp"

namespace ctd3 {

namespace {

constexpr double kPi = std::numbers::pi;

double clamp(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

void check_action_dim(std::span<const double> action, const EnvSpec& spec,
                      const char* env_name) {
    if (action.size() != spec.action_dim)
        throw std::invalid_argument(std::string(env_name) + ": action has " +
                                    std::to_string(action.size()) + " dims, expected " +
                                    std::to_string(spec.action_dim));
}

} // namespace

double wrap_angle(double theta) {
    double t = std::fmod(theta + kPi, 2.0 * kPi);
    if (t < 0.0) t += 2.0 * kPi;
    return t - kPi;
}

// ---------------------------------------------------------------------------
// Pendulum
// ---------------------------------------------------------------------------

namespace {
constexpr double kGravity = 10.0;
constexpr double kMass = 1.0;
constexpr double kLength = 1.0;
constexpr double kDt = 0.05;
constexpr double kMaxSpeed = 8.0;
constexpr double kMaxTorque = 2.0;
} // namespace

Pendulum::Pendulum() {
    spec_.obs_dim = 3;
    spec_.action_dim = 1;
    spec_.action_low = {-kMaxTorque};
    spec_.action_high = {kMaxTorque};
    spec_.max_episode_steps = 200;
}

std::vector<double> Pendulum::reset(std::uint64_t seed) {
    Rng rng(seed);
    theta_ = rng.uniform(-kPi, kPi);
    theta_dot_ = rng.uniform(-1.0, 1.0);
    steps_ = 0;
    return {std::cos(theta_), std::sin(theta_), theta_dot_};
}

void Pendulum::set_state(double theta, double theta_dot) {
    theta_ = theta;
    theta_dot_ = theta_dot;
    steps_ = 0;
}

StepResult Pendulum::step(std::span<const double> action) {
    check_action_dim(action, spec_, "pendulum");
    const double u = clamp(action[0], -kMaxTorque, kMaxTorque);

    const double th_bar = wrap_angle(theta_);
    const double reward = -(th_bar * th_bar + 0.1 * theta_dot_ * theta_dot_ + 0.001 * u * u);

    theta_dot_ = clamp(theta_dot_ +
                           (3.0 * kGravity / (2.0 * kLength)) * std::sin(theta_) * kDt +
                           (3.0 / (kMass * kLength * kLength)) * u * kDt,
                       -kMaxSpeed, kMaxSpeed);
    theta_ += theta_dot_ * kDt;

    ++steps_;
    StepResult r;
    r.observation = {std::cos(theta_), std::sin(theta_), theta_dot_};
    r.reward = reward;
    r.done = steps_ >= spec_.max_episode_steps;
    return r;
}

// ---------------------------------------------------------------------------
// PointMass
// ---------------------------------------------------------------------------

namespace {
constexpr double kPmDt = 0.05;
constexpr double kPmAccel = 1.0;
} // namespace

PointMass::PointMass() {
    spec_.obs_dim = 4;
    spec_.action_dim = 2;
    spec_.action_low = {-kPmAccel, -kPmAccel};
    spec_.action_high = {kPmAccel, kPmAccel};
    spec_.max_episode_steps = 200;
}

std::vector<double> PointMass::reset(std::uint64_t seed) {
    Rng rng(seed);
    pos_[0] = rng.uniform(-1.0, 1.0);
    pos_[1] = rng.uniform(-1.0, 1.0);
    vel_[0] = 0.0;
    vel_[1] = 0.0;
    steps_ = 0;
    return {pos_[0], pos_[1], vel_[0], vel_[1]};
}

void PointMass::set_state(double px, double py, double vx, double vy) {
    pos_[0] = px;
    pos_[1] = py;
    vel_[0] = vx;
    vel_[1] = vy;
    steps_ = 0;
}

StepResult PointMass::step(std::span<const double> action) {
    check_action_dim(action, spec_, "pointmass");
    double a[2];
    for (int i = 0; i < 2; ++i) a[i] = clamp(action[i], -kPmAccel, kPmAccel);

    const double dist = std::sqrt(pos_[0] * pos_[0] + pos_[1] * pos_[1]);
    const double reward = -dist - 0.01 * (a[0] * a[0] + a[1] * a[1]);

    for (int i = 0; i < 2; ++i) {
        vel_[i] += a[i] * kPmDt;
        pos_[i] += vel_[i] * kPmDt;
    }

    ++steps_;
    StepResult r;
    r.observation = {pos_[0], pos_[1], vel_[0], vel_[1]};
    r.reward = reward;
    r.done = steps_ >= spec_.max_episode_steps;
    return r;
}

// ---------------------------------------------------------------------------

std::unique_ptr<Env> make_env(std::string_view id) {
    if (id == "pendulum") return std::make_unique<Pendulum>();
    if (id == "pointmass") return std::make_unique<PointMass>();
    throw std::invalid_argument("unknown environment '" + std::string(id) +
                                "' (known: pendulum, pointmass)");
}

double random_policy_return(Env& env, std::uint64_t seed, std::size_t episodes) {
    if (episodes < 1)
        throw std::invalid_argument("random_policy_return: episodes must be >= 1");
    const EnvSpec& spec = env.spec();
    Rng action_rng(mix_seed(seed, 0x72616e64)); // action stream
    double total = 0.0;
    for (std::size_t ep = 0; ep < episodes; ++ep) {
        env.reset(mix_seed(seed, ep));
        std::vector<double> action(spec.action_dim);
        bool done = false;
        while (!done) {
            for (std::size_t j = 0; j < spec.action_dim; ++j)
                action[j] = action_rng.uniform(spec.action_low[j], spec.action_high[j]);
            StepResult r = env.step(action);
            total += r.reward;
            done = r.done;
        }
    }
    return total / static_cast<double>(episodes);
}

} // namespace ctd3
