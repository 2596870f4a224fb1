#pragma once

// Continuous-control environment contract plus the two built-in desk-scale
// environments. Both are fixed-horizon (time-limit truncation only, no early
// terminal states) with dense rewards, so a reward cutoff is meaningful from
// the first episode.

#include <cstdint>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

namespace ctd3 {

struct EnvSpec {
    std::size_t obs_dim = 0;
    std::size_t action_dim = 0;
    std::vector<double> action_low;
    std::vector<double> action_high;
    std::size_t max_episode_steps = 0;
};

struct StepResult {
    std::vector<double> observation;
    double reward = 0.0;
    bool done = false;
};

class Env {
public:
    virtual ~Env() = default;
    virtual const EnvSpec& spec() const = 0;

    // Re-initializes state deterministically from seed and zeroes the step
    // counter. Returns the initial observation.
    virtual std::vector<double> reset(std::uint64_t seed) = 0;

    // Deterministic given state and action; clamps the action to bounds
    // defensively. done flips to true when the step counter reaches
    // max_episode_steps.
    virtual StepResult step(std::span<const double> action) = 0;
};

// Swing-up pendulum. State (theta, theta_dot), observation
// (cos theta, sin theta, theta_dot), torque in [-2, 2], reward
// -(wrap(theta)^2 + 0.1 theta_dot^2 + 0.001 a^2) evaluated on the pre-step
// state, semi-implicit Euler at dt = 0.05, 200-step episodes.
class Pendulum final : public Env {
public:
    Pendulum();
    const EnvSpec& spec() const override { return spec_; }
    std::vector<double> reset(std::uint64_t seed) override;
    StepResult step(std::span<const double> action) override;

    void set_state(double theta, double theta_dot); // test hook
    double theta() const { return theta_; }
    double theta_dot() const { return theta_dot_; }

private:
    EnvSpec spec_;
    double theta_ = 0.0;
    double theta_dot_ = 0.0;
    std::size_t steps_ = 0;
};

// 2-D double integrator steering toward the origin. Observation
// (px, py, vx, vy), acceleration in [-1, 1]^2, reward
// -|position| - 0.01 |a|^2 on the pre-step state, dt = 0.05, 200-step
// episodes, reset position uniform in [-1, 1]^2 with zero velocity.
class PointMass final : public Env {
public:
    PointMass();
    const EnvSpec& spec() const override { return spec_; }
    std::vector<double> reset(std::uint64_t seed) override;
    StepResult step(std::span<const double> action) override;

    void set_state(double px, double py, double vx, double vy); // test hook

private:
    EnvSpec spec_;
    double pos_[2] = {0.0, 0.0};
    double vel_[2] = {0.0, 0.0};
    std::size_t steps_ = 0;
};

// "pendulum" or "pointmass"; anything else throws with the known ids listed.
std::unique_ptr<Env> make_env(std::string_view id);

// Mean undiscounted episode return under uniform-random actions. Episode e
// resets with a sub-seed derived from (seed, e); the action stream has its
// own sub-seed, so the value is a pure function of (env type, seed, episodes).
double random_policy_return(Env& env, std::uint64_t seed, std::size_t episodes);

// Wraps an angle to [-pi, pi].
double wrap_angle(double theta);

} // namespace ctd3
