#pragma once
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace sung {

struct EnvSpec {
    std::string name;
    std::size_t state_dim = 0;
    std::size_t action_dim = 0;
    double action_bound = 1.0;
    int max_episode_steps = 0;
    bool sparse_reward = false;
};

struct StepResult {
    std::vector<double> obs;
    double reward = 0.0;
    bool terminal = false;   // true environment termination; masks bootstrapping
    bool truncated = false;  // step-limit cutoff
    bool done() const { return terminal || truncated; }
};

class Env {
public:
    virtual ~Env() = default;
    virtual const EnvSpec& spec() const = 0;
    virtual std::vector<double> reset(std::uint64_t seed) = 0;
    // Actions outside the box are clipped, never rejected. Throws if the
    // episode already ended.
    virtual StepResult step(std::span<const double> action) = 0;
    virtual std::unique_ptr<Env> clone() const = 0;
};

// Point in [-1,1]^2, s' = clip(s + 0.1 a), reward -||s' - goal||, terminal
// within 0.1 of the goal. Episode limit 100 steps.
class PointMass2D final : public Env {
public:
    PointMass2D();
    const EnvSpec& spec() const override { return spec_; }
    std::vector<double> reset(std::uint64_t seed) override;
    StepResult step(std::span<const double> action) override;
    std::unique_ptr<Env> clone() const override { return std::make_unique<PointMass2D>(*this); }

    static constexpr double kGoal[2] = {0.5, 0.5};
    static constexpr double kGoalRadius = 0.1;

private:
    EnvSpec spec_;
    double pos_[2] = {0.0, 0.0};
    int steps_ = 0;
    bool done_ = true;
};

// Grid-walled point with the same integrator. Movement into a wall zeroes
// the blocked component. Reward is 1 exactly on entering the goal cell,
// otherwise 0; episode limit 200 steps. The layout is a 5x5 U-shaped
// corridor spanning [-1,1]^2 (0.4-wide cells).
class SparseMaze final : public Env {
public:
    SparseMaze();
    const EnvSpec& spec() const override { return spec_; }
    std::vector<double> reset(std::uint64_t seed) override;
    StepResult step(std::span<const double> action) override;
    std::unique_ptr<Env> clone() const override { return std::make_unique<SparseMaze>(*this); }

    // Places the agent at an explicit position; used by dataset generation
    // to start sub-trajectories away from the start cell.
    std::vector<double> reset_at(std::span<const double> position);

    static bool is_wall(double x, double y);
    static bool in_goal_cell(double x, double y);
    static bool in_start_cell(double x, double y);
    // Centers of the start, goal, and the corner cell where the two
    // sub-trajectory families of a stitch dataset meet.
    static std::vector<double> start_center();
    static std::vector<double> goal_center();
    static std::vector<double> midpoint_center();

private:
    EnvSpec spec_;
    double pos_[2] = {0.0, 0.0};
    int steps_ = 0;
    bool done_ = true;
};

std::unique_ptr<Env> make_env(const std::string& name);

}  // namespace sung
