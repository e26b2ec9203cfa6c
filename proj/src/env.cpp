#include "sung/env.hpp"

#include <algorithm>
#include <cmath>

#include "sung/rng.hpp"
#include "sung/tensor.hpp"

namespace sung {

namespace {

constexpr double kDt = 0.1;

double clip(double x, double lo, double hi) { return std::min(std::max(x, lo), hi); }

// Row 0 is the top of the maze; each cell is 0.4 wide in [-1,1]^2.
constexpr int kMazeSize = 5;
constexpr const char* kMazeRows[kMazeSize] = {
    "#####",
    "#G..#",
    "###.#",
    "#S..#",
    "#####",
};

int col_of(double x) { return std::clamp(static_cast<int>(std::floor((x + 1.0) / 0.4)), 0, kMazeSize - 1); }
int row_of(double y) { return std::clamp(static_cast<int>(std::floor((1.0 - y) / 0.4)), 0, kMazeSize - 1); }
char cell_at(double x, double y) { return kMazeRows[row_of(y)][col_of(x)]; }

std::vector<double> cell_center(char tag) {
    for (int r = 0; r < kMazeSize; ++r)
        for (int c = 0; c < kMazeSize; ++c)
            if (kMazeRows[r][c] == tag)
                return {-1.0 + 0.4 * (c + 0.5), 1.0 - 0.4 * (r + 0.5)};
    throw std::runtime_error("maze: no such cell");
}

}  // namespace

PointMass2D::PointMass2D() {
    spec_.name = "pointmass-dense";
    spec_.state_dim = 2;
    spec_.action_dim = 2;
    spec_.action_bound = 1.0;
    spec_.max_episode_steps = 100;
    spec_.sparse_reward = false;
}

std::vector<double> PointMass2D::reset(std::uint64_t seed) {
    Rng rng(Rng::derive(seed, "pointmass.reset"));
    pos_[0] = rng.uniform(-1.0, 1.0);
    pos_[1] = rng.uniform(-1.0, 1.0);
    steps_ = 0;
    done_ = false;
    return {pos_[0], pos_[1]};
}

StepResult PointMass2D::step(std::span<const double> action) {
    check(!done_, "pointmass: step after episode end");
    check(action.size() == 2, "pointmass: action dim mismatch");
    for (int i = 0; i < 2; ++i) {
        const double a = clip(action[i], -spec_.action_bound, spec_.action_bound);
        pos_[i] = clip(pos_[i] + kDt * a, -1.0, 1.0);
    }
    ++steps_;
    const double dx = pos_[0] - kGoal[0];
    const double dy = pos_[1] - kGoal[1];
    const double dist = std::sqrt(dx * dx + dy * dy);
    StepResult r;
    r.obs = {pos_[0], pos_[1]};
    r.reward = -dist;
    r.terminal = dist < kGoalRadius;
    r.truncated = !r.terminal && steps_ >= spec_.max_episode_steps;
    done_ = r.done();
    return r;
}

SparseMaze::SparseMaze() {
    spec_.name = "maze-sparse";
    spec_.state_dim = 2;
    spec_.action_dim = 2;
    spec_.action_bound = 1.0;
    spec_.max_episode_steps = 200;
    spec_.sparse_reward = true;
}

bool SparseMaze::is_wall(double x, double y) { return cell_at(x, y) == '#'; }
bool SparseMaze::in_goal_cell(double x, double y) { return cell_at(x, y) == 'G'; }
bool SparseMaze::in_start_cell(double x, double y) { return cell_at(x, y) == 'S'; }
std::vector<double> SparseMaze::start_center() { return cell_center('S'); }
std::vector<double> SparseMaze::goal_center() { return cell_center('G'); }
std::vector<double> SparseMaze::midpoint_center() { return {-1.0 + 0.4 * 3.5, 1.0 - 0.4 * 3.5}; }

std::vector<double> SparseMaze::reset(std::uint64_t seed) {
    Rng rng(Rng::derive(seed, "maze.reset"));
    auto center = start_center();
    // Uniform within the start cell, away from the cell boundary.
    pos_[0] = center[0] + rng.uniform(-0.15, 0.15);
    pos_[1] = center[1] + rng.uniform(-0.15, 0.15);
    steps_ = 0;
    done_ = false;
    return {pos_[0], pos_[1]};
}

std::vector<double> SparseMaze::reset_at(std::span<const double> position) {
    check(position.size() == 2, "maze: position dim mismatch");
    check(!is_wall(position[0], position[1]), "maze: reset_at inside a wall");
    pos_[0] = position[0];
    pos_[1] = position[1];
    steps_ = 0;
    done_ = false;
    return {pos_[0], pos_[1]};
}

StepResult SparseMaze::step(std::span<const double> action) {
    check(!done_, "maze: step after episode end");
    check(action.size() == 2, "maze: action dim mismatch");
    const double ax = clip(action[0], -spec_.action_bound, spec_.action_bound);
    const double ay = clip(action[1], -spec_.action_bound, spec_.action_bound);
    // Axis-separated collision: a component that would land in a wall is
    // zeroed, the other may still move.
    const double nx = clip(pos_[0] + kDt * ax, -1.0, 1.0);
    if (!is_wall(nx, pos_[1])) pos_[0] = nx;
    const double ny = clip(pos_[1] + kDt * ay, -1.0, 1.0);
    if (!is_wall(pos_[0], ny)) pos_[1] = ny;
    ++steps_;
    StepResult r;
    r.obs = {pos_[0], pos_[1]};
    r.terminal = in_goal_cell(pos_[0], pos_[1]);
    r.reward = r.terminal ? 1.0 : 0.0;
    r.truncated = !r.terminal && steps_ >= spec_.max_episode_steps;
    done_ = r.done();
    return r;
}

std::unique_ptr<Env> make_env(const std::string& name) {
    if (name == "pointmass-dense") return std::make_unique<PointMass2D>();
    if (name == "maze-sparse") return std::make_unique<SparseMaze>();
    throw std::runtime_error("unknown environment '" + name + "'");
}

}  // namespace sung
