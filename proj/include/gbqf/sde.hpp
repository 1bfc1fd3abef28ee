#pragma once

// Explicit Euler-Maruyama integration for matrix- and vector-valued diffusions
// driven by multiple independent scalar Wiener increments, with an optional
// per-step projection hook and a step observer for recording diagnostics.

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "gbqf/errors.hpp"
#include "gbqf/noise.hpp"

namespace gbqf {

template <class State>
struct Trajectory {
  TimeGrid grid;
  std::vector<State> states;   // n_steps + 1 snapshots
  Eigen::MatrixXd dW;          // increments used, n_steps x n_drivers
  Eigen::MatrixXd dY;          // observation increments when applicable
};

template <class State>
using DriftFn = std::function<State(const State&, double)>;
template <class State>
using DiffusionFn = std::function<State(const State&, double)>;
template <class State>
using PostStepFn = std::function<State(const State&)>;
// Called after each step with (step index, t_left, left state, raw Euler
// state, post-processed state).
template <class State>
using StepObserver = std::function<void(int, double, const State&,
                                        const State&, const State&)>;

template <class State>
bool state_is_finite(const State& x) {
  return x.allFinite();
}

template <class State>
Trajectory<State> integrate(const DriftFn<State>& drift,
                            const std::vector<DiffusionFn<State>>& diffusions,
                            const State& x0, const TimeGrid& grid,
                            const NoisePath& noise,
                            const PostStepFn<State>& post_step = nullptr,
                            const StepObserver<State>& observer = nullptr) {
  grid.validate();
  if (static_cast<int>(diffusions.size()) != noise.n_drivers) {
    throw Error(ErrorCode::DimensionMismatch,
                "integrate: diffusion count must match driver count");
  }
  if (noise.grid.n_steps != grid.n_steps ||
      std::abs(noise.grid.dt() - grid.dt()) > 1e-12 * std::abs(grid.dt())) {
    throw Error(ErrorCode::DimensionMismatch,
                "integrate: noise grid does not match the time grid");
  }
  Trajectory<State> traj;
  traj.grid = grid;
  traj.dW = noise.increments;
  traj.states.reserve(grid.n_steps + 1);
  traj.states.push_back(x0);
  const double dt = grid.dt();
  State x = x0;
  for (int k = 0; k < grid.n_steps; ++k) {
    const double t = grid.time(k);
    State raw = x + drift(x, t) * dt;
    for (int j = 0; j < noise.n_drivers; ++j) {
      const double dw = noise.increments(k, j);
      if (dw != 0.0) raw += diffusions[j](x, t) * dw;
    }
    State next = post_step ? post_step(raw) : raw;
    if (!state_is_finite(next)) {
      throw Error(ErrorCode::NonFiniteState,
                  "integrate: non-finite state at step " + std::to_string(k));
    }
    if (observer) observer(k, t, x, raw, next);
    x = std::move(next);
    traj.states.push_back(x);
  }
  return traj;
}

}  // namespace gbqf
