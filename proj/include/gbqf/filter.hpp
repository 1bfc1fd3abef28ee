#pragma once

// Single-particle diffusive quantum filtering: the nonlinear density-matrix
// equation with optional Hamiltonian control, the linear (unnormalized)
// form driven by an exogenous observation path, the pure-state form at unit
// efficiency, and the normalization map connecting them.

#include <functional>

#include "gbqf/qla.hpp"
#include "gbqf/sde.hpp"

namespace gbqf {

struct FilterModel {
  Matrix H_free;  // drift Hamiltonian
  Matrix H_ctrl;  // control Hamiltonian, scaled by the control value
  Matrix L;       // measurement operator
  double eta = 1.0;
  // Optional time-dependent Hamiltonian term (mean-field coupling when the
  // single-particle filter is embedded in an interacting system).
  std::function<Matrix(double)> extra_hamiltonian;

  int dim() const { return static_cast<int>(L.rows()); }
  Matrix hamiltonian(double t, double alpha) const;
  void validate() const;
};

using ControlLaw = std::function<double(double t, const Matrix& rho)>;

struct ObservationRecord {
  Eigen::VectorXd dY;           // observation increments
  Eigen::VectorXd dW;           // innovation increments
  Eigen::VectorXd compensator;  // tr((L + L^dag) rho) at step left endpoints
};

struct FilterResult {
  Trajectory<Matrix> traj;
  ObservationRecord obs;
  std::vector<double> alpha;  // control value per step
};

struct LinearResult {
  Trajectory<Matrix> traj;  // unnormalized, positive up to clipping
  int clip_events = 0;
};

struct NormalizedResult {
  Trajectory<Matrix> traj;
  Eigen::VectorXd dW;  // innovation reconstructed from the observation path
};

Matrix lindblad_drift(const Matrix& rho, const FilterModel& model, double t,
                      double alpha);
Matrix innovation_diffusion(const Matrix& rho, const FilterModel& model);

// Milstein step (Euler drift plus the trace-free second-order noise term)
// with a density projection after each step; asserts the raw per-step trace
// error stays O(dt + dW^2) and records dY = dW + sqrt(eta)
// tr((L+L^dag) rho) dt.
FilterResult simulate_filter(const FilterModel& model, const Matrix& rho0,
                             const TimeGrid& grid, const NoisePath& noise,
                             const ControlLaw& control = nullptr);

// Linear form driven directly by an exogenous observation path; positivity
// is maintained by hermitize-and-clip without trace renormalization.
LinearResult simulate_linear(const FilterModel& model, const Matrix& rho0,
                             const TimeGrid& grid, const NoisePath& y_path);

// Normalizes a linear trajectory and reconstructs the innovation increments
// dW = dY - sqrt(eta) tr((L+L^dag) rho) dt.
NormalizedResult normalize_linear(const Trajectory<Matrix>& linear,
                                  const NoisePath& y_path,
                                  const FilterModel& model);

// Pure-state form; requires eta = 1.  Renormalizes after every step.
Trajectory<Vector> simulate_sse(const FilterModel& model, const Vector& psi0,
                                const TimeGrid& grid, const NoisePath& noise);

}  // namespace gbqf
