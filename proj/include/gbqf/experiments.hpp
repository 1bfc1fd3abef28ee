#pragma once

// Experiment drivers: the chaos sweep comparing many-body marginals against
// coupled limit copies, the uncontrolled Lyapunov reduction run, feedback
// state preparation, per-label cost evaluation, and sampled-graph
// convergence tables.

#include <cstdint>
#include <functional>
#include <vector>

#include "gbqf/control.hpp"
#include "gbqf/graphon.hpp"
#include "gbqf/meanfield.hpp"
#include "gbqf/nbody.hpp"

namespace gbqf {

struct ChaosPoint {
  int N = 0;
  double mean_D_T = 0.0;   // mean defect at the final time
  double std_err_T = 0.0;  // standard error over trajectories
  double mean_D_0 = 0.0;   // defect at time zero (product initial state)
  double cut_term = 0.0;   // cut distance between sampled weights and limit
  bool cut_exact = true;
  double bound_x = 0.0;    // cut_term + 1/sqrt(N)
};

struct ChaosSweepResult {
  std::vector<ChaosPoint> points;
  double fitted_slope = 0.0;  // log-log fit of mean_D_T against bound_x
  double fitted_C = 0.0;      // intercept divided by the horizon
};

// For each N: simulate the cN-body pure-state system and cN limit copies
// (one per particle, each driven by that particle's driver, coupled through
// the deterministic mean path of the limit kernel), then average the
// per-particle defects at the final time.
ChaosSweepResult chaos_sweep(int c, const std::vector<int>& N_list,
                             const FilterModel& model, const Matrix& A,
                             const StepKernel& w, const TimeGrid& grid,
                             const Vector& phi0, int replicas,
                             std::uint64_t seed, bool bernoulli_weights = false,
                             int n_threads = 0);

struct StateReductionResult {
  TimeGrid grid;
  std::vector<double> labels;
  std::vector<double> mean_V;    // E[integral of 1 - z^2 over labels]
  std::vector<double> se_V;      // standard error of the above
  std::vector<double> mean_Vsq;  // E[integral of (1 - z^2)^2 over labels]
  std::vector<double> v_final;   // per-replica V at the final time
  std::vector<double> identity_residual;  // drift-identity defect per step
  // Standard error of the per-replica identity functional
  // V_t - V_0 + 4 * integral of Vsq; the right scale for the defect above,
  // since the integral accumulates sampling noise that se_V does not see.
  std::vector<double> se_identity;
};

// Uncontrolled two-level reduction run: free Hamiltonian zero, measurement
// along z, maximally mixed initial states, product kernel coupling (whose
// mean term vanishes at this initial condition).  Checks the decay of
// V = integral of (1 - z^2) and the identity
// E[V_t] = V_0 - 4 * integral of E[Vsq_s] ds.
StateReductionResult state_reduction(const UGrid& ugrid, const TimeGrid& grid,
                                     int replicas, std::uint64_t seed,
                                     int n_threads = 0);

struct StatePreparationResult {
  TimeGrid grid;
  std::vector<double> labels;
  // mean_fidelity[k][m]: ensemble mean fidelity to the ground projector at
  // step k for label m.
  std::vector<std::vector<double>> mean_fidelity;
  std::vector<double> lower_set_curve;  // mean over labels in [0, 1/2)
  std::vector<double> upper_set_curve;  // mean over labels in [1/2, 1]
  double lower_set_final = 0.0;
  double upper_set_final = 0.0;
  long clip_events = 0;
};

// Controlled preparation run with the rotation feedback; the coupling term
// is supplied by the controlled mean path (feedback evaluated on the mean).
StatePreparationResult state_preparation(const UGrid& ugrid,
                                         const TimeGrid& grid, int replicas,
                                         std::uint64_t seed, int n_threads = 0);

using RunningCost =
    std::function<double(double alpha, const Matrix& rho, const Matrix& mean)>;
using TerminalCost =
    std::function<double(const Matrix& rho, const Matrix& mean)>;

struct CostResult {
  std::vector<double> labels;
  std::vector<double> J;   // per-label cost estimate
  std::vector<double> se;  // standard errors
};

// Monte-Carlo cost per label: running cost integrated along controlled
// particle paths plus a terminal term; the aggregate argument is the
// kernel-weighted quadrature of the mean path.
CostResult cost_eval(const FilterModel& model, const Matrix& A,
                     const Graphon& w, const LabelControlLaw& control,
                     const RunningCost& running, const TerminalCost& terminal,
                     const UGrid& ugrid, const TimeGrid& grid,
                     const std::vector<Matrix>& rho0s, int replicas,
                     std::uint64_t seed, int n_threads = 0);

struct GraphonConvergencePoint {
  int n = 0;
  double mean_distance = 0.0;
  double std_err = 0.0;
  bool exact = true;
};

// Cut distance between sampled-graph kernels and the generating graphon,
// averaged over independent samples per graph size.
std::vector<GraphonConvergencePoint> graphon_convergence_table(
    const Graphon& w, const std::vector<int>& n_list, int samples,
    std::uint64_t seed);

// Reference two-level model shared by the reduction and preparation runs:
// free Hamiltonian zero, rotation control Hamiltonian, measurement along z,
// unit efficiency, product kernel, z-aligned two-body coupling.
FilterModel two_level_model();
Matrix two_level_coupling();  // sigma_z (x) sigma_z

}  // namespace gbqf
