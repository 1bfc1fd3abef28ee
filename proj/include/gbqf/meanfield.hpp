#pragma once

// Graphon mean-field machinery: the deterministic averaged Lindblad system
// over a label grid, particle filters driven by a frozen mean path, the
// Picard fixed-point cross-check, the block-reduced representative system,
// and the kernel stability experiment.

#include <cstdint>
#include <functional>
#include <vector>

#include "gbqf/control.hpp"
#include "gbqf/filter.hpp"
#include "gbqf/graphon.hpp"
#include "gbqf/noise.hpp"
#include "gbqf/qla.hpp"
#include "gbqf/sde.hpp"

namespace gbqf {

// Uniform label grid on (0,1) with midpoint labels and weight 1/M; midpoint
// quadrature is exact for block kernels aligned with the grid.
struct UGrid {
  int M = 32;

  double label(int m) const { return (m + 0.5) / M; }
  double weight() const { return 1.0 / M; }
  std::vector<double> labels() const;
  void validate() const;
};

// Deterministic mean path m_{t,u}: one density matrix per (time step, label).
struct MeanFieldPath {
  TimeGrid grid;
  UGrid ugrid;
  std::vector<std::vector<Matrix>> states;  // [step 0..n_steps][label]

  const Matrix& at(int step, int label) const;
  Matrix interpolate(double t, int label) const;  // linear in time
};

// Quadrature of the coupling term at label u: sum_v w(u, u_v) A^{m_{t,v}} / M,
// tabulated per step from a frozen mean path.
std::function<Matrix(double)> mean_coupling_hamiltonian(
    double u, const MeanFieldPath& mean, const Matrix& A, const Graphon& w);

// Averaged nonlinear Lindblad system, fourth-order Runge-Kutta on the SDE
// grid.  Hermiticity of the coupling term and per-step trace/Hermiticity
// drift are asserted; snapshots are projected back to density matrices.
// An optional control law is evaluated on the mean state per label.
MeanFieldPath solve_graphon_lindblad(
    const FilterModel& model, const Matrix& A, const Graphon& w,
    const UGrid& ugrid, const TimeGrid& grid,
    const std::vector<Matrix>& rho0s,
    const LabelControlLaw& control = LabelControlLaw::zero());

// Single-particle filter at label u with the coupling Hamiltonian supplied
// by the frozen mean path.
FilterResult simulate_graphon_particle(
    double u, const MeanFieldPath& mean, const FilterModel& model,
    const Matrix& A, const Graphon& w, const TimeGrid& grid,
    const NoisePath& noise, const Matrix& gamma0,
    const LabelControlLaw& control = LabelControlLaw::zero());

struct PicardResult {
  MeanFieldPath path;
  std::vector<double> sup_distances;  // per iteration
  bool diverged = false;
};

// Fixed-point iteration: simulate per-label ensembles against the frozen
// mean path, replace the path by empirical means, repeat.  Common random
// numbers across iterations; K replicas per label.
PicardResult picard_iterate(const FilterModel& model, const Matrix& A,
                            const Graphon& w, const UGrid& ugrid,
                            const TimeGrid& grid,
                            const std::vector<Matrix>& rho0s, int replicas,
                            int iterations, std::uint64_t master_seed,
                            int n_threads = 0);

// Class coupling matrix of a kernel constant on the uniform c-grid.
Eigen::MatrixXd block_reduce(const StepKernel& w, int c);

// Representative-per-class system: mean field from solve_graphon_lindblad
// on c labels, then one filter per class, driver j for class j.
std::vector<FilterResult> simulate_block_system(
    const FilterModel& model, const Matrix& A, const StepKernel& w, int c,
    const TimeGrid& grid, const NoisePath& noise,
    const std::vector<Matrix>& gamma0s);

struct StabilityResult {
  std::vector<double> gap_curve;  // E[integral over u of |a-b|_HS^2] per step
  double sup_gap = 0.0;
  double l1_difference = 0.0;
  double ratio = 0.0;  // sup_gap / l1_difference (0 when kernels coincide)
};

// Couples two kernels through shared per-(label, replica) noise and
// measures the mean squared Hilbert-Schmidt gap over time.
StabilityResult stability_experiment(const Graphon& wa, const Graphon& wb,
                                     const FilterModel& model, const Matrix& A,
                                     const UGrid& ugrid, const TimeGrid& grid,
                                     const std::vector<Matrix>& rho0s,
                                     int replicas, std::uint64_t master_seed,
                                     int n_threads = 0);

}  // namespace gbqf
