#pragma once

// Tensorized many-body filtering for c classes of N particles coupled through
// weighted two-body interactions, with marginals, counting operators, and the
// per-particle defect diagnostics used by the chaos experiments.

#include <functional>
#include <vector>

#include "gbqf/filter.hpp"
#include "gbqf/qla.hpp"
#include "gbqf/sde.hpp"

namespace gbqf {

// Interaction normalization: the full ordered double sum with a 1/(2cN)
// prefactor, or the distinct-pair sum with a 1/N prefactor.
enum class InteractionNorm { FullSum_Over2cN, PairSum_OverN };

struct BlockSystemConfig {
  int c = 1;          // class count
  int N = 1;          // particles per class
  FilterModel model;  // per-particle drift Hamiltonian, measurement operator
  Matrix A;           // d^2 x d^2 two-body interaction, Hermitian
  Eigen::MatrixXd xi; // (cN) x (cN) symmetric coupling weights, zero diagonal
  InteractionNorm norm = InteractionNorm::FullSum_Over2cN;

  int d() const { return model.dim(); }
  int n_particles() const { return c * N; }
  // Global tensor slot of particle l of class i (all 1-based, class-major).
  int slot(int i, int l) const { return (i - 1) * N + l; }
  void validate() const;
};

// Per-particle model with no control channel.
FilterModel make_particle_model(const Matrix& H_free, const Matrix& L,
                                double eta);

// Apply an operator acting on one tensor slot (or an ordered pair of slots)
// to a full state vector without materializing the lifted matrix.
Vector apply_single(const Matrix& op, const Vector& psi, int slot,
                    int n_slots);
Vector apply_pair(const Matrix& two_body, const Vector& psi, int slot_p,
                  int slot_q, int n_slots);

// Dense total Hamiltonian: lifted one-body terms plus the weighted two-body
// sum under the configured normalization.
Matrix build_hamiltonian(const BlockSystemConfig& cfg);

// Pure-state dynamics at unit efficiency; each particle owns one driver and
// the state is renormalized after every step.  Lifted operators are applied
// as tensor contractions.
Trajectory<Vector> simulate_nbody_sse(const BlockSystemConfig& cfg,
                                      const Vector& psi0, const TimeGrid& grid,
                                      const NoisePath& noise);

// Density-matrix dynamics for efficiency in (0, 1]; guarded to total
// dimension <= 64.  Euler step plus density projection, one observation
// channel per particle.
Trajectory<Matrix> simulate_nbody_density(const BlockSystemConfig& cfg,
                                          const Matrix& rho0,
                                          const TimeGrid& grid,
                                          const NoisePath& noise);

// Reduced state of particle l of class i (class-major slot order).
Matrix marginal(const Vector& state, int c, int N, int d, int i, int l);
Matrix marginal(const Matrix& state, int c, int N, int d, int i, int l);

// 1 - tr(gamma * marginal), clamped to [0, 1].
double d_distance(const Vector& state, int c, int N, int d,
                  const Matrix& gamma, int i, int l);

// Operator counting how many particles of class i deviate from that class's
// reference pure state: sum over all size-n_i subsets of the class of lifted
// products of (1 - gamma) on the subset and gamma elsewhere in the class.
// Test oracle; guarded to N <= 3.
Matrix counting_projector(int c, int N, int i, int n_i,
                          const std::vector<Matrix>& gammas);

// tr((sum over count vectors of weight(total) * product of counting
// projectors) rho) for a pure state; guarded to N <= 3.
double chaos_functional(const Vector& state, int c, int N,
                        const std::vector<Matrix>& gammas,
                        const std::function<double(int)>& weight);

// Mean per-particle defect (1/(cN)) * sum of d_distance over all particles;
// dominates the unbiased-count functional.
double chaos_bound_via_D(const Vector& state, int c, int N,
                         const std::vector<Matrix>& gammas);

// Reindex amplitudes by permuting tensor slots within each class:
// (result)(x_1..x_n) = state(x_{sigma(1)}..x_{sigma(n)}) with sigma acting
// class-locally.  Each sigma[i] is a 0-based permutation of {0..N-1}.
Vector permutation_apply(const Vector& state, int c, int N, int d,
                         const std::vector<std::vector<int>>& sigma);

}  // namespace gbqf
