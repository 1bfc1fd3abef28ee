#pragma once

// Finite-dimensional quantum linear algebra: dense complex operators, density
// matrices, tensor-product embeddings, partial traces, the two-body mean-field
// contraction, and the PSD projection used after explicit time steps.

#include <Eigen/Dense>
#include <complex>

#include "gbqf/errors.hpp"

namespace gbqf {

using cxd = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

// Tolerances for constructed states (double precision, dims up to ~2^10).
inline constexpr double kHermTol = 1e-9;
inline constexpr double kTraceTol = 1e-9;
inline constexpr double kPsdTol = 1e-8;
inline constexpr double kNormTol = 1e-9;

// Dense lifted operators are capped at 2 GiB.
inline constexpr std::size_t kLiftMemoryCapBytes = std::size_t{2} << 30;

Matrix dagger(const Matrix& m);
Matrix commutator(const Matrix& a, const Matrix& b);
Matrix anticommutator(const Matrix& a, const Matrix& b);

cxd hs_inner(const Matrix& a, const Matrix& b);  // tr(a^dag b)
double hs_norm(const Matrix& a);

Matrix kron(const Matrix& a, const Matrix& b);

// Embed a d x d operator at `slot` (1-based) of an n_slots-fold tensor space.
Matrix lift(const Matrix& op, int slot, int n_slots);

// Embed a d^2 x d^2 two-body operator with its first factor acting on slot_p
// and its second on slot_q.  Row/column indices of the two-body matrix use
// (x, y) -> x*d + y flattening.
Matrix lift_pair(const Matrix& two_body, int slot_p, int slot_q, int n_slots);

// Trace out all slots except keep_slot (1-based).  The pure-state overload
// never materializes the outer product.
Matrix partial_trace(const Matrix& state, int keep_slot, int n_slots, int d);
Matrix partial_trace(const Vector& psi, int keep_slot, int n_slots, int d);

// Mean-field contraction of a two-body operator against a Hermitian state:
// tr over the second factor of (I (x) rho) A.
Matrix mean_field_contract(const Matrix& a, const Matrix& rho);

// Hermitize, clip negative eigenvalues to zero; no trace renormalization.
Matrix clip_psd(const Matrix& m);

// Hermitize, clip negative eigenvalues, renormalize trace to one.  Throws
// ProjectionCollapse when clipping leaves nothing.
Matrix project_to_density(const Matrix& m);

double fidelity(const Matrix& gamma, const Matrix& rho);
double purity(const Matrix& rho);
cxd expectation(const Matrix& rho, const Matrix& o);
double bloch_z(const Matrix& rho);  // tr(rho sigma_z), d = 2 only

bool is_hermitian(const Matrix& m, double tol = kHermTol);
// Throws unless Hermitian / unit trace / PSD within tolerances.
void check_density(const Matrix& rho, double herm_tol = kHermTol,
                   double trace_tol = kTraceTol, double psd_tol = kPsdTol);

Matrix identity(int d);
// Qubit constants used by the bundled models.  sigma_x uses the real
// antisymmetric convention [[0,-1],[1,0]]; sigma_z is diag(1,-1).
Matrix sigma_x();
Matrix sigma_z();
Matrix rho_ground();   // diag(0, 1)
Matrix rho_excited();  // diag(1, 0)

// Flattened index helpers for d-ary tensor slots (slot 1 is the most
// significant digit).  `rest` enumerates the remaining slots in order.
long long tensor_dim(int d, int n_slots);
long long insert_digit(long long rest, int digit, int slot, int n_slots, int d);
long long insert_two_digits(long long rest, int digit_p, int slot_p,
                            int digit_q, int slot_q, int n_slots, int d);

}  // namespace gbqf
