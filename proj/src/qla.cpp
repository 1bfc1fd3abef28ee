#include "gbqf/qla.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace gbqf {

namespace {

void require_square(const Matrix& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() < 1) {
    throw Error(ErrorCode::DimensionMismatch,
                std::string(what) + ": matrix must be square and non-empty");
  }
}

void require_same_dim(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorCode::DimensionMismatch,
                std::string(what) + ": operand dimensions differ");
  }
}

void check_lift_cap(long long dim, const char* what) {
  const double bytes = static_cast<double>(dim) * static_cast<double>(dim) *
                       sizeof(cxd);
  if (bytes > static_cast<double>(kLiftMemoryCapBytes)) {
    throw Error(ErrorCode::MemoryCapExceeded,
                std::string(what) + ": lifted operator exceeds the memory cap");
  }
}

// Eigendecomposition of a Hermitian matrix; closed-form path for d <= 3.
void eigh(const Matrix& h, Eigen::VectorXd& vals, Matrix& vecs) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver;
  if (h.rows() <= 3) {
    solver.computeDirect(h);
  } else {
    solver.compute(h);
  }
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::InvalidArgument, "eigendecomposition failed");
  }
  vals = solver.eigenvalues();
  vecs = solver.eigenvectors();
}

}  // namespace

Matrix dagger(const Matrix& m) { return m.adjoint(); }

Matrix commutator(const Matrix& a, const Matrix& b) {
  require_same_dim(a, b, "commutator");
  return a * b - b * a;
}

Matrix anticommutator(const Matrix& a, const Matrix& b) {
  require_same_dim(a, b, "anticommutator");
  return a * b + b * a;
}

cxd hs_inner(const Matrix& a, const Matrix& b) {
  require_same_dim(a, b, "hs_inner");
  return (a.adjoint() * b).trace();
}

double hs_norm(const Matrix& a) { return a.norm(); }

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

long long tensor_dim(int d, int n_slots) {
  long long dim = 1;
  for (int i = 0; i < n_slots; ++i) dim *= d;
  return dim;
}

long long insert_digit(long long rest, int digit, int slot, int n_slots, int d) {
  const long long lo_dim = tensor_dim(d, n_slots - slot);
  const long long hi = rest / lo_dim;
  const long long lo = rest % lo_dim;
  return (hi * d + digit) * lo_dim + lo;
}

long long insert_two_digits(long long rest, int digit_p, int slot_p,
                            int digit_q, int slot_q, int n_slots, int d) {
  int s1 = slot_p, s2 = slot_q, d1 = digit_p, d2 = digit_q;
  if (s1 > s2) {
    std::swap(s1, s2);
    std::swap(d1, d2);
  }
  // Insert the higher slot into the (n-1)-slot word first; its position there
  // is shifted down by one because the lower slot is still missing.
  const long long partial = insert_digit(rest, d2, s2 - 1, n_slots - 1, d);
  return insert_digit(partial, d1, s1, n_slots, d);
}

Matrix lift(const Matrix& op, int slot, int n_slots) {
  require_square(op, "lift");
  if (slot < 1 || slot > n_slots) {
    throw Error(ErrorCode::InvalidArgument, "lift: slot out of range");
  }
  const int d = static_cast<int>(op.rows());
  const long long dim = tensor_dim(d, n_slots);
  check_lift_cap(dim, "lift");
  const long long rest_dim = tensor_dim(d, n_slots - 1);
  Matrix out = Matrix::Zero(dim, dim);
  for (long long rest = 0; rest < rest_dim; ++rest) {
    for (int a = 0; a < d; ++a) {
      const long long row = insert_digit(rest, a, slot, n_slots, d);
      for (int b = 0; b < d; ++b) {
        out(row, insert_digit(rest, b, slot, n_slots, d)) = op(a, b);
      }
    }
  }
  return out;
}

Matrix lift_pair(const Matrix& two_body, int slot_p, int slot_q, int n_slots) {
  require_square(two_body, "lift_pair");
  const int d = static_cast<int>(std::llround(std::sqrt(
      static_cast<double>(two_body.rows()))));
  if (static_cast<long long>(d) * d != two_body.rows()) {
    throw Error(ErrorCode::DimensionMismatch,
                "lift_pair: operator dimension is not a perfect square");
  }
  if (slot_p < 1 || slot_p > n_slots || slot_q < 1 || slot_q > n_slots ||
      slot_p == slot_q) {
    throw Error(ErrorCode::InvalidArgument, "lift_pair: invalid slots");
  }
  const long long dim = tensor_dim(d, n_slots);
  check_lift_cap(dim, "lift_pair");
  const long long rest_dim = tensor_dim(d, n_slots - 2);
  Matrix out = Matrix::Zero(dim, dim);
  for (long long rest = 0; rest < rest_dim; ++rest) {
    for (int a = 0; a < d; ++a) {
      for (int b = 0; b < d; ++b) {
        const long long row =
            insert_two_digits(rest, a, slot_p, b, slot_q, n_slots, d);
        for (int a2 = 0; a2 < d; ++a2) {
          for (int b2 = 0; b2 < d; ++b2) {
            const long long col =
                insert_two_digits(rest, a2, slot_p, b2, slot_q, n_slots, d);
            out(row, col) = two_body(a * d + b, a2 * d + b2);
          }
        }
      }
    }
  }
  return out;
}

Matrix partial_trace(const Matrix& state, int keep_slot, int n_slots, int d) {
  require_square(state, "partial_trace");
  if (keep_slot < 1 || keep_slot > n_slots) {
    throw Error(ErrorCode::InvalidArgument, "partial_trace: slot out of range");
  }
  if (state.rows() != tensor_dim(d, n_slots)) {
    throw Error(ErrorCode::DimensionMismatch,
                "partial_trace: state dimension is not d^n_slots");
  }
  const long long rest_dim = tensor_dim(d, n_slots - 1);
  Matrix out = Matrix::Zero(d, d);
  for (long long rest = 0; rest < rest_dim; ++rest) {
    for (int a = 0; a < d; ++a) {
      const long long row = insert_digit(rest, a, keep_slot, n_slots, d);
      for (int b = 0; b < d; ++b) {
        out(a, b) += state(row, insert_digit(rest, b, keep_slot, n_slots, d));
      }
    }
  }
  return out;
}

Matrix partial_trace(const Vector& psi, int keep_slot, int n_slots, int d) {
  if (keep_slot < 1 || keep_slot > n_slots) {
    throw Error(ErrorCode::InvalidArgument, "partial_trace: slot out of range");
  }
  if (psi.size() != tensor_dim(d, n_slots)) {
    throw Error(ErrorCode::DimensionMismatch,
                "partial_trace: state dimension is not d^n_slots");
  }
  const long long rest_dim = tensor_dim(d, n_slots - 1);
  Matrix out = Matrix::Zero(d, d);
  for (long long rest = 0; rest < rest_dim; ++rest) {
    for (int a = 0; a < d; ++a) {
      const cxd amp = psi(insert_digit(rest, a, keep_slot, n_slots, d));
      for (int b = 0; b < d; ++b) {
        out(a, b) +=
            amp * std::conj(psi(insert_digit(rest, b, keep_slot, n_slots, d)));
      }
    }
  }
  return out;
}

Matrix mean_field_contract(const Matrix& a, const Matrix& rho) {
  require_square(a, "mean_field_contract");
  require_square(rho, "mean_field_contract");
  const int d = static_cast<int>(rho.rows());
  if (a.rows() != static_cast<long long>(d) * d) {
    throw Error(ErrorCode::DimensionMismatch,
                "mean_field_contract: operator dim must be d^2");
  }
  const double scale = std::max(1.0, rho.norm());
  if ((rho - rho.adjoint()).norm() > 1e-8 * scale) {
    throw Error(ErrorCode::InvalidArgument,
                "mean_field_contract: state argument must be Hermitian");
  }
  // tr over the second factor of (I (x) rho) a.
  Matrix out = Matrix::Zero(d, d);
  for (int x = 0; x < d; ++x) {
    for (int xp = 0; xp < d; ++xp) {
      cxd acc(0.0, 0.0);
      for (int y = 0; y < d; ++y) {
        for (int yy = 0; yy < d; ++yy) {
          acc += rho(y, yy) * a(x * d + yy, xp * d + y);
        }
      }
      out(x, xp) = acc;
    }
  }
  return out;
}

Matrix clip_psd(const Matrix& m) {
  require_square(m, "clip_psd");
  const Matrix h = 0.5 * (m + m.adjoint());
  Eigen::VectorXd vals;
  Matrix vecs;
  eigh(h, vals, vecs);
  for (Eigen::Index i = 0; i < vals.size(); ++i) {
    if (vals(i) < 0.0) vals(i) = 0.0;
  }
  return vecs * vals.cast<cxd>().asDiagonal() * vecs.adjoint();
}

Matrix project_to_density(const Matrix& m) {
  require_square(m, "project_to_density");
  const Matrix h = 0.5 * (m + m.adjoint());
  Eigen::VectorXd vals;
  Matrix vecs;
  eigh(h, vals, vecs);
  double total = 0.0;
  for (Eigen::Index i = 0; i < vals.size(); ++i) {
    if (vals(i) < 0.0) vals(i) = 0.0;
    total += vals(i);
  }
  if (!(total > 0.0)) {
    throw Error(ErrorCode::ProjectionCollapse,
                "project_to_density: clipped spectrum sums to zero");
  }
  vals /= total;
  return vecs * vals.cast<cxd>().asDiagonal() * vecs.adjoint();
}

double fidelity(const Matrix& gamma, const Matrix& rho) {
  require_same_dim(gamma, rho, "fidelity");
  auto sqrt_psd = [](const Matrix& m, const char* what) {
    const Matrix h = 0.5 * (m + m.adjoint());
    Eigen::VectorXd vals;
    Matrix vecs;
    eigh(h, vals, vecs);
    for (Eigen::Index i = 0; i < vals.size(); ++i) {
      if (vals(i) < -kPsdTol) {
        throw Error(ErrorCode::InvalidArgument,
                    std::string(what) + ": input is not positive semidefinite");
      }
      vals(i) = std::sqrt(std::max(vals(i), 0.0));
    }
    return Matrix(vecs * vals.cast<cxd>().asDiagonal() * vecs.adjoint());
  };
  const Matrix s = sqrt_psd(rho, "fidelity");
  const Matrix inner = s * gamma * s;
  const Matrix h = 0.5 * (inner + inner.adjoint());
  Eigen::VectorXd vals;
  Matrix vecs;
  eigh(h, vals, vecs);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < vals.size(); ++i) {
    if (vals(i) < -kPsdTol) {
      throw Error(ErrorCode::InvalidArgument,
                  "fidelity: input is not positive semidefinite");
    }
    acc += std::sqrt(std::max(vals(i), 0.0));
  }
  const double f = acc * acc;
  return std::min(std::max(f, 0.0), 1.0);
}

double purity(const Matrix& rho) {
  require_square(rho, "purity");
  return (rho * rho).trace().real();
}

cxd expectation(const Matrix& rho, const Matrix& o) {
  require_same_dim(rho, o, "expectation");
  return (rho * o).trace();
}

double bloch_z(const Matrix& rho) {
  if (rho.rows() != 2 || rho.cols() != 2) {
    throw Error(ErrorCode::DimensionMismatch, "bloch_z: requires a qubit state");
  }
  return (rho(0, 0) - rho(1, 1)).real();
}

bool is_hermitian(const Matrix& m, double tol) {
  if (m.rows() != m.cols()) return false;
  return (m - m.adjoint()).norm() <= tol;
}

void check_density(const Matrix& rho, double herm_tol, double trace_tol,
                   double psd_tol) {
  require_square(rho, "check_density");
  if ((rho - rho.adjoint()).norm() > herm_tol) {
    throw Error(ErrorCode::InvariantViolation, "density: not Hermitian");
  }
  if (std::abs(rho.trace().real() - 1.0) > trace_tol ||
      std::abs(rho.trace().imag()) > trace_tol) {
    throw Error(ErrorCode::InvariantViolation, "density: trace is not one");
  }
  Eigen::VectorXd vals;
  Matrix vecs;
  eigh(0.5 * (rho + rho.adjoint()), vals, vecs);
  if (vals.minCoeff() < -psd_tol) {
    throw Error(ErrorCode::InvariantViolation,
                "density: negative eigenvalue beyond tolerance");
  }
}

Matrix identity(int d) { return Matrix::Identity(d, d); }

Matrix sigma_x() {
  Matrix m(2, 2);
  m << cxd(0, 0), cxd(-1, 0), cxd(1, 0), cxd(0, 0);
  return m;
}

Matrix sigma_z() {
  Matrix m(2, 2);
  m << cxd(1, 0), cxd(0, 0), cxd(0, 0), cxd(-1, 0);
  return m;
}

Matrix rho_ground() {
  Matrix m = Matrix::Zero(2, 2);
  m(1, 1) = cxd(1, 0);
  return m;
}

Matrix rho_excited() {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = cxd(1, 0);
  return m;
}

}  // namespace gbqf
