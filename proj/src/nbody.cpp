#include "gbqf/nbody.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gbqf/errors.hpp"

namespace gbqf {

namespace {

cxd i_unit(0.0, 1.0);

void check_vector_cap(long long dim, const char* what) {
  const double bytes = static_cast<double>(dim) * sizeof(cxd);
  if (bytes > static_cast<double>(kLiftMemoryCapBytes))
    throw Error(ErrorCode::MemoryCapExceeded,
                std::string(what) + ": state exceeds the memory cap");
}

void check_pure_projector(const Matrix& gamma, const char* what) {
  if (gamma.rows() != gamma.cols() || gamma.rows() < 1)
    throw Error(ErrorCode::DimensionMismatch,
                std::string(what) + ": reference state must be square");
  if ((gamma * gamma - gamma).norm() > 1e-8 ||
      std::abs(gamma.trace().real() - 1.0) > 1e-8)
    throw Error(ErrorCode::InvalidArgument,
                std::string(what) + ": reference state must be a pure projector");
}

double pair_coefficient(const BlockSystemConfig& cfg) {
  switch (cfg.norm) {
    case InteractionNorm::FullSum_Over2cN:
      return 1.0 / (2.0 * cfg.c * cfg.N);
    case InteractionNorm::PairSum_OverN:
      return 1.0 / cfg.N;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown interaction normalization");
}

// Visit ordered slot pairs (p, q) carrying a nonzero weight under the
// configured normalization, with the shared prefactor folded in.  The full
// double sum visits both orientations of every pair; the pair sum visits
// p > q only.
template <class Fn>
void for_each_pair_term(const BlockSystemConfig& cfg, Fn&& fn) {
  const int n = cfg.n_particles();
  const double coeff = pair_coefficient(cfg);
  for (int p = 1; p <= n; ++p) {
    const int q_max = cfg.norm == InteractionNorm::PairSum_OverN ? p - 1 : n;
    for (int q = 1; q <= q_max; ++q) {
      if (p == q) continue;
      const double w = cfg.xi(p - 1, q - 1);
      if (w == 0.0) continue;
      fn(p, q, coeff * w);
    }
  }
}

}  // namespace

void BlockSystemConfig::validate() const {
  if (c < 1 || N < 1)
    throw Error(ErrorCode::InvalidArgument, "need c >= 1 and N >= 1");
  model.validate();
  const int dim = d();
  if (A.rows() != static_cast<long long>(dim) * dim || A.rows() != A.cols())
    throw Error(ErrorCode::DimensionMismatch,
                "two-body operator must be d^2 x d^2");
  if (!is_hermitian(A, 1e-10 * std::max(1.0, A.norm())))
    throw Error(ErrorCode::InvalidArgument,
                "two-body operator must be Hermitian");
  const int n = n_particles();
  if (xi.rows() != n || xi.cols() != n)
    throw Error(ErrorCode::DimensionMismatch,
                "coupling weights must be (cN) x (cN)");
  for (int p = 0; p < n; ++p) {
    if (std::abs(xi(p, p)) > 1e-12)
      throw Error(ErrorCode::InvalidArgument,
                  "coupling weights must have zero diagonal");
    for (int q = 0; q < p; ++q) {
      if (std::abs(xi(p, q) - xi(q, p)) > 1e-12)
        throw Error(ErrorCode::InvalidArgument,
                    "coupling weights must be symmetric");
    }
  }
  check_vector_cap(tensor_dim(dim, n), "BlockSystemConfig");
}

FilterModel make_particle_model(const Matrix& H_free, const Matrix& L,
                                double eta) {
  FilterModel m;
  m.H_free = H_free;
  m.H_ctrl = Matrix::Zero(H_free.rows(), H_free.cols());
  m.L = L;
  m.eta = eta;
  return m;
}

Vector apply_single(const Matrix& op, const Vector& psi, int slot,
                    int n_slots) {
  const int d = static_cast<int>(op.rows());
  if (op.cols() != d)
    throw Error(ErrorCode::DimensionMismatch, "apply_single: operator not square");
  if (slot < 1 || slot > n_slots)
    throw Error(ErrorCode::InvalidArgument, "apply_single: slot out of range");
  const long long dim = tensor_dim(d, n_slots);
  if (psi.size() != dim)
    throw Error(ErrorCode::DimensionMismatch,
                "apply_single: state length is not d^n_slots");
  Vector out(dim);
  const long long rest_dim = dim / d;
  std::vector<long long> idx(d);
  for (long long rest = 0; rest < rest_dim; ++rest) {
    for (int b = 0; b < d; ++b) idx[b] = insert_digit(rest, b, slot, n_slots, d);
    for (int a = 0; a < d; ++a) {
      cxd acc(0.0, 0.0);
      for (int b = 0; b < d; ++b) acc += op(a, b) * psi(idx[b]);
      out(idx[a]) = acc;
    }
  }
  return out;
}

Vector apply_pair(const Matrix& two_body, const Vector& psi, int slot_p,
                  int slot_q, int n_slots) {
  const long long dd = two_body.rows();
  const int d = static_cast<int>(std::llround(std::sqrt(static_cast<double>(dd))));
  if (static_cast<long long>(d) * d != dd || two_body.cols() != dd)
    throw Error(ErrorCode::DimensionMismatch,
                "apply_pair: operator dimension is not a perfect square");
  if (slot_p < 1 || slot_p > n_slots || slot_q < 1 || slot_q > n_slots ||
      slot_p == slot_q)
    throw Error(ErrorCode::InvalidArgument, "apply_pair: invalid slots");
  const long long dim = tensor_dim(d, n_slots);
  if (psi.size() != dim)
    throw Error(ErrorCode::DimensionMismatch,
                "apply_pair: state length is not d^n_slots");
  Vector out(dim);
  const long long rest_dim = dim / dd;
  std::vector<long long> idx(dd);
  for (long long rest = 0; rest < rest_dim; ++rest) {
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b)
        idx[a * d + b] = insert_two_digits(rest, a, slot_p, b, slot_q, n_slots, d);
    for (long long ab = 0; ab < dd; ++ab) {
      cxd acc(0.0, 0.0);
      for (long long a2b2 = 0; a2b2 < dd; ++a2b2)
        acc += two_body(ab, a2b2) * psi(idx[a2b2]);
      out(idx[ab]) = acc;
    }
  }
  return out;
}

Matrix build_hamiltonian(const BlockSystemConfig& cfg) {
  cfg.validate();
  const int n = cfg.n_particles();
  const long long dim = tensor_dim(cfg.d(), n);
  const double bytes = static_cast<double>(dim) * dim * sizeof(cxd);
  if (bytes > static_cast<double>(kLiftMemoryCapBytes))
    throw Error(ErrorCode::MemoryCapExceeded,
                "build_hamiltonian: dense Hamiltonian exceeds the memory cap");
  Matrix h = Matrix::Zero(dim, dim);
  for (int q = 1; q <= n; ++q) h += lift(cfg.model.H_free, q, n);
  for_each_pair_term(cfg, [&](int p, int q, double w) {
    h += w * lift_pair(cfg.A, p, q, n);
  });
  return h;
}

Trajectory<Vector> simulate_nbody_sse(const BlockSystemConfig& cfg,
                                      const Vector& psi0, const TimeGrid& grid,
                                      const NoisePath& noise) {
  cfg.validate();
  grid.validate();
  if (std::abs(cfg.model.eta - 1.0) > 1e-12)
    throw Error(ErrorCode::InvalidArgument,
                "pure-state form requires unit efficiency");
  const int n = cfg.n_particles();
  const long long dim = tensor_dim(cfg.d(), n);
  if (psi0.size() != dim)
    throw Error(ErrorCode::DimensionMismatch, "initial state length mismatch");
  if (std::abs(psi0.norm() - 1.0) > kNormTol)
    throw Error(ErrorCode::InvalidArgument, "initial state must be normalized");
  if (noise.n_drivers != n)
    throw Error(ErrorCode::DimensionMismatch,
                "need one noise driver per particle");
  if (noise.grid.n_steps != grid.n_steps)
    throw Error(ErrorCode::DimensionMismatch,
                "noise path grid does not match integration grid");

  const double dt = grid.dt();
  const Matrix ldl = dagger(cfg.model.L) * cfg.model.L;

  Trajectory<Vector> out;
  out.grid = grid;
  out.states.reserve(grid.n_steps + 1);
  out.states.push_back(psi0);
  out.dW = noise.increments;

  Vector psi = psi0;
  std::vector<Vector> lpsi(n + 1);
  for (int k = 0; k < grid.n_steps; ++k) {
    // Hamiltonian action via slot contractions.
    Vector hpsi = Vector::Zero(dim);
    for (int q = 1; q <= n; ++q)
      hpsi += apply_single(cfg.model.H_free, psi, q, n);
    for_each_pair_term(cfg, [&](int p, int q, double w) {
      hpsi += w * apply_pair(cfg.A, psi, p, q, n);
    });

    Vector raw = psi - (i_unit * dt) * hpsi;
    for (int q = 1; q <= n; ++q) {
      lpsi[q] = apply_single(cfg.model.L, psi, q, n);
      const double m = 2.0 * psi.dot(lpsi[q]).real();
      raw += dt * (-0.5 * apply_single(ldl, psi, q, n) + (0.5 * m) * lpsi[q] -
                   (m * m / 8.0) * psi);
      raw += noise.increments(k, q - 1) * (lpsi[q] - (0.5 * m) * psi);
    }

    const double nrm = raw.norm();
    if (!(nrm > 1e-14) || !raw.allFinite())
      throw Error(ErrorCode::NormalizationBreakdown,
                  "state norm collapsed at step " + std::to_string(k));
    psi = raw / nrm;
    out.states.push_back(psi);
  }
  return out;
}

Trajectory<Matrix> simulate_nbody_density(const BlockSystemConfig& cfg,
                                          const Matrix& rho0,
                                          const TimeGrid& grid,
                                          const NoisePath& noise) {
  cfg.validate();
  grid.validate();
  const int n = cfg.n_particles();
  const long long dim = tensor_dim(cfg.d(), n);
  if (dim > 64)
    throw Error(ErrorCode::GuardViolation,
                "density form is guarded to total dimension <= 64");
  check_density(rho0);
  if (rho0.rows() != dim)
    throw Error(ErrorCode::DimensionMismatch, "initial state dimension mismatch");
  if (noise.n_drivers != n)
    throw Error(ErrorCode::DimensionMismatch,
                "need one noise driver per particle");
  if (noise.grid.n_steps != grid.n_steps)
    throw Error(ErrorCode::DimensionMismatch,
                "noise path grid does not match integration grid");

  const double dt = grid.dt();
  const double sqrt_eta = std::sqrt(cfg.model.eta);
  const Matrix h = build_hamiltonian(cfg);
  std::vector<Matrix> lq(n), lq_dag(n), lq_dl(n);
  for (int q = 0; q < n; ++q) {
    lq[q] = lift(cfg.model.L, q + 1, n);
    lq_dag[q] = dagger(lq[q]);
    lq_dl[q] = lq_dag[q] * lq[q];
  }
  const double l_hs_sq =
      n * hs_norm(cfg.model.L) * hs_norm(cfg.model.L) *
      std::pow(static_cast<double>(cfg.d()), n - 1);

  Trajectory<Matrix> out;
  out.grid = grid;
  out.states.reserve(grid.n_steps + 1);
  out.states.push_back(rho0);
  out.dW = noise.increments;
  out.dY.resize(grid.n_steps, n);

  Matrix rho = rho0;
  for (int k = 0; k < grid.n_steps; ++k) {
    Matrix raw = rho + dt * (-i_unit * commutator(h, rho));
    double dw_sq = 0.0;
    for (int q = 0; q < n; ++q) {
      const Matrix lr = lq[q] * rho;
      const Matrix sym = lr + dagger(lr);
      const double m = sym.trace().real();
      const double dw = noise.increments(k, q);
      raw += dt * (lr * lq_dag[q] - 0.5 * anticommutator(lq_dl[q], rho));
      raw += (sqrt_eta * dw) * (sym - m * rho);
      out.dY(k, q) = dw + sqrt_eta * m * dt;
      dw_sq += dw * dw;
    }
    const double trace_err = std::abs(raw.trace().real() - 1.0) +
                             std::abs(raw.trace().imag());
    if (!(trace_err <= 10.0 * (dt + dw_sq) * std::max(l_hs_sq, 1.0)))
      throw Error(ErrorCode::InvariantViolation,
                  "raw trace drift exceeds step budget at step " +
                      std::to_string(k));
    rho = project_to_density(raw);
    out.states.push_back(rho);
  }
  return out;
}

namespace {

void check_particle_index(int c, int N, int i, int l) {
  if (i < 1 || i > c || l < 1 || l > N)
    throw Error(ErrorCode::InvalidArgument, "particle index out of range");
}

}  // namespace

Matrix marginal(const Vector& state, int c, int N, int d, int i, int l) {
  check_particle_index(c, N, i, l);
  return partial_trace(state, (i - 1) * N + l, c * N, d);
}

Matrix marginal(const Matrix& state, int c, int N, int d, int i, int l) {
  check_particle_index(c, N, i, l);
  return partial_trace(state, (i - 1) * N + l, c * N, d);
}

double d_distance(const Vector& state, int c, int N, int d,
                  const Matrix& gamma, int i, int l) {
  const Matrix marg = marginal(state, c, N, d, i, l);
  const double v = 1.0 - (gamma * marg).trace().real();
  return std::clamp(v, 0.0, 1.0);
}

Matrix counting_projector(int c, int N, int i, int n_i,
                          const std::vector<Matrix>& gammas) {
  if (N > 3)
    throw Error(ErrorCode::GuardViolation,
                "counting operators are guarded to N <= 3");
  if (c < 1 || N < 1 || i < 1 || i > c || n_i < 0 || n_i > N)
    throw Error(ErrorCode::InvalidArgument, "counting_projector: bad indices");
  if (static_cast<int>(gammas.size()) != c)
    throw Error(ErrorCode::DimensionMismatch,
                "counting_projector: need one reference state per class");
  for (const Matrix& g : gammas) check_pure_projector(g, "counting_projector");
  const int d = static_cast<int>(gammas[0].rows());
  const int n = c * N;
  const long long dim = tensor_dim(d, n);
  const double bytes = static_cast<double>(dim) * dim * sizeof(cxd);
  if (bytes > static_cast<double>(kLiftMemoryCapBytes))
    throw Error(ErrorCode::MemoryCapExceeded,
                "counting_projector: operator exceeds the memory cap");

  const Matrix gamma = gammas[i - 1];
  const Matrix bad = identity(d) - gamma;
  Matrix total = Matrix::Zero(dim, dim);
  for (unsigned mask = 0; mask < (1u << N); ++mask) {
    int bits = 0;
    for (int l = 0; l < N; ++l) bits += (mask >> l) & 1u;
    if (bits != n_i) continue;
    Matrix term = Matrix::Identity(dim, dim);
    for (int l = 1; l <= N; ++l) {
      const Matrix& factor = ((mask >> (l - 1)) & 1u) ? bad : gamma;
      term = term * lift(factor, (i - 1) * N + l, n);
    }
    total += term;
  }
  return total;
}

double chaos_functional(const Vector& state, int c, int N,
                        const std::vector<Matrix>& gammas,
                        const std::function<double(int)>& weight) {
  if (N > 3)
    throw Error(ErrorCode::GuardViolation,
                "counting operators are guarded to N <= 3");
  if (!weight)
    throw Error(ErrorCode::InvalidArgument, "chaos_functional: null weight");
  if (static_cast<int>(gammas.size()) != c)
    throw Error(ErrorCode::DimensionMismatch,
                "chaos_functional: need one reference state per class");
  const int d = static_cast<int>(gammas[0].rows());
  const int n = c * N;
  if (state.size() != tensor_dim(d, n))
    throw Error(ErrorCode::DimensionMismatch,
                "chaos_functional: state length mismatch");

  // Cache per-class projectors, then sum over count vectors.
  std::vector<std::vector<Matrix>> per_class(c);
  for (int i = 1; i <= c; ++i) {
    per_class[i - 1].reserve(N + 1);
    for (int ni = 0; ni <= N; ++ni)
      per_class[i - 1].push_back(counting_projector(c, N, i, ni, gammas));
  }
  double total = 0.0;
  std::vector<int> counts(c, 0);
  while (true) {
    Vector v = state;
    int k_total = 0;
    for (int i = 0; i < c; ++i) {
      v = per_class[i][counts[i]] * v;
      k_total += counts[i];
    }
    total += weight(k_total) * state.dot(v).real();
    int pos = 0;
    while (pos < c && counts[pos] == N) {
      counts[pos] = 0;
      ++pos;
    }
    if (pos == c) break;
    ++counts[pos];
  }
  return total;
}

double chaos_bound_via_D(const Vector& state, int c, int N,
                         const std::vector<Matrix>& gammas) {
  if (static_cast<int>(gammas.size()) != c)
    throw Error(ErrorCode::DimensionMismatch,
                "chaos_bound_via_D: need one reference state per class");
  const int d = static_cast<int>(gammas[0].rows());
  double total = 0.0;
  for (int i = 1; i <= c; ++i)
    for (int l = 1; l <= N; ++l)
      total += d_distance(state, c, N, d, gammas[i - 1], i, l);
  return total / (static_cast<double>(c) * N);
}

Vector permutation_apply(const Vector& state, int c, int N, int d,
                         const std::vector<std::vector<int>>& sigma) {
  if (static_cast<int>(sigma.size()) != c)
    throw Error(ErrorCode::InvalidArgument,
                "permutation_apply: need one permutation per class");
  const int n = c * N;
  if (state.size() != tensor_dim(d, n))
    throw Error(ErrorCode::DimensionMismatch,
                "permutation_apply: state length mismatch");
  std::vector<int> src_slot(n);  // 0-based source slot for each target slot
  for (int i = 0; i < c; ++i) {
    const std::vector<int>& s = sigma[i];
    if (static_cast<int>(s.size()) != N)
      throw Error(ErrorCode::InvalidArgument,
                  "permutation_apply: permutation length mismatch");
    std::vector<bool> seen(N, false);
    for (int l = 0; l < N; ++l) {
      if (s[l] < 0 || s[l] >= N || seen[s[l]])
        throw Error(ErrorCode::InvalidArgument,
                    "permutation_apply: not a permutation");
      seen[s[l]] = true;
      src_slot[i * N + l] = i * N + s[l];
    }
  }

  const long long dim = state.size();
  std::vector<long long> place(n);  // digit place value of slot s (0-based)
  place[n - 1] = 1;
  for (int s = n - 2; s >= 0; --s) place[s] = place[s + 1] * d;

  Vector out(dim);
  std::vector<int> digits(n);
  for (long long idx = 0; idx < dim; ++idx) {
    long long rem = idx;
    for (int s = 0; s < n; ++s) {
      digits[s] = static_cast<int>(rem / place[s]);
      rem %= place[s];
    }
    long long src = 0;
    for (int s = 0; s < n; ++s) src += digits[src_slot[s]] * place[s];
    out(idx) = state(src);
  }
  return out;
}

}  // namespace gbqf
