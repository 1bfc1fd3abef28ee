#include "gbqf/filter.hpp"

#include <cmath>
#include <string>

#include "gbqf/errors.hpp"

namespace gbqf {

namespace {

cxd i_unit(0.0, 1.0);

void check_one_driver(const NoisePath& noise, const TimeGrid& grid) {
  noise.grid.validate();
  grid.validate();
  if (noise.n_drivers != 1)
    throw Error(ErrorCode::DimensionMismatch,
                "filter expects a single noise driver");
  if (noise.grid.n_steps != grid.n_steps ||
      std::abs(noise.grid.t1 - grid.t1) > 1e-12 ||
      std::abs(noise.grid.t0 - grid.t0) > 1e-12)
    throw Error(ErrorCode::DimensionMismatch,
                "noise path grid does not match integration grid");
}

}  // namespace

Matrix FilterModel::hamiltonian(double t, double alpha) const {
  Matrix h = H_free;
  if (alpha != 0.0) h += alpha * H_ctrl;
  if (extra_hamiltonian) h += extra_hamiltonian(t);
  return h;
}

void FilterModel::validate() const {
  const int d = dim();
  if (d < 1) throw Error(ErrorCode::InvalidArgument, "empty model");
  if (H_free.rows() != d || H_free.cols() != d || H_ctrl.rows() != d ||
      H_ctrl.cols() != d || L.cols() != d)
    throw Error(ErrorCode::DimensionMismatch,
                "model operators must share one square dimension");
  if (!is_hermitian(H_free) || !is_hermitian(H_ctrl))
    throw Error(ErrorCode::InvalidArgument, "Hamiltonians must be Hermitian");
  if (!(eta > 0.0) || eta > 1.0 + 1e-12)
    throw Error(ErrorCode::InvalidArgument,
                "measurement efficiency must lie in (0, 1]");
}

Matrix lindblad_drift(const Matrix& rho, const FilterModel& model, double t,
                      double alpha) {
  const Matrix h = model.hamiltonian(t, alpha);
  const Matrix ldl = dagger(model.L) * model.L;
  return -i_unit * commutator(h, rho) + model.L * rho * dagger(model.L) -
         0.5 * anticommutator(ldl, rho);
}

Matrix innovation_diffusion(const Matrix& rho, const FilterModel& model) {
  const Matrix lr = model.L * rho;
  const Matrix sym = lr + dagger(lr);
  const double m = sym.trace().real();
  return std::sqrt(model.eta) * (sym - m * rho);
}

FilterResult simulate_filter(const FilterModel& model, const Matrix& rho0,
                             const TimeGrid& grid, const NoisePath& noise,
                             const ControlLaw& control) {
  model.validate();
  check_density(rho0);
  check_one_driver(noise, grid);
  const int n = grid.n_steps;
  const double dt = grid.dt();
  const double sqrt_eta = std::sqrt(model.eta);
  const Matrix ldag = dagger(model.L);
  const Matrix ldl = ldag * model.L;
  const double l_hs_sq = hs_norm(model.L) * hs_norm(model.L);

  FilterResult out;
  out.traj.grid = grid;
  out.traj.states.reserve(n + 1);
  out.traj.states.push_back(rho0);
  out.traj.dW.resize(n, 1);
  out.traj.dY.resize(n, 1);
  out.obs.dY.resize(n);
  out.obs.dW.resize(n);
  out.obs.compensator.resize(n);
  out.alpha.resize(n);

  Matrix rho = rho0;
  for (int k = 0; k < n; ++k) {
    const double t = grid.time(k);
    const double dw = noise.increments(k, 0);
    const double alpha = control ? control(t, rho) : 0.0;

    const Matrix lr = model.L * rho;
    const Matrix sym = lr + dagger(lr);
    const double m = sym.trace().real();
    const Matrix g = sym - m * rho;

    Matrix raw = rho;
    raw.noalias() += dt * (-i_unit * commutator(model.hamiltonian(t, alpha), rho) +
                           lr * ldag - 0.5 * anticommutator(ldl, rho));
    raw.noalias() += (sqrt_eta * dw) * g;

    // Second-order noise correction: the derivative of the diffusion field
    // along itself.  Its trace vanishes identically, so the step-trace guard
    // and the observation increments are unaffected.
    const Matrix lg = model.L * g;
    const Matrix gsym = lg + dagger(lg);
    const double mg = gsym.trace().real();
    raw.noalias() += (0.5 * model.eta * (dw * dw - dt)) *
                     (gsym - mg * rho - m * g);

    const double trace_err = std::abs(raw.trace().real() - 1.0) +
                             std::abs(raw.trace().imag());
    const double budget = 10.0 * (dt + dw * dw) * std::max(l_hs_sq, 1.0);
    if (!(trace_err <= budget))
      throw Error(ErrorCode::InvariantViolation,
                  "raw trace drift exceeds step budget at step " +
                      std::to_string(k));

    rho = project_to_density(raw);
    if (!rho.allFinite())
      throw Error(ErrorCode::NonFiniteState,
                  "non-finite state at step " + std::to_string(k));

    const double dy = dw + sqrt_eta * m * dt;
    out.traj.states.push_back(rho);
    out.traj.dW(k, 0) = dw;
    out.traj.dY(k, 0) = dy;
    out.obs.dY(k) = dy;
    out.obs.dW(k) = dw;
    out.obs.compensator(k) = m;
    out.alpha[k] = alpha;
  }
  return out;
}

LinearResult simulate_linear(const FilterModel& model, const Matrix& rho0,
                             const TimeGrid& grid, const NoisePath& y_path) {
  model.validate();
  check_density(rho0);
  check_one_driver(y_path, grid);
  const int n = grid.n_steps;
  const double dt = grid.dt();
  const double sqrt_eta = std::sqrt(model.eta);
  const Matrix ldag = dagger(model.L);
  const Matrix ldl = ldag * model.L;

  LinearResult out;
  out.traj.grid = grid;
  out.traj.states.reserve(n + 1);
  out.traj.states.push_back(rho0);
  out.traj.dY.resize(n, 1);

  Matrix rho = rho0;
  for (int k = 0; k < n; ++k) {
    const double t = grid.time(k);
    const double dy = y_path.increments(k, 0);

    const Matrix lr = model.L * rho;
    Matrix raw = rho;
    raw.noalias() += dt * (-i_unit * commutator(model.hamiltonian(t, 0.0), rho) +
                           lr * ldag - 0.5 * anticommutator(ldl, rho));
    raw.noalias() += (sqrt_eta * dy) * (lr + dagger(lr));

    // Hermitize and clip negative eigenvalues without renormalizing, so the
    // trace martingale is preserved whenever no clipping occurs.
    raw = 0.5 * (raw + dagger(raw));
    Eigen::SelfAdjointEigenSolver<Matrix> es(raw);
    if (es.info() != Eigen::Success)
      throw Error(ErrorCode::NonFiniteState,
                  "eigensolver failed at step " + std::to_string(k));
    Eigen::VectorXd lam = es.eigenvalues();
    bool clipped = false;
    for (int i = 0; i < lam.size(); ++i) {
      if (lam(i) < -1e-12) clipped = true;
      if (lam(i) < 0.0) lam(i) = 0.0;
    }
    if (clipped) ++out.clip_events;
    rho = es.eigenvectors() * lam.asDiagonal() *
          es.eigenvectors().adjoint();
    if (!rho.allFinite())
      throw Error(ErrorCode::NonFiniteState,
                  "non-finite state at step " + std::to_string(k));

    out.traj.states.push_back(rho);
    out.traj.dY(k, 0) = dy;
  }
  return out;
}

NormalizedResult normalize_linear(const Trajectory<Matrix>& linear,
                                  const NoisePath& y_path,
                                  const FilterModel& model) {
  const int n = linear.grid.n_steps;
  if (static_cast<int>(linear.states.size()) != n + 1)
    throw Error(ErrorCode::DimensionMismatch, "trajectory length mismatch");
  check_one_driver(y_path, linear.grid);
  const double dt = linear.grid.dt();
  const double sqrt_eta = std::sqrt(model.eta);
  const Matrix lsum = model.L + dagger(model.L);

  NormalizedResult out;
  out.traj.grid = linear.grid;
  out.traj.states.reserve(n + 1);
  out.dW.resize(n);
  for (int k = 0; k <= n; ++k) {
    const double tr = linear.states[k].trace().real();
    if (!(tr > 0.0))
      throw Error(ErrorCode::NormalizationBreakdown,
                  "nonpositive trace at step " + std::to_string(k));
    out.traj.states.push_back(linear.states[k] / tr);
  }
  for (int k = 0; k < n; ++k) {
    const double m = (lsum * out.traj.states[k]).trace().real();
    out.dW(k) = y_path.increments(k, 0) - sqrt_eta * m * dt;
  }
  return out;
}

Trajectory<Vector> simulate_sse(const FilterModel& model, const Vector& psi0,
                                const TimeGrid& grid, const NoisePath& noise) {
  model.validate();
  if (std::abs(model.eta - 1.0) > 1e-12)
    throw Error(ErrorCode::InvalidArgument,
                "pure-state form requires unit efficiency");
  if (psi0.size() != model.dim())
    throw Error(ErrorCode::DimensionMismatch, "state dimension mismatch");
  if (std::abs(psi0.norm() - 1.0) > kNormTol)
    throw Error(ErrorCode::InvalidArgument, "initial state must be normalized");
  check_one_driver(noise, grid);

  const int n = grid.n_steps;
  const double dt = grid.dt();
  const Matrix ldag = dagger(model.L);

  Trajectory<Vector> out;
  out.grid = grid;
  out.states.reserve(n + 1);
  out.states.push_back(psi0);
  out.dW.resize(n, 1);

  Vector psi = psi0;
  for (int k = 0; k < n; ++k) {
    const double t = grid.time(k);
    const double dw = noise.increments(k, 0);
    const Vector lpsi = model.L * psi;
    const double m = 2.0 * psi.dot(lpsi).real();

    Vector raw = psi;
    raw.noalias() += dt * (-i_unit * (model.hamiltonian(t, 0.0) * psi) -
                           0.5 * (ldag * lpsi) + (0.5 * m) * lpsi -
                           (m * m / 8.0) * psi);
    raw.noalias() += dw * (lpsi - (0.5 * m) * psi);

    const double nrm = raw.norm();
    if (!(nrm > 1e-14) || !raw.allFinite())
      throw Error(ErrorCode::NormalizationBreakdown,
                  "state norm collapsed at step " + std::to_string(k));
    psi = raw / nrm;
    out.states.push_back(psi);
    out.dW(k, 0) = dw;
  }
  return out;
}

}  // namespace gbqf
