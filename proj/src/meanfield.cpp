#include "gbqf/meanfield.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "gbqf/errors.hpp"
#include "gbqf/threads.hpp"

namespace gbqf {

namespace {

cxd i_unit(0.0, 1.0);

std::vector<Matrix> expand_initials(const std::vector<Matrix>& rho0s, int M,
                                    const char* what) {
  if (rho0s.empty())
    throw Error(ErrorCode::InvalidArgument,
                std::string(what) + ": need at least one initial state");
  std::vector<Matrix> out;
  out.reserve(M);
  if (static_cast<int>(rho0s.size()) == 1) {
    out.assign(M, rho0s[0]);
  } else if (static_cast<int>(rho0s.size()) == M) {
    out = rho0s;
  } else {
    throw Error(ErrorCode::DimensionMismatch,
                std::string(what) +
                    ": initial states must be one shared or one per label");
  }
  for (const Matrix& r : out) check_density(r);
  return out;
}

void check_two_body(const Matrix& A, int d, const char* what) {
  if (A.rows() != static_cast<long long>(d) * d || A.rows() != A.cols())
    throw Error(ErrorCode::DimensionMismatch,
                std::string(what) + ": coupling operator must be d^2 x d^2");
  if (!is_hermitian(A, 1e-10 * std::max(1.0, A.norm())))
    throw Error(ErrorCode::InvalidArgument,
                std::string(what) + ": coupling operator must be Hermitian");
}

void check_grid_match(const TimeGrid& a, const TimeGrid& b, const char* what) {
  if (a.n_steps != b.n_steps || std::abs(a.t0 - b.t0) > 1e-12 ||
      std::abs(a.t1 - b.t1) > 1e-12)
    throw Error(ErrorCode::DimensionMismatch,
                std::string(what) + ": time grids do not match");
}

Matrix hermitian_coupling(const std::vector<Matrix>& contracted,
                          const Eigen::MatrixXd& wmat, int u, double weight,
                          int d) {
  Matrix coupling = Matrix::Zero(d, d);
  for (int v = 0; v < static_cast<int>(contracted.size()); ++v) {
    const double wv = wmat(u, v);
    if (wv != 0.0) coupling += wv * contracted[v];
  }
  coupling *= weight;
  if (!is_hermitian(coupling, 1e-10 * std::max(1.0, coupling.norm())))
    throw Error(ErrorCode::InvariantViolation,
                "mean-field coupling term is not Hermitian");
  return 0.5 * (coupling + coupling.adjoint());
}

}  // namespace

std::vector<double> UGrid::labels() const {
  validate();
  std::vector<double> out(M);
  for (int m = 0; m < M; ++m) out[m] = label(m);
  return out;
}

void UGrid::validate() const {
  if (M < 1)
    throw Error(ErrorCode::InvalidArgument, "label grid: need M >= 1");
}

const Matrix& MeanFieldPath::at(int step, int label) const {
  if (step < 0 || step >= static_cast<int>(states.size()) || label < 0 ||
      label >= static_cast<int>(states[step].size()))
    throw Error(ErrorCode::InvalidArgument, "mean path index out of range");
  return states[step][label];
}

Matrix MeanFieldPath::interpolate(double t, int label) const {
  const double dt = grid.dt();
  double s = (t - grid.t0) / dt;
  s = std::clamp(s, 0.0, static_cast<double>(grid.n_steps));
  const int k0 = std::min(static_cast<int>(s), grid.n_steps - 1);
  const double frac = s - k0;
  return (1.0 - frac) * at(k0, label) + frac * at(k0 + 1, label);
}

std::function<Matrix(double)> mean_coupling_hamiltonian(
    double u, const MeanFieldPath& mean, const Matrix& A, const Graphon& w) {
  mean.ugrid.validate();
  const int M = mean.ugrid.M;
  const int d = static_cast<int>(mean.at(0, 0).rows());
  check_two_body(A, d, "mean_coupling_hamiltonian");
  const int n_steps = mean.grid.n_steps;

  Eigen::VectorXd wrow(M);
  for (int v = 0; v < M; ++v) wrow(v) = w.eval(u, mean.ugrid.label(v));
  const double weight = mean.ugrid.weight();

  auto table = std::make_shared<std::vector<Matrix>>();
  table->reserve(n_steps + 1);
  for (int k = 0; k <= n_steps; ++k) {
    Matrix coupling = Matrix::Zero(d, d);
    for (int v = 0; v < M; ++v) {
      if (wrow(v) != 0.0)
        coupling += wrow(v) * mean_field_contract(A, mean.at(k, v));
    }
    coupling *= weight;
    table->push_back(0.5 * (coupling + coupling.adjoint()));
  }
  const TimeGrid grid = mean.grid;
  return [table, grid](double t) -> Matrix {
    const int k = std::clamp(
        static_cast<int>(std::llround((t - grid.t0) / grid.dt())), 0,
        grid.n_steps);
    return (*table)[k];
  };
}

MeanFieldPath solve_graphon_lindblad(const FilterModel& model, const Matrix& A,
                                     const Graphon& w, const UGrid& ugrid,
                                     const TimeGrid& grid,
                                     const std::vector<Matrix>& rho0s,
                                     const LabelControlLaw& control) {
  model.validate();
  ugrid.validate();
  grid.validate();
  const int d = model.dim();
  const int M = ugrid.M;
  check_two_body(A, d, "solve_graphon_lindblad");
  std::vector<Matrix> state = expand_initials(rho0s, M, "solve_graphon_lindblad");

  Eigen::MatrixXd wmat(M, M);
  for (int uu = 0; uu < M; ++uu)
    for (int v = 0; v < M; ++v)
      wmat(uu, v) = w.eval(ugrid.label(uu), ugrid.label(v));

  const Matrix ldag = dagger(model.L);
  const Matrix ldl = ldag * model.L;
  const double dt = grid.dt();
  const double quad_weight = ugrid.weight();

  // Right-hand side of the averaged system with per-step frozen controls.
  auto rhs = [&](const std::vector<Matrix>& x,
                 const std::vector<double>& alphas) {
    std::vector<Matrix> contracted(M);
    for (int v = 0; v < M; ++v) contracted[v] = mean_field_contract(A, x[v]);
    std::vector<Matrix> out(M);
    for (int uu = 0; uu < M; ++uu) {
      const Matrix coupling =
          hermitian_coupling(contracted, wmat, uu, quad_weight, d);
      Matrix h = model.H_free + coupling;
      if (alphas[uu] != 0.0) h += alphas[uu] * model.H_ctrl;
      out[uu] = -i_unit * commutator(h, x[uu]) + model.L * x[uu] * ldag -
                0.5 * anticommutator(ldl, x[uu]);
    }
    return out;
  };
  auto axpy = [&](const std::vector<Matrix>& x, double a,
                  const std::vector<Matrix>& y) {
    std::vector<Matrix> out(M);
    for (int m = 0; m < M; ++m) out[m] = x[m] + a * y[m];
    return out;
  };

  MeanFieldPath path;
  path.grid = grid;
  path.ugrid = ugrid;
  path.states.reserve(grid.n_steps + 1);
  path.states.push_back(state);

  std::vector<double> alphas(M, 0.0);
  for (int k = 0; k < grid.n_steps; ++k) {
    const double t = grid.time(k);
    if (!control.is_zero()) {
      for (int m = 0; m < M; ++m)
        alphas[m] = control(t, ugrid.label(m), state[m]);
    }
    const std::vector<Matrix> k1 = rhs(state, alphas);
    const std::vector<Matrix> k2 = rhs(axpy(state, 0.5 * dt, k1), alphas);
    const std::vector<Matrix> k3 = rhs(axpy(state, 0.5 * dt, k2), alphas);
    const std::vector<Matrix> k4 = rhs(axpy(state, dt, k3), alphas);
    for (int m = 0; m < M; ++m) {
      Matrix next = state[m] + (dt / 6.0) * (k1[m] + 2.0 * k2[m] +
                                             2.0 * k3[m] + k4[m]);
      const double tr_err = std::abs(next.trace().real() - 1.0) +
                            std::abs(next.trace().imag());
      if (tr_err > 1e-10)
        throw Error(ErrorCode::InvariantViolation,
                    "mean solver trace drift at step " + std::to_string(k));
      if ((next - next.adjoint()).norm() > 1e-10 * std::max(1.0, next.norm()))
        throw Error(ErrorCode::InvariantViolation,
                    "mean solver Hermiticity drift at step " +
                        std::to_string(k));
      state[m] = project_to_density(next);
    }
    path.states.push_back(state);
  }
  return path;
}

FilterResult simulate_graphon_particle(double u, const MeanFieldPath& mean,
                                       const FilterModel& model,
                                       const Matrix& A, const Graphon& w,
                                       const TimeGrid& grid,
                                       const NoisePath& noise,
                                       const Matrix& gamma0,
                                       const LabelControlLaw& control) {
  if (u < 0.0 || u > 1.0)
    throw Error(ErrorCode::InvalidArgument, "label outside [0, 1]");
  check_grid_match(mean.grid, grid, "simulate_graphon_particle");
  FilterModel coupled = model;
  coupled.extra_hamiltonian = mean_coupling_hamiltonian(u, mean, A, w);
  ControlLaw law;
  if (!control.is_zero())
    law = [control, u](double t, const Matrix& rho) {
      return control(t, u, rho);
    };
  return simulate_filter(coupled, gamma0, grid, noise, law);
}

PicardResult picard_iterate(const FilterModel& model, const Matrix& A,
                            const Graphon& w, const UGrid& ugrid,
                            const TimeGrid& grid,
                            const std::vector<Matrix>& rho0s, int replicas,
                            int iterations, std::uint64_t master_seed,
                            int n_threads) {
  model.validate();
  ugrid.validate();
  grid.validate();
  if (replicas < 1 || iterations < 1)
    throw Error(ErrorCode::InvalidArgument,
                "picard_iterate: need replicas >= 1 and iterations >= 1");
  const int M = ugrid.M;
  const int n_steps = grid.n_steps;
  std::vector<Matrix> init = expand_initials(rho0s, M, "picard_iterate");

  PicardResult result;
  result.path.grid = grid;
  result.path.ugrid = ugrid;
  result.path.states.assign(n_steps + 1, init);

  for (int it = 0; it < iterations; ++it) {
    std::vector<std::vector<Matrix>> sums(
        M, std::vector<Matrix>(n_steps + 1));
    parallel_for(
        M,
        [&](int m) {
          FilterModel coupled = model;
          coupled.extra_hamiltonian =
              mean_coupling_hamiltonian(ugrid.label(m), result.path, A, w);
          std::vector<Matrix>& acc = sums[m];
          for (int k = 0; k <= n_steps; ++k)
            acc[k] = Matrix::Zero(model.dim(), model.dim());
          for (int r = 0; r < replicas; ++r) {
            const NoisePath noise = generate_noise(
                1, grid, master_seed,
                derive_path_index(static_cast<std::uint64_t>(m), r));
            const FilterResult run =
                simulate_filter(coupled, init[m], grid, noise);
            for (int k = 0; k <= n_steps; ++k) acc[k] += run.traj.states[k];
          }
        },
        n_threads);

    double dist = 0.0;
    std::vector<std::vector<Matrix>> next(result.path.states.size());
    for (int k = 0; k <= n_steps; ++k) {
      next[k].resize(M);
      for (int m = 0; m < M; ++m) {
        next[k][m] = project_to_density(sums[m][k] / replicas);
        dist = std::max(dist, hs_norm(next[k][m] - result.path.states[k][m]));
      }
    }
    result.path.states = std::move(next);
    result.sup_distances.push_back(dist);
    const std::size_t j = result.sup_distances.size();
    if (j >= 3 && result.sup_distances[j - 1] > result.sup_distances[j - 2] &&
        result.sup_distances[j - 2] > result.sup_distances[j - 3])
      result.diverged = true;
  }
  return result;
}

Eigen::MatrixXd block_reduce(const StepKernel& w, int c) {
  if (c < 1) throw Error(ErrorCode::InvalidArgument, "need c >= 1");
  if (w.block_count() != c)
    throw Error(ErrorCode::InvalidArgument,
                "kernel block count does not match the class count");
  for (int i = 0; i <= c; ++i) {
    if (std::abs(w.boundaries[i] - static_cast<double>(i) / c) > 1e-12)
      throw Error(ErrorCode::InvalidArgument,
                  "kernel is not constant on the uniform class grid");
  }
  return w.weights;
}

std::vector<FilterResult> simulate_block_system(
    const FilterModel& model, const Matrix& A, const StepKernel& w, int c,
    const TimeGrid& grid, const NoisePath& noise,
    const std::vector<Matrix>& gamma0s) {
  block_reduce(w, c);  // validates the kernel shape
  if (noise.n_drivers != c)
    throw Error(ErrorCode::DimensionMismatch,
                "need one noise driver per class");
  const Graphon gw = Graphon::block(w);
  const UGrid ugrid{c};
  const std::vector<Matrix> init =
      expand_initials(gamma0s, c, "simulate_block_system");
  const MeanFieldPath mean =
      solve_graphon_lindblad(model, A, gw, ugrid, grid, init);
  std::vector<FilterResult> out;
  out.reserve(c);
  for (int j = 0; j < c; ++j) {
    const NoisePath nj = noise_from_increments(grid, noise.increments.col(j));
    out.push_back(simulate_graphon_particle(ugrid.label(j), mean, model, A, gw,
                                            grid, nj, init[j]));
  }
  return out;
}

StabilityResult stability_experiment(const Graphon& wa, const Graphon& wb,
                                     const FilterModel& model, const Matrix& A,
                                     const UGrid& ugrid, const TimeGrid& grid,
                                     const std::vector<Matrix>& rho0s,
                                     int replicas, std::uint64_t master_seed,
                                     int n_threads) {
  model.validate();
  ugrid.validate();
  grid.validate();
  if (replicas < 1)
    throw Error(ErrorCode::InvalidArgument, "need replicas >= 1");
  const int M = ugrid.M;
  const int n_steps = grid.n_steps;
  const std::vector<Matrix> init =
      expand_initials(rho0s, M, "stability_experiment");

  const MeanFieldPath mean_a =
      solve_graphon_lindblad(model, A, wa, ugrid, grid, init);
  const MeanFieldPath mean_b =
      solve_graphon_lindblad(model, A, wb, ugrid, grid, init);

  std::vector<std::vector<double>> partial(M,
                                           std::vector<double>(n_steps + 1, 0.0));
  parallel_for(
      M,
      [&](int m) {
        FilterModel ma = model;
        ma.extra_hamiltonian =
            mean_coupling_hamiltonian(ugrid.label(m), mean_a, A, wa);
        FilterModel mb = model;
        mb.extra_hamiltonian =
            mean_coupling_hamiltonian(ugrid.label(m), mean_b, A, wb);
        for (int r = 0; r < replicas; ++r) {
          const NoisePath noise = generate_noise(
              1, grid, master_seed,
              derive_path_index(static_cast<std::uint64_t>(m), r));
          const FilterResult ra = simulate_filter(ma, init[m], grid, noise);
          const FilterResult rb = simulate_filter(mb, init[m], grid, noise);
          for (int k = 0; k <= n_steps; ++k) {
            const double gap =
                hs_norm(ra.traj.states[k] - rb.traj.states[k]);
            partial[m][k] += gap * gap;
          }
        }
      },
      n_threads);

  StabilityResult out;
  out.gap_curve.assign(n_steps + 1, 0.0);
  for (int k = 0; k <= n_steps; ++k) {
    double acc = 0.0;
    for (int m = 0; m < M; ++m) acc += partial[m][k];
    out.gap_curve[k] = acc / (static_cast<double>(M) * replicas);
    out.sup_gap = std::max(out.sup_gap, out.gap_curve[k]);
  }

  const int grid_n = 240;
  const StepKernel sa =
      wa.kind() == Graphon::Kind::Block ? wa.step() : wa.discretize(grid_n);
  const StepKernel sb =
      wb.kind() == Graphon::Kind::Block ? wb.step() : wb.discretize(grid_n);
  out.l1_difference = l1_norm(difference_kernel(sa, sb));
  out.ratio = out.l1_difference > 0.0 ? out.sup_gap / out.l1_difference : 0.0;
  return out;
}

}  // namespace gbqf
