#include "gbqf/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gbqf/errors.hpp"
#include "gbqf/threads.hpp"

namespace gbqf {

namespace {

Vector tensor_power(const Vector& phi, int n) {
  Vector out = Vector::Ones(1);
  for (int i = 0; i < n; ++i) {
    Vector next(out.size() * phi.size());
    for (Eigen::Index a = 0; a < out.size(); ++a)
      for (Eigen::Index b = 0; b < phi.size(); ++b)
        next(a * phi.size() + b) = out(a) * phi(b);
    out = std::move(next);
  }
  return out;
}

// Cell (p, q) carries w(p/n, q/n) including the diagonal; this is the kernel
// that generates deterministic weights, against which the cut term of the
// chaos bound is measured.
StepKernel deterministic_generating_kernel(const Graphon& w, int n) {
  Eigen::MatrixXd vals(n, n);
  for (int p = 1; p <= n; ++p)
    for (int q = 1; q <= n; ++q)
      vals(p - 1, q - 1) = w.eval_grid_point(static_cast<double>(p) / n,
                                             static_cast<double>(q) / n);
  return StepKernel::uniform(vals);
}

void mean_and_se(const std::vector<double>& xs, double& mean, double& se) {
  const int n = static_cast<int>(xs.size());
  mean = 0.0;
  se = 0.0;
  if (n == 0) return;
  for (double x : xs) mean += x;
  mean /= n;
  if (n < 2) return;
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= (n - 1);
  se = std::sqrt(var / n);
}

std::vector<Matrix> broadcast_initials(const std::vector<Matrix>& rho0s,
                                       int M) {
  if (rho0s.empty())
    throw Error(ErrorCode::InvalidArgument, "need at least one initial state");
  if (static_cast<int>(rho0s.size()) == 1)
    return std::vector<Matrix>(M, rho0s[0]);
  if (static_cast<int>(rho0s.size()) == M) return rho0s;
  throw Error(ErrorCode::DimensionMismatch,
              "initial states must be one shared or one per label");
}

}  // namespace

FilterModel two_level_model() {
  FilterModel m;
  m.H_free = Matrix::Zero(2, 2);
  m.H_ctrl = state_prep_hamiltonian();
  m.L = sigma_z();
  m.eta = 1.0;
  return m;
}

Matrix two_level_coupling() { return kron(sigma_z(), sigma_z()); }

ChaosSweepResult chaos_sweep(int c, const std::vector<int>& N_list,
                             const FilterModel& model, const Matrix& A,
                             const StepKernel& w, const TimeGrid& grid,
                             const Vector& phi0, int replicas,
                             std::uint64_t seed, bool bernoulli_weights,
                             int n_threads) {
  model.validate();
  grid.validate();
  if (std::abs(model.eta - 1.0) > 1e-12)
    throw Error(ErrorCode::InvalidArgument,
                "chaos sweep requires unit efficiency");
  if (N_list.empty() || replicas < 1)
    throw Error(ErrorCode::InvalidArgument,
                "chaos sweep needs sizes and replicas");
  const int d = model.dim();
  if (phi0.size() != d || std::abs(phi0.norm() - 1.0) > kNormTol)
    throw Error(ErrorCode::InvalidArgument,
                "per-particle initial state must be a unit d-vector");
  block_reduce(w, c);  // validates the kernel shape
  const Graphon gw = Graphon::block(w);
  const Matrix gamma0 = phi0 * phi0.adjoint();

  // Limit mean path and per-class coupling tables, shared by all sizes.
  const UGrid class_grid{c};
  const MeanFieldPath mean =
      solve_graphon_lindblad(model, A, gw, class_grid, grid, {gamma0});
  std::vector<std::function<Matrix(double)>> extra(c);
  for (int i = 0; i < c; ++i)
    extra[i] = mean_coupling_hamiltonian(class_grid.label(i), mean, A, gw);

  ChaosSweepResult result;
  for (int N : N_list) {
    const int n = c * N;
    const AdjacencyWeights adj =
        bernoulli_weights
            ? sample_bernoulli(gw, n,
                               derive_path_index(seed, 0x6b657900ULL + n))
            : deterministic_weights(gw, n);

    BlockSystemConfig cfg;
    cfg.c = c;
    cfg.N = N;
    cfg.model = model;
    cfg.A = A;
    cfg.xi = adj.xi;
    cfg.norm = InteractionNorm::FullSum_Over2cN;
    const Vector psi0 = tensor_power(phi0, n);

    std::vector<double> d_final(replicas, 0.0), d_zero(replicas, 0.0);
    parallel_for(
        replicas,
        [&](int r) {
          const NoisePath noise = generate_noise(
              n, grid, seed, derive_path_index(static_cast<std::uint64_t>(N), r));
          const Trajectory<Vector> body =
              simulate_nbody_sse(cfg, psi0, grid, noise);
          double acc_final = 0.0, acc_zero = 0.0;
          for (int i = 1; i <= c; ++i) {
            FilterModel limit = model;
            limit.extra_hamiltonian = extra[i - 1];
            for (int l = 1; l <= N; ++l) {
              const int col = cfg.slot(i, l) - 1;
              const NoisePath own =
                  noise_from_increments(grid, noise.increments.col(col));
              const Trajectory<Vector> copy =
                  simulate_sse(limit, phi0, grid, own);
              const Vector& psi_T = copy.states.back();
              acc_final += d_distance(body.states.back(), c, N, d,
                                      Matrix(psi_T * psi_T.adjoint()), i, l);
              acc_zero += d_distance(body.states.front(), c, N, d, gamma0, i, l);
            }
          }
          d_final[r] = acc_final / n;
          d_zero[r] = acc_zero / n;
        },
        n_threads);

    ChaosPoint pt;
    pt.N = N;
    mean_and_se(d_final, pt.mean_D_T, pt.std_err_T);
    double se0 = 0.0;
    mean_and_se(d_zero, pt.mean_D_0, se0);

    const StepKernel generating = bernoulli_weights
                                      ? step_from_adjacency(adj)
                                      : deterministic_generating_kernel(gw, n);
    const NormResult cut = cut_distance(generating, w, kNormExactCap,
                                        /*allow_approximate=*/true, seed);
    pt.cut_term = cut.value;
    pt.cut_exact = !cut.approximate;
    pt.bound_x = pt.cut_term + 1.0 / std::sqrt(static_cast<double>(N));
    result.points.push_back(pt);
  }

  // Log-log fit of the defect against the bound abscissa.
  std::vector<double> xs, ys;
  for (const ChaosPoint& pt : result.points) {
    if (pt.mean_D_T > 0.0 && pt.bound_x > 0.0) {
      xs.push_back(std::log(pt.bound_x));
      ys.push_back(std::log(pt.mean_D_T));
    }
  }
  if (xs.size() >= 2) {
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      mx += xs[i];
      my += ys[i];
    }
    mx /= xs.size();
    my /= ys.size();
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sxx += (xs[i] - mx) * (xs[i] - mx);
      sxy += (xs[i] - mx) * (ys[i] - my);
    }
    if (sxx > 0.0) {
      result.fitted_slope = sxy / sxx;
      result.fitted_C = (my - result.fitted_slope * mx) / (grid.t1 - grid.t0);
    }
  }
  return result;
}

StateReductionResult state_reduction(const UGrid& ugrid, const TimeGrid& grid,
                                     int replicas, std::uint64_t seed,
                                     int n_threads) {
  ugrid.validate();
  grid.validate();
  if (replicas < 1)
    throw Error(ErrorCode::InvalidArgument, "need replicas >= 1");
  const FilterModel model = two_level_model();
  const Matrix A = two_level_coupling();
  const Graphon w = Graphon::product();
  const Matrix rho0 = 0.5 * identity(2);
  const int M = ugrid.M;
  const int n_steps = grid.n_steps;

  const MeanFieldPath mean =
      solve_graphon_lindblad(model, A, w, ugrid, grid, {rho0});
  std::vector<FilterModel> per_label(M, model);
  for (int m = 0; m < M; ++m)
    per_label[m].extra_hamiltonian =
        mean_coupling_hamiltonian(ugrid.label(m), mean, A, w);

  std::vector<std::vector<double>> v_curve(replicas),
      s_curve(replicas);
  parallel_for(
      replicas,
      [&](int r) {
        std::vector<double>& v = v_curve[r];
        std::vector<double>& s = s_curve[r];
        v.assign(n_steps + 1, 0.0);
        s.assign(n_steps + 1, 0.0);
        for (int m = 0; m < M; ++m) {
          const NoisePath noise = generate_noise(
              1, grid, seed, derive_path_index(static_cast<std::uint64_t>(m), r));
          const FilterResult run =
              simulate_filter(per_label[m], rho0, grid, noise);
          for (int k = 0; k <= n_steps; ++k) {
            const double z = bloch_z(run.traj.states[k]);
            const double lyap = 1.0 - z * z;
            v[k] += lyap;
            s[k] += lyap * lyap;
          }
        }
        for (int k = 0; k <= n_steps; ++k) {
          v[k] /= M;
          s[k] /= M;
        }
      },
      n_threads);

  StateReductionResult out;
  out.grid = grid;
  out.labels = ugrid.labels();
  out.mean_V.assign(n_steps + 1, 0.0);
  out.se_V.assign(n_steps + 1, 0.0);
  out.mean_Vsq.assign(n_steps + 1, 0.0);
  out.v_final.resize(replicas);
  for (int r = 0; r < replicas; ++r) out.v_final[r] = v_curve[r][n_steps];
  for (int k = 0; k <= n_steps; ++k) {
    std::vector<double> slice(replicas);
    for (int r = 0; r < replicas; ++r) slice[r] = v_curve[r][k];
    mean_and_se(slice, out.mean_V[k], out.se_V[k]);
    double acc = 0.0;
    for (int r = 0; r < replicas; ++r) acc += s_curve[r][k];
    out.mean_Vsq[k] = acc / replicas;
  }
  out.identity_residual.assign(n_steps + 1, 0.0);
  out.se_identity.assign(n_steps + 1, 0.0);
  const double dt = grid.dt();
  std::vector<double> integral(replicas, 0.0), func(replicas);
  for (int k = 0; k <= n_steps; ++k) {
    for (int r = 0; r < replicas; ++r) {
      func[r] = v_curve[r][k] - v_curve[r][0] + 4.0 * integral[r];
      integral[r] += s_curve[r][k] * dt;
    }
    double mean = 0.0;
    mean_and_se(func, mean, out.se_identity[k]);
    out.identity_residual[k] = std::abs(mean);
  }
  return out;
}

StatePreparationResult state_preparation(const UGrid& ugrid,
                                         const TimeGrid& grid, int replicas,
                                         std::uint64_t seed, int n_threads) {
  ugrid.validate();
  grid.validate();
  if (replicas < 1)
    throw Error(ErrorCode::InvalidArgument, "need replicas >= 1");
  const FilterModel model = two_level_model();
  const Matrix A = two_level_coupling();
  const Graphon w = Graphon::product();
  const Matrix rho0 = 0.5 * identity(2);
  const Matrix ground = rho_ground();
  const int M = ugrid.M;
  const int n_steps = grid.n_steps;

  const LabelControlLaw law = LabelControlLaw::state_prep();
  const MeanFieldPath mean =
      solve_graphon_lindblad(model, A, w, ugrid, grid, {rho0}, law);

  std::vector<std::vector<double>> fid_sum(M);
  parallel_for(
      M,
      [&](int m) {
        FilterModel coupled = model;
        coupled.extra_hamiltonian =
            mean_coupling_hamiltonian(ugrid.label(m), mean, A, w);
        const double u = ugrid.label(m);
        const ControlLaw bound_law = [&law, u](double t, const Matrix& rho) {
          return law(t, u, rho);
        };
        std::vector<double>& acc = fid_sum[m];
        acc.assign(n_steps + 1, 0.0);
        for (int r = 0; r < replicas; ++r) {
          const NoisePath noise = generate_noise(
              1, grid, seed, derive_path_index(static_cast<std::uint64_t>(m), r));
          const FilterResult run =
              simulate_filter(coupled, rho0, grid, noise, bound_law);
          for (int k = 0; k <= n_steps; ++k)
            acc[k] += fidelity(run.traj.states[k], ground);
        }
      },
      n_threads);

  StatePreparationResult out;
  out.grid = grid;
  out.labels = ugrid.labels();
  out.mean_fidelity.assign(n_steps + 1, std::vector<double>(M, 0.0));
  for (int k = 0; k <= n_steps; ++k)
    for (int m = 0; m < M; ++m)
      out.mean_fidelity[k][m] = fid_sum[m][k] / replicas;

  out.lower_set_curve.assign(n_steps + 1, 0.0);
  out.upper_set_curve.assign(n_steps + 1, 0.0);
  int n_lower = 0, n_upper = 0;
  for (int m = 0; m < M; ++m) (ugrid.label(m) < 0.5 ? n_lower : n_upper)++;
  if (n_lower == 0 || n_upper == 0)
    throw Error(ErrorCode::InvalidArgument,
                "label grid must populate both target sets");
  for (int k = 0; k <= n_steps; ++k) {
    double lo = 0.0, hi = 0.0;
    for (int m = 0; m < M; ++m) {
      if (ugrid.label(m) < 0.5)
        lo += out.mean_fidelity[k][m];
      else
        hi += out.mean_fidelity[k][m];
    }
    out.lower_set_curve[k] = lo / n_lower;
    out.upper_set_curve[k] = hi / n_upper;
  }
  out.lower_set_final = out.lower_set_curve[n_steps];
  out.upper_set_final = out.upper_set_curve[n_steps];
  out.clip_events = law.clip_events();
  return out;
}

CostResult cost_eval(const FilterModel& model, const Matrix& A,
                     const Graphon& w, const LabelControlLaw& control,
                     const RunningCost& running, const TerminalCost& terminal,
                     const UGrid& ugrid, const TimeGrid& grid,
                     const std::vector<Matrix>& rho0s, int replicas,
                     std::uint64_t seed, int n_threads) {
  model.validate();
  ugrid.validate();
  grid.validate();
  if (!running || !terminal)
    throw Error(ErrorCode::InvalidArgument, "cost functions must be set");
  if (replicas < 1)
    throw Error(ErrorCode::InvalidArgument, "need replicas >= 1");
  const int M = ugrid.M;
  const int n_steps = grid.n_steps;
  const double dt = grid.dt();
  const std::vector<Matrix> init = broadcast_initials(rho0s, M);
  for (const Matrix& r : init) check_density(r);

  const MeanFieldPath mean =
      solve_graphon_lindblad(model, A, w, ugrid, grid, init, control);

  // Aggregate states: kernel-weighted quadrature of the mean path.
  std::vector<std::vector<Matrix>> aggregate(
      M, std::vector<Matrix>(n_steps + 1));
  for (int m = 0; m < M; ++m) {
    for (int k = 0; k <= n_steps; ++k) {
      Matrix g = Matrix::Zero(model.dim(), model.dim());
      for (int v = 0; v < M; ++v)
        g += w.eval(ugrid.label(m), ugrid.label(v)) * mean.at(k, v);
      aggregate[m][k] = g * ugrid.weight();
    }
  }

  std::vector<double> j_mean(M, 0.0), j_se(M, 0.0);
  parallel_for(
      M,
      [&](int m) {
        FilterModel coupled = model;
        coupled.extra_hamiltonian =
            mean_coupling_hamiltonian(ugrid.label(m), mean, A, w);
        const double u = ugrid.label(m);
        ControlLaw bound_law;
        if (!control.is_zero())
          bound_law = [&control, u](double t, const Matrix& rho) {
            return control(t, u, rho);
          };
        std::vector<double> costs(replicas, 0.0);
        for (int r = 0; r < replicas; ++r) {
          const NoisePath noise = generate_noise(
              1, grid, seed, derive_path_index(static_cast<std::uint64_t>(m), r));
          const FilterResult run =
              simulate_filter(coupled, init[m], grid, noise, bound_law);
          double j = 0.0;
          for (int k = 0; k < n_steps; ++k)
            j += running(run.alpha[k], run.traj.states[k], aggregate[m][k]) * dt;
          j += terminal(run.traj.states[n_steps], aggregate[m][n_steps]);
          costs[r] = j;
        }
        mean_and_se(costs, j_mean[m], j_se[m]);
      },
      n_threads);

  CostResult out;
  out.labels = ugrid.labels();
  out.J = std::move(j_mean);
  out.se = std::move(j_se);
  return out;
}

std::vector<GraphonConvergencePoint> graphon_convergence_table(
    const Graphon& w, const std::vector<int>& n_list, int samples,
    std::uint64_t seed) {
  if (n_list.empty() || samples < 1)
    throw Error(ErrorCode::InvalidArgument,
                "need graph sizes and a sample count");
  std::vector<GraphonConvergencePoint> out;
  out.reserve(n_list.size());
  for (int n : n_list) {
    const StepKernel target =
        w.kind() == Graphon::Kind::Block ? w.step() : w.discretize(n);
    GraphonConvergencePoint pt;
    pt.n = n;
    std::vector<double> dists(samples, 0.0);
    for (int s = 0; s < samples; ++s) {
      const AdjacencyWeights adj = sample_bernoulli(
          w, n, derive_path_index(seed, static_cast<std::uint64_t>(n) * 1000003ULL + s));
      const NormResult dist =
          cut_distance(step_from_adjacency(adj), target, kNormExactCap,
                       /*allow_approximate=*/true, seed);
      dists[s] = dist.value;
      pt.exact = pt.exact && !dist.approximate;
    }
    mean_and_se(dists, pt.mean_distance, pt.std_err);
    out.push_back(pt);
  }
  return out;
}

}  // namespace gbqf
