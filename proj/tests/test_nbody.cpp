#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include "gbqf/errors.hpp"
#include "gbqf/filter.hpp"
#include "gbqf/graphon.hpp"
#include "gbqf/nbody.hpp"
#include "gbqf/noise.hpp"
#include "gbqf/qla.hpp"

using namespace gbqf;

namespace {

Matrix mkron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Vector vkron(const Vector& a, const Vector& b) {
  Vector out(a.size() * b.size());
  for (long long i = 0; i < a.size(); ++i)
    for (long long j = 0; j < b.size(); ++j) out(i * b.size() + j) = a(i) * b(j);
  return out;
}

Vector qubit(double theta, double phase = 0.0) {
  Vector v(2);
  v << cxd(std::cos(theta), 0.0), std::polar(std::sin(theta), phase);
  return v;
}

Matrix pure(const Vector& v) { return v * v.adjoint(); }

Matrix sx_symmetric() {
  Matrix m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}

Matrix hermitian_h() {
  Matrix m(2, 2);
  m << cxd(0.2, 0.0), cxd(0.5, -0.1), cxd(0.5, 0.1), cxd(-0.2, 0.0);
  return m;
}

Eigen::MatrixXd ones_off_diagonal(int n) {
  Eigen::MatrixXd xi = Eigen::MatrixXd::Ones(n, n);
  xi.diagonal().setZero();
  return xi;
}

BlockSystemConfig pair_config(const Matrix& A, InteractionNorm norm,
                              double eta = 1.0) {
  BlockSystemConfig cfg;
  cfg.c = 1;
  cfg.N = 2;
  cfg.model = make_particle_model(hermitian_h(), sigma_z(), eta);
  cfg.A = A;
  cfg.xi = ones_off_diagonal(2);
  cfg.norm = norm;
  return cfg;
}

Vector random_unit(std::uint64_t tag, int d) {
  Vector v(d);
  for (int i = 0; i < d; ++i)
    v(i) = cxd(counter_normal(91, tag, i, 0), counter_normal(91, tag, i, 1));
  return v / v.norm();
}

template <class Fn>
ErrorCode thrown_code(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected a gbqf::Error");
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("interaction normalization matches hand-built Hamiltonians") {
  const Matrix sz = sigma_z();
  const Matrix id2 = identity(2);
  const Matrix h = hermitian_h();
  const Matrix one_body = mkron(h, id2) + mkron(id2, h);

  SUBCASE("full ordered sum over 2cN, swap-symmetric interaction") {
    BlockSystemConfig cfg =
        pair_config(mkron(sz, sz), InteractionNorm::FullSum_Over2cN);
    const Matrix expected = one_body + 0.5 * mkron(sz, sz);
    CHECK((build_hamiltonian(cfg) - expected).norm() <= 1e-12);
  }

  SUBCASE("full ordered sum symmetrizes an asymmetric interaction") {
    BlockSystemConfig cfg =
        pair_config(mkron(sz, id2), InteractionNorm::FullSum_Over2cN);
    const Matrix expected =
        one_body + 0.25 * (mkron(sz, id2) + mkron(id2, sz));
    CHECK((build_hamiltonian(cfg) - expected).norm() <= 1e-12);
  }

  SUBCASE("unordered pair sum keeps the single ordered term") {
    BlockSystemConfig cfg =
        pair_config(mkron(sz, id2), InteractionNorm::PairSum_OverN);
    // Only (p, q) = (2, 1) survives: first factor on slot 2, second on slot 1.
    const Matrix expected = one_body + 0.5 * mkron(id2, sz);
    CHECK((build_hamiltonian(cfg) - expected).norm() <= 1e-12);
  }

  SUBCASE("class count enters the full-sum denominator") {
    BlockSystemConfig cfg;
    cfg.c = 2;
    cfg.N = 1;
    cfg.model = make_particle_model(h, sigma_z(), 1.0);
    cfg.A = mkron(sz, sz);
    cfg.xi = 0.7 * ones_off_diagonal(2);
    cfg.norm = InteractionNorm::FullSum_Over2cN;
    const Matrix expected = one_body + 0.35 * mkron(sz, sz);
    CHECK((build_hamiltonian(cfg) - expected).norm() <= 1e-12);
  }

  SUBCASE("weights scale their pair term") {
    BlockSystemConfig cfg =
        pair_config(mkron(sz, sz), InteractionNorm::FullSum_Over2cN);
    cfg.xi(0, 1) = cfg.xi(1, 0) = 0.25;
    const Matrix expected = one_body + 0.125 * mkron(sz, sz);
    CHECK((build_hamiltonian(cfg) - expected).norm() <= 1e-12);
  }
}

TEST_CASE("slot contractions agree with lifted dense operators") {
  const int n = 3;
  const long long dim = tensor_dim(2, n);
  const Vector psi = random_unit(7, static_cast<int>(dim));
  Matrix b(2, 2);
  b << cxd(0.3, 0.2), cxd(-1.1, 0.4), cxd(0.0, -0.7), cxd(0.9, 0.0);
  for (int slot = 1; slot <= n; ++slot) {
    const Vector direct = apply_single(b, psi, slot, n);
    const Vector lifted = lift(b, slot, n) * psi;
    CHECK((direct - lifted).norm() <= 1e-12);
  }
  Matrix two_body(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      two_body(i, j) = cxd(counter_normal(5, i, j, 0), counter_normal(5, i, j, 1));
  for (int p = 1; p <= n; ++p)
    for (int q = 1; q <= n; ++q) {
      if (p == q) continue;
      const Vector direct = apply_pair(two_body, psi, p, q, n);
      const Vector lifted = lift_pair(two_body, p, q, n) * psi;
      CHECK((direct - lifted).norm() <= 1e-12);
    }
}

TEST_CASE("counting projectors resolve the identity and count deviations") {
  const int c = 2, N = 2, n = c * N;
  const long long dim = tensor_dim(2, n);
  for (std::uint64_t rep = 0; rep < 5; ++rep) {
    std::vector<Matrix> gammas;
    for (int i = 0; i < c; ++i)
      gammas.push_back(pure(random_unit(10 * rep + i, 2)));

    for (int i = 1; i <= c; ++i) {
      Matrix sum = Matrix::Zero(dim, dim);
      std::vector<Matrix> projectors;
      for (int ni = 0; ni <= N; ++ni) {
        projectors.push_back(counting_projector(c, N, i, ni, gammas));
        sum += projectors.back();
      }
      CHECK((sum - Matrix::Identity(dim, dim)).norm() <= 1e-10);

      Matrix deviation_count = Matrix::Zero(dim, dim);
      for (int l = 1; l <= N; ++l)
        deviation_count +=
            lift(identity(2) - gammas[i - 1], (i - 1) * N + l, n);
      for (int ni = 0; ni <= N; ++ni) {
        CHECK((deviation_count * projectors[ni] - double(ni) * projectors[ni])
                  .norm() <= 1e-10);
        for (int mi = 0; mi < ni; ++mi)
          CHECK((projectors[ni] * projectors[mi]).norm() <= 1e-10);
      }
    }
  }
}

TEST_CASE("chaos functional takes exact values on reference products") {
  const Vector e0 = qubit(0.0);
  const Vector e1 = qubit(M_PI / 2.0);
  const Vector plus = qubit(M_PI / 4.0);
  const Vector minus = qubit(-M_PI / 4.0);
  const std::vector<Matrix> gammas = {pure(e0), pure(plus)};
  const auto affine = [](int k) { return 1.0 + 2.0 * k; };

  SUBCASE("two classes of two particles") {
    const Vector all_good = vkron(vkron(e0, e0), vkron(plus, plus));
    CHECK(chaos_functional(all_good, 2, 2, gammas, affine) ==
          doctest::Approx(1.0).epsilon(1e-12));
    CHECK(chaos_bound_via_D(all_good, 2, 2, gammas) <= 1e-12);

    const Vector one_flip = vkron(vkron(e0, e1), vkron(plus, plus));
    CHECK(chaos_functional(one_flip, 2, 2, gammas, affine) ==
          doctest::Approx(3.0).epsilon(1e-12));
    CHECK(chaos_bound_via_D(one_flip, 2, 2, gammas) ==
          doctest::Approx(0.25).epsilon(1e-12));

    const Vector two_flips = vkron(vkron(e0, e1), vkron(minus, plus));
    CHECK(chaos_functional(two_flips, 2, 2, gammas, affine) ==
          doctest::Approx(5.0).epsilon(1e-12));
  }

  SUBCASE("single particle per class") {
    const Vector mixed = vkron(e0, minus);
    CHECK(chaos_functional(mixed, 2, 1, gammas, affine) ==
          doctest::Approx(3.0).epsilon(1e-12));
    CHECK(chaos_bound_via_D(mixed, 2, 1, gammas) ==
          doctest::Approx(0.5).epsilon(1e-12));
  }

  SUBCASE("binomial deviation count on tilted products") {
    const double theta = 0.4;
    const Vector phi = qubit(theta);
    const Vector state = vkron(phi, phi);
    const std::vector<Matrix> g = {pure(e0)};
    const double s2 = std::sin(theta) * std::sin(theta);
    const auto count = [](int k) { return double(k); };
    CHECK(chaos_functional(state, 1, 2, g, count) ==
          doctest::Approx(2.0 * s2).epsilon(1e-12));
    CHECK(chaos_bound_via_D(state, 1, 2, g) ==
          doctest::Approx(s2).epsilon(1e-12));
  }
}

TEST_CASE("marginals and deviation distances") {
  SUBCASE("maximally entangled pair has flat marginals") {
    Vector bell(4);
    bell << 1, 0, 0, 1;
    bell /= std::sqrt(2.0);
    for (int l = 1; l <= 2; ++l) {
      const Matrix m = marginal(bell, 1, 2, 2, 1, l);
      CHECK((m - 0.5 * identity(2)).norm() <= 1e-12);
    }
  }

  SUBCASE("product states keep their factors, in slot order") {
    const Vector phi1 = qubit(0.3);
    const Vector phi2 = qubit(1.1, 0.7);
    const Vector state = vkron(phi1, phi2);
    CHECK((marginal(state, 1, 2, 2, 1, 1) - pure(phi1)).norm() <= 1e-12);
    CHECK((marginal(state, 1, 2, 2, 1, 2) - pure(phi2)).norm() <= 1e-12);
    CHECK((marginal(pure(state), 1, 2, 2, 1, 2) - pure(phi2)).norm() <= 1e-12);

    const Matrix gamma = pure(qubit(0.0));
    const double s1 = std::sin(0.3) * std::sin(0.3);
    CHECK(d_distance(state, 1, 2, 2, gamma, 1, 1) ==
          doctest::Approx(s1).epsilon(1e-12));
    CHECK(d_distance(state, 1, 2, 2, pure(phi2), 1, 2) <= 1e-12);
  }

  SUBCASE("particle index bounds") {
    Vector bell(4);
    bell << 1, 0, 0, 1;
    bell /= std::sqrt(2.0);
    CHECK(thrown_code([&] { marginal(bell, 1, 2, 2, 1, 3); }) ==
          ErrorCode::InvalidArgument);
    CHECK(thrown_code([&] { marginal(bell, 1, 2, 2, 2, 1); }) ==
          ErrorCode::InvalidArgument);
  }
}

TEST_CASE("permutations relabel tensor slots") {
  SUBCASE("explicit swap of a two-qubit vector") {
    Vector v(4);
    v << cxd(1, 0), cxd(2, 0), cxd(3, 0), cxd(4, 0);
    const Vector swapped = permutation_apply(v, 1, 2, 2, {{1, 0}});
    CHECK(swapped(0) == cxd(1, 0));
    CHECK(swapped(1) == cxd(3, 0));
    CHECK(swapped(2) == cxd(2, 0));
    CHECK(swapped(3) == cxd(4, 0));
    const Vector twice = permutation_apply(swapped, 1, 2, 2, {{1, 0}});
    CHECK((twice - v).norm() == 0.0);
  }

  SUBCASE("intertwines lifted one-slot operators") {
    const int c = 2, N = 2, n = 4;
    const std::vector<std::vector<int>> sigma = {{1, 0}, {0, 1}};
    const auto tau = [&](int slot) {  // 1-based global slot map
      const int i = (slot - 1) / N, l = (slot - 1) % N;
      return i * N + sigma[i][l] + 1;
    };
    const Vector psi = random_unit(21, static_cast<int>(tensor_dim(2, n)));
    Matrix b(2, 2);
    b << cxd(0.2, 0.4), cxd(1.0, -0.3), cxd(-0.8, 0.1), cxd(0.0, 0.9);
    for (int slot = 1; slot <= n; ++slot) {
      const Vector lhs =
          permutation_apply(apply_single(b, psi, slot, n), c, N, 2, sigma);
      const Vector rhs =
          apply_single(b, permutation_apply(psi, c, N, 2, sigma), tau(slot), n);
      CHECK((lhs - rhs).norm() <= 1e-12);
    }
    CHECK(std::abs(permutation_apply(psi, c, N, 2, sigma).norm() - 1.0) <=
          1e-12);
  }

  SUBCASE("rejects malformed permutations") {
    Vector v = Vector::Ones(4);
    CHECK(thrown_code([&] { permutation_apply(v, 1, 2, 2, {{0, 0}}); }) ==
          ErrorCode::InvalidArgument);
    CHECK(thrown_code([&] { permutation_apply(v, 1, 2, 2, {{0}}); }) ==
          ErrorCode::InvalidArgument);
    CHECK(thrown_code([&] { permutation_apply(v, 1, 2, 2, {}); }) ==
          ErrorCode::InvalidArgument);
  }
}

TEST_CASE("single-particle block system reduces to the pure-state filter") {
  BlockSystemConfig cfg;
  cfg.c = 1;
  cfg.N = 1;
  cfg.model = make_particle_model(hermitian_h(), sigma_z(), 1.0);
  cfg.A = Matrix::Zero(4, 4);
  cfg.xi = Eigen::MatrixXd::Zero(1, 1);

  TimeGrid grid{0.0, 0.4, 400};
  const NoisePath noise = generate_noise(1, grid, 2024, 0);
  const Vector psi0 = qubit(0.6, 0.2);

  const auto joint = simulate_nbody_sse(cfg, psi0, grid, noise);
  const auto single = simulate_sse(cfg.model, psi0, grid, noise);
  REQUIRE(joint.states.size() == single.states.size());
  double worst = 0.0;
  for (std::size_t k = 0; k < joint.states.size(); ++k)
    worst = std::max(worst, (joint.states[k] - single.states[k]).norm());
  CHECK(worst <= 1e-12);
}

TEST_CASE("uncoupled pairs factor into independent single-particle runs") {
  BlockSystemConfig cfg =
      pair_config(Matrix::Zero(4, 4), InteractionNorm::FullSum_Over2cN);
  const Vector phi1 = qubit(0.5);
  const Vector phi2 = qubit(1.0, 0.4);
  const Vector psi0 = vkron(phi1, phi2);

  TimeGrid fine{0.0, 0.3, 300};
  const int factors[] = {4, 2, 1};
  double mean_err[3] = {0.0, 0.0, 0.0};
  const int n_paths = 4;
  for (int path = 0; path < n_paths; ++path) {
    const NoisePath fine_noise = generate_noise(2, fine, 99, path);
    for (int lev = 0; lev < 3; ++lev) {
      const NoisePath w = coarsen(fine_noise, factors[lev]);
      const auto joint = simulate_nbody_sse(cfg, psi0, w.grid, w);
      const NoisePath w1 = noise_from_increments(w.grid, w.increments.col(0));
      const NoisePath w2 = noise_from_increments(w.grid, w.increments.col(1));
      const auto s1 = simulate_sse(cfg.model, phi1, w.grid, w1);
      const auto s2 = simulate_sse(cfg.model, phi2, w.grid, w2);
      const Vector product = vkron(s1.states.back(), s2.states.back());
      mean_err[lev] += (joint.states.back() - product).norm() / n_paths;
    }
  }
  CHECK(mean_err[2] <= 0.08);
  CHECK(mean_err[0] > mean_err[2]);
}

TEST_CASE("density and pure-state forms agree in the fine-step limit") {
  BlockSystemConfig cfg =
      pair_config(mkron(sigma_z(), sigma_z()), InteractionNorm::FullSum_Over2cN);
  const Vector psi0 = vkron(qubit(0.7), qubit(1.2, 0.3));
  const Matrix rho0 = pure(psi0);

  TimeGrid fine{0.0, 0.3, 600};
  const int factors[] = {4, 2, 1};
  double gap[3] = {0.0, 0.0, 0.0};
  const int n_paths = 3;
  for (int path = 0; path < n_paths; ++path) {
    const NoisePath fine_noise = generate_noise(2, fine, 314, path);
    for (int lev = 0; lev < 3; ++lev) {
      const NoisePath w = coarsen(fine_noise, factors[lev]);
      const auto sse = simulate_nbody_sse(cfg, psi0, w.grid, w);
      const auto dens = simulate_nbody_density(cfg, rho0, w.grid, w);
      gap[lev] +=
          (dens.states.back() - pure(sse.states.back())).norm() / n_paths;
    }
  }
  CHECK(gap[2] <= 0.1);
  CHECK(gap[0] / gap[1] >= 1.1);
  CHECK(gap[1] / gap[2] >= 1.1);
}

TEST_CASE("density trajectory reports observations consistent with states") {
  BlockSystemConfig cfg = pair_config(mkron(sigma_z(), sigma_z()),
                                      InteractionNorm::FullSum_Over2cN, 0.64);
  const Matrix rho0 = 0.25 * Matrix::Identity(4, 4);
  TimeGrid grid{0.0, 0.2, 200};
  const NoisePath noise = generate_noise(2, grid, 77, 3);
  const auto traj = simulate_nbody_density(cfg, rho0, grid, noise);

  REQUIRE(traj.states.size() == std::size_t(grid.n_steps + 1));
  REQUIRE(traj.dY.rows() == grid.n_steps);
  const double dt = grid.dt();
  double worst_obs = 0.0, worst_trace = 0.0, worst_herm = 0.0;
  for (int k = 0; k < grid.n_steps; ++k) {
    const Matrix& rho = traj.states[k];
    worst_trace = std::max(worst_trace, std::abs(rho.trace().real() - 1.0));
    worst_herm = std::max(worst_herm, (rho - Matrix(rho.adjoint())).norm());
    for (int q = 0; q < 2; ++q) {
      const Matrix lq = lift(cfg.model.L, q + 1, 2);
      const double m = (lq * rho + rho * lq.adjoint()).trace().real();
      worst_obs = std::max(
          worst_obs, std::abs(traj.dY(k, q) - noise.increments(k, q) -
                              0.8 * m * dt));
    }
  }
  CHECK(worst_obs <= 1e-12);
  CHECK(worst_trace <= 1e-12);
  CHECK(worst_herm <= 1e-12);
}

TEST_CASE("within-class relabeling of particles and drivers is a symmetry") {
  const int c = 2, N = 3, n = 6;
  BlockSystemConfig cfg;
  cfg.c = c;
  cfg.N = N;
  cfg.model = make_particle_model(hermitian_h(), sigma_z(), 1.0);
  cfg.A = mkron(sigma_z(), sigma_z()) + 0.25 * mkron(sigma_z(), identity(2));
  StepKernel two_block;
  two_block.boundaries = {0.0, 0.5, 1.0};
  two_block.weights.resize(2, 2);
  two_block.weights << 1.0, 0.5, 0.5, 1.0;
  cfg.xi = deterministic_weights(Graphon::block(two_block), n).xi;
  cfg.norm = InteractionNorm::FullSum_Over2cN;

  const std::vector<std::vector<int>> sigma = {{1, 2, 0}, {1, 0, 2}};
  const auto tau = [&](int slot0) {  // 0-based global slot map
    return (slot0 / N) * N + sigma[slot0 / N][slot0 % N];
  };

  const Vector phi_a = qubit(0.3);
  const Vector phi_b = qubit(1.1, 0.6);
  Vector psi0 = vkron(vkron(phi_a, phi_a), phi_a);
  psi0 = vkron(psi0, vkron(vkron(phi_b, phi_b), phi_b));

  TimeGrid grid{0.0, 0.25, 250};
  const NoisePath w = generate_noise(n, grid, 555, 0);
  Eigen::MatrixXd relabeled(grid.n_steps, n);
  for (int q = 0; q < n; ++q) relabeled.col(tau(q)) = w.increments.col(q);
  const NoisePath w2 = noise_from_increments(grid, relabeled);

  const auto base = simulate_nbody_sse(cfg, psi0, grid, w);
  const auto moved = simulate_nbody_sse(cfg, psi0, grid, w2);
  REQUIRE(base.states.size() == moved.states.size());
  for (std::size_t k = 0; k < base.states.size(); ++k) {
    const Vector mapped = permutation_apply(base.states[k], c, N, 2, sigma);
    CHECK((mapped - moved.states[k]).norm() <= 1e-8 * double(k + 1));
  }
}

TEST_CASE("configuration and guard violations are rejected") {
  const Matrix sz = sigma_z();
  BlockSystemConfig good =
      pair_config(mkron(sz, sz), InteractionNorm::FullSum_Over2cN);
  const Vector psi0 = vkron(qubit(0.2), qubit(0.9));
  TimeGrid grid{0.0, 0.1, 50};
  const NoisePath noise = generate_noise(2, grid, 1, 0);

  SUBCASE("coupling weight shape and symmetry") {
    BlockSystemConfig cfg = good;
    cfg.xi = Eigen::MatrixXd::Zero(3, 3);
    CHECK(thrown_code([&] { cfg.validate(); }) == ErrorCode::DimensionMismatch);
    cfg.xi = ones_off_diagonal(2);
    cfg.xi(0, 1) = 0.4;
    CHECK(thrown_code([&] { cfg.validate(); }) == ErrorCode::InvalidArgument);
    cfg.xi = Eigen::MatrixXd::Ones(2, 2);
    CHECK(thrown_code([&] { cfg.validate(); }) == ErrorCode::InvalidArgument);
  }

  SUBCASE("interaction operator shape and symmetry") {
    BlockSystemConfig cfg = good;
    cfg.A = Matrix::Zero(3, 3);
    CHECK(thrown_code([&] { cfg.validate(); }) == ErrorCode::DimensionMismatch);
    cfg.A = Matrix::Zero(4, 4);
    cfg.A(0, 1) = cxd(0.0, 1.0);
    CHECK(thrown_code([&] { cfg.validate(); }) == ErrorCode::InvalidArgument);
  }

  SUBCASE("pure-state form needs unit efficiency and unit states") {
    BlockSystemConfig cfg = good;
    cfg.model.eta = 0.7;
    CHECK(thrown_code([&] { simulate_nbody_sse(cfg, psi0, grid, noise); }) ==
          ErrorCode::InvalidArgument);
    CHECK(thrown_code([&] {
            simulate_nbody_sse(good, 2.0 * psi0, grid, noise);
          }) == ErrorCode::InvalidArgument);
    const NoisePath one = generate_noise(1, grid, 1, 0);
    CHECK(thrown_code([&] { simulate_nbody_sse(good, psi0, grid, one); }) ==
          ErrorCode::DimensionMismatch);
    TimeGrid other{0.0, 0.1, 60};
    CHECK(thrown_code([&] { simulate_nbody_sse(good, psi0, other, noise); }) ==
          ErrorCode::DimensionMismatch);
  }

  SUBCASE("density form dimension guard") {
    BlockSystemConfig cfg = good;
    cfg.N = 7;
    cfg.xi = ones_off_diagonal(7);
    const long long dim = tensor_dim(2, 7);
    const Matrix rho0 =
        Matrix::Identity(dim, dim) / static_cast<double>(dim);
    const NoisePath w7 = generate_noise(7, grid, 1, 0);
    CHECK(thrown_code([&] { simulate_nbody_density(cfg, rho0, grid, w7); }) ==
          ErrorCode::GuardViolation);
  }

  SUBCASE("counting operators: particle guard, memory cap, inputs") {
    const std::vector<Matrix> one_gamma = {pure(qubit(0.0))};
    CHECK(thrown_code([&] { counting_projector(1, 4, 1, 0, one_gamma); }) ==
          ErrorCode::GuardViolation);
    CHECK(thrown_code([&] { counting_projector(1, 2, 1, 3, one_gamma); }) ==
          ErrorCode::InvalidArgument);
    CHECK(thrown_code([&] { counting_projector(2, 2, 1, 0, one_gamma); }) ==
          ErrorCode::DimensionMismatch);
    const std::vector<Matrix> mixed = {0.5 * identity(2)};
    CHECK(thrown_code([&] { counting_projector(1, 2, 1, 0, mixed); }) ==
          ErrorCode::InvalidArgument);
    const std::vector<Matrix> five(5, pure(qubit(0.0)));
    CHECK(thrown_code([&] { counting_projector(5, 3, 1, 0, five); }) ==
          ErrorCode::MemoryCapExceeded);

    const Vector v = random_unit(3, 4);
    CHECK(thrown_code([&] {
            chaos_functional(v, 1, 2, one_gamma, nullptr);
          }) == ErrorCode::InvalidArgument);
    const Vector big = Vector::Zero(16);
    CHECK(thrown_code([&] {
            chaos_functional(big, 1, 4, one_gamma, [](int) { return 1.0; });
          }) == ErrorCode::GuardViolation);
  }

  SUBCASE("memory caps on dense and vector forms") {
    BlockSystemConfig cfg = good;
    cfg.N = 14;
    cfg.xi = Eigen::MatrixXd::Zero(14, 14);
    CHECK(thrown_code([&] { build_hamiltonian(cfg); }) ==
          ErrorCode::MemoryCapExceeded);
    cfg.N = 28;
    cfg.xi = Eigen::MatrixXd::Zero(28, 28);
    CHECK(thrown_code([&] { cfg.validate(); }) ==
          ErrorCode::MemoryCapExceeded);
  }

  SUBCASE("contraction argument checks") {
    const Vector psi = random_unit(4, 8);
    const Matrix b = sigma_z();
    CHECK(thrown_code([&] { apply_single(b, psi, 0, 3); }) ==
          ErrorCode::InvalidArgument);
    CHECK(thrown_code([&] { apply_single(b, psi, 4, 3); }) ==
          ErrorCode::InvalidArgument);
    const Matrix odd = Matrix::Zero(3, 3);
    CHECK(thrown_code([&] { apply_pair(odd, psi, 1, 2, 3); }) ==
          ErrorCode::DimensionMismatch);
    const Matrix two_body = Matrix::Zero(4, 4);
    CHECK(thrown_code([&] { apply_pair(two_body, psi, 2, 2, 3); }) ==
          ErrorCode::InvalidArgument);
    const Vector wrong = Vector::Zero(6);
    CHECK(thrown_code([&] { apply_pair(two_body, wrong, 1, 2, 3); }) ==
          ErrorCode::DimensionMismatch);
  }
}
