#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "gbqf/errors.hpp"
#include "gbqf/graphon.hpp"
#include "gbqf/noise.hpp"

using namespace gbqf;

namespace {

StepKernel two_block(double a, double b, double c) {
  Eigen::MatrixXd w(2, 2);
  w << a, b, b, c;
  return StepKernel::uniform(w);
}

// Exhaustive cut norm: maximize |sum over S x T| over all block subsets.
double cut_norm_oracle(const StepKernel& k) {
  const int n = k.block_count();
  Eigen::MatrixXd q(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      q(i, j) = k.weights(i, j) * k.block_length(i) * k.block_length(j);
    }
  }
  double best = 0.0;
  for (unsigned s = 0; s < (1u << n); ++s) {
    for (unsigned t = 0; t < (1u << n); ++t) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) {
        if (!((s >> i) & 1)) continue;
        for (int j = 0; j < n; ++j) {
          if ((t >> j) & 1) acc += q(i, j);
        }
      }
      best = std::max(best, std::abs(acc));
    }
  }
  return best;
}

StepKernel random_signed_kernel(int blocks, std::uint64_t tag) {
  Eigen::MatrixXd a(blocks, blocks), b(blocks, blocks);
  for (int i = 0; i < blocks; ++i) {
    for (int j = i; j < blocks; ++j) {
      a(i, j) = a(j, i) = counter_u01(tag, 1, i, j);
      b(i, j) = b(j, i) = counter_u01(tag, 2, i, j);
    }
  }
  return difference_kernel(StepKernel::uniform(a), StepKernel::uniform(b));
}

}  // namespace

TEST_CASE("block lookup conventions") {
  const StepKernel k = two_block(1.0, 0.5, 0.25);
  // Left-closed blocks, last block closed on the right.
  CHECK(k.block_of(0.0) == 0);
  CHECK(k.block_of(0.49) == 0);
  CHECK(k.block_of(0.5) == 1);
  CHECK(k.block_of(1.0) == 1);
  // Grid-point lookup resolves boundary hits to the left block.
  CHECK(k.block_of_grid(0.25) == 0);
  CHECK(k.block_of_grid(0.5) == 0);
  CHECK(k.block_of_grid(0.75) == 1);
  CHECK(k.block_of_grid(1.0) == 1);
  CHECK(k.block_of_grid(0.0) == 0);

  CHECK(k.value(0.1, 0.9) == doctest::Approx(0.5));
  CHECK(k.value(0.9, 0.6) == doctest::Approx(0.25));
  CHECK(k.block_length(0) == doctest::Approx(0.5));
}

TEST_CASE("step kernel validation") {
  CHECK_NOTHROW(validate_step_kernel(two_block(1.0, 0.5, 0.0), true));
  Eigen::MatrixXd bad(2, 2);
  bad << 1.0, 1.5, 1.5, 1.0;
  CHECK_THROWS_AS(validate_step_kernel(StepKernel::uniform(bad), true), Error);
  Eigen::MatrixXd asym(2, 2);
  asym << 1.0, 0.2, 0.4, 1.0;
  CHECK_THROWS_AS(validate_step_kernel(StepKernel::uniform(asym), true),
                  Error);
  // Signed difference kernels are allowed in the lax mode only.
  Eigen::MatrixXd signd(2, 2);
  signd << -0.5, 0.5, 0.5, -0.5;
  CHECK_THROWS_AS(validate_step_kernel(StepKernel::uniform(signd), true),
                  Error);
  CHECK_NOTHROW(validate_step_kernel(StepKernel::uniform(signd), false));
}

TEST_CASE("graphon evaluation by kind") {
  CHECK(Graphon::constant(0.3).eval(0.1, 0.9) == doctest::Approx(0.3));
  CHECK(Graphon::product().eval(0.3, 0.5) == doctest::Approx(0.15));
  const Graphon b = Graphon::block(two_block(1.0, 0.5, 0.25));
  CHECK(b.eval(0.1, 0.9) == doctest::Approx(0.5));
  CHECK(b.eval_grid_point(0.5, 1.0) == doctest::Approx(0.5));
  CHECK(b.eval(0.5, 1.0) == doctest::Approx(0.25));

  Eigen::MatrixXd g(2, 2);
  g << 0.0, 0.0, 0.0, 1.0;
  const Graphon c = Graphon::custom(g);
  CHECK(c.eval(0.25, 0.25) == doctest::Approx(0.0));
  CHECK(c.eval(0.75, 0.75) == doctest::Approx(1.0));
  CHECK(c.eval(0.5, 0.5) == doctest::Approx(0.25));

  CHECK_THROWS_AS(Graphon::product().eval(-0.1, 0.5), Error);
  CHECK_THROWS_AS(Graphon::product().eval(0.1, 1.5), Error);
}

TEST_CASE("discretization of the product graphon uses cell midpoints") {
  const StepKernel k = Graphon::product().discretize(2);
  REQUIRE(k.block_count() == 2);
  CHECK(k.weights(0, 0) == doctest::Approx(0.0625));
  CHECK(k.weights(0, 1) == doctest::Approx(0.1875));
  CHECK(k.weights(1, 1) == doctest::Approx(0.5625));
  // Aligned block kernels discretize exactly.
  const StepKernel fine = Graphon::block(two_block(1.0, 0.5, 0.25)).discretize(4);
  CHECK(fine.weights(0, 0) == doctest::Approx(1.0));
  CHECK(fine.weights(1, 2) == doctest::Approx(0.5));
  CHECK(fine.weights(3, 3) == doctest::Approx(0.25));
}

TEST_CASE("deterministic adjacency weights on the grid") {
  const Graphon w = Graphon::block(two_block(1.0, 0.5, 1.0));
  const AdjacencyWeights a = deterministic_weights(w, 4);
  REQUIRE(a.n == 4);
  // Grid points p/4 with ties resolved left: {0.25, 0.5} -> block 0,
  // {0.75, 1.0} -> block 1.
  Eigen::MatrixXd expect(4, 4);
  expect << 0.0, 1.0, 0.5, 0.5,
            1.0, 0.0, 0.5, 0.5,
            0.5, 0.5, 0.0, 1.0,
            0.5, 0.5, 1.0, 0.0;
  CHECK((a.xi - expect).cwiseAbs().maxCoeff() <= 1e-14);

  const AdjacencyWeights p = deterministic_weights(Graphon::product(), 4);
  CHECK(p.xi(0, 1) == doctest::Approx(0.125));
  CHECK(p.xi(2, 3) == doctest::Approx(0.75));
  CHECK(p.xi(1, 1) == doctest::Approx(0.0));
  CHECK_NOTHROW(validate_adjacency(p));
}

TEST_CASE("bernoulli adjacency sampling") {
  const Graphon w = Graphon::constant(0.5);
  const AdjacencyWeights a = sample_bernoulli(w, 40, 99);
  const AdjacencyWeights b = sample_bernoulli(w, 40, 99);
  const AdjacencyWeights c = sample_bernoulli(w, 40, 100);
  CHECK((a.xi - b.xi).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.xi - c.xi).cwiseAbs().maxCoeff() > 0.0);
  double ones = 0.0, total = 0.0;
  for (int p = 0; p < 40; ++p) {
    CHECK(a.xi(p, p) == 0.0);
    for (int q = 0; q < 40; ++q) {
      if (p == q) continue;
      CHECK((a.xi(p, q) == 0.0 || a.xi(p, q) == 1.0));
      CHECK(a.xi(p, q) == a.xi(q, p));
      ones += a.xi(p, q);
      total += 1.0;
    }
  }
  CHECK(std::abs(ones / total - 0.5) <= 0.1);
}

TEST_CASE("step kernel from realized adjacency") {
  AdjacencyWeights a;
  a.n = 2;
  a.xi = Eigen::MatrixXd::Zero(2, 2);
  a.xi(0, 1) = a.xi(1, 0) = 1.0;
  const StepKernel k = step_from_adjacency(a);
  REQUIRE(k.block_count() == 2);
  CHECK(k.boundaries[1] == doctest::Approx(0.5));
  CHECK(k.weights(0, 0) == doctest::Approx(0.0));
  CHECK(k.weights(0, 1) == doctest::Approx(1.0));
}

TEST_CASE("l1 norm is the weighted absolute mass") {
  CHECK(l1_norm(two_block(1.0, 0.5, 1.0)) == doctest::Approx(0.75));
  CHECK(l1_norm(StepKernel::constant(0.25)) == doctest::Approx(0.25));
}

TEST_CASE("cut and operator norms on hand-checked kernels") {
  const NormResult c0 = cut_norm(StepKernel::constant(0.5));
  CHECK_FALSE(c0.approximate);
  CHECK(c0.value == doctest::Approx(0.5));

  // Centered two-block checkerboard: cut norm 1/8, operator norm 1/2.
  Eigen::MatrixXd f(2, 2);
  f << 0.5, -0.5, -0.5, 0.5;
  const StepKernel checker = StepKernel::uniform(f);
  const NormResult cut = cut_norm(checker);
  const NormResult op = op_norm(checker);
  CHECK_FALSE(cut.approximate);
  CHECK_FALSE(op.approximate);
  CHECK(cut.value == doctest::Approx(0.125));
  CHECK(op.value == doctest::Approx(0.5));
}

TEST_CASE("exact cut norm matches subset enumeration") {
  for (int t = 0; t < 25; ++t) {
    const int blocks = 2 + (t % 4);
    const StepKernel k = random_signed_kernel(blocks, 1000 + t);
    const NormResult got = cut_norm(k);
    REQUIRE_FALSE(got.approximate);
    CHECK(got.value == doctest::Approx(cut_norm_oracle(k)).epsilon(1e-12));
  }
}

TEST_CASE("norm sandwich on random difference kernels") {
  for (int t = 0; t < 40; ++t) {
    const StepKernel k = random_signed_kernel(2 + (t % 6), 2000 + t);
    const double cut = cut_norm(k).value;
    const double op = op_norm(k).value;
    CHECK(cut <= op + 1e-12);
    CHECK(op <= 4.0 * cut + 1e-12);
  }
}

TEST_CASE("cut distance basics") {
  const StepKernel a = two_block(1.0, 0.5, 0.25);
  CHECK(cut_distance(a, a).value == doctest::Approx(0.0));
  const StepKernel b = two_block(0.8, 0.5, 0.25);
  const NormResult d1 = cut_distance(a, b);
  const NormResult d2 = cut_distance(b, a);
  CHECK(d1.value == doctest::Approx(d2.value));
  // Only one quarter-cell differs by 0.2.
  CHECK(d1.value == doctest::Approx(0.05));

  // Misaligned boundaries refine correctly.
  StepKernel c;
  c.boundaries = {0.0, 0.3, 1.0};
  c.weights = Eigen::MatrixXd::Zero(2, 2);
  c.weights << 1.0, 0.0, 0.0, 1.0;
  const StepKernel diff = difference_kernel(a, c);
  CHECK(diff.block_count() == 3);
  CHECK(cut_norm(diff).value == doctest::Approx(cut_norm_oracle(diff)));
}

TEST_CASE("norms beyond the cap fall back to search") {
  const int blocks = 26;
  Eigen::MatrixXd w(blocks, blocks);
  for (int i = 0; i < blocks; ++i) {
    for (int j = i; j < blocks; ++j) {
      w(i, j) = w(j, i) = counter_u01(4242, 3, i, j);
    }
  }
  const StepKernel k = StepKernel::uniform(w);
  CHECK_THROWS_AS(cut_norm(k, kNormExactCap, false, 1), Error);
  const NormResult approx = cut_norm(k, kNormExactCap, true, 1);
  CHECK(approx.approximate);
  // Nonnegative kernel: the full rectangle attains the norm, and any search
  // result is sandwiched between zero and the total mass.
  CHECK(approx.value > 0.0);
  CHECK(approx.value <= l1_norm(k) + 1e-12);
}

TEST_CASE("sampled graphs drift toward the generating kernel") {
  const Graphon w = Graphon::block(two_block(0.9, 0.1, 0.9));
  const StepKernel limit = w.step();
  double d_small = 0.0, d_large = 0.0;
  for (int s = 0; s < 3; ++s) {
    d_small += cut_distance(step_from_adjacency(sample_bernoulli(w, 8, 7 + s)),
                            limit)
                   .value;
    d_large +=
        cut_distance(step_from_adjacency(sample_bernoulli(w, 20, 77 + s)),
                     limit, kNormExactCap, true, 5)
            .value;
  }
  CHECK(d_large / 3.0 < d_small / 3.0 + 0.05);
}
