#pragma once

// Graphons, step kernels, graph sampling, and the cut / operator / L1 norms
// with exact subset enumeration for step kernels.

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "gbqf/errors.hpp"

namespace gbqf {

// Piecewise-constant symmetric kernel on [0,1]^2.  Blocks follow the
// left-closed convention [b_{i-1}, b_i) with the last block closed; grid
// points sampled at interval right-endpoints resolve boundary ties to the
// left block (right-closed membership).
struct StepKernel {
  std::vector<double> boundaries;  // 0 = b_0 < ... < b_k = 1
  Eigen::MatrixXd weights;         // k x k, symmetric

  int block_count() const { return static_cast<int>(weights.rows()); }
  double block_length(int i) const { return boundaries[i + 1] - boundaries[i]; }
  int block_of(double u) const;       // left-closed lookup
  int block_of_grid(double u) const;  // right-closed lookup, ties to the left
  double value(double u, double v) const;

  static StepKernel uniform(const Eigen::MatrixXd& weights);
  static StepKernel constant(double c);
};

// Kernels in [0,1] pass strict=true; signed difference kernels use
// strict=false (entries in [-2,2]).
void validate_step_kernel(const StepKernel& k, bool strict);

class Graphon {
 public:
  enum class Kind { Constant, Product, Block, Custom };

  static Graphon constant(double c);
  static Graphon product();  // w(u,v) = u*v
  static Graphon block(StepKernel k);
  // n x n samples at cell midpoints; evaluation is bilinear interpolation.
  static Graphon custom(const Eigen::MatrixXd& grid_values);

  double eval(double u, double v) const;
  // Same as eval except block kernels resolve exact boundary hits to the
  // left block; used when sampling adjacency weights at p/n grid points.
  double eval_grid_point(double u, double v) const;

  Kind kind() const { return kind_; }
  const StepKernel& step() const;
  // Restriction to a uniform n-grid as a step kernel (cell midpoints for
  // continuous forms, exact for aligned blocks).
  StepKernel discretize(int n) const;

 private:
  Graphon() = default;
  Kind kind_ = Kind::Constant;
  double c_ = 0.0;
  StepKernel step_;
  Eigen::MatrixXd grid_;
};

struct AdjacencyWeights {
  int n = 0;
  Eigen::MatrixXd xi;  // symmetric, zero diagonal
};

void validate_adjacency(const AdjacencyWeights& a);

// Step kernel on the uniform n-grid whose cells carry the adjacency entries.
StepKernel step_from_adjacency(const AdjacencyWeights& a);
// xi_pq = w(p/n, q/n) with zero diagonal.
AdjacencyWeights deterministic_weights(const Graphon& w, int n);
// Independent symmetric Bernoulli(w(p/n, q/n)) entries, zero diagonal.
AdjacencyWeights sample_bernoulli(const Graphon& w, int n, std::uint64_t seed);

struct NormResult {
  double value = 0.0;
  bool approximate = false;
};

inline constexpr int kNormExactCap = 22;

double l1_norm(const StepKernel& k);
// max over block-subset pairs (S,T) of |sum_{S x T} lambda_i lambda_j w_ij|;
// exact up to `exact_cap` blocks, then randomized +-1 local search (certified
// lower bound) when allow_approximate is set.
NormResult cut_norm(const StepKernel& k, int exact_cap = kNormExactCap,
                    bool allow_approximate = false, std::uint64_t seed = 1);
// max over sign vectors s of sum_i lambda_i |sum_j lambda_j w_ij s_j|.
NormResult op_norm(const StepKernel& k, int exact_cap = kNormExactCap,
                   bool allow_approximate = false, std::uint64_t seed = 1);
// Cut norm of a - b on the merged boundary grid.
NormResult cut_distance(const StepKernel& a, const StepKernel& b,
                        int exact_cap = kNormExactCap,
                        bool allow_approximate = false, std::uint64_t seed = 1);

// a - b on the merged boundary grid (signed kernel).
StepKernel difference_kernel(const StepKernel& a, const StepKernel& b);

}  // namespace gbqf
