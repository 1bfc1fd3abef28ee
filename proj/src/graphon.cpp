#include "gbqf/graphon.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "gbqf/noise.hpp"

namespace gbqf {

namespace {

void require_unit_range(double u, const char* what) {
  if (!(u >= 0.0 && u <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument,
                std::string(what) + ": coordinate outside [0,1]");
  }
}

}  // namespace

int StepKernel::block_of(double u) const {
  require_unit_range(u, "step kernel");
  auto it = std::upper_bound(boundaries.begin(), boundaries.end(), u);
  int idx = static_cast<int>(it - boundaries.begin()) - 1;
  return std::min(std::max(idx, 0), block_count() - 1);
}

int StepKernel::block_of_grid(double u) const {
  require_unit_range(u, "step kernel");
  auto it = std::lower_bound(boundaries.begin(), boundaries.end(), u);
  int idx = static_cast<int>(it - boundaries.begin());
  return std::min(std::max(idx - 1, 0), block_count() - 1);
}

double StepKernel::value(double u, double v) const {
  return weights(block_of(u), block_of(v));
}

StepKernel StepKernel::uniform(const Eigen::MatrixXd& weights) {
  StepKernel k;
  const int n = static_cast<int>(weights.rows());
  k.boundaries.resize(n + 1);
  for (int i = 0; i <= n; ++i) k.boundaries[i] = static_cast<double>(i) / n;
  k.weights = weights;
  return k;
}

StepKernel StepKernel::constant(double c) {
  StepKernel k;
  k.boundaries = {0.0, 1.0};
  k.weights = Eigen::MatrixXd::Constant(1, 1, c);
  return k;
}

void validate_step_kernel(const StepKernel& k, bool strict) {
  const int n = k.block_count();
  if (n < 1 || k.weights.cols() != n) {
    throw Error(ErrorCode::InvalidArgument, "step kernel: weights not square");
  }
  if (static_cast<int>(k.boundaries.size()) != n + 1) {
    throw Error(ErrorCode::InvalidArgument,
                "step kernel: boundary count must be blocks + 1");
  }
  if (std::abs(k.boundaries.front()) > 1e-12 ||
      std::abs(k.boundaries.back() - 1.0) > 1e-12) {
    throw Error(ErrorCode::InvalidArgument,
                "step kernel: boundaries must span [0,1]");
  }
  for (int i = 0; i < n; ++i) {
    if (!(k.boundaries[i + 1] > k.boundaries[i])) {
      throw Error(ErrorCode::InvalidArgument,
                  "step kernel: boundaries must be strictly increasing");
    }
  }
  const double lo = strict ? 0.0 : -2.0;
  const double hi = strict ? 1.0 : 2.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (std::abs(k.weights(i, j) - k.weights(j, i)) > 1e-12) {
        throw Error(ErrorCode::InvalidArgument, "step kernel: not symmetric");
      }
      if (k.weights(i, j) < lo - 1e-12 || k.weights(i, j) > hi + 1e-12) {
        throw Error(ErrorCode::InvalidArgument,
                    "step kernel: weight outside allowed range");
      }
    }
  }
}

Graphon Graphon::constant(double c) {
  if (!(c >= 0.0 && c <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "graphon: constant outside [0,1]");
  }
  Graphon g;
  g.kind_ = Kind::Constant;
  g.c_ = c;
  return g;
}

Graphon Graphon::product() {
  Graphon g;
  g.kind_ = Kind::Product;
  return g;
}

Graphon Graphon::block(StepKernel k) {
  validate_step_kernel(k, true);
  if (k.weights.minCoeff() < -1e-12) {
    throw Error(ErrorCode::InvalidArgument, "graphon: block weights outside [0,1]");
  }
  Graphon g;
  g.kind_ = Kind::Block;
  g.step_ = std::move(k);
  return g;
}

Graphon Graphon::custom(const Eigen::MatrixXd& grid_values) {
  const int n = static_cast<int>(grid_values.rows());
  if (n < 1 || grid_values.cols() != n) {
    throw Error(ErrorCode::InvalidArgument, "graphon: grid must be square");
  }
  if ((grid_values - grid_values.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw Error(ErrorCode::InvalidArgument, "graphon: grid must be symmetric");
  }
  if (grid_values.minCoeff() < -1e-12 || grid_values.maxCoeff() > 1.0 + 1e-12) {
    throw Error(ErrorCode::InvalidArgument, "graphon: grid values outside [0,1]");
  }
  Graphon g;
  g.kind_ = Kind::Custom;
  g.grid_ = grid_values;
  return g;
}

const StepKernel& Graphon::step() const {
  if (kind_ != Kind::Block) {
    throw Error(ErrorCode::InvalidArgument, "graphon: not a block kernel");
  }
  return step_;
}

double Graphon::eval(double u, double v) const {
  require_unit_range(u, "graphon");
  require_unit_range(v, "graphon");
  switch (kind_) {
    case Kind::Constant:
      return c_;
    case Kind::Product:
      return u * v;
    case Kind::Block:
      return step_.value(u, v);
    case Kind::Custom: {
      const int n = static_cast<int>(grid_.rows());
      auto coord = [n](double x) {
        double t = x * n - 0.5;  // samples live at cell midpoints
        return std::min(std::max(t, 0.0), static_cast<double>(n - 1));
      };
      const double x = coord(u), y = coord(v);
      const int i0 = std::min(static_cast<int>(x), n - 2 >= 0 ? n - 2 : 0);
      const int j0 = std::min(static_cast<int>(y), n - 2 >= 0 ? n - 2 : 0);
      if (n == 1) return grid_(0, 0);
      const double fx = x - i0, fy = y - j0;
      return grid_(i0, j0) * (1 - fx) * (1 - fy) +
             grid_(i0 + 1, j0) * fx * (1 - fy) +
             grid_(i0, j0 + 1) * (1 - fx) * fy +
             grid_(i0 + 1, j0 + 1) * fx * fy;
    }
  }
  return 0.0;
}

double Graphon::eval_grid_point(double u, double v) const {
  if (kind_ != Kind::Block) return eval(u, v);
  require_unit_range(u, "graphon");
  require_unit_range(v, "graphon");
  return step_.weights(step_.block_of_grid(u), step_.block_of_grid(v));
}

StepKernel Graphon::discretize(int n) const {
  if (n < 1) {
    throw Error(ErrorCode::InvalidArgument, "graphon: grid size must be >= 1");
  }
  Eigen::MatrixXd w(n, n);
  for (int p = 0; p < n; ++p) {
    const double up = (p + 0.5) / n;
    for (int q = 0; q < n; ++q) {
      w(p, q) = eval(up, (q + 0.5) / n);
    }
  }
  w = 0.5 * (w + w.transpose());  // guard against asymmetric rounding
  return StepKernel::uniform(w);
}

void validate_adjacency(const AdjacencyWeights& a) {
  if (a.n < 1 || a.xi.rows() != a.n || a.xi.cols() != a.n) {
    throw Error(ErrorCode::InvalidArgument, "adjacency: bad dimensions");
  }
  for (int p = 0; p < a.n; ++p) {
    if (std::abs(a.xi(p, p)) > 0.0) {
      throw Error(ErrorCode::InvalidArgument, "adjacency: nonzero diagonal");
    }
    for (int q = 0; q < a.n; ++q) {
      if (std::abs(a.xi(p, q) - a.xi(q, p)) > 1e-12) {
        throw Error(ErrorCode::InvalidArgument, "adjacency: not symmetric");
      }
    }
  }
}

StepKernel step_from_adjacency(const AdjacencyWeights& a) {
  validate_adjacency(a);
  return StepKernel::uniform(a.xi);
}

AdjacencyWeights deterministic_weights(const Graphon& w, int n) {
  if (n < 1) {
    throw Error(ErrorCode::InvalidArgument, "deterministic_weights: n >= 1");
  }
  AdjacencyWeights a;
  a.n = n;
  a.xi = Eigen::MatrixXd::Zero(n, n);
  for (int p = 1; p <= n; ++p) {
    for (int q = p + 1; q <= n; ++q) {
      const double v = w.eval_grid_point(static_cast<double>(p) / n,
                                         static_cast<double>(q) / n);
      a.xi(p - 1, q - 1) = v;
      a.xi(q - 1, p - 1) = v;
    }
  }
  return a;
}

AdjacencyWeights sample_bernoulli(const Graphon& w, int n, std::uint64_t seed) {
  if (n < 1) {
    throw Error(ErrorCode::InvalidArgument, "sample_bernoulli: n >= 1");
  }
  AdjacencyWeights a;
  a.n = n;
  a.xi = Eigen::MatrixXd::Zero(n, n);
  for (int p = 1; p <= n; ++p) {
    for (int q = p + 1; q <= n; ++q) {
      const double prob = w.eval_grid_point(static_cast<double>(p) / n,
                                            static_cast<double>(q) / n);
      const double u = counter_u01(seed, 0x67726170u, p, q);
      const double v = (u < prob) ? 1.0 : 0.0;
      a.xi(p - 1, q - 1) = v;
      a.xi(q - 1, p - 1) = v;
    }
  }
  return a;
}

double l1_norm(const StepKernel& k) {
  validate_step_kernel(k, false);
  const int n = k.block_count();
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      acc += k.block_length(i) * k.block_length(j) * std::abs(k.weights(i, j));
    }
  }
  return acc;
}

namespace {

// Shared state for the exact enumerations: q(i,j) = lambda_i lambda_j w_ij.
Eigen::MatrixXd weighted_cells(const StepKernel& k) {
  const int n = k.block_count();
  Eigen::MatrixXd q(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      q(i, j) = k.block_length(i) * k.block_length(j) * k.weights(i, j);
    }
  }
  return q;
}

double cut_value_for_rows(const Eigen::VectorXd& r) {
  double pos = 0.0, neg = 0.0;
  for (Eigen::Index j = 0; j < r.size(); ++j) {
    if (r(j) > 0.0) pos += r(j);
    else neg -= r(j);
  }
  return std::max(pos, neg);
}

// Exact cut norm by Gray-code enumeration of row subsets S; for fixed S the
// optimal column subset splits by sign of the column sums.
double cut_norm_exact(const Eigen::MatrixXd& q) {
  const int n = static_cast<int>(q.rows());
  Eigen::VectorXd r = Eigen::VectorXd::Zero(n);
  std::vector<char> in_set(n, 0);
  double best = 0.0;
  const std::uint32_t total = 1u << n;
  for (std::uint32_t m = 1; m < total; ++m) {
    const int b = std::countr_zero(m);
    const double sign = in_set[b] ? -1.0 : 1.0;
    in_set[b] ^= 1;
    r += sign * q.row(b).transpose();
    best = std::max(best, cut_value_for_rows(r));
  }
  return best;
}

double op_value_for_sums(const Eigen::VectorXd& g,
                         const std::vector<double>& lambda) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < g.size(); ++i) acc += lambda[i] * std::abs(g(i));
  return acc;
}

// Exact infinity->1 operator norm over sign vectors, Gray-code updates.
double op_norm_exact(const StepKernel& k) {
  const int n = k.block_count();
  std::vector<double> lambda(n);
  for (int i = 0; i < n; ++i) lambda[i] = k.block_length(i);
  Eigen::MatrixXd col(n, n);  // col(i,j) = lambda_j w_ij
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) col(i, j) = lambda[j] * k.weights(i, j);
  }
  Eigen::VectorXd g = -col.rowwise().sum();  // all signs start at -1
  std::vector<char> plus(n, 0);
  double best = op_value_for_sums(g, lambda);
  const std::uint32_t total = 1u << n;
  for (std::uint32_t m = 1; m < total; ++m) {
    const int b = std::countr_zero(m);
    const double delta = plus[b] ? -2.0 : 2.0;
    plus[b] ^= 1;
    g += delta * col.col(b);
    best = std::max(best, op_value_for_sums(g, lambda));
  }
  return best;
}

// Randomized local search over row subsets (cut) with greedy columns;
// returns a certified lower bound.
double cut_norm_search(const Eigen::MatrixXd& q, std::uint64_t seed) {
  const int n = static_cast<int>(q.rows());
  double best = 0.0;
  const int restarts = 64;
  for (int r0 = 0; r0 < restarts; ++r0) {
    std::vector<char> in_set(n);
    for (int i = 0; i < n; ++i) {
      in_set[i] = counter_u01(seed, 0x63757431u, r0, i) < 0.5 ? 1 : 0;
    }
    Eigen::VectorXd r = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) {
      if (in_set[i]) r += q.row(i).transpose();
    }
    double cur = cut_value_for_rows(r);
    bool improved = true;
    while (improved) {
      improved = false;
      for (int i = 0; i < n; ++i) {
        const double sign = in_set[i] ? -1.0 : 1.0;
        const Eigen::VectorXd cand = r + sign * q.row(i).transpose();
        const double val = cut_value_for_rows(cand);
        if (val > cur + 1e-15) {
          cur = val;
          r = cand;
          in_set[i] ^= 1;
          improved = true;
        }
      }
    }
    best = std::max(best, cur);
  }
  return best;
}

double op_norm_search(const StepKernel& k, std::uint64_t seed) {
  const int n = k.block_count();
  std::vector<double> lambda(n);
  for (int i = 0; i < n; ++i) lambda[i] = k.block_length(i);
  Eigen::MatrixXd col(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) col(i, j) = lambda[j] * k.weights(i, j);
  }
  double best = 0.0;
  const int restarts = 64;
  for (int r0 = 0; r0 < restarts; ++r0) {
    std::vector<double> s(n);
    for (int i = 0; i < n; ++i) {
      s[i] = counter_u01(seed, 0x6f706e31u, r0, i) < 0.5 ? -1.0 : 1.0;
    }
    Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
    for (int j = 0; j < n; ++j) g += s[j] * col.col(j);
    double cur = op_value_for_sums(g, lambda);
    bool improved = true;
    while (improved) {
      improved = false;
      for (int j = 0; j < n; ++j) {
        const Eigen::VectorXd cand = g - 2.0 * s[j] * col.col(j);
        const double val = op_value_for_sums(cand, lambda);
        if (val > cur + 1e-15) {
          cur = val;
          g = cand;
          s[j] = -s[j];
          improved = true;
        }
      }
    }
    best = std::max(best, cur);
  }
  return best;
}

// Enumerations use 32-bit subset masks; cap the exact path accordingly.
int effective_cap(int exact_cap) { return std::min(exact_cap, 30); }

void check_norm_cap(int n, int exact_cap, bool allow_approximate) {
  if (n > effective_cap(exact_cap) && !allow_approximate) {
    throw Error(ErrorCode::InvalidArgument,
                "norm: block count exceeds the exact enumeration cap");
  }
}

}  // namespace

NormResult cut_norm(const StepKernel& k, int exact_cap, bool allow_approximate,
                    std::uint64_t seed) {
  validate_step_kernel(k, false);
  const int n = k.block_count();
  check_norm_cap(n, exact_cap, allow_approximate);
  const Eigen::MatrixXd q = weighted_cells(k);
  if (n <= effective_cap(exact_cap)) return {cut_norm_exact(q), false};
  return {cut_norm_search(q, seed), true};
}

NormResult op_norm(const StepKernel& k, int exact_cap, bool allow_approximate,
                   std::uint64_t seed) {
  validate_step_kernel(k, false);
  const int n = k.block_count();
  check_norm_cap(n, exact_cap, allow_approximate);
  if (n <= effective_cap(exact_cap)) return {op_norm_exact(k), false};
  return {op_norm_search(k, seed), true};
}

StepKernel difference_kernel(const StepKernel& a, const StepKernel& b) {
  validate_step_kernel(a, false);
  validate_step_kernel(b, false);
  std::vector<double> merged = a.boundaries;
  merged.insert(merged.end(), b.boundaries.begin(), b.boundaries.end());
  std::sort(merged.begin(), merged.end());
  std::vector<double> bounds;
  for (double x : merged) {
    if (bounds.empty() || x - bounds.back() > 1e-12) bounds.push_back(x);
  }
  bounds.front() = 0.0;
  bounds.back() = 1.0;
  const int n = static_cast<int>(bounds.size()) - 1;
  Eigen::MatrixXd w(n, n);
  for (int i = 0; i < n; ++i) {
    const double u = 0.5 * (bounds[i] + bounds[i + 1]);
    for (int j = 0; j < n; ++j) {
      const double v = 0.5 * (bounds[j] + bounds[j + 1]);
      w(i, j) = a.value(u, v) - b.value(u, v);
    }
  }
  StepKernel out;
  out.boundaries = std::move(bounds);
  out.weights = std::move(w);
  return out;
}

NormResult cut_distance(const StepKernel& a, const StepKernel& b, int exact_cap,
                        bool allow_approximate, std::uint64_t seed) {
  return cut_norm(difference_kernel(a, b), exact_cap, allow_approximate, seed);
}

}  // namespace gbqf
