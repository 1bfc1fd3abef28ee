#pragma once

// Reproducible driving noise: counter-based generation keyed by
// (master_seed, path_index, driver, step), so ensembles parallelize without
// shared generator state and results never depend on thread scheduling.

#include <Eigen/Dense>
#include <cstdint>

#include "gbqf/errors.hpp"

namespace gbqf {

struct TimeGrid {
  double t0 = 0.0;
  double t1 = 1.0;
  int n_steps = 2000;

  double dt() const { return (t1 - t0) / n_steps; }
  double time(int k) const { return t0 + k * dt(); }
  void validate() const {
    if (!(t1 > t0) || n_steps < 1) {
      throw Error(ErrorCode::InvalidArgument, "time grid: need t1 > t0, n_steps >= 1");
    }
  }
};

struct NoisePath {
  TimeGrid grid;
  int n_drivers = 0;
  Eigen::MatrixXd increments;  // n_steps x n_drivers, each ~ Normal(0, dt)
  std::uint64_t master_seed = 0;
  std::uint64_t path_index = 0;
};

// Stateless uniform/normal draws from a mixed 256-bit counter.
double counter_u01(std::uint64_t k0, std::uint64_t k1, std::uint64_t k2,
                   std::uint64_t k3);
double counter_normal(std::uint64_t k0, std::uint64_t k1, std::uint64_t k2,
                      std::uint64_t k3);

NoisePath generate_noise(int n_drivers, const TimeGrid& grid,
                         std::uint64_t master_seed, std::uint64_t path_index);
NoisePath zero_noise(int n_drivers, const TimeGrid& grid);
NoisePath noise_from_increments(const TimeGrid& grid,
                                const Eigen::MatrixXd& increments);

// Sum consecutive increments in groups of `factor`; preserves the driving
// path at the coarse times.
NoisePath coarsen(const NoisePath& noise, int factor);

// Stable combination of ensemble coordinates (label, replica, ...) into a
// path index.
std::uint64_t derive_path_index(std::uint64_t a, std::uint64_t b);

}  // namespace gbqf
