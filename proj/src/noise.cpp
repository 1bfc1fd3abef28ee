#include "gbqf/noise.hpp"

#include <cmath>
#include <numbers>

namespace gbqf {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::uint64_t mix(std::uint64_t k0, std::uint64_t k1, std::uint64_t k2,
                  std::uint64_t k3) {
  std::uint64_t h = splitmix64(k0);
  h = splitmix64(h ^ k1);
  h = splitmix64(h ^ k2);
  h = splitmix64(h ^ k3);
  return h;
}

}  // namespace

double counter_u01(std::uint64_t k0, std::uint64_t k1, std::uint64_t k2,
                   std::uint64_t k3) {
  // 53-bit mantissa in [0, 1).
  return static_cast<double>(mix(k0, k1, k2, k3) >> 11) * 0x1.0p-53;
}

double counter_normal(std::uint64_t k0, std::uint64_t k1, std::uint64_t k2,
                      std::uint64_t k3) {
  // Box-Muller on two substreams; u1 shifted into (0, 1] so log stays finite.
  const std::uint64_t h1 = mix(k0, k1, k2, 2 * k3);
  const std::uint64_t h2 = mix(k0, k1, k2, 2 * k3 + 1);
  const double u1 = (static_cast<double>(h1 >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = static_cast<double>(h2 >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

NoisePath generate_noise(int n_drivers, const TimeGrid& grid,
                         std::uint64_t master_seed, std::uint64_t path_index) {
  grid.validate();
  if (n_drivers < 0) {
    throw Error(ErrorCode::InvalidArgument, "noise: negative driver count");
  }
  NoisePath p;
  p.grid = grid;
  p.n_drivers = n_drivers;
  p.master_seed = master_seed;
  p.path_index = path_index;
  p.increments.resize(grid.n_steps, n_drivers);
  const double scale = std::sqrt(grid.dt());
  for (int k = 0; k < grid.n_steps; ++k) {
    for (int j = 0; j < n_drivers; ++j) {
      p.increments(k, j) =
          scale * counter_normal(master_seed, path_index, j, k);
    }
  }
  return p;
}

NoisePath zero_noise(int n_drivers, const TimeGrid& grid) {
  grid.validate();
  NoisePath p;
  p.grid = grid;
  p.n_drivers = n_drivers;
  p.increments = Eigen::MatrixXd::Zero(grid.n_steps, n_drivers);
  return p;
}

NoisePath noise_from_increments(const TimeGrid& grid,
                                const Eigen::MatrixXd& increments) {
  grid.validate();
  if (increments.rows() != grid.n_steps) {
    throw Error(ErrorCode::DimensionMismatch,
                "noise: increment rows must equal n_steps");
  }
  NoisePath p;
  p.grid = grid;
  p.n_drivers = static_cast<int>(increments.cols());
  p.increments = increments;
  return p;
}

NoisePath coarsen(const NoisePath& noise, int factor) {
  if (factor < 1 || noise.grid.n_steps % factor != 0) {
    throw Error(ErrorCode::InvalidArgument,
                "coarsen: factor must divide the step count");
  }
  NoisePath p;
  p.grid = noise.grid;
  p.grid.n_steps = noise.grid.n_steps / factor;
  p.n_drivers = noise.n_drivers;
  p.master_seed = noise.master_seed;
  p.path_index = noise.path_index;
  p.increments = Eigen::MatrixXd::Zero(p.grid.n_steps, p.n_drivers);
  for (int k = 0; k < p.grid.n_steps; ++k) {
    for (int s = 0; s < factor; ++s) {
      p.increments.row(k) += noise.increments.row(k * factor + s);
    }
  }
  return p;
}

std::uint64_t derive_path_index(std::uint64_t a, std::uint64_t b) {
  return mix(0x70617468ull, a, b, 0);
}

}  // namespace gbqf
