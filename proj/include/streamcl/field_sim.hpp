#pragma once

// Synthetic stand-in for a laser-wakefield field: a Gaussian wave packet with a
// high-frequency carrier that travels along z, one frame per simulation step.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "streamcl/volume.hpp"

namespace streamcl {

struct SimConfig {
  std::size_t grid_size = 16;
  std::size_t steps = 8;
  double amplitude = 1.0;
  double packet_center = 4.0;  // z position of the envelope peak at t = 0
  double velocity = 1.0;       // voxels per step
  double sigma_z = 2.0;
  double sigma_r = 4.0;
  double wavenumber = 2.0;  // radians per voxel
  double phase = 0.0;
  double noise_std = 0.01;
  std::uint64_t seed = 0;

  /// Throws ConfigError when any field is out of its domain.
  void validate() const;
};

/// One 3D scalar snapshot; values are stored z-fastest.
struct FieldFrame {
  std::uint32_t step_index = 0;
  Dims dims;
  std::vector<float> values;

  [[nodiscard]] float at(std::size_t x, std::size_t y, std::size_t z) const {
    return values[(x * dims.y + y) * dims.z + z];
  }
  /// Bitwise equality of indices, dims and every value.
  [[nodiscard]] bool identical(const FieldFrame& other) const;
};

/// Frame for step `t`. Throws OutOfRangeError when t >= config.steps.
FieldFrame generate_frame(const SimConfig& config, std::size_t t);

/// Standard normal draw keyed on (seed, step, voxel); independent of call order.
double counter_normal(std::uint64_t seed, std::uint64_t step, std::uint64_t voxel);

/// Converts a frame to doubles, dividing every value by `scale`.
Volume to_volume(const FieldFrame& frame, double scale = 1.0);

}  // namespace streamcl
