#include "streamcl/field_sim.hpp"

#include <cmath>
#include <cstring>
#include <numbers>
#include <string>

#include "streamcl/errors.hpp"

namespace streamcl {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Uniform in (0, 1].
double unit_open(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
}

}  // namespace

void SimConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("invalid sim config: ") + what);
  };
  require(grid_size >= 2, "grid_size must be >= 2");
  require(steps >= 1, "steps must be >= 1");
  require(sigma_z > 0.0 && std::isfinite(sigma_z), "sigma_z must be > 0");
  require(sigma_r > 0.0 && std::isfinite(sigma_r), "sigma_r must be > 0");
  require(noise_std >= 0.0 && std::isfinite(noise_std), "noise_std must be >= 0");
  require(std::isfinite(amplitude) && std::isfinite(packet_center) && std::isfinite(velocity) &&
              std::isfinite(wavenumber) && std::isfinite(phase),
          "parameters must be finite");
}

bool FieldFrame::identical(const FieldFrame& other) const {
  return step_index == other.step_index && dims == other.dims &&
         values.size() == other.values.size() &&
         std::memcmp(values.data(), other.values.data(), values.size() * sizeof(float)) == 0;
}

double counter_normal(std::uint64_t seed, std::uint64_t step, std::uint64_t voxel) {
  const std::uint64_t key = splitmix64(seed ^ splitmix64(step ^ splitmix64(voxel)));
  const double u1 = unit_open(key);
  const double u2 = unit_open(splitmix64(key));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

FieldFrame generate_frame(const SimConfig& config, std::size_t t) {
  config.validate();
  if (t >= config.steps) {
    throw OutOfRangeError("step " + std::to_string(t) + " out of range (steps = " +
                          std::to_string(config.steps) + ")");
  }
  const std::size_t n = config.grid_size;
  FieldFrame frame;
  frame.step_index = static_cast<std::uint32_t>(t);
  frame.dims = Dims::cube(n);
  frame.values.resize(frame.dims.count());

  const double center = (static_cast<double>(n) - 1.0) / 2.0;
  const double zc = config.packet_center + config.velocity * static_cast<double>(t);
  const double inv_2sz2 = 1.0 / (2.0 * config.sigma_z * config.sigma_z);
  const double inv_2sr2 = 1.0 / (2.0 * config.sigma_r * config.sigma_r);

  std::vector<double> axial(n);
  for (std::size_t z = 0; z < n; ++z) {
    const double dz = static_cast<double>(z) - zc;
    axial[z] = config.amplitude * std::exp(-dz * dz * inv_2sz2) *
               std::sin(config.wavenumber * dz + config.phase);
  }

  std::size_t idx = 0;
  for (std::size_t x = 0; x < n; ++x) {
    const double dx = static_cast<double>(x) - center;
    for (std::size_t y = 0; y < n; ++y) {
      const double dy = static_cast<double>(y) - center;
      const double radial = std::exp(-(dx * dx + dy * dy) * inv_2sr2);
      for (std::size_t z = 0; z < n; ++z, ++idx) {
        double v = axial[z] * radial;
        if (config.noise_std > 0.0) {
          v += config.noise_std * counter_normal(config.seed, t, idx);
        }
        frame.values[idx] = static_cast<float>(v);
      }
    }
  }
  return frame;
}

Volume to_volume(const FieldFrame& frame, double scale) {
  Volume v(frame.dims);
  const double inv = 1.0 / scale;
  for (std::size_t i = 0; i < frame.values.size(); ++i) {
    v.values[i] = static_cast<double>(frame.values[i]) * inv;
  }
  return v;
}

}  // namespace streamcl
