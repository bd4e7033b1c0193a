#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace streamcl {

struct Dims {
  std::uint32_t x = 0;
  std::uint32_t y = 0;
  std::uint32_t z = 0;

  [[nodiscard]] std::size_t count() const {
    return static_cast<std::size_t>(x) * y * z;
  }
  [[nodiscard]] static Dims cube(std::size_t side) {
    const auto s = static_cast<std::uint32_t>(side);
    return {s, s, s};
  }
  bool operator==(const Dims&) const = default;
};

/// Dense 3D array of doubles, z-fastest.
struct Volume {
  Dims dims;
  std::vector<double> values;

  Volume() = default;
  explicit Volume(Dims d, double fill = 0.0) : dims(d), values(d.count(), fill) {}

  [[nodiscard]] std::size_t index(std::size_t x, std::size_t y, std::size_t z) const {
    return (x * dims.y + y) * dims.z + z;
  }
  [[nodiscard]] double at(std::size_t x, std::size_t y, std::size_t z) const {
    return values[index(x, y, z)];
  }
  double& at(std::size_t x, std::size_t y, std::size_t z) { return values[index(x, y, z)]; }
};

}  // namespace streamcl
