#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace gbsg {

using Dims = std::array<std::uint32_t, 3>;
using Spacing = std::array<float, 3>;

struct Index3 {
  int x = 0, y = 0, z = 0;
  friend bool operator==(const Index3&, const Index3&) = default;
};

/// Dense x-fastest 3D scalar field.
struct Volume3D {
  Dims dims{0, 0, 0};
  Spacing spacing{1.0f, 1.0f, 1.0f};
  std::vector<float> data;

  Volume3D() = default;
  Volume3D(Dims d, Spacing s, float fill = 0.0f)
      : dims(d), spacing(s), data(static_cast<std::size_t>(d[0]) * d[1] * d[2], fill) {}

  std::size_t size() const { return data.size(); }
  std::size_t index(int x, int y, int z) const {
    return static_cast<std::size_t>(x) + dims[0] * (static_cast<std::size_t>(y) + dims[1] * static_cast<std::size_t>(z));
  }
  float& at(int x, int y, int z) { return data[index(x, y, z)]; }
  float at(int x, int y, int z) const { return data[index(x, y, z)]; }
};

/// Structure identifiers aligned with a Volume3D; 0 is background.
/// Held as 32-bit in memory so out-of-range labels are caught on write.
struct LabelMap {
  Dims dims{0, 0, 0};
  Spacing spacing{1.0f, 1.0f, 1.0f};
  std::vector<std::uint32_t> labels;

  LabelMap() = default;
  LabelMap(Dims d, Spacing s, std::uint32_t fill = 0)
      : dims(d), spacing(s), labels(static_cast<std::size_t>(d[0]) * d[1] * d[2], fill) {}

  std::size_t size() const { return labels.size(); }
  std::size_t index(int x, int y, int z) const {
    return static_cast<std::size_t>(x) + dims[0] * (static_cast<std::size_t>(y) + dims[1] * static_cast<std::size_t>(z));
  }
  std::uint32_t& at(int x, int y, int z) { return labels[index(x, y, z)]; }
  std::uint32_t at(int x, int y, int z) const { return labels[index(x, y, z)]; }
};

inline Index3 unravel(const Dims& d, std::size_t linear) {
  const auto nx = static_cast<std::size_t>(d[0]);
  const auto ny = static_cast<std::size_t>(d[1]);
  return {static_cast<int>(linear % nx), static_cast<int>((linear / nx) % ny), static_cast<int>(linear / (nx * ny))};
}

}  // namespace gbsg
