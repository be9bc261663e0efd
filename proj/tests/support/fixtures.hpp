#pragma once

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "gbsg/error.hpp"
#include "gbsg/grading.hpp"
#include "gbsg/rng.hpp"
#include "gbsg/volume.hpp"

namespace fixture {

namespace fs = std::filesystem;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = fs::temp_directory_path() / ("gbsg-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline gbsg::Volume3D random_volume(gbsg::Dims d, gbsg::Rng& rng, bool integer = false, int levels = 4) {
  gbsg::Volume3D v(d, {1.0f, 1.0f, 1.0f});
  for (auto& x : v.data)
    x = integer ? static_cast<float>(rng.below(static_cast<std::uint64_t>(levels))) : static_cast<float>(rng.uniform());
  return v;
}

inline gbsg::LabelMap full_mask(gbsg::Dims d, std::uint32_t label = 1) {
  return gbsg::LabelMap(d, {1.0f, 1.0f, 1.0f}, label);
}

inline gbsg::grading::TrainingLibrary random_library(gbsg::Dims d, int templates, gbsg::Rng& rng, bool integer = false,
                                                     int levels = 4) {
  std::vector<gbsg::grading::TemplateEntry> e;
  for (int t = 0; t < templates; ++t)
    e.push_back({random_volume(d, rng, integer, levels), full_mask(d),
                 t % 2 ? gbsg::grading::Status::AD : gbsg::grading::Status::CN});
  return gbsg::grading::TrainingLibrary(std::move(e));
}

/// Low-frequency random field: a few random plane waves plus optional white noise.
inline gbsg::Volume3D smooth_volume(gbsg::Dims d, gbsg::Rng& rng, double noise = 0.0) {
  struct Wave {
    double kx, ky, kz, phase, amp;
  };
  std::vector<Wave> waves;
  for (int i = 0; i < 4; ++i)
    waves.push_back({rng.uniform() * 1.2, rng.uniform() * 1.2, rng.uniform() * 1.2, rng.uniform() * 6.283, 0.5 + rng.uniform()});
  gbsg::Volume3D v(d, {1.0f, 1.0f, 1.0f});
  for (std::uint32_t z = 0; z < d[2]; ++z)
    for (std::uint32_t y = 0; y < d[1]; ++y)
      for (std::uint32_t x = 0; x < d[0]; ++x) {
        double s = 0.0;
        for (const auto& w : waves) s += w.amp * std::sin(w.kx * x + w.ky * y + w.kz * z + w.phase);
        v.data[v.index(x, y, z)] = static_cast<float>(s + noise * rng.normal());
      }
  return v;
}

/// `src` translated by (dx, dy, dz) with edge clamping, plus white noise.
inline gbsg::Volume3D shifted(const gbsg::Volume3D& src, int dx, int dy, int dz, gbsg::Rng& rng, double noise) {
  gbsg::Volume3D v(src.dims, src.spacing);
  const auto clampi = [](int a, std::uint32_t n) { return std::clamp(a, 0, static_cast<int>(n) - 1); };
  for (std::uint32_t z = 0; z < v.dims[2]; ++z)
    for (std::uint32_t y = 0; y < v.dims[1]; ++y)
      for (std::uint32_t x = 0; x < v.dims[0]; ++x)
        v.data[v.index(x, y, z)] =
            src.data[src.index(clampi(static_cast<int>(x) - dx, v.dims[0]), clampi(static_cast<int>(y) - dy, v.dims[1]),
                               clampi(static_cast<int>(z) - dz, v.dims[2]))] +
            static_cast<float>(noise * rng.normal());
  return v;
}

}  // namespace fixture

#define CHECK_THROWS_CODE(expr, expected)                 \
  do {                                                    \
    bool caught_ = false;                                 \
    try {                                                 \
      (void)(expr);                                       \
    } catch (const gbsg::Error& e_) {                     \
      caught_ = true;                                     \
      CHECK_MESSAGE(e_.code() == (expected), e_.what());  \
    }                                                     \
    CHECK_MESSAGE(caught_, "no gbsg::Error thrown");      \
  } while (0)
