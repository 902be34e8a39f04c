#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "upq/all.hpp"

namespace upq::test {

inline constexpr ClassId kRoad = 0;
inline constexpr ClassId kSidewalk = 1;
inline constexpr ClassId kSky = 10;
inline constexpr ClassId kPerson = 11;
inline constexpr ClassId kCar = 13;
inline constexpr ClassId kBus = 15;

inline PanopticLabel car(SegmentId id) { return PanopticLabel::thing(kCar, id); }

/// Paints the half-open rectangle [x0, x1) x [y0, y1).
template <typename T>
void paint(Raster<T>& r, int x0, int y0, int x1, int y1, T value) {
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) r(x, y) = value;
  }
}

template <typename T>
std::vector<T> values(const Raster<T>& r) {
  return {r.pixels().begin(), r.pixels().end()};
}

/// Unique scratch directory under the system temp dir, removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("upq_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// Random valid panoptic raster with a few stuff classes, car and bus
/// instances, unknown-instance and void pixels.
inline PanopticRaster random_raster(std::uint64_t seed, int w, int h) {
  synth::CounterRng rng(seed, 77);
  PanopticRaster r(w, h);
  for (std::size_t i = 0; i < r.size(); ++i) {
    const int k = rng.uniform_int(0, 9);
    if (k < 3) {
      r[i] = PanopticLabel::stuff(static_cast<ClassId>(k));
    } else if (k < 6) {
      r[i] = car(static_cast<SegmentId>(rng.uniform_int(1, 4)));
    } else if (k < 8) {
      r[i] = PanopticLabel::thing(kBus, static_cast<SegmentId>(rng.uniform_int(5, 6)));
    } else if (k == 8) {
      r[i] = PanopticLabel::unknown_instance(kCar);
    } else {
      r[i] = PanopticLabel::unknown();
    }
  }
  return r;
}

}  // namespace upq::test
