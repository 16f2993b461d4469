#pragma once

#include "zrecon/forward.hpp"
#include "zrecon/xsec.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <memory>
#include <string>

#include <unistd.h>

#ifndef ZRECON_TEST_DATA
#error "ZRECON_TEST_DATA must point at the cross-section directory"
#endif

namespace zt {

inline std::shared_ptr<const zrecon::CrossSectionLibrary> library() {
  static const auto lib =
      std::make_shared<const zrecon::CrossSectionLibrary>(zrecon::CrossSectionLibrary::load(ZRECON_TEST_DATA));
  return lib;
}

inline const zrecon::ForwardModel& model() {
  static const zrecon::ForwardModel fm(library(), zrecon::make_beam_model(zrecon::BeamConfig{}, *library()),
                                       zrecon::BeamParams{});
  return fm;
}

inline std::shared_ptr<const zrecon::AttenuationLookup> lookup() {
  static const auto lut =
      std::make_shared<const zrecon::AttenuationLookup>(zrecon::AttenuationLookup::build(model(), 300.0, 0.5, 1));
  return lut;
}

/// Scratch directory removed on destruction.
struct TempDir {
  std::filesystem::path path;
  TempDir() {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("zrecon_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::filesystem::path operator/(const std::string& name) const { return path / name; }
};

inline double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace zt
