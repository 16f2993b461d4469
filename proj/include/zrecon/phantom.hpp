#pragma once

#include "zrecon/forward.hpp"
#include "zrecon/io.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace zrecon {

/// One projected solid. Coordinates are in cm on the detector plane, y pointing down.
///  rect:     [x0, x1) x [y0, y1), path length `depth` along the beam
///  disc:     sphere of `radius` centred at (cx, cy); optional concentric hollow of `inner_radius`
///  cylinder: upright cylinder of `radius` on axis x = cx spanning [y0, y1)
struct Primitive {
  std::string shape;
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  double cx = 0, cy = 0, radius = 0, inner_radius = 0;
  Material material;
  double density = 1.0;  // g/cm^3
  double depth = 0.0;    // cm, rect only
  std::string label;     // object name for summaries; empty for background structure

  /// Path length (cm) through the solid along the beam at detector point (x, y).
  double chord(double x, double y) const;
};

struct Scene {
  double width = 0;   // cm
  double height = 0;  // cm
  double pitch = 0.5; // cm per pixel
  std::vector<Primitive> primitives;

  std::size_t nx() const;
  std::size_t ny() const;
  void validate() const;
  std::vector<std::string> labels() const;
};

Scene scene_from_json(const Json& j);
Json scene_to_json(const Scene& s);
Scene read_scene(const std::filesystem::path& file);
void write_scene(const std::filesystem::path& file, const Scene& s);

Scene cargo_phantom(double pitch = 0.5);
Scene shielded_phantom(double pitch = 0.5);
Scene builtin_phantom(const std::string& name, double pitch = 0.5);

/// Per-pixel materials and area densities crossed by the beam.
struct PathLengthMap {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<Material> materials;
  std::vector<std::vector<std::pair<int, double>>> pixels;  // (material index, g/cm^2), material-index order

  std::vector<Layer> layers(std::size_t pixel) const;
  double total_lambda(std::size_t pixel) const;
};

PathLengthMap compute_path_lengths(const Scene& scene);

/// Index into scene.labels() of the last labelled primitive covering each pixel, or -1.
std::vector<int> object_mask(const Scene& scene);

/// Noiseless render. The image PlaneSet holds alpha_h, alpha_l, sigma_h, sigma_l and mask;
/// pixels whose total area density exceeds lambda_max are masked out.
struct Rendered {
  PlaneSet image;
  PathLengthMap paths;
};

Rendered render_ideal(const Scene& scene, const ForwardModel& fm, double lambda_max = 300.0, int threads = 1);

inline constexpr double kSigmaFloor = 1e-3;

/// Default per-pixel uncertainty max(fraction * alpha, 1e-3).
double default_sigma(double alpha, double fraction = 0.1);

/// Resamples each valid alpha from Normal(alpha, fraction * alpha), clamped at 0;
/// sigma planes become max(fraction * alpha_noiseless, 1e-3). Deterministic per seed.
PlaneSet apply_noise(const PlaneSet& image, double fraction, std::uint64_t seed);

/// Nearest-neighbour upsampling of every plane by an integer factor.
PlaneSet upsample(const PlaneSet& image, std::size_t factor);
/// Nearest-neighbour resampling to an arbitrary size.
PlaneSet resample(const PlaneSet& image, std::size_t width, std::size_t height);

/// Builds an image PlaneSet with default sigma and an all-valid mask.
PlaneSet make_image(std::size_t width, std::size_t height, std::vector<double> alpha_h, std::vector<double> alpha_l);

}  // namespace zrecon
