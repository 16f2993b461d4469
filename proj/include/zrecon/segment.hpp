#pragma once

#include "zrecon/io.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace zrecon {

struct SegmentParams {
  double sigma = 0.8;     // Gaussian pre-smoothing, pixels
  double k = 50.0;        // merge threshold in feature units
  std::size_t min_size = 16;
  double scale = 1000.0;  // alpha -> feature units
};

/// Dense labels 0..count-1; every segment is 4-connected.
struct SegmentLabelMap {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::int32_t> labels;
  std::size_t count = 0;

  std::vector<std::vector<std::size_t>> segments() const;
  PlaneSet to_planes() const;
  static SegmentLabelMap from_planes(const PlaneSet& ps);
  /// Relabels densely in first-pixel order and checks coverage.
  void normalize();
};

/// Graph-based segmentation on the 8-connected grid with edge weights given by the
/// Euclidean distance between smoothed (alpha_h, alpha_l) feature vectors.
SegmentLabelMap felzenszwalb_segment(std::size_t width, std::size_t height, std::span<const double> alpha_h,
                                     std::span<const double> alpha_l, const SegmentParams& params = {});
SegmentLabelMap felzenszwalb_segment(const PlaneSet& image, const SegmentParams& params = {});

/// Labels from an integer region map (e.g. object masks); -1 pixels are grouped into
/// their own 4-connected components as well.
SegmentLabelMap labels_from_regions(std::size_t width, std::size_t height, std::span<const int> regions);

}  // namespace zrecon
