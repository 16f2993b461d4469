#pragma once

#include "zrecon/io.hpp"
#include "zrecon/phantom.hpp"

#include <string>
#include <vector>

namespace zrecon {

/// Object map of a scene: plane "object" holds the index into meta "labels", or -1.
PlaneSet object_planes(const Scene& scene);

/// Per-object averages over the pixels of each labelled object.
struct ObjectSummary {
  std::string label;
  std::size_t pixels = 0;
  double truth_z_low = 0.0;       // mean ground-truth low solution
  double truth_z_high = 0.0;      // mean over ground-truth degenerate pixels (NaN if none)
  double truth_degenerate = 0.0;  // fraction of pixels with two ground-truth solutions
  double z_low = 0.0;             // mean reconstructed (or ensemble-median) low Z
  double z_low_sigma = 0.0;       // mean ensemble std, or pixel spread for a single reconstruction
  double z_high = 0.0;            // mean over pixels reporting a high solution (NaN if none)
  double z_high_sigma = 0.0;
  double degenerate = 0.0;        // fraction of degenerate pixels (mean degenerate_fraction for ensembles)
  bool within_sigma = false;      // |z_low - truth_z_low| <= z_low_sigma
};

/// `result` is either a reconstruction (z_low, z_high planes) or an ensemble
/// (z_low_median, z_low_std, z_high_median, z_high_std, degenerate_fraction).
std::vector<ObjectSummary> summarize_objects(const PlaneSet& objects, const PlaneSet& truth, const PlaneSet& result);
Json summary_to_json(const std::vector<ObjectSummary>& rows);

}  // namespace zrecon
