#include "zrecon/summary.hpp"

#include "zrecon/error.hpp"

#include <cmath>
#include <limits>

namespace zrecon {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Mean {
  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  void add(double v) {
    if (!std::isfinite(v)) return;
    sum += v;
    sq += v * v;
    ++n;
  }
  double mean() const { return n ? sum / static_cast<double>(n) : kNaN; }
  double stddev() const {
    if (n < 2) return 0.0;
    const double m = mean();
    return std::sqrt(std::max(0.0, (sq - static_cast<double>(n) * m * m) / static_cast<double>(n - 1)));
  }
};

Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

}  // namespace

PlaneSet object_planes(const Scene& scene) {
  const auto mask = object_mask(scene);
  PlaneSet ps;
  ps.kind = "objects";
  ps.width = scene.nx();
  ps.height = scene.ny();
  ps.add("object", std::vector<double>(mask.begin(), mask.end()));
  ps.meta["labels"] = scene.labels();
  ps.meta["pixel_pitch_cm"] = scene.pitch;
  return ps;
}

std::vector<ObjectSummary> summarize_objects(const PlaneSet& objects, const PlaneSet& truth, const PlaneSet& result) {
  if (objects.width != truth.width || objects.height != truth.height || objects.width != result.width ||
      objects.height != result.height)
    fail_input("object summary: object map, ground truth and result differ in size");
  std::vector<std::string> labels;
  if (objects.meta.contains("labels")) labels = objects.meta["labels"].get<std::vector<std::string>>();
  const auto& obj = objects.plane("object");
  const auto& gt_lo = truth.plane("z_eff_low");
  const auto& gt_hi = truth.plane("z_eff_high");
  const bool ensemble = result.has("z_low_median");
  const auto& lo = result.plane(ensemble ? "z_low_median" : "z_low");
  const auto& hi = result.plane(ensemble ? "z_high_median" : "z_high");
  const std::vector<double>* lo_sd = ensemble ? &result.plane("z_low_std") : nullptr;
  const std::vector<double>* hi_sd = ensemble ? &result.plane("z_high_std") : nullptr;
  const std::vector<double>* deg = ensemble ? &result.plane("degenerate_fraction") : nullptr;

  std::vector<ObjectSummary> rows(labels.size());
  for (std::size_t o = 0; o < labels.size(); ++o) {
    Mean g_lo, g_hi, r_lo, r_hi, s_lo, s_hi, d;
    std::size_t n = 0, g_deg = 0;
    for (std::size_t i = 0; i < obj.size(); ++i) {
      if (obj[i] != static_cast<double>(o)) continue;
      ++n;
      g_lo.add(gt_lo[i]);
      if (std::isfinite(gt_hi[i])) {
        g_hi.add(gt_hi[i]);
        ++g_deg;
      }
      r_lo.add(lo[i]);
      r_hi.add(hi[i]);
      if (ensemble) {
        s_lo.add((*lo_sd)[i]);
        s_hi.add((*hi_sd)[i]);
        d.add((*deg)[i]);
      } else {
        d.add(std::isfinite(hi[i]) ? 1.0 : 0.0);
      }
    }
    ObjectSummary& r = rows[o];
    r.label = labels[o];
    r.pixels = n;
    r.truth_z_low = g_lo.mean();
    r.truth_z_high = g_hi.mean();
    r.truth_degenerate = n ? static_cast<double>(g_deg) / static_cast<double>(n) : 0.0;
    r.z_low = r_lo.mean();
    r.z_high = r_hi.mean();
    r.z_low_sigma = ensemble ? s_lo.mean() : r_lo.stddev();
    r.z_high_sigma = ensemble ? s_hi.mean() : r_hi.stddev();
    r.degenerate = d.n ? d.mean() : 0.0;
    r.within_sigma = std::abs(r.z_low - r.truth_z_low) <= r.z_low_sigma;
  }
  return rows;
}

Json summary_to_json(const std::vector<ObjectSummary>& rows) {
  Json out = Json::array();
  for (const auto& r : rows)
    out.push_back({{"label", r.label},
                   {"pixels", r.pixels},
                   {"truth_z_low", number_or_null(r.truth_z_low)},
                   {"truth_z_high", number_or_null(r.truth_z_high)},
                   {"truth_degenerate_fraction", r.truth_degenerate},
                   {"z_low", number_or_null(r.z_low)},
                   {"z_low_sigma", number_or_null(r.z_low_sigma)},
                   {"z_high", number_or_null(r.z_high)},
                   {"z_high_sigma", number_or_null(r.z_high_sigma)},
                   {"degenerate_fraction", r.degenerate},
                   {"within_sigma", r.within_sigma}});
  return out;
}

}  // namespace zrecon
