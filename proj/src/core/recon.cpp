#include "zrecon/recon.hpp"

#include "zrecon/error.hpp"
#include "zrecon/hash.hpp"
#include "zrecon/parallel.hpp"
#include "zrecon/phantom.hpp"
#include "zrecon/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace zrecon {

namespace {

const double kSaturatedAlpha = -std::log(kSaturationTransparency);
const double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Terms {
  double c;    // chi2 contribution
  double g;    // d chi2 / d lambda
  double h;    // d2 chi2 / d lambda2
  double hgn;  // Gauss-Newton curvature, always > 0
};

inline Terms pixel_terms(const AttenuationLookup& lut, const PixelMeasurement& p, double lambda, int z) {
  const AlphaSample a = lut.eval_unchecked(Beam::High, lambda, z);
  const AlphaSample b = lut.eval_unchecked(Beam::Low, lambda, z);
  const double wh = 1.0 / (p.sigma_h * p.sigma_h), wl = 1.0 / (p.sigma_l * p.sigma_l);
  const double rh = a.alpha - p.alpha_h, rl = b.alpha - p.alpha_l;
  Terms t;
  t.c = rh * rh * wh + rl * rl * wl;
  t.g = 2.0 * (rh * a.d1 * wh + rl * b.d1 * wl);
  t.hgn = 2.0 * (a.d1 * a.d1 * wh + b.d1 * b.d1 * wl);
  t.h = t.hgn + 2.0 * (rh * a.d2 * wh + rl * b.d2 * wl);
  return t;
}

struct PixelState {
  double lambda;
  Terms t;
};

inline double proposed_step(const PixelState& s) {
  const double h = s.t.h > 0.0 ? s.t.h : s.t.hgn;
  return h > 0.0 ? -s.t.g / h : 0.0;
}

// One safeguarded Newton step. Returns the distance actually moved.
inline double newton_step(const AttenuationLookup& lut, const PixelMeasurement& p, int z, PixelState& s,
                          const ReconOptions& opt) {
  const double lmax = lut.lambda_max();
  double step = proposed_step(s);
  if (step == 0.0) return 0.0;
  for (int h = 0; h <= opt.max_halvings; ++h, step *= 0.5) {
    const double next = std::clamp(s.lambda + step, 0.0, lmax);
    if (next == s.lambda) return 0.0;
    const Terms t = pixel_terms(lut, p, next, z);
    if (t.c <= s.t.c) {
      const double moved = std::abs(next - s.lambda);
      s.lambda = next;
      s.t = t;
      return moved;
    }
  }
  return 0.0;
}

// Iterates to convergence; returns iterations used, or -1 when the limit was hit.
inline int newton_full(const AttenuationLookup& lut, const PixelMeasurement& p, int z, PixelState& s,
                       const ReconOptions& opt) {
  for (int it = 1; it <= opt.max_iterations; ++it)
    if (newton_step(lut, p, z, s, opt) < opt.tolerance) return it;
  return -1;
}

std::uint8_t bound_flags(const AttenuationLookup& lut, double lambda) {
  return lambda >= lut.lambda_max() ? kFlagClamped : 0;
}

// feasible[i] is false where most pixels hit the table's lambda bound; those Z values
// cannot fit the data and act as ends of the range.
std::vector<int> choose_minima(const std::vector<double>& profile, const std::vector<bool>& feasible, double margin) {
  const int n = static_cast<int>(profile.size());
  std::vector<int> minima;
  const auto at = [&](int i) { return profile[static_cast<std::size_t>(i)]; };
  const auto ok = [&](int i) { return feasible[static_cast<std::size_t>(i)]; };
  // Interior strict minima; the ends of the feasible Z range only count as the global
  // minimum, since a profile still falling at an end has no minimum there.
  for (int i = 1; i + 1 < n; ++i)
    if (ok(i - 1) && ok(i) && ok(i + 1) && at(i) < at(i - 1) && at(i) < at(i + 1)) minima.push_back(i);
  int global = -1;
  for (int i = 0; i < n; ++i)
    if (ok(i) && (global < 0 || at(i) < at(global))) global = i;
  if (global < 0) global = static_cast<int>(std::min_element(profile.begin(), profile.end()) - profile.begin());
  if (std::find(minima.begin(), minima.end(), global) == minima.end()) minima.push_back(global);
  std::stable_sort(minima.begin(), minima.end(), [&](int a, int b) {
    return profile[static_cast<std::size_t>(a)] < profile[static_cast<std::size_t>(b)];
  });
  if (minima.size() > 2) minima.resize(2);
  if (minima.size() == 2 && profile[static_cast<std::size_t>(minima[1])] - profile[static_cast<std::size_t>(minima[0])] > margin)
    minima.resize(1);
  std::sort(minima.begin(), minima.end());
  return minima;
}

}  // namespace

bool pixel_usable(const PixelMeasurement& p) {
  return std::isfinite(p.alpha_h) && std::isfinite(p.alpha_l) && p.alpha_h >= 0.0 && p.alpha_l >= 0.0 &&
         p.alpha_h <= kSaturatedAlpha && p.alpha_l <= kSaturatedAlpha && p.sigma_h > 0.0 && p.sigma_l > 0.0 &&
         std::isfinite(p.sigma_h) && std::isfinite(p.sigma_l);
}

double chi2(const AttenuationLookup& lut, std::span<const PixelMeasurement> px, std::span<const double> lambdas,
            int z) {
  if (px.size() != lambdas.size()) fail_input("chi2: pixel and lambda counts differ");
  if (z < kMinZ || z > kMaxZ) fail_input("chi2: Z outside table");
  double sum = 0.0;
  for (std::size_t i = 0; i < px.size(); ++i) {
    if (!(px[i].sigma_h > 0.0 && px[i].sigma_l > 0.0)) fail_input("chi2: sigma must be > 0");
    if (!(lambdas[i] >= 0.0 && lambdas[i] <= lut.lambda_max())) fail_input("chi2: area density out of table");
    sum += pixel_terms(lut, px[i], lambdas[i], z).c;
  }
  return sum;
}

double initial_lambda(const AttenuationLookup& lut, const PixelMeasurement& p, int z) {
  const double d1 = lut.at(Beam::High, 0, z).d1;
  return std::clamp(p.alpha_h / d1, 0.0, lut.lambda_max());
}

NewtonResult newton_lambda(const AttenuationLookup& lut, std::span<const PixelMeasurement> px, int z,
                           std::span<const double> lambda_init, const ReconOptions& opt) {
  if (px.size() != lambda_init.size()) fail_input("newton: pixel and lambda counts differ");
  if (z < kMinZ || z > kMaxZ) fail_input("newton: Z outside table");
  NewtonResult r;
  r.lambda.resize(px.size());
  r.iterations.resize(px.size());
  r.flags.assign(px.size(), 0);
  for (std::size_t i = 0; i < px.size(); ++i) {
    if (!(lambda_init[i] >= 0.0 && lambda_init[i] <= lut.lambda_max())) fail_input("newton: initial lambda out of table");
    PixelState s{lambda_init[i], pixel_terms(lut, px[i], lambda_init[i], z)};
    const int it = newton_full(lut, px[i], z, s, opt);
    r.lambda[i] = s.lambda;
    r.iterations[i] = it < 0 ? opt.max_iterations : it - 1;
    if (it < 0) r.flags[i] |= kFlagNotConverged;
    r.flags[i] |= bound_flags(lut, s.lambda);
  }
  return r;
}

SegmentSolution solve_segment(const AttenuationLookup& lut, std::span<const PixelMeasurement> all,
                              const ReconOptions& opt) {
  SegmentSolution out;
  out.pixels = all.size();
  if (all.empty()) fail_input("solve_segment: empty segment");
  std::vector<std::size_t> valid;
  for (std::size_t i = 0; i < all.size(); ++i)
    if (pixel_usable(all[i])) valid.push_back(i);
  out.valid_pixels = valid.size();
  if (valid.empty()) {
    out.censored = true;
    return out;
  }
  std::vector<PixelMeasurement> px(valid.size());
  for (std::size_t k = 0; k < valid.size(); ++k) px[k] = all[valid[k]];
  const std::size_t n = px.size();

  std::vector<PixelState> st(n);
  std::vector<double> before(n, 0.0);  // lambda at Z - 2
  // Thin-target slope ratios rescale the previous lambda to the next Z.
  std::vector<double> ratio(kMaxZ + 1, 1.0);
  for (int z = kMinZ + 1; z <= kMaxZ; ++z) ratio[static_cast<std::size_t>(z)] = lut.at(Beam::High, 0, z - 1).d1 / lut.at(Beam::High, 0, z).d1;
  out.profile.assign(kMaxZ, 0.0);
  std::vector<bool> feasible(kMaxZ, true);
  if (opt.keep_sweep) out.sweep_lambda.assign(kMaxZ, std::vector<double>(all.size(), 0.0));
  for (int z = kMinZ; z <= kMaxZ; ++z) {
    double total = 0.0;
    std::size_t clamped = 0;
    for (std::size_t k = 0; k < n; ++k) {
      PixelState& s = st[k];
      if (z == kMinZ || opt.mode == SweepMode::Cold) {
        const double l0 = initial_lambda(lut, px[k], z);
        before[k] = s.lambda;
        s = {l0, pixel_terms(lut, px[k], l0, z)};
        newton_full(lut, px[k], z, s, opt);
      } else {
        // Warm start: previous lambda, rescaled and extrapolated along the sweep.
        const double prev = s.lambda;
        double guess = prev * ratio[static_cast<std::size_t>(z)];
        if (z > kMinZ + 1) guess += prev - before[k] * ratio[static_cast<std::size_t>(z - 1)];
        before[k] = prev;
        s.lambda = std::clamp(guess, 0.0, lut.lambda_max());
        s.t = pixel_terms(lut, px[k], s.lambda, z);
        newton_step(lut, px[k], z, s, opt);
        ++out.sweep_pairs;
        if (opt.mode == SweepMode::WarmWithFallback) {
          const double next = std::abs(proposed_step(s));
          if (next <= opt.warm_tolerance)
            ++out.single_step_pairs;
          else
            newton_full(lut, px[k], z, s, opt);
        }
      }
      total += s.t.c;
      clamped += s.lambda >= lut.lambda_max();
      if (opt.keep_sweep) out.sweep_lambda[static_cast<std::size_t>(z - 1)][valid[k]] = s.lambda;
    }
    out.profile[static_cast<std::size_t>(z - 1)] = total;
    feasible[static_cast<std::size_t>(z - 1)] = 2 * clamped <= n;
  }

  for (int idx : choose_minima(out.profile, feasible, opt.dual_margin)) {
    const int z = idx + 1;
    ZSolution sol;
    sol.z = z;
    sol.lambda.assign(all.size(), 0.0);
    sol.flags.assign(all.size(), kFlagCensored);
    double c = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double l0 = initial_lambda(lut, px[k], z);
      PixelState s{l0, pixel_terms(lut, px[k], l0, z)};
      const int it = newton_full(lut, px[k], z, s, opt);
      sol.lambda[valid[k]] = s.lambda;
      sol.flags[valid[k]] = static_cast<std::uint8_t>((it < 0 ? kFlagNotConverged : 0) | bound_flags(lut, s.lambda));
      c += s.t.c;
    }
    sol.chi2 = c;
    out.solutions.push_back(std::move(sol));
  }
  out.degenerate = out.solutions.size() == 2;
  return out;
}

std::vector<PixelMeasurement> image_measurements(const PlaneSet& image) {
  const auto& ah = image.plane("alpha_h");
  const auto& al = image.plane("alpha_l");
  const bool has_sigma = image.has("sigma_h") && image.has("sigma_l");
  const bool has_mask = image.has("mask");
  std::vector<PixelMeasurement> px(ah.size());
  for (std::size_t i = 0; i < px.size(); ++i) {
    px[i].alpha_h = ah[i];
    px[i].alpha_l = al[i];
    px[i].sigma_h = has_sigma ? image.plane("sigma_h")[i] : default_sigma(ah[i]);
    px[i].sigma_l = has_sigma ? image.plane("sigma_l")[i] : default_sigma(al[i]);
    if (has_mask && image.plane("mask")[i] == 0.0) px[i].alpha_h = px[i].alpha_l = kNaN;
  }
  return px;
}

ReconResult reconstruct(const PlaneSet& image, const AttenuationLookup& lut, const SegmentLabelMap& labels,
                        const ReconOptions& opt, std::span<const std::uint8_t> include) {
  const std::size_t n = image.width * image.height;
  if (labels.width != image.width || labels.height != image.height || labels.labels.size() != n)
    fail_input("label map does not match the image");
  if (!include.empty() && include.size() != n) fail_input("pixel selection does not match the image");
  const auto px = image_measurements(image);

  ReconResult r;
  r.labels = labels;
  auto members = labels.segments();
  if (!include.empty())
    for (auto& m : members) std::erase_if(m, [&](std::size_t p) { return include[p] == 0; });
  r.segments.resize(members.size());
  ReconOptions inner = opt;
  inner.keep_sweep = false;
  parallel_for(members.size(), opt.threads, [&](std::size_t s) {
    if (members[s].empty()) {
      r.segments[s].censored = true;
      return;
    }
    std::vector<PixelMeasurement> seg(members[s].size());
    for (std::size_t k = 0; k < seg.size(); ++k) seg[k] = px[members[s][k]];
    r.segments[s] = solve_segment(lut, seg, inner);
  });

  std::vector<double> lam(n, kNaN), lam_hi(n, kNaN), zlo(n, kNaN), zhi(n, kNaN), c2(n, kNaN), flags(n, kFlagCensored),
      seg_plane(n);
  for (std::size_t i = 0; i < n; ++i) seg_plane[i] = labels.labels[i];
  for (std::size_t s = 0; s < members.size(); ++s) {
    const SegmentSolution& sol = r.segments[s];
    for (std::size_t k = 0; k < members[s].size(); ++k) {
      const std::size_t p = members[s][k];
      std::uint8_t f = 0;
      const bool saturated = std::isfinite(px[p].alpha_h) && (px[p].alpha_h > kSaturatedAlpha || px[p].alpha_l > kSaturatedAlpha);
      if (saturated) f |= kFlagSaturated;
      if (sol.censored || sol.solutions.empty() || (sol.solutions.front().flags[k] & kFlagCensored)) {
        flags[p] = f | kFlagCensored;
        continue;
      }
      const ZSolution& lo = sol.solutions.front();
      f |= lo.flags[k];
      lam[p] = lo.lambda[k];
      zlo[p] = lo.z;
      c2[p] = pixel_terms(lut, px[p], lo.lambda[k], lo.z).c;
      if (sol.degenerate) {
        f |= kFlagDegenerate;
        zhi[p] = sol.solutions.back().z;
        lam_hi[p] = sol.solutions.back().lambda[k];
      }
      flags[p] = f;
    }
  }
  r.planes.kind = "recon";
  r.planes.width = image.width;
  r.planes.height = image.height;
  r.planes.add("lambda", std::move(lam));
  r.planes.add("z_low", std::move(zlo));
  r.planes.add("z_high", std::move(zhi));
  r.planes.add("chi2", std::move(c2));
  r.planes.add("flags", std::move(flags));
  r.planes.add("lambda_high", std::move(lam_hi));
  r.planes.add("segment", std::move(seg_plane));
  r.planes.meta["lookup_hash"] = hash_hex(lut.hash());
  r.planes.meta["segments"] = members.size();
  return r;
}

Json ReconResult::report() const {
  Json segs = Json::array();
  for (std::size_t s = 0; s < segments.size(); ++s) {
    const SegmentSolution& sol = segments[s];
    Json j = {{"segment", s},
              {"pixels", sol.pixels},
              {"valid_pixels", sol.valid_pixels},
              {"censored", sol.censored},
              {"degenerate", sol.degenerate}};
    Json zs = Json::array();
    for (const auto& z : sol.solutions) {
      double sum = 0.0;
      std::size_t cnt = 0;
      for (std::size_t k = 0; k < z.lambda.size(); ++k)
        if (!(z.flags[k] & kFlagCensored)) {
          sum += z.lambda[k];
          ++cnt;
        }
      zs.push_back({{"z", z.z}, {"chi2", z.chi2}, {"lambda_mean", cnt ? sum / static_cast<double>(cnt) : 0.0}});
    }
    j["solutions"] = zs;
    segs.push_back(std::move(j));
  }
  return segs;
}

ShieldEstimate estimate_shield(const PlaneSet& image, const AttenuationLookup& lut,
                               std::span<const std::uint8_t> shield_region, const ReconOptions& opt,
                               SegmentSolution* solution) {
  const auto px = image_measurements(image);
  if (shield_region.size() != px.size()) fail_input("shield region does not match the image");
  std::vector<PixelMeasurement> seg;
  for (std::size_t i = 0; i < px.size(); ++i)
    if (shield_region[i]) seg.push_back(px[i]);
  if (seg.empty()) fail_input("shield region is empty");
  SegmentSolution sol = solve_segment(lut, seg, opt);
  if (sol.censored) fail_numeric("shield region has no usable pixels (saturated or masked)");
  // With two minima, the better fit describes the shield.
  const ZSolution* best = &sol.solutions.front();
  for (const auto& z : sol.solutions)
    if (z.chi2 < best->chi2) best = &z;
  ShieldEstimate est;
  est.z = best->z;
  double sum = 0.0;
  std::size_t cnt = 0;
  for (std::size_t k = 0; k < best->lambda.size(); ++k)
    if (!(best->flags[k] & kFlagCensored)) {
      sum += best->lambda[k];
      ++cnt;
    }
  est.lambda = sum / static_cast<double>(cnt);
  if (solution) *solution = std::move(sol);
  return est;
}

StripResult strip_shield_reconstruct(const PlaneSet& image, const LookupBuilder& builder, const ForwardModel& fm,
                                     const AttenuationLookup& lut, const SegmentLabelMap& labels,
                                     std::span<const std::uint8_t> object_region,
                                     std::span<const std::uint8_t> shield_region, const ReconOptions& opt) {
  const std::size_t n = image.width * image.height;
  if (object_region.size() != n || shield_region.size() != n) fail_input("regions do not match the image");
  for (std::size_t i = 0; i < n; ++i)
    if (object_region[i] && shield_region[i]) fail_input("object and shield regions overlap");
  StripResult r;
  r.shield = estimate_shield(image, lut, shield_region, opt, &r.shield_solution);
  if (r.shield.lambda == 0.0) {
    r.object = reconstruct(image, lut, labels, opt, object_region);
    return r;
  }
  const Layer shield{Material::element(r.shield.z), r.shield.lambda};
  const ForwardModel filtered = fm.with_prefilter(std::span(&shield, 1));
  const std::shared_ptr<const AttenuationLookup> lut2 = builder(filtered);
  r.prefilter_alpha_h = filtered.prefilter_alpha(Beam::High);
  r.prefilter_alpha_l = filtered.prefilter_alpha(Beam::Low);

  PlaneSet stripped = image;
  auto& ah = stripped.plane("alpha_h");
  auto& al = stripped.plane("alpha_l");
  std::vector<std::uint8_t> negative(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!object_region[i]) continue;
    ah[i] -= r.prefilter_alpha_h;
    al[i] -= r.prefilter_alpha_l;
    if (ah[i] < 0.0 || al[i] < 0.0) negative[i] = 1;
    ah[i] = std::max(ah[i], 0.0);
    al[i] = std::max(al[i], 0.0);
  }
  r.object = reconstruct(stripped, *lut2, labels, opt, object_region);
  auto& flags = r.object.planes.plane("flags");
  for (std::size_t i = 0; i < n; ++i)
    if (negative[i]) flags[i] = static_cast<double>(static_cast<int>(flags[i]) | kFlagNegativeAfterStrip);
  r.object.planes.meta["shield_lambda"] = r.shield.lambda;
  r.object.planes.meta["shield_z"] = r.shield.z;
  return r;
}

std::uint64_t run_seed(std::uint64_t seed, std::size_t run) { return splitmix64(seed + run); }

RunFunction segment_and_reconstruct(std::shared_ptr<const AttenuationLookup> lut, SegmentParams seg,
                                    ReconOptions opt) {
  return [lut = std::move(lut), seg, opt](const PlaneSet& noisy) {
    return reconstruct(noisy, *lut, felzenszwalb_segment(noisy, seg), opt);
  };
}

PlaneSet ensemble_stats(const PlaneSet& ideal, const EnsembleConfig& cfg, const RunFunction& run) {
  if (cfg.runs == 0) fail_input("ensemble needs at least one run");
  const std::size_t n = ideal.width * ideal.height, runs = cfg.runs;
  std::vector<std::uint8_t> zlo(runs * n, 0), zhi(runs * n, 0);
  std::vector<float> lam(runs * n, 0.0f);
  std::vector<std::uint8_t> ok(runs, 0);
  parallel_for(runs, cfg.threads, [&](std::size_t r) {
    const PlaneSet noisy = apply_noise(ideal, cfg.noise_fraction, run_seed(cfg.seed, r));
    ReconResult res;
    try {
      res = run(noisy);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Numeric) throw;
      return;
    }
    const auto& lo = res.planes.plane("z_low");
    const auto& hi = res.planes.plane("z_high");
    const auto& l = res.planes.plane("lambda");
    for (std::size_t i = 0; i < n; ++i) {
      if (std::isnan(lo[i])) continue;
      zlo[r * n + i] = static_cast<std::uint8_t>(lo[i]);
      zhi[r * n + i] = std::isnan(hi[i]) ? 0 : static_cast<std::uint8_t>(hi[i]);
      lam[r * n + i] = static_cast<float>(l[i]);
    }
    ok[r] = 1;
  });

  auto median = [](std::vector<double>& v) {
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
  };
  auto stddev = [](const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
  };
  std::vector<double> lo_med(n, kNaN), lo_std(n, kNaN), hi_med(n, kNaN), hi_std(n, kNaN), l_med(n, kNaN),
      deg(n, kNaN), valid(n, 0.0);
  std::vector<double> a, b, c;
  for (std::size_t i = 0; i < n; ++i) {
    a.clear();
    b.clear();
    c.clear();
    for (std::size_t r = 0; r < runs; ++r) {
      if (!ok[r] || zlo[r * n + i] == 0) continue;
      a.push_back(zlo[r * n + i]);
      c.push_back(lam[r * n + i]);
      if (zhi[r * n + i]) b.push_back(zhi[r * n + i]);
    }
    valid[i] = static_cast<double>(a.size());
    if (a.empty()) continue;
    deg[i] = static_cast<double>(b.size()) / static_cast<double>(a.size());
    lo_std[i] = stddev(a);
    lo_med[i] = median(a);
    l_med[i] = median(c);
    if (!b.empty()) {
      hi_std[i] = stddev(b);
      hi_med[i] = median(b);
    }
  }
  PlaneSet out;
  out.kind = "ensemble";
  out.width = ideal.width;
  out.height = ideal.height;
  out.add("z_low_median", std::move(lo_med));
  out.add("z_low_std", std::move(lo_std));
  out.add("z_high_median", std::move(hi_med));
  out.add("z_high_std", std::move(hi_std));
  out.add("lambda_median", std::move(l_med));
  out.add("degenerate_fraction", std::move(deg));
  out.add("valid_runs", std::move(valid));
  out.meta["runs"] = runs;
  out.meta["failed_runs"] = static_cast<std::size_t>(std::count(ok.begin(), ok.end(), 0));
  out.meta["seed"] = cfg.seed;
  out.meta["noise_fraction"] = cfg.noise_fraction;
  return out;
}

}  // namespace zrecon
