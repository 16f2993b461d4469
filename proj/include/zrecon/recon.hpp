#pragma once

#include "zrecon/forward.hpp"
#include "zrecon/io.hpp"
#include "zrecon/segment.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace zrecon {

/// One pixel's measurement in both beams.
struct PixelMeasurement {
  double alpha_h = 0.0;
  double alpha_l = 0.0;
  double sigma_h = 1.0;
  double sigma_l = 1.0;
};

/// Per-pixel output flags.
enum PixelFlag : std::uint8_t {
  kFlagCensored = 1,
  kFlagNotConverged = 2,
  kFlagDegenerate = 4,
  kFlagClamped = 8,
  kFlagSaturated = 16,
  kFlagNegativeAfterStrip = 32,
};

enum class SweepMode {
  WarmWithFallback,  // single warm-started step, full iteration when the next step exceeds warm_tol
  SingleStep,        // single warm-started step only
  Cold,              // full iteration from the thin-target guess at every Z
};

struct ReconOptions {
  int max_iterations = 50;
  double tolerance = 1e-6;  // g/cm^2
  int max_halvings = 10;
  double warm_tolerance = 1e-5;
  SweepMode mode = SweepMode::WarmWithFallback;
  int threads = 1;
  bool keep_sweep = false;  // retain per-Z sweep lambdas in SegmentSolution
  double dual_margin = 9.0; // a second chi2 minimum is reported only within this of the best
};

/// Standardized squared residuals summed over pixels and both beams.
double chi2(const AttenuationLookup& lut, std::span<const PixelMeasurement> px, std::span<const double> lambdas, int z);

struct NewtonResult {
  std::vector<double> lambda;
  std::vector<int> iterations;
  std::vector<std::uint8_t> flags;  // kFlagNotConverged, kFlagClamped
};

/// Independent per-pixel Newton iterations on lambda at fixed Z.
NewtonResult newton_lambda(const AttenuationLookup& lut, std::span<const PixelMeasurement> px, int z,
                           std::span<const double> lambda_init, const ReconOptions& opt = {});

/// Thin-target initial guess alpha_H / d1_H(0, Z).
double initial_lambda(const AttenuationLookup& lut, const PixelMeasurement& p, int z);

struct ZSolution {
  int z = 0;
  double chi2 = 0.0;
  std::vector<double> lambda;  // per pixel of the segment (0 for censored pixels)
  std::vector<std::uint8_t> flags;
};

struct SegmentSolution {
  std::vector<ZSolution> solutions;  // 1 or 2, ascending Z
  bool degenerate = false;
  bool censored = false;             // no usable pixel
  std::size_t pixels = 0;
  std::size_t valid_pixels = 0;
  std::size_t sweep_pairs = 0;       // (pixel, Z) pairs advanced by the warm sweep
  std::size_t single_step_pairs = 0; // pairs where one step met warm_tolerance
  std::vector<double> profile;       // chi2 for Z = 1..100
  std::vector<std::vector<double>> sweep_lambda;  // [z-1][pixel] (when requested)
};

/// Usable for chi2: finite, unsaturated, sigma > 0.
bool pixel_usable(const PixelMeasurement& p);

/// Sweeps Z = 1..100 on one pixel cluster and reports the best strict local minimum of
/// the chi2(Z) profile, plus the runner-up when its chi2 is within opt.dual_margin.
SegmentSolution solve_segment(const AttenuationLookup& lut, std::span<const PixelMeasurement> px,
                              const ReconOptions& opt = {});

struct ReconResult {
  SegmentLabelMap labels;
  std::vector<SegmentSolution> segments;
  PlaneSet planes;  // lambda, z_low, z_high, chi2, flags, segment
  Json report() const;
};

/// Measurements from an image PlaneSet; sigma planes default to max(0.1 alpha, 1e-3)
/// when absent, and masked pixels are marked unusable.
std::vector<PixelMeasurement> image_measurements(const PlaneSet& image);

/// Per-segment solve over the whole image. `include`, when non-empty, restricts the
/// solve to pixels with a nonzero entry; other pixels are reported as censored.
ReconResult reconstruct(const PlaneSet& image, const AttenuationLookup& lut, const SegmentLabelMap& labels,
                        const ReconOptions& opt = {}, std::span<const std::uint8_t> include = {});

struct ShieldEstimate {
  double lambda = 0.0;
  int z = 0;
};

struct StripResult {
  ShieldEstimate shield;
  SegmentSolution shield_solution;
  ReconResult object;
  double prefilter_alpha_h = 0.0;
  double prefilter_alpha_l = 0.0;
};

/// Two-pass reconstruction: estimate the shield on shield_region, then solve the object
/// region under a forward model pre-attenuated by that shield.
StripResult strip_shield_reconstruct(const PlaneSet& image, const LookupBuilder& builder, const ForwardModel& fm,
                                     const AttenuationLookup& lut, const SegmentLabelMap& labels,
                                     std::span<const std::uint8_t> object_region,
                                     std::span<const std::uint8_t> shield_region, const ReconOptions& opt = {});

/// Estimates the shield from its region alone (first pass).
ShieldEstimate estimate_shield(const PlaneSet& image, const AttenuationLookup& lut,
                               std::span<const std::uint8_t> shield_region, const ReconOptions& opt,
                               SegmentSolution* solution = nullptr);

struct EnsembleConfig {
  std::size_t runs = 100;
  std::uint64_t seed = 1;
  double noise_fraction = 0.1;
  int threads = 1;
};

/// Maps one noisy image to a reconstruction; ensemble workers call it concurrently.
using RunFunction = std::function<ReconResult(const PlaneSet& noisy)>;

/// Pixel-wise statistics over independent noisy realizations. Planes: z_low_median,
/// z_low_std, z_high_median, z_high_std, lambda_median, degenerate_fraction, valid_runs.
PlaneSet ensemble_stats(const PlaneSet& ideal, const EnsembleConfig& cfg, const RunFunction& run);

/// Standard per-run pipeline: segment, then reconstruct.
RunFunction segment_and_reconstruct(std::shared_ptr<const AttenuationLookup> lut, SegmentParams seg,
                                    ReconOptions opt);

/// Sub-seed of run r.
std::uint64_t run_seed(std::uint64_t seed, std::size_t run);

}  // namespace zrecon
