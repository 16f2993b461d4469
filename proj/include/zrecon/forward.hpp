#pragma once

#include "zrecon/beam.hpp"
#include "zrecon/xsec.hpp"

#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace zrecon {

/// Weights of the photoelectric, Compton and pair terms in the semiempirical coefficient.
struct CalibrationParams {
  double a = 1.0;
  double b = 1.0;
  double c = 1.0;

  void validate() const;
  friend bool operator==(const CalibrationParams&, const CalibrationParams&) = default;
};

struct BeamParams {
  CalibrationParams high;
  CalibrationParams low;
  const CalibrationParams& operator[](Beam b) const noexcept { return b == Beam::High ? high : low; }
  CalibrationParams& operator[](Beam b) noexcept { return b == Beam::High ? high : low; }
};

/// {"h": {"a":..,"b":..,"c":..}, "l": {...}}
BeamParams read_params_json(const std::filesystem::path& file);
void write_params_json(const std::filesystem::path& file, const BeamParams& p);
std::string params_to_json(const BeamParams& p);
BeamParams params_from_json(const std::string& text);

/// One homogeneous slab along the beam path.
struct Layer {
  Material material;
  double lambda = 0.0;  // g/cm^2
};

/// Log-transparency and its first two derivatives with respect to area density.
struct AlphaSample {
  double alpha = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
};

/// Below this transparency the measurement carries no usable signal.
inline constexpr double kSaturationTransparency = 1e-12;

/// Calibrated semiempirical log-transparency model for both beams.
class ForwardModel {
public:
  ForwardModel(std::shared_ptr<const CrossSectionLibrary> lib, BeamModel beam, BeamParams params);

  const CrossSectionLibrary& library() const noexcept { return *lib_; }
  std::shared_ptr<const CrossSectionLibrary> library_ptr() const noexcept { return lib_; }
  const BeamModel& beam() const noexcept { return beam_; }
  const BeamParams& params() const noexcept { return params_; }
  std::size_t bins() const noexcept { return beam_.grid().size(); }

  /// a mu_PE + b mu_CS + c mu_PP at an arbitrary energy.
  double mu_tilde(Beam b, double e_mev, double z) const;
  /// mu~ at every bin center; integer z is served from a cache.
  std::vector<double> mu_tilde_bins(Beam b, double z) const;
  std::span<const double> mu_tilde_bins(Beam b, int z) const;
  std::vector<double> mu_tilde_bins(Beam b, const Material& m) const;

  /// Normalized detector-weighted spectrum (sums to 1 over bins with signal).
  std::span<const double> weights(Beam b) const noexcept { return weights_[idx(b)]; }

  double alpha(Beam b, double lambda, double z) const { return alpha_derivs(b, lambda, z).alpha; }
  AlphaSample alpha_derivs(Beam b, double lambda, double z) const;
  double alpha_heterogeneous(Beam b, std::span<const Layer> layers) const;

  /// Model with each beam pre-attenuated by fixed layers. Its alpha is measured
  /// relative to the attenuated open beam; prefilter_alpha() holds the offset.
  ForwardModel with_prefilter(std::span<const Layer> layers) const;
  double prefilter_alpha(Beam b) const noexcept { return prefilter_alpha_[idx(b)]; }

  /// Hash over library, spectra, response, params and prefilter.
  std::uint64_t hash() const noexcept { return hash_; }

private:
  static std::size_t idx(Beam b) noexcept { return b == Beam::High ? 0 : 1; }
  void init();

  std::shared_ptr<const CrossSectionLibrary> lib_;
  BeamModel beam_;
  BeamParams params_;
  std::vector<double> weights_[2];
  std::vector<MuTriple> components_;  // [(z-1) * bins + i]
  std::vector<double> mu_int_[2];     // [(z-1) * bins + i]
  double prefilter_alpha_[2] = {0.0, 0.0};
  std::uint64_t hash_ = 0;
};

/// alpha, d1 and d2 for normalized weights and per-bin attenuation rates mu at area density lambda.
AlphaSample evaluate_alpha(std::span<const double> weights, std::span<const double> mu, double lambda);
/// alpha for a per-bin total exponent (sum of mu*lambda over layers).
double evaluate_alpha_exponent(std::span<const double> weights, std::span<const double> exponent);

/// Precomputed (lambda, Z) tables of alpha, d1 and d2 for both beams.
class AttenuationLookup {
public:
  static AttenuationLookup build(const ForwardModel& fm, double lambda_max, double lambda_step, int threads = 1);
  static AttenuationLookup load(const std::filesystem::path& file);
  void save(const std::filesystem::path& file) const;

  double lambda_max() const noexcept { return lambda_max_; }
  double lambda_step() const noexcept { return step_; }
  std::size_t lambda_count() const noexcept { return n_lambda_; }
  std::uint64_t model_hash() const noexcept { return model_hash_; }
  const BeamParams& params() const noexcept { return params_; }
  /// Content hash of the tables themselves.
  std::uint64_t hash() const noexcept { return table_hash_; }

  /// Piecewise quintic Hermite interpolation in lambda from the stored values and
  /// derivatives; d1 and d2 are the derivatives of that interpolant, so all three are
  /// mutually consistent and exact at grid points. Throws when lambda is outside [0, lambda_max].
  AlphaSample eval(Beam b, double lambda, int z) const;
  /// Unchecked variant used in inner loops; lambda must already be in range.
  AlphaSample eval_unchecked(Beam b, double lambda, int z) const noexcept {
    const AlphaSample* col = column(b, z);
    const double x = lambda * inv_step_;
    std::size_t i = static_cast<std::size_t>(x);
    if (i >= n_lambda_ - 1) i = n_lambda_ - 2;
    const double t = x - static_cast<double>(i);
    const AlphaSample& p = col[i];
    const AlphaSample& q = col[i + 1];
    const double h = step_, s = 1.0 - t;
    const double t2 = t * t, t3 = t2 * t, s2 = s * s, s3 = s2 * s;
    // Quintic Hermite basis written symmetrically in t and s = 1 - t.
    const double a0 = s3 * (1.0 + 3.0 * t + 6.0 * t2), a1 = s3 * t * (1.0 + 3.0 * t), a2 = 0.5 * s3 * t2;
    const double b0 = t3 * (1.0 + 3.0 * s + 6.0 * s2), b1 = -t3 * s * (1.0 + 3.0 * s), b2 = 0.5 * t3 * s2;
    const double alpha = a0 * p.alpha + h * a1 * p.d1 + h * h * a2 * p.d2 + b0 * q.alpha + h * b1 * q.d1 + h * h * b2 * q.d2;
    const double dq = q.alpha - p.alpha;
    // First and second derivatives of the same basis.
    const double e0 = 30.0 * t2 * s2;
    const double e1 = s2 * (1.0 + 2.0 * t - 15.0 * t2), e2 = 0.5 * t * s2 * (2.0 - 5.0 * t);
    const double e4 = t2 * (1.0 + 2.0 * s - 15.0 * s2), e5 = -0.5 * s * t2 * (2.0 - 5.0 * s);
    const double d1 = e0 * dq / h + e1 * p.d1 + h * e2 * p.d2 + e4 * q.d1 + h * e5 * q.d2;
    const double f0 = 60.0 * t * s * (s - t);
    const double f1 = -12.0 * t * s * (3.0 - 5.0 * t), f2 = s * (1.0 - 8.0 * t + 10.0 * t2);
    const double f4 = 12.0 * t * s * (3.0 - 5.0 * s), f5 = t * (1.0 - 8.0 * s + 10.0 * s2);
    const double d2 = f0 * dq / (h * h) + (f1 * p.d1 + f4 * q.d1) / h + f2 * p.d2 + f5 * q.d2;
    return {alpha, d1, d2};
  }
  const AlphaSample& at(Beam b, std::size_t lambda_index, int z) const { return column(b, z)[lambda_index]; }
  bool saturated(Beam b, std::size_t lambda_index, int z) const;
  std::size_t saturated_count() const noexcept;

private:
  const AlphaSample* column(Beam b, int z) const noexcept {
    return cells_[b == Beam::High ? 0 : 1].data() + static_cast<std::size_t>(z - 1) * n_lambda_;
  }
  void finalize();

  double lambda_max_ = 0.0;
  double step_ = 0.0;
  double inv_step_ = 0.0;
  std::size_t n_lambda_ = 0;
  std::uint64_t model_hash_ = 0;
  std::uint64_t table_hash_ = 0;
  BeamParams params_;
  std::vector<AlphaSample> cells_[2];           // [(z-1) * n_lambda + i]
  std::vector<std::uint8_t> saturated_[2];
};

/// Builds a lookup for a (possibly prefiltered) forward model; used by shield stripping.
using LookupBuilder = std::function<std::shared_ptr<const AttenuationLookup>(const ForwardModel&)>;

}  // namespace zrecon
