#pragma once

#include "zrecon/xsec.hpp"

#include <filesystem>
#include <span>
#include <vector>

namespace zrecon {

/// Contiguous energy bins described by their centers and widths (MeV).
class EnergyGrid {
public:
  EnergyGrid() = default;
  EnergyGrid(std::vector<double> centers, std::vector<double> widths);

  /// Uniform bins covering [e_min, e_max].
  static EnergyGrid uniform(double e_min, double e_max, double bin_width);
  /// The default 10 keV grid from 0.05 to 9 MeV.
  static EnergyGrid standard() { return uniform(0.05, 9.0, 0.01); }

  std::size_t size() const noexcept { return centers_.size(); }
  std::span<const double> centers() const noexcept { return centers_; }
  std::span<const double> widths() const noexcept { return widths_; }
  double lower_edge() const noexcept { return centers_.front() - 0.5 * widths_.front(); }
  double upper_edge() const noexcept { return centers_.back() + 0.5 * widths_.back(); }

  friend bool operator==(const EnergyGrid&, const EnergyGrid&) = default;

private:
  std::vector<double> centers_;
  std::vector<double> widths_;
};

/// Relative photons per bin. Bin widths are absorbed into the weights.
struct Spectrum {
  EnergyGrid grid;
  std::vector<double> weights;
  double endpoint = 0.0;

  void validate() const;
};

struct DetectorResponse {
  EnergyGrid grid;
  std::vector<double> response;

  void validate() const;
};

enum class Beam { High = 0, Low = 1 };

inline const char* beam_name(Beam b) { return b == Beam::High ? "h" : "l"; }

/// High and low energy spectra plus the detector response on one shared grid.
class BeamModel {
public:
  BeamModel(Spectrum high, Spectrum low, DetectorResponse response);

  const Spectrum& spectrum(Beam b) const noexcept { return b == Beam::High ? high_ : low_; }
  const DetectorResponse& response() const noexcept { return response_; }
  const EnergyGrid& grid() const noexcept { return response_.grid; }
  std::uint64_t hash() const noexcept { return hash_; }

private:
  Spectrum high_;
  Spectrum low_;
  DetectorResponse response_;
  std::uint64_t hash_ = 0;
};

struct BeamConfig {
  double endpoint_high = 9.0;  // MeV
  double endpoint_low = 6.0;   // MeV
  double filter_cm = 1.0;      // steel-equivalent filtration
  double crystal_cm = 3.0;     // CdWO4 crystal length along the beam
};

/// Kramers-like thick-target shape (endpoint - E)/E, filtered through steel, unit sum.
Spectrum gen_bremsstrahlung(double endpoint, double filter_thickness_cm, const EnergyGrid& grid,
                            const CrossSectionLibrary& lib);

/// Energy deposited per photon in a CdWO4 crystal: E (1 - exp(-mu rho L)).
DetectorResponse gen_detector_response(double crystal_length_cm, const EnergyGrid& grid, const CrossSectionLibrary& lib);

BeamModel make_beam_model(const BeamConfig& cfg, const CrossSectionLibrary& lib,
                          const EnergyGrid& grid = EnergyGrid::standard());

/// Sum over bins of response * weight * f.
double weighted_integral(const Spectrum& s, const DetectorResponse& d, std::span<const double> f);

/// CSV with header `energy_MeV,value` and an optional `# endpoint_MeV=` comment.
void write_spectrum_csv(const std::filesystem::path& file, const EnergyGrid& grid, std::span<const double> values,
                        double endpoint);
/// Returns the values and fills grid/endpoint. Uniform spacing is required.
std::vector<double> read_spectrum_csv(const std::filesystem::path& file, EnergyGrid& grid, double& endpoint);

Spectrum load_spectrum(const std::filesystem::path& file);
DetectorResponse load_response(const std::filesystem::path& file);

}  // namespace zrecon
