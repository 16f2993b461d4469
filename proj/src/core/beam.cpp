#include "zrecon/beam.hpp"

#include "zrecon/error.hpp"
#include "zrecon/hash.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace zrecon {

EnergyGrid::EnergyGrid(std::vector<double> centers, std::vector<double> widths)
    : centers_(std::move(centers)), widths_(std::move(widths)) {
  if (centers_.empty() || centers_.size() != widths_.size()) fail_input("energy grid: centers/widths mismatch");
  for (std::size_t i = 0; i < centers_.size(); ++i) {
    if (!(widths_[i] > 0.0)) fail_input("energy grid: widths must be positive");
    if (!(centers_[i] - 0.5 * widths_[i] > 0.0)) fail_input("energy grid: bins must lie above 0 MeV");
    if (i > 0) {
      if (!(centers_[i] > centers_[i - 1])) fail_input("energy grid: centers not strictly increasing");
      const double gap = (centers_[i] - 0.5 * widths_[i]) - (centers_[i - 1] + 0.5 * widths_[i - 1]);
      if (std::abs(gap) > 1e-9 * centers_[i]) fail_input("energy grid: bins not contiguous");
    }
  }
}

EnergyGrid EnergyGrid::uniform(double e_min, double e_max, double bin_width) {
  if (!(e_min > 0.0 && e_max > e_min && bin_width > 0.0)) fail_input("energy grid: invalid bounds");
  const auto n = static_cast<std::size_t>(std::llround((e_max - e_min) / bin_width));
  if (n == 0 || std::abs(n * bin_width - (e_max - e_min)) > 1e-9 * e_max)
    fail_input("energy grid: range is not a whole number of bins");
  std::vector<double> c(n), w(n, bin_width);
  for (std::size_t i = 0; i < n; ++i) c[i] = e_min + (static_cast<double>(i) + 0.5) * bin_width;
  return EnergyGrid(std::move(c), std::move(w));
}

void Spectrum::validate() const {
  if (weights.size() != grid.size()) fail_input("spectrum: weights do not match grid");
  bool any = false;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!(weights[i] >= 0.0) || !std::isfinite(weights[i])) fail_input("spectrum: weights must be finite and >= 0");
    if (weights[i] > 0.0) {
      any = true;
      if (grid.centers()[i] > endpoint) fail_input("spectrum: positive weight above endpoint");
    }
  }
  if (!any) fail_input("spectrum: no positive weight");
}

void DetectorResponse::validate() const {
  if (response.size() != grid.size()) fail_input("detector response: values do not match grid");
  for (double r : response)
    if (!(r >= 0.0) || !std::isfinite(r)) fail_input("detector response: values must be finite and >= 0");
}

BeamModel::BeamModel(Spectrum high, Spectrum low, DetectorResponse response)
    : high_(std::move(high)), low_(std::move(low)), response_(std::move(response)) {
  high_.validate();
  low_.validate();
  response_.validate();
  if (!(high_.grid == response_.grid) || !(low_.grid == response_.grid))
    fail_input("beam model: spectra and response must share one energy grid");
  for (const Spectrum* s : {&high_, &low_}) {
    const std::vector<double> ones(s->grid.size(), 1.0);
    if (!(weighted_integral(*s, response_, ones) > 0.0))
      fail_input("beam model: detector sees no signal from the spectrum (degenerate response)");
  }
  Fnv1a h;
  h.f64s(response_.grid.centers()).f64s(response_.grid.widths());
  h.f64s(high_.weights).f64(high_.endpoint).f64s(low_.weights).f64(low_.endpoint).f64s(response_.response);
  hash_ = h.value();
}

Spectrum gen_bremsstrahlung(double endpoint, double filter_thickness_cm, const EnergyGrid& grid,
                            const CrossSectionLibrary& lib) {
  if (!(endpoint > grid.lower_edge() && endpoint <= grid.upper_edge()))
    fail_input("bremsstrahlung endpoint outside energy grid");
  if (!(filter_thickness_cm >= 0.0)) fail_input("filter thickness must be >= 0");
  constexpr double kSteelDensity = 7.874;
  Spectrum s{grid, std::vector<double>(grid.size(), 0.0), endpoint};
  double sum = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double e = grid.centers()[i];
    if (e >= endpoint) continue;
    const double mu = lib.mu(26, e).total();
    s.weights[i] = (endpoint - e) / e * std::exp(-mu * kSteelDensity * filter_thickness_cm) * grid.widths()[i];
    sum += s.weights[i];
  }
  if (!(sum > 0.0)) fail_input("bremsstrahlung spectrum has no weight");
  for (double& w : s.weights) w /= sum;
  return s;
}

DetectorResponse gen_detector_response(double crystal_length_cm, const EnergyGrid& grid,
                                       const CrossSectionLibrary& lib) {
  if (!(crystal_length_cm >= 0.0)) fail_input("crystal length must be >= 0");
  constexpr double kCdwo4Density = 7.9;
  static const Material cdwo4 = Material::from_formula("CdWO4");
  DetectorResponse d{grid, std::vector<double>(grid.size(), 0.0)};
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double e = grid.centers()[i];
    const double mu = lib.mu_material(cdwo4, e).total();
    d.response[i] = e * -std::expm1(-mu * kCdwo4Density * crystal_length_cm);
  }
  return d;
}

BeamModel make_beam_model(const BeamConfig& cfg, const CrossSectionLibrary& lib, const EnergyGrid& grid) {
  return BeamModel(gen_bremsstrahlung(cfg.endpoint_high, cfg.filter_cm, grid, lib),
                   gen_bremsstrahlung(cfg.endpoint_low, cfg.filter_cm, grid, lib),
                   gen_detector_response(cfg.crystal_cm, grid, lib));
}

double weighted_integral(const Spectrum& s, const DetectorResponse& d, std::span<const double> f) {
  if (f.size() != s.weights.size() || d.response.size() != s.weights.size())
    fail_input("weighted_integral: length mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) sum += d.response[i] * s.weights[i] * f[i];
  return sum;
}

void write_spectrum_csv(const std::filesystem::path& file, const EnergyGrid& grid, std::span<const double> values,
                        double endpoint) {
  if (values.size() != grid.size()) fail_input("spectrum file: values do not match grid");
  std::ofstream out(file, std::ios::binary);
  if (!out) fail_io("cannot write " + file.string());
  char buf[96];
  if (endpoint > 0.0) {
    std::snprintf(buf, sizeof buf, "# endpoint_MeV=%.17g\n", endpoint);
    out << buf;
  }
  out << "energy_MeV,value\n";
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", grid.centers()[i], values[i]);
    out << buf;
  }
}

std::vector<double> read_spectrum_csv(const std::filesystem::path& file, EnergyGrid& grid, double& endpoint) {
  std::ifstream in(file);
  if (!in) fail_input("cannot open " + file.string());
  std::string line;
  bool header = false;
  endpoint = 0.0;
  std::vector<double> centers, values;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      const std::string key = "# endpoint_MeV=";
      if (line.rfind(key, 0) == 0) endpoint = std::stod(line.substr(key.size()));
      continue;
    }
    if (!header) {
      if (line != "energy_MeV,value") fail_input(file.string() + ": unexpected header '" + line + "'");
      header = true;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) fail_input(file.string() + ": malformed row");
    try {
      centers.push_back(std::stod(line.substr(0, comma)));
      values.push_back(std::stod(line.substr(comma + 1)));
    } catch (const std::exception&) {
      fail_input(file.string() + ": malformed row");
    }
  }
  if (centers.size() < 2) fail_input(file.string() + ": need at least two rows");
  const double w = (centers.back() - centers.front()) / static_cast<double>(centers.size() - 1);
  for (std::size_t i = 1; i < centers.size(); ++i)
    if (std::abs(centers[i] - centers[i - 1] - w) > 1e-6 * w) fail_input(file.string() + ": grid is not uniform");
  std::vector<double> c(centers.size()), widths(centers.size(), w);
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = centers.front() + w * static_cast<double>(i);
  grid = EnergyGrid(std::move(c), std::move(widths));
  return values;
}

Spectrum load_spectrum(const std::filesystem::path& file) {
  Spectrum s;
  s.weights = read_spectrum_csv(file, s.grid, s.endpoint);
  if (s.endpoint <= 0.0) s.endpoint = s.grid.upper_edge();
  s.validate();
  return s;
}

DetectorResponse load_response(const std::filesystem::path& file) {
  DetectorResponse d;
  double endpoint = 0.0;
  d.response = read_spectrum_csv(file, d.grid, endpoint);
  d.validate();
  return d;
}

}  // namespace zrecon
