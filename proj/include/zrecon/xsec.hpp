#pragma once

#include "zrecon/elements.hpp"

#include <array>
#include <filesystem>
#include <map>
#include <vector>

namespace zrecon {

/// Partial mass attenuation coefficients, cm^2/g.
struct MuTriple {
  double pe = 0.0;  // photoelectric
  double cs = 0.0;  // Compton (incoherent) scattering
  double pp = 0.0;  // pair production (nuclear + electron field)

  double total() const noexcept { return pe + cs + pp; }
  MuTriple& operator+=(const MuTriple& o) noexcept {
    pe += o.pe;
    cs += o.cs;
    pp += o.pp;
    return *this;
  }
  friend MuTriple operator*(double s, const MuTriple& m) noexcept { return {s * m.pe, s * m.cs, s * m.pp}; }
  friend bool operator==(const MuTriple&, const MuTriple&) = default;
};

struct ElementRecord {
  int z = 0;
  std::vector<double> energies;  // MeV, strictly increasing
  std::vector<double> mu_pe, mu_cs, mu_pp;

  /// Throws Error(Input) when any invariant is violated.
  void validate() const;
};

/// Immutable per-element photon cross-section tables covering Z = 1..100.
class CrossSectionLibrary {
public:
  CrossSectionLibrary() = default;
  explicit CrossSectionLibrary(std::map<int, ElementRecord> elements);

  /// Loads `z001.csv` .. `z100.csv` from a directory.
  static CrossSectionLibrary load(const std::filesystem::path& dir);
  static ElementRecord read_element_file(const std::filesystem::path& file, int z);
  static void write_element_file(const std::filesystem::path& file, const ElementRecord& rec);
  static std::filesystem::path element_file_name(int z);

  const ElementRecord& element(int z) const;
  int min_z() const noexcept { return min_z_; }
  int max_z() const noexcept { return max_z_; }

  /// Log-log interpolation in energy; linear in energy when a bracketing value is zero.
  MuTriple mu(int z, double e_mev) const;
  /// Fractional Z: log-linear interpolation between floor(z) and ceil(z) at fixed energy.
  MuTriple mu_fractional(double z, double e_mev) const;
  MuTriple mu_material(const Material& m, double e_mev) const;

  /// Content hash over every tabulated value.
  std::uint64_t hash() const noexcept { return hash_; }

private:
  std::map<int, ElementRecord> elements_;
  int min_z_ = 0;
  int max_z_ = 0;
  std::uint64_t hash_ = 0;
};

/// Interpolates one partial coefficient between two bracketing rows.
double interp_loglog(double e0, double v0, double e1, double v1, double e);
/// Combines the values at floor(z) and ceil(z) for fractional z weight t in [0, 1].
double interp_fractional_z(double v_lo, double v_hi, double t);

}  // namespace zrecon
