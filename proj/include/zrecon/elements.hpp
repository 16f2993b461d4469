#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace zrecon {

inline constexpr int kMinZ = 1;
inline constexpr int kMaxZ = 100;
inline constexpr double kAvogadro = 6.02214076e23;

// Standard atomic weight (g/mol); mass number of the longest-lived isotope for Z > 92.
double atomic_weight(int z);
std::string_view element_symbol(int z);
// Returns 0 when the symbol is unknown.
int element_from_symbol(std::string_view symbol);

/// A mixture of elements by mass fraction. Fractions are positive and sum to 1 within 1e-9.
class Material {
public:
  Material() = default;
  Material(std::string name, std::vector<std::pair<int, double>> fractions);

  static Material element(int z);
  /// Parses a chemical formula such as "H2O", "CH2" or "UO2" into mass fractions.
  static Material from_formula(const std::string& formula);

  const std::string& name() const noexcept { return name_; }
  const std::vector<std::pair<int, double>>& fractions() const noexcept { return fractions_; }
  /// Single-element materials report their Z, mixtures report 0.
  int single_z() const noexcept;
  /// Stable identity used for caching and hashing.
  std::string key() const;

private:
  std::string name_;
  std::vector<std::pair<int, double>> fractions_;
};

}  // namespace zrecon
