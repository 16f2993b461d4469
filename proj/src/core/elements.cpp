#include "zrecon/elements.hpp"

#include "zrecon/error.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>

namespace zrecon {

namespace {

struct ElementInfo {
  const char* symbol;
  double weight;
};

constexpr std::array<ElementInfo, kMaxZ> kElements = {{
    {"H", 1.008},     {"He", 4.0026},   {"Li", 6.94},     {"Be", 9.0122},   {"B", 10.81},
    {"C", 12.011},    {"N", 14.007},    {"O", 15.999},    {"F", 18.998},    {"Ne", 20.180},
    {"Na", 22.990},   {"Mg", 24.305},   {"Al", 26.982},   {"Si", 28.085},   {"P", 30.974},
    {"S", 32.06},     {"Cl", 35.45},    {"Ar", 39.948},   {"K", 39.098},    {"Ca", 40.078},
    {"Sc", 44.956},   {"Ti", 47.867},   {"V", 50.942},    {"Cr", 51.996},   {"Mn", 54.938},
    {"Fe", 55.845},   {"Co", 58.933},   {"Ni", 58.693},   {"Cu", 63.546},   {"Zn", 65.38},
    {"Ga", 69.723},   {"Ge", 72.630},   {"As", 74.922},   {"Se", 78.971},   {"Br", 79.904},
    {"Kr", 83.798},   {"Rb", 85.468},   {"Sr", 87.62},    {"Y", 88.906},    {"Zr", 91.224},
    {"Nb", 92.906},   {"Mo", 95.95},    {"Tc", 98.0},     {"Ru", 101.07},   {"Rh", 102.91},
    {"Pd", 106.42},   {"Ag", 107.87},   {"Cd", 112.41},   {"In", 114.82},   {"Sn", 118.71},
    {"Sb", 121.76},   {"Te", 127.60},   {"I", 126.90},    {"Xe", 131.29},   {"Cs", 132.91},
    {"Ba", 137.33},   {"La", 138.91},   {"Ce", 140.12},   {"Pr", 140.91},   {"Nd", 144.24},
    {"Pm", 145.0},    {"Sm", 150.36},   {"Eu", 151.96},   {"Gd", 157.25},   {"Tb", 158.93},
    {"Dy", 162.50},   {"Ho", 164.93},   {"Er", 167.26},   {"Tm", 168.93},   {"Yb", 173.05},
    {"Lu", 174.97},   {"Hf", 178.49},   {"Ta", 180.95},   {"W", 183.84},    {"Re", 186.21},
    {"Os", 190.23},   {"Ir", 192.22},   {"Pt", 195.08},   {"Au", 196.97},   {"Hg", 200.59},
    {"Tl", 204.38},   {"Pb", 207.2},    {"Bi", 208.98},   {"Po", 209.0},    {"At", 210.0},
    {"Rn", 222.0},    {"Fr", 223.0},    {"Ra", 226.0},    {"Ac", 227.0},    {"Th", 232.04},
    {"Pa", 231.04},   {"U", 238.03},    {"Np", 237.0},    {"Pu", 244.0},    {"Am", 243.0},
    {"Cm", 247.0},    {"Bk", 247.0},    {"Cf", 251.0},    {"Es", 252.0},    {"Fm", 257.0},
}};

void check_z(int z) {
  if (z < kMinZ || z > kMaxZ) fail_input("atomic number " + std::to_string(z) + " outside 1..100");
}

}  // namespace

double atomic_weight(int z) {
  check_z(z);
  return kElements[static_cast<std::size_t>(z - 1)].weight;
}

std::string_view element_symbol(int z) {
  check_z(z);
  return kElements[static_cast<std::size_t>(z - 1)].symbol;
}

int element_from_symbol(std::string_view symbol) {
  for (int z = kMinZ; z <= kMaxZ; ++z)
    if (symbol == kElements[static_cast<std::size_t>(z - 1)].symbol) return z;
  return 0;
}

Material::Material(std::string name, std::vector<std::pair<int, double>> fractions)
    : name_(std::move(name)), fractions_(std::move(fractions)) {
  if (fractions_.empty()) fail_input("material '" + name_ + "' has no constituents");
  double sum = 0.0;
  for (const auto& [z, f] : fractions_) {
    check_z(z);
    if (!(f > 0.0)) fail_input("material '" + name_ + "' has a non-positive mass fraction");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", sum);
    fail_input("material '" + name_ + "' mass fractions sum to " + buf + ", expected 1");
  }
  std::sort(fractions_.begin(), fractions_.end());
  for (std::size_t i = 1; i < fractions_.size(); ++i)
    if (fractions_[i].first == fractions_[i - 1].first)
      fail_input("material '" + name_ + "' lists an element twice");
}

Material Material::element(int z) {
  check_z(z);
  return Material(std::string(element_symbol(z)), {{z, 1.0}});
}

Material Material::from_formula(const std::string& formula) {
  std::map<int, double> moles;
  std::size_t i = 0;
  while (i < formula.size()) {
    if (!std::isupper(static_cast<unsigned char>(formula[i])))
      fail_input("malformed formula '" + formula + "'");
    std::string sym(1, formula[i++]);
    while (i < formula.size() && std::islower(static_cast<unsigned char>(formula[i]))) sym += formula[i++];
    const int z = element_from_symbol(sym);
    if (z == 0) fail_input("unknown element '" + sym + "' in formula '" + formula + "'");
    double count = 0.0;
    std::size_t start = i;
    while (i < formula.size() && (std::isdigit(static_cast<unsigned char>(formula[i])) || formula[i] == '.')) ++i;
    count = (i > start) ? std::stod(formula.substr(start, i - start)) : 1.0;
    moles[z] += count;
  }
  if (moles.empty()) fail_input("empty formula");
  double total = 0.0;
  for (const auto& [z, n] : moles) total += n * atomic_weight(z);
  std::vector<std::pair<int, double>> fr;
  double acc = 0.0;
  for (const auto& [z, n] : moles) {
    fr.emplace_back(z, n * atomic_weight(z) / total);
    acc += fr.back().second;
  }
  fr.back().second += 1.0 - acc;
  return Material(formula, std::move(fr));
}

int Material::single_z() const noexcept {
  return fractions_.size() == 1 ? fractions_.front().first : 0;
}

std::string Material::key() const {
  std::string k;
  char buf[48];
  for (const auto& [z, f] : fractions_) {
    std::snprintf(buf, sizeof buf, "%d:%.17g;", z, f);
    k += buf;
  }
  return k;
}

}  // namespace zrecon
