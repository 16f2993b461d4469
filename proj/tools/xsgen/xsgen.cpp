// Generates a parameterized photon cross-section library in the z<ZZ>.csv format.
//
// Compton: Klein-Nishina per electron with a simple binding suppression.
// Pair production: Maximon's near-threshold and high-energy expansions of the
//   unscreened Bethe-Heitler cross section, a partial Coulomb correction, and an
//   approximate electron-field (triplet) term.
// Photoelectric: empirical power law anchored to lead, scaled as Z^n(E), with a
//   Moseley K-edge and a Z-dependent K jump ratio. L edges are ignored (all lie
//   below 25 keV).
//
// The values are smooth, physically shaped stand-ins for tabulated data; drop
// real tables into the same directory layout to replace them.

#include "zrecon/elements.hpp"
#include "zrecon/xsec.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <vector>

namespace {

using namespace zrecon;

constexpr double kElectronMass = 0.51099895;    // MeV
constexpr double kClassicalRadius = 2.8179403e-13;  // cm
constexpr double kFineStructure = 1.0 / 137.035999;
constexpr double kBarn = 1e-24;                   // cm^2
constexpr double kZeta3 = 1.2020569031595942;

double per_gram(double sigma_cm2_per_atom, int z) { return sigma_cm2_per_atom * kAvogadro / atomic_weight(z); }

double klein_nishina(double e) {
  const double k = e / kElectronMass;
  const double l = std::log1p(2.0 * k);
  const double a = (1.0 + k) / (k * k) * (2.0 * (1.0 + k) / (1.0 + 2.0 * k) - l / k);
  const double b = l / (2.0 * k) - (1.0 + 3.0 * k) / ((1.0 + 2.0 * k) * (1.0 + 2.0 * k));
  return 2.0 * std::numbers::pi * kClassicalRadius * kClassicalRadius * (a + b);
}

double compton(int z, double e) {
  const double binding = 0.0167 * std::pow(z / 82.0, 1.5);
  return per_gram(z * klein_nishina(e) * e / (e + binding), z);
}

// Unscreened Bethe-Heitler factor: sigma = alpha r_e^2 Z^2 * phi(k).
double bethe_heitler_phi(double k) {
  if (k <= 2.0) return 0.0;
  if (k < 4.0) {
    const double eps = (2.0 * k - 4.0) / (2.0 + k + 2.0 * std::sqrt(2.0 * k));
    const double x = (k - 2.0) / k;
    const double series = 1.0 + eps / 2.0 + 23.0 * eps * eps / 40.0 + 11.0 * std::pow(eps, 3) / 60.0 +
                          29.0 * std::pow(eps, 4) / 960.0;
    return 2.0 * std::numbers::pi / 3.0 * x * x * x * series;
  }
  const double l = std::log(2.0 * k);
  const double pi2 = std::numbers::pi * std::numbers::pi;
  const double r2 = std::pow(2.0 / k, 2);
  return 28.0 / 9.0 * l - 218.0 / 27.0 +
         r2 * (6.0 * l - 3.5 + 2.0 / 3.0 * l * l * l - l * l - pi2 / 3.0 * l + 2.0 * kZeta3 + pi2 / 6.0) -
         r2 * r2 * (3.0 / 16.0 * l + 1.0 / 8.0) - r2 * r2 * r2 * (29.0 / 2304.0 * l - 77.0 / 13824.0);
}

double coulomb_correction(int z) {
  const double a2 = std::pow(kFineStructure * z, 2);
  return a2 * (1.0 / (1.0 + a2) + 0.20206 - 0.0369 * a2 + 0.0083 * a2 * a2 - 0.002 * a2 * a2 * a2);
}

double pair(int z, double e) {
  const double k = e / kElectronMass;
  if (k <= 2.0) return 0.0;
  const double phi = bethe_heitler_phi(k);
  const double turn_on = k > 4.0 ? std::pow(1.0 - 4.0 / k, 2) : 0.0;
  const double nuclear = std::max(0.0, phi - 28.0 / 9.0 * coulomb_correction(z) * turn_on);
  const double triplet = k > 4.0 ? 0.6 * std::pow(1.0 - 4.0 / k, 1.5) * phi : 0.0;
  const double are2 = kFineStructure * kClassicalRadius * kClassicalRadius;
  return per_gram(are2 * (double(z) * z * nuclear + z * triplet), z);
}

// Lead photoelectric cross section above the K edge, barn/atom.
double lead_photo_barn(double e) {
  static const double anchors_e[] = {0.1, 0.2, 0.5, 1.0, 2.0, 5.0};
  static const double anchors_v[] = {1803.0, 296.0, 30.3, 6.23, 1.82, 0.62};
  constexpr int n = 6;
  const double le = std::log(e);
  if (e <= anchors_e[0]) return anchors_v[0] * std::pow(e / anchors_e[0], -2.7);
  if (e >= anchors_e[n - 1]) return anchors_v[n - 1] * std::pow(e / anchors_e[n - 1], -1.0);
  int i = 0;
  while (e > anchors_e[i + 1]) ++i;
  const double t = (le - std::log(anchors_e[i])) / (std::log(anchors_e[i + 1]) - std::log(anchors_e[i]));
  return std::exp(std::log(anchors_v[i]) + t * (std::log(anchors_v[i + 1]) - std::log(anchors_v[i])));
}

double k_edge(int z) { return 13.6e-6 * (z - 1.0) * (z - 1.0); }

double photoelectric(int z, double e) {
  const double n = 4.0 + 0.6 * e / (e + 0.5);
  double sigma = lead_photo_barn(e) * std::pow(z / 82.0, n);
  if (e < k_edge(z)) sigma /= 5.0 + 5.0 * std::exp(-z / 20.0);
  return per_gram(sigma * kBarn, z);
}

ElementRecord make_element(int z, int points_per_decade) {
  const double e_min = 1e-3, e_max = 20.0;
  std::vector<double> es;
  const int n = static_cast<int>(std::ceil(std::log10(e_max / e_min) * points_per_decade));
  for (int i = 0; i <= n; ++i) es.push_back(e_min * std::pow(e_max / e_min, double(i) / n));
  es.push_back(2.0 * kElectronMass);
  es.push_back(4.0 * kElectronMass);
  const double ek = k_edge(z);
  const bool has_edge = ek > e_min * 1.01;
  if (has_edge) es.push_back(ek);
  std::sort(es.begin(), es.end());
  es.erase(std::unique(es.begin(), es.end(), [](double a, double b) { return std::abs(a - b) < 1e-12 * b; }),
           es.end());

  ElementRecord rec;
  rec.z = z;
  for (double e : es) {
    if (has_edge && e == ek) {
      // Two rows bracket the edge; the lower one sits just below it.
      const double below = ek * (1.0 - 1e-9);
      rec.energies.push_back(below);
      rec.mu_pe.push_back(photoelectric(z, below));
      rec.mu_cs.push_back(compton(z, below));
      rec.mu_pp.push_back(pair(z, below));
    }
    rec.energies.push_back(e);
    rec.mu_pe.push_back(photoelectric(z, e));
    rec.mu_cs.push_back(compton(z, e));
    rec.mu_pp.push_back(pair(z, e));
  }
  return rec;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generate a parameterized photon cross-section library"};
  std::string out_dir;
  int ppd = 60;
  app.add_option("--out", out_dir, "output directory")->required();
  app.add_option("--points-per-decade", ppd, "energy grid density")->check(CLI::Range(8, 1000));
  CLI11_PARSE(app, argc, argv);
  try {
    std::filesystem::create_directories(out_dir);
    for (int z = kMinZ; z <= kMaxZ; ++z)
      CrossSectionLibrary::write_element_file(std::filesystem::path(out_dir) / CrossSectionLibrary::element_file_name(z),
                                              make_element(z, ppd));
  } catch (const std::exception& e) {
    std::cerr << "xsgen: " << e.what() << "\n";
    return 1;
  }
  std::cerr << "wrote Z=1..100 to " << out_dir << "\n";
  return 0;
}
