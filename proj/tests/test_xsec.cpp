#include "support.hpp"

#include "zrecon/error.hpp"
#include "zrecon/xsec.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <functional>
#include <random>

using namespace zrecon;

namespace {

void write_rows(const std::filesystem::path& file, const std::string& body) {
  std::ofstream out(file);
  out << "energy_MeV,mu_pe,mu_cs,mu_pp\n" << body;
}

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("library covers Z = 1..100") {
  const auto& lib = *zt::library();
  CHECK(lib.min_z() == 1);
  CHECK(lib.max_z() == 100);
  for (int z = 1; z <= 100; ++z) CHECK(lib.element(z).z == z);
  CHECK_THROWS_AS(lib.element(101), Error);
}

TEST_CASE("element files are validated") {
  zt::TempDir dir;
  write_rows(dir / "desc.csv", "2.0,1,1,0\n1.0,1,1,0\n");
  CHECK(error_of([&] { CrossSectionLibrary::read_element_file(dir / "desc.csv", 26); }).find("non-ascending grid") !=
        std::string::npos);
  write_rows(dir / "neg.csv", "1.0,1,-0.1,0\n2.0,1,1,0\n");
  CHECK(error_of([&] { CrossSectionLibrary::read_element_file(dir / "neg.csv", 26); }).find("negative coefficient") !=
        std::string::npos);
  write_rows(dir / "bad.csv", "1.0,1,x,0\n");
  CHECK_THROWS_AS(CrossSectionLibrary::read_element_file(dir / "bad.csv", 26), Error);
  CHECK_THROWS_AS(CrossSectionLibrary::load(dir / "missing"), Error);
}

TEST_CASE("element file round trip") {
  zt::TempDir dir;
  const ElementRecord& fe = zt::library()->element(26);
  CrossSectionLibrary::write_element_file(dir / "z026.csv", fe);
  const ElementRecord back = CrossSectionLibrary::read_element_file(dir / "z026.csv", 26);
  REQUIRE(back.energies.size() == fe.energies.size());
  for (std::size_t i = 0; i < fe.energies.size(); ++i) {
    CHECK(zt::rel(back.energies[i], fe.energies[i]) < 1e-9);
    CHECK(zt::rel(back.mu_cs[i], fe.mu_cs[i]) < 1e-9);
  }
}

TEST_CASE("grid points return the tabulated triple unchanged") {
  const auto& lib = *zt::library();
  for (int z : {1, 6, 26, 47, 82, 100}) {
    const ElementRecord& r = lib.element(z);
    for (std::size_t i = 0; i < r.energies.size(); ++i) {
      const MuTriple m = lib.mu(z, r.energies[i]);
      CHECK(m.pe == r.mu_pe[i]);
      CHECK(m.cs == r.mu_cs[i]);
      CHECK(m.pp == r.mu_pp[i]);
    }
  }
}

TEST_CASE("log-log interpolation between bracketing rows") {
  const auto& lib = *zt::library();
  const ElementRecord& r = lib.element(29);
  for (std::size_t i = 0; i + 1 < r.energies.size(); i += 7) {
    const double e0 = r.energies[i], e1 = r.energies[i + 1];
    // Geometric midpoint: log-log interpolation gives the geometric mean.
    const double eg = std::sqrt(e0 * e1);
    const MuTriple g = lib.mu(29, eg);
    if (r.mu_cs[i] > 0 && r.mu_cs[i + 1] > 0) CHECK(zt::rel(g.cs, std::sqrt(r.mu_cs[i] * r.mu_cs[i + 1])) < 1e-12);
    if (r.mu_pe[i] > 0 && r.mu_pe[i + 1] > 0) CHECK(zt::rel(g.pe, std::sqrt(r.mu_pe[i] * r.mu_pe[i + 1])) < 1e-12);
    // Arithmetic midpoint: power law through the two rows.
    const double em = 0.5 * (e0 + e1);
    const MuTriple m = lib.mu(29, em);
    const double slope = std::log(r.mu_cs[i + 1] / r.mu_cs[i]) / std::log(e1 / e0);
    CHECK(zt::rel(m.cs, r.mu_cs[i] * std::pow(em / e0, slope)) < 1e-12);
  }
}

TEST_CASE("zero pair-production entries interpolate to zero") {
  const auto& lib = *zt::library();
  const ElementRecord& r = lib.element(82);
  std::size_t checked = 0;
  for (std::size_t i = 0; i + 1 < r.energies.size(); ++i)
    if (r.mu_pp[i] == 0.0 && r.mu_pp[i + 1] == 0.0) {
      CHECK(lib.mu(82, 0.5 * (r.energies[i] + r.energies[i + 1])).pp == 0.0);
      ++checked;
    }
  CHECK(checked > 0);
  CHECK(interp_loglog(1.0, 0.0, 2.0, 4.0, 1.5) == doctest::Approx(2.0));
}

TEST_CASE("energies outside the table are rejected") {
  const auto& lib = *zt::library();
  const ElementRecord& r = lib.element(26);
  CHECK_THROWS_AS(lib.mu(26, r.energies.front() * 0.5), Error);
  CHECK_THROWS_AS(lib.mu(26, r.energies.back() * 2.0), Error);
}

TEST_CASE("interpolation is continuous across grid points") {
  const auto& lib = *zt::library();
  for (int z : {6, 50, 92}) {
    const ElementRecord& r = lib.element(z);
    for (std::size_t i = 1; i + 1 < r.energies.size(); ++i) {
      const double e = r.energies[i];
      // Absorption edges are stored as two nearly coincident energies; the jump lives there.
      if (r.energies[i + 1] - e < 1e-6 * e || e - r.energies[i - 1] < 1e-6 * e) continue;
      const MuTriple lo = lib.mu(z, std::nextafter(e, 0.0));
      const MuTriple hi = lib.mu(z, std::nextafter(e, 1e9));
      CHECK(std::abs(lo.cs - hi.cs) <= 1e-12 * r.mu_cs[i]);
      CHECK(std::abs(lo.pe - hi.pe) <= 1e-12 * std::max(r.mu_pe[i], 1e-300));
    }
  }
}

TEST_CASE("photoelectric K edge jumps upward") {
  const auto& lib = *zt::library();
  const ElementRecord& r = lib.element(82);
  std::size_t edges = 0;
  for (std::size_t i = 0; i + 1 < r.energies.size(); ++i)
    if (r.energies[i + 1] - r.energies[i] < 1e-6 * r.energies[i]) {
      ++edges;
      CHECK(r.mu_pe[i + 1] > 2.0 * r.mu_pe[i]);
      CHECK(r.mu_cs[i + 1] == doctest::Approx(r.mu_cs[i]).epsilon(1e-6));
    }
  CHECK(edges == 1);
}

TEST_CASE("fractional Z") {
  const auto& lib = *zt::library();
  const MuTriple a = lib.mu(26, 1.0), b = lib.mu(27, 1.0);
  CHECK(lib.mu_fractional(26.0, 1.0) == a);
  const MuTriple m = lib.mu_fractional(26.5, 1.0);
  CHECK(m.cs > std::min(a.cs, b.cs));
  CHECK(m.cs < std::max(a.cs, b.cs));
  CHECK(m.pe > std::min(a.pe, b.pe));
  CHECK(m.pe < std::max(a.pe, b.pe));
  CHECK_THROWS_AS(lib.mu_fractional(0.5, 1.0), Error);
  CHECK_THROWS_AS(lib.mu_fractional(100.5, 1.0), Error);
  for (int z : {1, 13, 64, 100})
    for (double e : lib.element(z).energies) CHECK(lib.mu_fractional(z, e) == lib.mu(z, e));
}

TEST_CASE("mixture rule") {
  const auto& lib = *zt::library();
  CHECK(lib.mu_material(Material::element(26), 2.0) == lib.mu(26, 2.0));
  const Material water("water", {{1, 0.1119}, {8, 0.8881}});
  const MuTriple h = lib.mu(1, 1.0), o = lib.mu(8, 1.0), w = lib.mu_material(water, 1.0);
  CHECK(zt::rel(w.cs, 0.1119 * h.cs + 0.8881 * o.cs) < 1e-14);
  CHECK(zt::rel(w.pe, 0.1119 * h.pe + 0.8881 * o.pe) < 1e-14);
  CHECK_THROWS_AS(Material("short", {{1, 0.4}, {8, 0.5}}), Error);

  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> zd(1, 100);
  std::uniform_real_distribution<double> ed(0.06, 8.9);
  for (int i = 0; i < 100; ++i) {
    const int z = zd(rng);
    const double e = ed(rng);
    CHECK(lib.mu_material(Material("pure", {{z, 1.0}}), e) == lib.mu(z, e));
  }
}

TEST_CASE("chemical formulas become mass fractions") {
  const Material w = Material::from_formula("H2O");
  REQUIRE(w.fractions().size() == 2);
  double fh = 0;
  for (auto [z, f] : w.fractions())
    if (z == 1) fh = f;
  CHECK(fh == doctest::Approx(0.1119).epsilon(1e-3));
  CHECK(Material::from_formula("Fe").single_z() == 26);
  CHECK_THROWS_AS(Material::from_formula("Xq2"), Error);
}
