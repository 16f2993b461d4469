#include "zrecon/xsec.hpp"

#include "zrecon/error.hpp"
#include "zrecon/hash.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace zrecon {

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void ElementRecord::validate() const {
  const std::string who = "element Z=" + std::to_string(z);
  if (energies.size() < 2) fail_input(who + ": table needs at least two rows");
  if (mu_pe.size() != energies.size() || mu_cs.size() != energies.size() || mu_pp.size() != energies.size())
    fail_input(who + ": column lengths differ");
  for (std::size_t i = 0; i < energies.size(); ++i) {
    if (!std::isfinite(energies[i]) || energies[i] <= 0.0) fail_input(who + ": energies must be positive");
    if (i > 0 && !(energies[i] > energies[i - 1])) fail_input(who + ": non-ascending grid");
    for (double v : {mu_pe[i], mu_cs[i], mu_pp[i]}) {
      if (!std::isfinite(v)) fail_input(who + ": non-finite coefficient");
      if (v < 0.0) fail_input(who + ": negative coefficient");
    }
  }
}

CrossSectionLibrary::CrossSectionLibrary(std::map<int, ElementRecord> elements) : elements_(std::move(elements)) {
  if (elements_.empty()) fail_input("cross-section library is empty");
  min_z_ = elements_.begin()->first;
  max_z_ = elements_.rbegin()->first;
  Fnv1a h;
  for (int z = min_z_; z <= max_z_; ++z) {
    auto it = elements_.find(z);
    if (it == elements_.end()) fail_input("cross-section library missing element Z=" + std::to_string(z));
    if (it->second.z != z) fail_input("cross-section record keyed under the wrong Z");
    it->second.validate();
    h.u64(static_cast<std::uint64_t>(z));
    h.f64s(it->second.energies).f64s(it->second.mu_pe).f64s(it->second.mu_cs).f64s(it->second.mu_pp);
  }
  hash_ = h.value();
}

std::filesystem::path CrossSectionLibrary::element_file_name(int z) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "z%03d.csv", z);
  return buf;
}

ElementRecord CrossSectionLibrary::read_element_file(const std::filesystem::path& file, int z) {
  std::ifstream in(file);
  if (!in) fail_input("missing element file " + file.string());
  ElementRecord rec;
  rec.z = z;
  std::string line;
  if (!std::getline(in, line)) fail_input(file.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "energy_MeV,mu_pe,mu_cs,mu_pp") fail_input(file.string() + ": unexpected header '" + line + "'");
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::istringstream ss(line);
    std::string cell;
    double v[4];
    int n = 0;
    while (std::getline(ss, cell, ',')) {
      if (n >= 4) break;
      try {
        std::size_t used = 0;
        v[n] = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        fail_input(file.string() + ":" + std::to_string(lineno) + ": malformed row");
      }
      ++n;
    }
    if (n != 4 || ss.rdbuf()->in_avail() > 0) fail_input(file.string() + ":" + std::to_string(lineno) + ": malformed row");
    rec.energies.push_back(v[0]);
    rec.mu_pe.push_back(v[1]);
    rec.mu_cs.push_back(v[2]);
    rec.mu_pp.push_back(v[3]);
  }
  try {
    rec.validate();
  } catch (const Error& e) {
    fail_input(file.string() + ": " + e.what());
  }
  return rec;
}

void CrossSectionLibrary::write_element_file(const std::filesystem::path& file, const ElementRecord& rec) {
  rec.validate();
  std::ofstream out(file, std::ios::binary);
  if (!out) fail_io("cannot write " + file.string());
  out << "energy_MeV,mu_pe,mu_cs,mu_pp\n";
  char buf[160];
  for (std::size_t i = 0; i < rec.energies.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.10e,%.10e,%.10e,%.10e\n", rec.energies[i], rec.mu_pe[i], rec.mu_cs[i], rec.mu_pp[i]);
    out << buf;
  }
}

CrossSectionLibrary CrossSectionLibrary::load(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) fail_input("cross-section directory not found: " + dir.string());
  std::map<int, ElementRecord> elems;
  for (int z = kMinZ; z <= kMaxZ; ++z) elems.emplace(z, read_element_file(dir / element_file_name(z), z));
  return CrossSectionLibrary(std::move(elems));
}

const ElementRecord& CrossSectionLibrary::element(int z) const {
  auto it = elements_.find(z);
  if (it == elements_.end()) fail_input("Z=" + std::to_string(z) + " outside library coverage");
  return it->second;
}

double interp_loglog(double e0, double v0, double e1, double v1, double e) {
  if (e == e0) return v0;
  if (e == e1) return v1;
  const double t_lin = (e - e0) / (e1 - e0);
  if (v0 <= 0.0 || v1 <= 0.0) return v0 + (v1 - v0) * t_lin;
  const double t = std::log(e / e0) / std::log(e1 / e0);
  return std::exp(std::log(v0) + t * (std::log(v1) - std::log(v0)));
}

double interp_fractional_z(double v_lo, double v_hi, double t) {
  if (t == 0.0) return v_lo;
  if (t == 1.0) return v_hi;
  if (v_lo <= 0.0 || v_hi <= 0.0) return v_lo + (v_hi - v_lo) * t;
  return std::exp(std::log(v_lo) + t * (std::log(v_hi) - std::log(v_lo)));
}

MuTriple CrossSectionLibrary::mu(int z, double e) const {
  const ElementRecord& r = element(z);
  const auto& es = r.energies;
  if (!(e >= es.front() && e <= es.back())) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "energy %.6g MeV outside tabulated range of Z=%d", e, z);
    fail_input(buf);
  }
  auto it = std::lower_bound(es.begin(), es.end(), e);
  std::size_t i1 = static_cast<std::size_t>(it - es.begin());
  if (es[i1] == e) return {r.mu_pe[i1], r.mu_cs[i1], r.mu_pp[i1]};
  const std::size_t i0 = i1 - 1;
  return {interp_loglog(es[i0], r.mu_pe[i0], es[i1], r.mu_pe[i1], e),
          interp_loglog(es[i0], r.mu_cs[i0], es[i1], r.mu_cs[i1], e),
          interp_loglog(es[i0], r.mu_pp[i0], es[i1], r.mu_pp[i1], e)};
}

MuTriple CrossSectionLibrary::mu_fractional(double z, double e) const {
  if (!(z >= static_cast<double>(min_z_) && z <= static_cast<double>(max_z_))) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "Z=%.6g outside library coverage", z);
    fail_input(buf);
  }
  const int lo = static_cast<int>(std::floor(z));
  const double t = z - lo;
  if (t == 0.0) return mu(lo, e);
  const MuTriple a = mu(lo, e);
  const MuTriple b = mu(lo + 1, e);
  return {interp_fractional_z(a.pe, b.pe, t), interp_fractional_z(a.cs, b.cs, t), interp_fractional_z(a.pp, b.pp, t)};
}

MuTriple CrossSectionLibrary::mu_material(const Material& m, double e) const {
  MuTriple sum;
  for (const auto& [z, f] : m.fractions()) sum += f * mu(z, e);
  return sum;
}

}  // namespace zrecon
