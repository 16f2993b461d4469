#include "zrecon/io.hpp"

#include "zrecon/error.hpp"
#include "zrecon/hash.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>

namespace zrecon {

static_assert(std::endian::native == std::endian::little, "container I/O assumes a little-endian host");

void write_container(const std::filesystem::path& file, std::string_view magic, Json header,
                     const std::vector<std::span<const double>>& arrays) {
  if (magic.size() != 8) fail_input("container magic must be 8 bytes");
  Json lengths = Json::array();
  for (const auto& a : arrays) lengths.push_back(a.size());
  header["array_lengths"] = lengths;
  const std::string text = header.dump();
  std::ofstream out(file, std::ios::binary);
  if (!out) fail_io("cannot write " + file.string());
  out.write(magic.data(), 8);
  const std::uint64_t n = text.size();
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& a : arrays) out.write(reinterpret_cast<const char*>(a.data()), static_cast<std::streamsize>(a.size_bytes()));
  if (!out) fail_io("write failed for " + file.string());
}

Container read_container(const std::filesystem::path& file, std::string_view expected_magic) {
  std::ifstream in(file, std::ios::binary);
  if (!in) fail_input("cannot open " + file.string());
  Container c;
  c.magic.resize(8);
  in.read(c.magic.data(), 8);
  if (!in || c.magic != expected_magic)
    fail_input(file.string() + ": expected a " + std::string(expected_magic) + " container");
  std::uint64_t n = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  if (!in || n > (1ULL << 30)) fail_input(file.string() + ": corrupt header length");
  std::string text(n, '\0');
  in.read(text.data(), static_cast<std::streamsize>(n));
  if (!in) fail_input(file.string() + ": truncated header");
  try {
    c.header = Json::parse(text);
  } catch (const std::exception& e) {
    fail_input(file.string() + ": header is not valid JSON");
  }
  if (!c.header.contains("array_lengths") || !c.header["array_lengths"].is_array())
    fail_input(file.string() + ": header lacks array_lengths");
  for (const auto& len : c.header["array_lengths"]) {
    std::vector<double> a(len.get<std::size_t>());
    in.read(reinterpret_cast<char*>(a.data()), static_cast<std::streamsize>(a.size() * sizeof(double)));
    if (!in) fail_input(file.string() + ": truncated payload");
    c.arrays.push_back(std::move(a));
  }
  return c;
}

std::uint64_t file_hash(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) return 0;
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return Fnv1a().bytes(bytes.data(), bytes.size()).value();
}

const std::vector<double>& PlaneSet::plane(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return planes[i];
  fail_input("plane '" + std::string(name) + "' not present in " + kind + " data");
}

std::vector<double>& PlaneSet::plane(std::string_view name) {
  return const_cast<std::vector<double>&>(static_cast<const PlaneSet&>(*this).plane(name));
}

bool PlaneSet::has(std::string_view name) const {
  for (const auto& n : names)
    if (n == name) return true;
  return false;
}

void PlaneSet::add(std::string name, std::vector<double> values) {
  if (values.size() != width * height) fail_input("plane '" + name + "' has the wrong size");
  names.push_back(std::move(name));
  planes.push_back(std::move(values));
}

void PlaneSet::save(const std::filesystem::path& file) const {
  Json h;
  h["kind"] = kind;
  h["width"] = width;
  h["height"] = height;
  h["planes"] = names;
  h["meta"] = meta;
  std::vector<std::span<const double>> arrays;
  for (const auto& p : planes) arrays.emplace_back(p);
  write_container(file, kPlanesMagic, std::move(h), arrays);
}

PlaneSet PlaneSet::load(const std::filesystem::path& file) {
  Container c = read_container(file, kPlanesMagic);
  PlaneSet ps;
  try {
    ps.kind = c.header.at("kind").get<std::string>();
    ps.width = c.header.at("width").get<std::size_t>();
    ps.height = c.header.at("height").get<std::size_t>();
    ps.names = c.header.at("planes").get<std::vector<std::string>>();
    ps.meta = c.header.value("meta", Json::object());
  } catch (const std::exception&) {
    fail_input(file.string() + ": malformed plane header");
  }
  if (ps.names.size() != c.arrays.size()) fail_input(file.string() + ": plane count mismatch");
  for (auto& a : c.arrays)
    if (a.size() != ps.width * ps.height) fail_input(file.string() + ": plane size mismatch");
  ps.planes = std::move(c.arrays);
  return ps;
}

void PlaneSet::write_csv(const std::filesystem::path& file) const {
  std::ofstream out(file, std::ios::binary);
  if (!out) fail_io("cannot write " + file.string());
  out << "x,y";
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  char buf[40];
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x) {
      out << x << ',' << y;
      for (const auto& p : planes) {
        const double v = p[y * width + x];
        if (std::isnan(v))
          out << ",nan";
        else {
          std::snprintf(buf, sizeof buf, ",%.10g", v);
          out << buf;
        }
      }
      out << '\n';
    }
}

}  // namespace zrecon
