#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace zrecon {

using Json = nlohmann::json;

inline constexpr std::string_view kLookupMagic = "ZRLUT001";
inline constexpr std::string_view kPlanesMagic = "ZRPLN001";

/// Binary container: 8-byte magic, little-endian u64 header length, JSON header,
/// then row-major little-endian float64 arrays whose lengths the header records
/// under "array_lengths".
struct Container {
  std::string magic;
  Json header;
  std::vector<std::vector<double>> arrays;
};

void write_container(const std::filesystem::path& file, std::string_view magic, Json header,
                     const std::vector<std::span<const double>>& arrays);
Container read_container(const std::filesystem::path& file, std::string_view expected_magic);

/// Content hash of a file's bytes (0 for a missing file).
std::uint64_t file_hash(const std::filesystem::path& file);

/// Named 2-D float64 planes with free-form metadata; the on-disk form of images,
/// ground-truth maps, label maps, reconstructions and ensemble maps.
struct PlaneSet {
  std::string kind;
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::string> names;
  std::vector<std::vector<double>> planes;
  Json meta = Json::object();

  const std::vector<double>& plane(std::string_view name) const;
  std::vector<double>& plane(std::string_view name);
  bool has(std::string_view name) const;
  void add(std::string name, std::vector<double> values);

  void save(const std::filesystem::path& file) const;
  static PlaneSet load(const std::filesystem::path& file);
  /// One CSV row per pixel: x,y,<plane names...>.
  void write_csv(const std::filesystem::path& file) const;
};

}  // namespace zrecon
