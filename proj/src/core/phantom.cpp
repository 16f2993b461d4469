#include "zrecon/phantom.hpp"

#include "zrecon/calibrate.hpp"
#include "zrecon/error.hpp"
#include "zrecon/hash.hpp"
#include "zrecon/parallel.hpp"
#include "zrecon/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

namespace zrecon {

namespace {

double sphere_chord(double r, double d2) { return d2 < r * r ? 2.0 * std::sqrt(r * r - d2) : 0.0; }

Primitive rect(double x0, double y0, double x1, double y1, const std::string& mat, double density, double depth,
               std::string label = {}) {
  Primitive p;
  p.shape = "rect";
  p.x0 = x0;
  p.y0 = y0;
  p.x1 = x1;
  p.y1 = y1;
  p.material = parse_material(mat);
  p.density = density;
  p.depth = depth;
  p.label = std::move(label);
  return p;
}

// Box of a given area density; the path length follows from the density.
Primitive box(double x0, double y0, double size, const std::string& mat, double density, double lambda,
              std::string label) {
  return rect(x0, y0, x0 + size, y0 + size, mat, density, lambda / density, std::move(label));
}

Primitive cylinder(double cx, double y0, double y1, double r, const std::string& mat, double density,
                   std::string label) {
  Primitive p;
  p.shape = "cylinder";
  p.cx = cx;
  p.y0 = y0;
  p.y1 = y1;
  p.radius = r;
  p.material = parse_material(mat);
  p.density = density;
  p.label = std::move(label);
  return p;
}

Primitive disc(double cx, double cy, double r, double inner, const std::string& mat, double density,
               std::string label) {
  Primitive p;
  p.shape = "disc";
  p.cx = cx;
  p.cy = cy;
  p.radius = r;
  p.inner_radius = inner;
  p.material = parse_material(mat);
  p.density = density;
  p.label = std::move(label);
  return p;
}

constexpr double kSteel = 7.874;

}  // namespace

double Primitive::chord(double x, double y) const {
  if (shape == "rect") return (x >= x0 && x < x1 && y >= y0 && y < y1) ? depth : 0.0;
  if (shape == "disc") {
    const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
    return sphere_chord(radius, d2) - sphere_chord(inner_radius, d2);
  }
  if (shape == "cylinder") {
    if (!(y >= y0 && y < y1)) return 0.0;
    return sphere_chord(radius, (x - cx) * (x - cx));
  }
  fail_input("unknown primitive shape '" + shape + "'");
}

std::size_t Scene::nx() const { return static_cast<std::size_t>(std::llround(width / pitch)); }
std::size_t Scene::ny() const { return static_cast<std::size_t>(std::llround(height / pitch)); }

void Scene::validate() const {
  if (!(width > 0 && height > 0 && pitch > 0)) fail_input("scene: canvas and pitch must be positive");
  if (nx() == 0 || ny() == 0) fail_input("scene: canvas smaller than one pixel");
  constexpr double eps = 1e-9;
  for (const auto& p : primitives) {
    if (!(p.density > 0.0)) fail_input("scene: density must be > 0");
    if (p.material.fractions().empty()) fail_input("scene: primitive without material");
    double lx, ly, hx, hy;
    if (p.shape == "rect") {
      if (!(p.depth > 0.0)) fail_input("scene: rect depth must be > 0");
      if (!(p.x1 > p.x0 && p.y1 > p.y0)) fail_input("scene: empty rect");
      lx = p.x0, ly = p.y0, hx = p.x1, hy = p.y1;
    } else if (p.shape == "disc") {
      if (!(p.radius > 0.0) || !(p.inner_radius >= 0.0 && p.inner_radius < p.radius))
        fail_input("scene: disc needs 0 <= inner_radius < radius");
      lx = p.cx - p.radius, hx = p.cx + p.radius, ly = p.cy - p.radius, hy = p.cy + p.radius;
    } else if (p.shape == "cylinder") {
      if (!(p.radius > 0.0) || !(p.y1 > p.y0)) fail_input("scene: cylinder needs radius > 0 and y1 > y0");
      lx = p.cx - p.radius, hx = p.cx + p.radius, ly = p.y0, hy = p.y1;
    } else {
      fail_input("scene: unknown shape '" + p.shape + "'");
    }
    if (lx < -eps || ly < -eps || hx > width + eps || hy > height + eps) fail_input("scene: primitive outside canvas");
  }
}

std::vector<std::string> Scene::labels() const {
  std::vector<std::string> out;
  for (const auto& p : primitives)
    if (!p.label.empty() && std::find(out.begin(), out.end(), p.label) == out.end()) out.push_back(p.label);
  return out;
}

Scene scene_from_json(const Json& j) {
  Scene s;
  try {
    s.width = j.at("canvas").at("width_cm").get<double>();
    s.height = j.at("canvas").at("height_cm").get<double>();
    s.pitch = j.value("pixel_pitch_cm", 0.5);
    for (const auto& e : j.at("primitives")) {
      Primitive p;
      p.shape = e.at("shape").get<std::string>();
      const Json& g = e.at("params");
      p.x0 = g.value("x0", 0.0);
      p.y0 = g.value("y0", 0.0);
      p.x1 = g.value("x1", 0.0);
      p.y1 = g.value("y1", 0.0);
      p.cx = g.value("cx", 0.0);
      p.cy = g.value("cy", 0.0);
      p.radius = g.value("radius", 0.0);
      p.inner_radius = g.value("inner_radius", 0.0);
      const Json& m = e.at("material");
      p.material = m.is_number_integer() ? Material::element(m.get<int>()) : parse_material(m.get<std::string>());
      p.density = e.at("density_g_cm3").get<double>();
      p.depth = e.value("depth_cm", 0.0);
      p.label = e.value("label", std::string());
      s.primitives.push_back(std::move(p));
    }
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    fail_input(std::string("malformed scene: ") + e.what());
  }
  s.validate();
  return s;
}

Json scene_to_json(const Scene& s) {
  Json prims = Json::array();
  for (const auto& p : s.primitives) {
    Json g;
    if (p.shape == "rect")
      g = {{"x0", p.x0}, {"y0", p.y0}, {"x1", p.x1}, {"y1", p.y1}};
    else if (p.shape == "disc")
      g = {{"cx", p.cx}, {"cy", p.cy}, {"radius", p.radius}, {"inner_radius", p.inner_radius}};
    else
      g = {{"cx", p.cx}, {"y0", p.y0}, {"y1", p.y1}, {"radius", p.radius}};
    Json e = {{"shape", p.shape}, {"params", g}, {"material", p.material.name()}, {"density_g_cm3", p.density}};
    if (p.shape == "rect") e["depth_cm"] = p.depth;
    if (!p.label.empty()) e["label"] = p.label;
    prims.push_back(std::move(e));
  }
  return {{"canvas", {{"width_cm", s.width}, {"height_cm", s.height}}},
          {"pixel_pitch_cm", s.pitch},
          {"primitives", prims}};
}

Scene read_scene(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) fail_input("cannot open " + file.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const std::exception& e) {
    fail_input(file.string() + ": not valid JSON");
  }
  return scene_from_json(j);
}

void write_scene(const std::filesystem::path& file, const Scene& s) {
  std::ofstream out(file, std::ios::binary);
  if (!out) fail_io("cannot write " + file.string());
  out << scene_to_json(s).dump(2) << "\n";
}

Scene cargo_phantom(double pitch) {
  Scene s;
  s.width = 140.0;
  s.height = 90.0;
  s.pitch = pitch;
  // Front and back walls of the steel container.
  s.primitives.push_back(rect(5, 5, 135, 85, "Fe", kSteel, 0.2));
  s.primitives.push_back(rect(5, 5, 135, 85, "Fe", kSteel, 0.2));
  struct BoxSpec {
    const char* label;
    const char* mat;
    double density;
    double lambda;
  };
  const BoxSpec boxes[] = {{"graphite box", "C", 2.26, 30},   {"aluminum box", "Al", 2.70, 40},
                           {"iron box", "Fe", kSteel, 79},    {"silver box", "Ag", 10.49, 79},
                           {"gadolinium box", "Gd", 7.90, 79}, {"lead box", "Pb", 11.35, 79},
                           {"uranium box", "U", 19.1, 76}};
  for (int i = 0; i < 7; ++i) s.primitives.push_back(box(10.0 + 17.0 * i, 45, 10, boxes[i].mat, boxes[i].density,
                                                          boxes[i].lambda, boxes[i].label));
  s.primitives.push_back(cylinder(25, 62.5, 85, 17.5, "H2O", 1.0, "water cylinder"));
  s.primitives.push_back(cylinder(55, 62.5, 85, 7.5, "AgCl", 5.56, "silver chloride cylinder"));
  s.primitives.push_back(cylinder(72, 62.5, 85, 3.75, "UO2", 10.97, "uranium oxide cylinder"));
  s.primitives.push_back(disc(100, 72.5, 12.5, 2.0, "CH2", 0.94, "polyethylene shield"));
  s.primitives.push_back(disc(100, 72.5, 2.0, 0.0, "Pu", 19.84, "plutonium pit + polyethylene shield"));
  return s;
}

Scene shielded_phantom(double pitch) {
  Scene s;
  s.width = 85.0;
  s.height = 60.0;
  s.pitch = pitch;
  const double steel[] = {0, 50, 100, 150, 200};
  for (int c = 1; c < 5; ++c)
    s.primitives.push_back(rect(5 + 15.0 * c, 2.5, 20 + 15.0 * c, 57.5, "Fe", kSteel, steel[c] / kSteel,
                                "steel " + std::to_string(static_cast<int>(steel[c]))));
  struct RowSpec {
    const char* name;
    const char* mat;
    double density;
    double lambda;
  };
  const RowSpec rows[] = {{"graphite", "C", 2.26, 76},
                          {"aluminum", "Al", 2.70, 76},
                          {"tin", "Sn", 7.31, 73},
                          {"lead", "Pb", 11.35, 79},
                          {"plutonium", "Pu", 19.84, 79}};
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 5; ++c)
      s.primitives.push_back(box(10 + 15.0 * c, 7.5 + 10.0 * r, 5, rows[r].mat, rows[r].density, rows[r].lambda,
                                 std::string(rows[r].name) + " " + std::to_string(static_cast<int>(steel[c]))));
  return s;
}

Scene builtin_phantom(const std::string& name, double pitch) {
  if (name == "cargo") return cargo_phantom(pitch);
  if (name == "shielded") return shielded_phantom(pitch);
  fail_input("unknown phantom '" + name + "' (expected cargo or shielded)");
}

std::vector<Layer> PathLengthMap::layers(std::size_t pixel) const {
  std::vector<Layer> out;
  for (const auto& [m, l] : pixels[pixel]) out.push_back({materials[static_cast<std::size_t>(m)], l});
  return out;
}

double PathLengthMap::total_lambda(std::size_t pixel) const {
  double t = 0.0;
  for (const auto& pl : pixels[pixel]) t += pl.second;
  return t;
}

PathLengthMap compute_path_lengths(const Scene& scene) {
  scene.validate();
  PathLengthMap map;
  map.width = scene.nx();
  map.height = scene.ny();
  std::vector<int> mat_index;
  for (const auto& p : scene.primitives) {
    const std::string key = p.material.key();
    int idx = -1;
    for (std::size_t i = 0; i < map.materials.size(); ++i)
      if (map.materials[i].key() == key) idx = static_cast<int>(i);
    if (idx < 0) {
      idx = static_cast<int>(map.materials.size());
      map.materials.push_back(p.material);
    }
    mat_index.push_back(idx);
  }
  map.pixels.resize(map.width * map.height);
  std::vector<double> acc(map.materials.size());
  for (std::size_t iy = 0; iy < map.height; ++iy)
    for (std::size_t ix = 0; ix < map.width; ++ix) {
      const double x = (static_cast<double>(ix) + 0.5) * scene.pitch;
      const double y = (static_cast<double>(iy) + 0.5) * scene.pitch;
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t k = 0; k < scene.primitives.size(); ++k) {
        const Primitive& p = scene.primitives[k];
        acc[static_cast<std::size_t>(mat_index[k])] += p.density * p.chord(x, y);
      }
      auto& px = map.pixels[iy * map.width + ix];
      for (std::size_t m = 0; m < acc.size(); ++m)
        if (acc[m] > 0.0) px.emplace_back(static_cast<int>(m), acc[m]);
    }
  return map;
}

std::vector<int> object_mask(const Scene& scene) {
  const auto labels = scene.labels();
  const std::size_t nx = scene.nx(), ny = scene.ny();
  std::vector<int> out(nx * ny, -1);
  for (std::size_t iy = 0; iy < ny; ++iy)
    for (std::size_t ix = 0; ix < nx; ++ix) {
      const double x = (static_cast<double>(ix) + 0.5) * scene.pitch;
      const double y = (static_cast<double>(iy) + 0.5) * scene.pitch;
      for (const auto& p : scene.primitives)
        if (!p.label.empty() && p.chord(x, y) > 0.0)
          out[iy * nx + ix] = static_cast<int>(std::find(labels.begin(), labels.end(), p.label) - labels.begin());
    }
  return out;
}

double default_sigma(double alpha, double fraction) { return std::max(fraction * alpha, kSigmaFloor); }

PlaneSet make_image(std::size_t width, std::size_t height, std::vector<double> alpha_h, std::vector<double> alpha_l) {
  PlaneSet img;
  img.kind = "image";
  img.width = width;
  img.height = height;
  std::vector<double> sh(alpha_h.size()), sl(alpha_l.size());
  for (std::size_t i = 0; i < sh.size(); ++i) {
    sh[i] = default_sigma(alpha_h[i]);
    sl[i] = default_sigma(alpha_l[i]);
  }
  img.add("alpha_h", std::move(alpha_h));
  img.add("alpha_l", std::move(alpha_l));
  img.add("sigma_h", std::move(sh));
  img.add("sigma_l", std::move(sl));
  img.add("mask", std::vector<double>(width * height, 1.0));
  return img;
}

Rendered render_ideal(const Scene& scene, const ForwardModel& fm, double lambda_max, int threads) {
  Rendered r;
  r.paths = compute_path_lengths(scene);
  const std::size_t n = r.paths.pixels.size();
  // Many pixels share a layer combination; evaluate each distinct one once.
  std::map<std::vector<std::pair<int, double>>, std::size_t> unique;
  std::vector<std::size_t> which(n);
  std::vector<std::size_t> representative;
  for (std::size_t i = 0; i < n; ++i) {
    auto [it, inserted] = unique.emplace(r.paths.pixels[i], representative.size());
    if (inserted) representative.push_back(i);
    which[i] = it->second;
  }
  std::vector<double> uh(representative.size()), ul(representative.size());
  parallel_for(representative.size(), threads, [&](std::size_t u) {
    const auto layers = r.paths.layers(representative[u]);
    uh[u] = fm.alpha_heterogeneous(Beam::High, layers);
    ul[u] = fm.alpha_heterogeneous(Beam::Low, layers);
  });
  std::vector<double> ah(n), al(n);
  for (std::size_t i = 0; i < n; ++i) {
    ah[i] = uh[which[i]];
    al[i] = ul[which[i]];
  }
  r.image = make_image(r.paths.width, r.paths.height, std::move(ah), std::move(al));
  auto& mask = r.image.plane("mask");
  std::size_t masked = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (r.paths.total_lambda(i) > lambda_max) {
      mask[i] = 0.0;
      ++masked;
    }
  r.image.meta["source"] = "render";
  r.image.meta["pixel_pitch_cm"] = scene.pitch;
  r.image.meta["scene_hash"] = hash_hex(Fnv1a().str(scene_to_json(scene).dump()).value());
  r.image.meta["model_hash"] = hash_hex(fm.hash());
  r.image.meta["masked_pixels"] = masked;
  return r;
}

PlaneSet apply_noise(const PlaneSet& image, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0) || !std::isfinite(fraction)) fail_input("noise fraction must be >= 0");
  PlaneSet out = image;
  out.meta["noise_fraction"] = fraction;
  out.meta["noise_seed"] = seed;
  if (fraction == 0.0) return out;
  const auto& mask = image.plane("mask");
  const char* alphas[] = {"alpha_h", "alpha_l"};
  const char* sigmas[] = {"sigma_h", "sigma_l"};
  for (std::uint64_t k = 0; k < 2; ++k) {
    const auto& a = image.plane(alphas[k]);
    auto& na = out.plane(alphas[k]);
    auto& ns = out.plane(sigmas[k]);
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (mask[i] == 0.0) continue;
      na[i] = std::max(0.0, a[i] + fraction * a[i] * normal_at(seed, i, k));
      ns[i] = default_sigma(a[i], fraction);
    }
  }
  return out;
}

PlaneSet upsample(const PlaneSet& image, std::size_t factor) {
  if (factor == 0) fail_input("upsample factor must be >= 1");
  PlaneSet out;
  out.kind = image.kind;
  out.width = image.width * factor;
  out.height = image.height * factor;
  out.meta = image.meta;
  out.meta["upsample_factor"] = factor;
  for (std::size_t k = 0; k < image.planes.size(); ++k) {
    std::vector<double> p(out.width * out.height);
    for (std::size_t y = 0; y < out.height; ++y)
      for (std::size_t x = 0; x < out.width; ++x)
        p[y * out.width + x] = image.planes[k][(y / factor) * image.width + x / factor];
    out.add(image.names[k], std::move(p));
  }
  return out;
}

}  // namespace zrecon

namespace zrecon {

PlaneSet resample(const PlaneSet& image, std::size_t width, std::size_t height) {
  if (width == 0 || height == 0) fail_input("resample target must be non-empty");
  PlaneSet out;
  out.kind = image.kind;
  out.width = width;
  out.height = height;
  out.meta = image.meta;
  out.meta["resampled_from"] = {image.width, image.height};
  std::vector<std::size_t> sx(width), sy(height);
  for (std::size_t x = 0; x < width; ++x) sx[x] = std::min(image.width - 1, x * image.width / width);
  for (std::size_t y = 0; y < height; ++y) sy[y] = std::min(image.height - 1, y * image.height / height);
  for (std::size_t k = 0; k < image.planes.size(); ++k) {
    std::vector<double> p(width * height);
    for (std::size_t y = 0; y < height; ++y)
      for (std::size_t x = 0; x < width; ++x) p[y * width + x] = image.planes[k][sy[y] * image.width + sx[x]];
    out.add(image.names[k], std::move(p));
  }
  return out;
}

}  // namespace zrecon
