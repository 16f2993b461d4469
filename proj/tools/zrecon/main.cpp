// zrecon command-line interface. Every command prints one JSON object on stdout
// and human-readable progress on stderr. Exit codes: 0 ok, 2 input, 3 numeric,
// 4 I/O, 1 internal.

#include "zrecon/zrecon.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#ifndef ZRECON_DEFAULT_DATA
#define ZRECON_DEFAULT_DATA ""
#endif

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

struct CliError {
  int code;
  std::string message;
};

[[noreturn]] void fail(int code, const std::string& msg) { throw CliError{code, msg}; }

void check(zr_status s) {
  if (s != ZR_OK) fail(static_cast<int>(s), zr_last_error());
}

template <class T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using Library = std::unique_ptr<zr_library, Deleter<zr_library, zr_library_free>>;
using Model = std::unique_ptr<zr_model, Deleter<zr_model, zr_model_free>>;
using Lookup = std::unique_ptr<zr_lookup, Deleter<zr_lookup, zr_lookup_free>>;
using Planes = std::unique_ptr<zr_planes, Deleter<zr_planes, zr_planes_free>>;
using Scene = std::unique_ptr<zr_scene, Deleter<zr_scene, zr_scene_free>>;

std::string take(char* s) {
  std::string out = s ? s : "";
  zr_string_free(s);
  return out;
}

Json take_json(char* s) { return Json::parse(take(s)); }

std::string hex(uint64_t h) {
  char buf[17];
  zr_hash_hex(h, buf);
  return buf;
}

std::string file_hash(const std::string& path) {
  uint64_t h = 0;
  check(zr_file_hash(path.c_str(), &h));
  return hex(h);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(2, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(4, "cannot write " + path);
  out << text;
  if (!out) fail(4, "write failed for " + path);
}

void need_input(const std::string& path) {
  if (!fs::exists(path)) fail(2, "input not found: " + path);
}

void need_output(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty() && !fs::is_directory(parent)) fail(2, "output directory does not exist: " + parent.string());
}

void need_output_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) fail(2, "cannot create output directory " + dir);
}

void note(const std::string& msg) { std::cerr << msg << '\n'; }

Planes load_planes(const std::string& path) {
  need_input(path);
  zr_planes* p = nullptr;
  check(zr_planes_load(path.c_str(), &p));
  return Planes(p);
}

Lookup load_lookup(const std::string& path) {
  need_input(path);
  zr_lookup* t = nullptr;
  check(zr_lookup_load(path.c_str(), &t));
  return Lookup(t);
}

Json planes_info(const zr_planes* p) {
  char* s = nullptr;
  check(zr_planes_info(p, &s));
  return take_json(s);
}

void set_meta(zr_planes* p, const std::string& key, const Json& value) {
  check(zr_planes_set_meta(p, key.c_str(), value.dump().c_str()));
}

void save_planes(const zr_planes* p, const std::string& path) { check(zr_planes_save(p, path.c_str())); }

std::vector<double> plane_values(const zr_planes* p, const std::string& name) {
  const double* v = nullptr;
  size_t n = 0;
  check(zr_planes_get(p, name.c_str(), &v, &n));
  return std::vector<double>(v, v + n);
}

struct Global {
  std::string data;
  int threads = 1;
};

struct ModelOptions {
  std::string params;
  double endpoint_h = 0, endpoint_l = 0, filter_cm = 0, crystal_cm = 0;
  std::string spectrum_h, spectrum_l, response;

  ModelOptions() {
    zr_beam_config d;
    zr_beam_config_default(&d);
    endpoint_h = d.endpoint_high_mev;
    endpoint_l = d.endpoint_low_mev;
    filter_cm = d.filter_cm;
    crystal_cm = d.crystal_cm;
  }

  void add_beam(CLI::App* c) {
    c->add_option("--endpoint-h", endpoint_h, "High-energy endpoint, MeV")->capture_default_str();
    c->add_option("--endpoint-l", endpoint_l, "Low-energy endpoint, MeV")->capture_default_str();
    c->add_option("--filter-cm", filter_cm, "Steel filtration, cm")->capture_default_str();
    c->add_option("--crystal-cm", crystal_cm, "CdWO4 crystal length, cm")->capture_default_str();
    c->add_option("--spectrum-h", spectrum_h, "High-energy spectrum CSV (overrides the generated one)");
    c->add_option("--spectrum-l", spectrum_l, "Low-energy spectrum CSV");
    c->add_option("--response", response, "Detector response CSV");
  }
  void add(CLI::App* c) {
    c->add_option("--params", params, "Calibration parameters JSON (default a=b=c=1)");
    add_beam(c);
  }
  zr_beam_config config() const { return {endpoint_h, endpoint_l, filter_cm, crystal_cm}; }
  bool from_files() const { return !spectrum_h.empty() || !spectrum_l.empty() || !response.empty(); }
  void validate() const {
    if (!params.empty()) need_input(params);
    if (from_files()) {
      if (spectrum_h.empty() || spectrum_l.empty() || response.empty())
        fail(2, "--spectrum-h, --spectrum-l and --response must be given together");
      need_input(spectrum_h);
      need_input(spectrum_l);
      need_input(response);
    }
  }
};

std::string data_dir(const Global& g) {
  if (!g.data.empty()) return g.data;
  if (const char* env = std::getenv("ZRECON_DATA"); env && *env) return env;
  return ZRECON_DEFAULT_DATA;
}

Library load_library(const Global& g) {
  const std::string dir = data_dir(g);
  if (dir.empty() || !fs::is_directory(dir)) fail(2, "cross-section directory not found: '" + dir + "' (set ZRECON_DATA or --data)");
  zr_library* lib = nullptr;
  check(zr_library_load(dir.c_str(), &lib));
  return Library(lib);
}

Model make_model(const zr_library* lib, const ModelOptions& m) {
  std::string params;
  if (!m.params.empty()) params = read_text(m.params);
  const char* pj = m.params.empty() ? nullptr : params.c_str();
  zr_model* out = nullptr;
  if (m.from_files()) {
    check(zr_model_create_from_files(lib, m.spectrum_h.c_str(), m.spectrum_l.c_str(), m.response.c_str(), pj, &out));
  } else {
    const zr_beam_config cfg = m.config();
    check(zr_model_create(lib, &cfg, pj, &out));
  }
  return Model(out);
}

struct SegmentOptions {
  zr_segment_params p{};
  SegmentOptions() { zr_segment_params_default(&p); }
  void add(CLI::App* c) {
    c->add_option("--seg-sigma", p.sigma, "Segmentation pre-smoothing, pixels")->capture_default_str();
    c->add_option("--seg-k", p.k, "Segmentation merge threshold")->capture_default_str();
    c->add_option("--seg-min-size", p.min_size, "Minimum segment size, pixels")->capture_default_str();
    c->add_option("--seg-scale", p.scale, "Feature scale applied to alpha")->capture_default_str();
  }
  Json json() const { return {{"sigma", p.sigma}, {"k", p.k}, {"min_size", p.min_size}, {"scale", p.scale}}; }
};

struct ReconOpts {
  zr_recon_options o{};
  std::string mode = "warm";
  ReconOpts() { zr_recon_options_default(&o); }
  void add(CLI::App* c) {
    c->add_option("--max-iterations", o.max_iterations, "Newton iteration cap per pixel")->capture_default_str();
    c->add_option("--tolerance", o.tolerance, "Newton step tolerance, g/cm^2")->capture_default_str();
    c->add_option("--warm-tolerance", o.warm_tolerance, "Warm-start acceptance tolerance")->capture_default_str();
    c->add_option("--dual-margin", o.dual_margin, "Chi2 margin for reporting a second solution")->capture_default_str();
    c->add_option("--sweep", mode, "Z sweep: warm, single-step or cold")
        ->check(CLI::IsMember({"warm", "single-step", "cold"}))
        ->capture_default_str();
  }
  zr_recon_options resolve(int threads) const {
    zr_recon_options r = o;
    r.mode = mode == "cold" ? ZR_SWEEP_COLD : mode == "single-step" ? ZR_SWEEP_SINGLE_STEP : ZR_SWEEP_WARM;
    r.threads = threads;
    return r;
  }
};

std::string fmt(double v) {
  if (!std::isfinite(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

double num(const Json& j) { return j.is_number() ? j.get<double>() : std::nan(""); }

Json object_summary(const std::string& objects, const std::string& truth, const zr_planes* result) {
  Planes o = load_planes(objects), t = load_planes(truth);
  char* s = nullptr;
  check(zr_object_summary(o.get(), t.get(), result, &s));
  return take_json(s);
}

void write_summary_csv(const std::string& path, const Json& rows) {
  std::ostringstream out;
  out << "label,pixels,truth_z_low,truth_z_high,truth_degenerate_fraction,z_low,z_low_sigma,z_high,z_high_sigma,"
         "degenerate_fraction,within_sigma\n";
  for (const auto& r : rows) {
    std::string label = r.at("label").get<std::string>();
    if (label.find_first_of(",\"") != std::string::npos) {
      std::string q = "\"";
      for (char c : label) q += c == '"' ? std::string("\"\"") : std::string(1, c);
      label = q + "\"";
    }
    out << label << ',' << r.at("pixels").get<size_t>() << ',' << fmt(num(r["truth_z_low"])) << ','
        << fmt(num(r["truth_z_high"])) << ',' << fmt(num(r["truth_degenerate_fraction"])) << ','
        << fmt(num(r["z_low"])) << ',' << fmt(num(r["z_low_sigma"])) << ',' << fmt(num(r["z_high"])) << ','
        << fmt(num(r["z_high_sigma"])) << ',' << fmt(num(r["degenerate_fraction"])) << ','
        << (r.at("within_sigma").get<bool>() ? 1 : 0) << '\n';
  }
  write_text(path, out.str());
}

// Pixel rectangle "x0,y0,x1,y1", half-open.
struct Rect {
  long x0, y0, x1, y1;
};

Rect parse_rect(const std::string& s) {
  Rect r{};
  char tail = 0;
  if (std::sscanf(s.c_str(), "%ld,%ld,%ld,%ld%c", &r.x0, &r.y0, &r.x1, &r.y1, &tail) != 4 || r.x1 <= r.x0 ||
      r.y1 <= r.y0 || r.x0 < 0 || r.y0 < 0)
    fail(2, "rectangle must be x0,y0,x1,y1 with x0 < x1 and y0 < y1: '" + s + "'");
  return r;
}

std::vector<uint8_t> region_mask(size_t w, size_t h, const std::vector<std::string>& rects,
                                 const std::vector<std::string>& labels, const std::vector<double>* objects,
                                 const std::vector<std::string>& names) {
  std::vector<uint8_t> m(w * h, 0);
  for (const auto& s : rects) {
    const Rect r = parse_rect(s);
    if (static_cast<size_t>(r.x1) > w || static_cast<size_t>(r.y1) > h) fail(2, "rectangle outside the image: " + s);
    for (long y = r.y0; y < r.y1; ++y)
      for (long x = r.x0; x < r.x1; ++x) m[static_cast<size_t>(y) * w + static_cast<size_t>(x)] = 1;
  }
  for (const auto& l : labels) {
    if (!objects) fail(2, "labels require --objects");
    auto it = std::find(names.begin(), names.end(), l);
    if (it == names.end()) fail(2, "unknown object label '" + l + "'");
    const double idx = static_cast<double>(it - names.begin());
    for (size_t i = 0; i < m.size(); ++i)
      if ((*objects)[i] == idx) m[i] = 1;
  }
  return m;
}

double log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const size_t n = x.size();
  double mx = 0, my = 0;
  for (size_t i = 0; i < n; ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0, sxx = 0;
  for (size_t i = 0; i < n; ++i) {
    sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
    sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
  }
  return sxy / sxx;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual-energy radiography atomic-number reconstruction"};
  app.require_subcommand(1);
  Global g;
  app.add_option("--data", g.data, "Cross-section directory (default: $ZRECON_DATA)");
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();

  Json summary;
  std::string command;
  std::function<void()> action;

  // calibrate
  auto* cal = app.add_subcommand("calibrate", "Fit calibration parameters to step-wedge measurements");
  std::string cal_in, cal_out;
  ModelOptions cal_model;
  cal->add_option("--measurements", cal_in, "Measurements JSON")->required();
  cal->add_option("--out", cal_out, "Output parameters JSON")->required();
  cal_model.add_beam(cal);
  cal->callback([&] {
    command = "calibrate";
    action = [&] {
      need_input(cal_in);
      need_output(cal_out);
      Library lib = load_library(g);
      const std::string text = read_text(cal_in);
      const zr_beam_config cfg = cal_model.config();
      char *params = nullptr, *fit = nullptr;
      check(zr_calibrate(lib.get(), &cfg, text.c_str(), &params, &fit));
      const std::string p = take(params);
      write_text(cal_out, Json::parse(p).dump(2) + "\n");
      summary["params"] = Json::parse(p);
      summary["fit"] = take_json(fit);
      summary["measurements_hash"] = file_hash(cal_in);
      summary["out"] = cal_out;
      note("calibration written to " + cal_out);
    };
  });

  // calib-synth
  auto* syn = app.add_subcommand("calib-synth", "Generate exact-model calibration measurements");
  std::string syn_out, syn_targets = "C:20,C:100,Al:50,Fe:40,Fe:100,Cu:60,Sn:50,W:40,Pb:30,Pb:80,U:40";
  ModelOptions syn_model;
  syn->add_option("--targets", syn_targets, "Comma-separated material:lambda list")->capture_default_str();
  syn->add_option("--out", syn_out, "Output measurements JSON")->required();
  syn_model.add(syn);
  syn->callback([&] {
    command = "calib-synth";
    action = [&] {
      syn_model.validate();
      need_output(syn_out);
      Json targets = Json::array();
      std::stringstream ss(syn_targets);
      std::string item;
      while (std::getline(ss, item, ',')) {
        const auto colon = item.rfind(':');
        if (colon == std::string::npos) fail(2, "target must be material:lambda: '" + item + "'");
        double lambda = 0;
        try {
          lambda = std::stod(item.substr(colon + 1));
        } catch (const std::exception&) {
          fail(2, "bad area density in '" + item + "'");
        }
        targets.push_back({{"material", item.substr(0, colon)}, {"lambda_g_cm2", lambda}});
      }
      Library lib = load_library(g);
      Model m = make_model(lib.get(), syn_model);
      char* out = nullptr;
      check(zr_calibration_synthesize(m.get(), targets.dump().c_str(), &out));
      write_text(syn_out, take(out));
      summary["measurements"] = targets.size();
      summary["out"] = syn_out;
    };
  });

  // beam
  auto* beam = app.add_subcommand("beam", "Write the beam spectra and detector response as CSV");
  std::string beam_dir;
  ModelOptions beam_model;
  beam->add_option("--out-dir", beam_dir, "Output directory")->required();
  beam_model.add(beam);
  beam->callback([&] {
    command = "beam";
    action = [&] {
      beam_model.validate();
      need_output_dir(beam_dir);
      Library lib = load_library(g);
      Model m = make_model(lib.get(), beam_model);
      check(zr_model_write_beam(m.get(), beam_dir.c_str()));
      uint64_t h = 0;
      check(zr_model_hash(m.get(), &h));
      summary["model_hash"] = hex(h);
      summary["out_dir"] = beam_dir;
    };
  });

  // tables
  auto* tab = app.add_subcommand("tables", "Precompute (lambda, Z) lookup tables");
  std::string tab_out;
  double tab_lmax = 400.0, tab_step = 0.5;
  ModelOptions tab_model;
  tab->add_option("--out", tab_out, "Output lookup file")->required();
  tab->add_option("--lambda-max", tab_lmax, "Largest area density, g/cm^2")->capture_default_str();
  tab->add_option("--lambda-step", tab_step, "Area density step, g/cm^2")->capture_default_str();
  tab_model.add(tab);
  tab->callback([&] {
    command = "tables";
    action = [&] {
      tab_model.validate();
      need_output(tab_out);
      Library lib = load_library(g);
      Model m = make_model(lib.get(), tab_model);
      zr_lookup* t = nullptr;
      const auto t0 = std::chrono::steady_clock::now();
      check(zr_lookup_build(m.get(), tab_lmax, tab_step, g.threads, &t));
      Lookup lut(t);
      check(zr_lookup_save(lut.get(), tab_out.c_str()));
      char* info = nullptr;
      check(zr_lookup_info(lut.get(), &info));
      summary["tables"] = take_json(info);
      if (!tab_model.params.empty()) summary["params_hash"] = file_hash(tab_model.params);
      summary["out"] = tab_out;
      note("tables built in " +
           fmt(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()) + " s");
    };
  });

  // phantom
  auto* ph = app.add_subcommand("phantom", "Render a phantom: scene, ideal image, object map and ground truth");
  std::string ph_name, ph_scene, ph_dir;
  double ph_pitch = 0.5, ph_lmax = 300.0;
  bool ph_no_truth = false;
  ModelOptions ph_model;
  auto* ph_name_opt = ph->add_option("--name", ph_name, "Built-in phantom: cargo or shielded");
  ph->add_option("--scene", ph_scene, "Scene JSON")->excludes(ph_name_opt);
  ph->add_option("--pitch", ph_pitch, "Pixel pitch for built-in phantoms, cm")->capture_default_str();
  ph->add_option("--lambda-max", ph_lmax, "Pixels beyond this area density are masked")->capture_default_str();
  ph->add_option("--out-dir", ph_dir, "Output directory")->required();
  ph->add_flag("--no-truth", ph_no_truth, "Skip the ground-truth map");
  ph_model.add(ph);
  ph->callback([&] {
    command = "phantom";
    action = [&] {
      if (ph_name.empty() == ph_scene.empty()) fail(2, "give exactly one of --name or --scene");
      if (!ph_scene.empty()) need_input(ph_scene);
      ph_model.validate();
      need_output_dir(ph_dir);
      zr_scene* sp = nullptr;
      if (!ph_name.empty())
        check(zr_scene_builtin(ph_name.c_str(), ph_pitch, &sp));
      else
        check(zr_scene_load(ph_scene.c_str(), &sp));
      Scene scene(sp);
      Library lib = load_library(g);
      Model m = make_model(lib.get(), ph_model);
      const fs::path dir(ph_dir);
      const std::string scene_path = (dir / "scene.json").string(), image_path = (dir / "image.zrp").string(),
                        objects_path = (dir / "objects.zrp").string(), truth_path = (dir / "truth.zrp").string();
      check(zr_scene_save(scene.get(), scene_path.c_str()));
      zr_planes* p = nullptr;
      check(zr_render(scene.get(), m.get(), ph_lmax, g.threads, &p));
      Planes image(p);
      save_planes(image.get(), image_path);
      check(zr_object_map(scene.get(), &p));
      Planes objects(p);
      save_planes(objects.get(), objects_path);
      const Json info = planes_info(image.get());
      summary["width"] = info["width"];
      summary["height"] = info["height"];
      summary["masked_pixels"] = info["meta"]["masked_pixels"];
      summary["scene"] = scene_path;
      summary["image"] = image_path;
      summary["objects"] = objects_path;
      summary["labels"] = planes_info(objects.get())["meta"]["labels"];
      if (!ph_no_truth) {
        note("solving ground truth...");
        check(zr_ground_truth(scene.get(), m.get(), g.threads, &p));
        Planes truth(p);
        save_planes(truth.get(), truth_path);
        summary["truth"] = truth_path;
      }
    };
  });

  // noise
  auto* nz = app.add_subcommand("noise", "Add Gaussian noise to an image");
  std::string nz_in, nz_out;
  double nz_fraction = 0.1;
  std::optional<uint64_t> nz_seed;
  nz->add_option("--image", nz_in, "Input image")->required();
  nz->add_option("--out", nz_out, "Output image")->required();
  nz->add_option("--fraction", nz_fraction, "Noise standard deviation as a fraction of alpha")->capture_default_str();
  nz->add_option("--seed", nz_seed, "Random seed")->required();
  nz->callback([&] {
    command = "noise";
    action = [&] {
      need_output(nz_out);
      Planes in = load_planes(nz_in);
      zr_planes* p = nullptr;
      check(zr_noise(in.get(), nz_fraction, *nz_seed, &p));
      Planes out(p);
      set_meta(out.get(), "source_hash", file_hash(nz_in));
      save_planes(out.get(), nz_out);
      summary["out"] = nz_out;
      summary["seed"] = *nz_seed;
      summary["fraction"] = nz_fraction;
    };
  });

  // upsample
  auto* up = app.add_subcommand("upsample", "Nearest-neighbour resampling of an image");
  std::string up_in, up_out;
  size_t up_factor = 0, up_pixels = 0;
  up->add_option("--image", up_in, "Input image")->required();
  up->add_option("--out", up_out, "Output image")->required();
  auto* upf = up->add_option("--factor", up_factor, "Integer upsampling factor");
  up->add_option("--pixels", up_pixels, "Target pixel count (aspect preserved)")->excludes(upf);
  up->callback([&] {
    command = "upsample";
    action = [&] {
      need_output(up_out);
      Planes in = load_planes(up_in);
      zr_planes* p = nullptr;
      if (up_factor > 0) {
        check(zr_upsample(in.get(), up_factor, &p));
      } else if (up_pixels > 0) {
        size_t w = 0, h = 0;
        check(zr_planes_size(in.get(), &w, &h));
        const double s = std::sqrt(static_cast<double>(up_pixels) / static_cast<double>(w * h));
        check(zr_resample(in.get(), static_cast<size_t>(std::lround(w * s)), static_cast<size_t>(std::lround(h * s)), &p));
      } else {
        fail(2, "give --factor or --pixels");
      }
      Planes out(p);
      set_meta(out.get(), "source_hash", file_hash(up_in));
      save_planes(out.get(), up_out);
      const Json info = planes_info(out.get());
      summary["width"] = info["width"];
      summary["height"] = info["height"];
      summary["out"] = up_out;
    };
  });

  // recon
  auto* rc = app.add_subcommand("recon", "Segment an image and reconstruct lambda and Z per segment");
  std::string rc_image, rc_tables, rc_labels, rc_out, rc_labels_out, rc_report, rc_objects, rc_truth, rc_csv;
  SegmentOptions rc_seg;
  ReconOpts rc_opt;
  rc->add_option("--image", rc_image, "Input image")->required();
  rc->add_option("--tables", rc_tables, "Lookup tables")->required();
  rc->add_option("--labels", rc_labels, "Precomputed label map (skips segmentation)");
  rc->add_option("--out", rc_out, "Output result planes")->required();
  rc->add_option("--labels-out", rc_labels_out, "Write the label map used");
  rc->add_option("--report", rc_report, "Per-segment report JSON");
  rc->add_option("--objects", rc_objects, "Object map for a per-object summary");
  rc->add_option("--truth", rc_truth, "Ground-truth map for a per-object summary");
  rc->add_option("--summary-csv", rc_csv, "Per-object summary CSV (needs --objects and --truth)");
  rc_seg.add(rc);
  rc_opt.add(rc);
  rc->callback([&] {
    command = "recon";
    action = [&] {
      need_output(rc_out);
      for (const auto* s : {&rc_labels_out, &rc_report, &rc_csv})
        if (!s->empty()) need_output(*s);
      if (!rc_csv.empty() && (rc_objects.empty() || rc_truth.empty())) fail(2, "--summary-csv needs --objects and --truth");
      for (const auto* s : {&rc_objects, &rc_truth})
        if (!s->empty()) need_input(*s);
      Planes image = load_planes(rc_image);
      Lookup lut = load_lookup(rc_tables);
      Planes labels;
      zr_planes* p = nullptr;
      const auto t0 = std::chrono::steady_clock::now();
      if (!rc_labels.empty()) {
        labels = load_planes(rc_labels);
      } else {
        check(zr_segment(image.get(), &rc_seg.p, &p));
        labels.reset(p);
      }
      const double t_seg = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      const zr_recon_options opt = rc_opt.resolve(g.threads);
      char* report = nullptr;
      check(zr_reconstruct(image.get(), lut.get(), labels.get(), &rc_seg.p, &opt, &p, &report));
      Planes result(p);
      const double t_all = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      Json rep = take_json(report);
      set_meta(result.get(), "image_hash", file_hash(rc_image));
      set_meta(result.get(), "tables_hash", file_hash(rc_tables));
      if (!rc_labels.empty()) set_meta(result.get(), "labels_hash", file_hash(rc_labels));
      else set_meta(result.get(), "segmentation", rc_seg.json());
      set_meta(result.get(), "sweep", rc_opt.mode);
      save_planes(result.get(), rc_out);
      if (!rc_labels_out.empty()) save_planes(labels.get(), rc_labels_out);
      if (!rc_report.empty()) write_text(rc_report, rep.dump(2) + "\n");
      size_t degenerate = 0, censored = 0;
      for (const auto& s : rep) {
        degenerate += s["degenerate"].get<bool>();
        censored += s["censored"].get<bool>();
      }
      summary["segments"] = rep.size();
      summary["degenerate_segments"] = degenerate;
      summary["censored_segments"] = censored;
      summary["out"] = rc_out;
      if (!rc_objects.empty() && !rc_truth.empty()) {
        const Json rows = object_summary(rc_objects, rc_truth, result.get());
        summary["objects"] = rows;
        if (!rc_csv.empty()) write_summary_csv(rc_csv, rows);
      }
      note("segmentation " + fmt(t_seg) + " s, total " + fmt(t_all) + " s, " + std::to_string(rep.size()) +
           " segments");
    };
  });

  // strip
  auto* st = app.add_subcommand("strip", "Two-pass reconstruction with shield stripping");
  std::string st_image, st_tables, st_labels, st_out, st_summary, st_objects;
  std::vector<std::string> st_shield, st_object, st_shield_labels, st_object_labels;
  SegmentOptions st_seg;
  ReconOpts st_opt;
  ModelOptions st_model;
  st->add_option("--image", st_image, "Input image")->required();
  st->add_option("--tables", st_tables, "Lookup tables built from the same model")->required();
  st->add_option("--labels", st_labels, "Precomputed label map (skips segmentation)");
  st->add_option("--out", st_out, "Output result planes")->required();
  st->add_option("--summary", st_summary, "Shield estimate and per-segment report JSON");
  st->add_option("--shield", st_shield, "Shield rectangle x0,y0,x1,y1 in pixels (repeatable)");
  st->add_option("--object", st_object, "Object rectangle x0,y0,x1,y1 in pixels (repeatable)");
  st->add_option("--objects", st_objects, "Object map, for selecting regions by label");
  st->add_option("--shield-label", st_shield_labels, "Shield region by object label (repeatable)");
  st->add_option("--object-label", st_object_labels, "Object region by object label (repeatable)");
  st_seg.add(st);
  st_opt.add(st);
  st_model.add(st);
  st->callback([&] {
    command = "strip";
    action = [&] {
      need_output(st_out);
      if (!st_summary.empty()) need_output(st_summary);
      st_model.validate();
      if ((st_shield.empty() && st_shield_labels.empty()) || (st_object.empty() && st_object_labels.empty()))
        fail(2, "strip needs a shield region and an object region");
      Planes image = load_planes(st_image);
      Lookup lut = load_lookup(st_tables);
      size_t w = 0, h = 0;
      check(zr_planes_size(image.get(), &w, &h));
      Planes objects;
      std::vector<double> obj;
      std::vector<std::string> names;
      if (!st_objects.empty()) {
        objects = load_planes(st_objects);
        obj = plane_values(objects.get(), "object");
        names = planes_info(objects.get())["meta"].value("labels", std::vector<std::string>{});
        if (obj.size() != w * h) fail(2, "object map does not match the image");
      }
      const auto shield = region_mask(w, h, st_shield, st_shield_labels, st_objects.empty() ? nullptr : &obj, names);
      const auto object = region_mask(w, h, st_object, st_object_labels, st_objects.empty() ? nullptr : &obj, names);
      Library lib = load_library(g);
      Model m = make_model(lib.get(), st_model);
      check(zr_lookup_check_model(lut.get(), m.get()));
      Planes labels;
      if (!st_labels.empty()) labels = load_planes(st_labels);
      const zr_recon_options opt = st_opt.resolve(g.threads);
      zr_planes* p = nullptr;
      char* s = nullptr;
      check(zr_strip(image.get(), m.get(), lut.get(), labels.get(), &st_seg.p, object.data(), shield.data(), &opt, &p, &s));
      Planes result(p);
      Json sj = take_json(s);
      set_meta(result.get(), "image_hash", file_hash(st_image));
      set_meta(result.get(), "tables_hash", file_hash(st_tables));
      save_planes(result.get(), st_out);
      if (!st_summary.empty()) write_text(st_summary, sj.dump(2) + "\n");
      summary["shield"] = sj["shield"];
      summary["prefilter_alpha_h"] = sj["prefilter_alpha_h"];
      summary["prefilter_alpha_l"] = sj["prefilter_alpha_l"];
      summary["segments"] = sj["segments"].size();
      summary["out"] = st_out;
      note("shield estimate: Z=" + std::to_string(sj["shield"]["z"].get<int>()) +
           ", lambda=" + fmt(sj["shield"]["lambda"].get<double>()) + " g/cm^2");
    };
  });

  // ensemble
  auto* en = app.add_subcommand("ensemble", "Median and spread of Z over noisy realizations");
  std::string en_image, en_tables, en_out, en_objects, en_truth, en_csv;
  size_t en_runs = 100;
  double en_fraction = 0.1;
  std::optional<uint64_t> en_seed;
  SegmentOptions en_seg;
  ReconOpts en_opt;
  en->add_option("--image", en_image, "Noiseless input image")->required();
  en->add_option("--tables", en_tables, "Lookup tables")->required();
  en->add_option("--out", en_out, "Output ensemble planes")->required();
  en->add_option("--runs", en_runs, "Number of noisy realizations")->capture_default_str();
  en->add_option("--fraction", en_fraction, "Noise fraction")->capture_default_str();
  en->add_option("--seed", en_seed, "Random seed")->required();
  en->add_option("--objects", en_objects, "Object map for a per-object summary");
  en->add_option("--truth", en_truth, "Ground-truth map for a per-object summary");
  en->add_option("--summary-csv", en_csv, "Per-object summary CSV (needs --objects and --truth)");
  en_seg.add(en);
  en_opt.add(en);
  en->callback([&] {
    command = "ensemble";
    action = [&] {
      need_output(en_out);
      if (!en_csv.empty()) need_output(en_csv);
      if (!en_csv.empty() && (en_objects.empty() || en_truth.empty())) fail(2, "--summary-csv needs --objects and --truth");
      for (const auto* s : {&en_objects, &en_truth})
        if (!s->empty()) need_input(*s);
      Planes image = load_planes(en_image);
      Lookup lut = load_lookup(en_tables);
      const zr_recon_options opt = en_opt.resolve(1);
      zr_planes* p = nullptr;
      const auto t0 = std::chrono::steady_clock::now();
      check(zr_ensemble(image.get(), lut.get(), &en_seg.p, &opt, en_runs, *en_seed, en_fraction, g.threads, &p));
      Planes result(p);
      set_meta(result.get(), "image_hash", file_hash(en_image));
      set_meta(result.get(), "tables_hash", file_hash(en_tables));
      set_meta(result.get(), "segmentation", en_seg.json());
      set_meta(result.get(), "sweep", en_opt.mode);
      save_planes(result.get(), en_out);
      const Json meta = planes_info(result.get())["meta"];
      summary["runs"] = meta["runs"];
      summary["failed_runs"] = meta["failed_runs"];
      summary["seed"] = *en_seed;
      summary["out"] = en_out;
      if (!en_objects.empty() && !en_truth.empty()) {
        const Json rows = object_summary(en_objects, en_truth, result.get());
        summary["objects"] = rows;
        if (!en_csv.empty()) write_summary_csv(en_csv, rows);
      }
      note(std::to_string(en_runs) + " runs in " +
           fmt(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()) + " s");
    };
  });

  // bench
  auto* bn = app.add_subcommand("bench", "Runtime of segmentation plus reconstruction versus image size");
  std::string bn_image, bn_tables, bn_out;
  std::vector<size_t> bn_pixels{250000, 500000, 1000000, 2000000};
  double bn_fraction = 0.1;
  std::optional<uint64_t> bn_seed;
  SegmentOptions bn_seg;
  ReconOpts bn_opt;
  bn->add_option("--image", bn_image, "Noiseless base image")->required();
  bn->add_option("--tables", bn_tables, "Lookup tables")->required();
  bn->add_option("--out", bn_out, "Output CSV")->required();
  bn->add_option("--pixels", bn_pixels, "Target pixel counts (at least 4)")->delimiter(',')->capture_default_str();
  bn->add_option("--fraction", bn_fraction, "Noise fraction")->capture_default_str();
  bn->add_option("--seed", bn_seed, "Random seed")->required();
  bn_seg.add(bn);
  bn_opt.add(bn);
  bn->callback([&] {
    command = "bench";
    action = [&] {
      need_output(bn_out);
      if (bn_pixels.size() < 4) fail(2, "bench needs at least 4 sizes");
      Planes base = load_planes(bn_image);
      Lookup lut = load_lookup(bn_tables);
      zr_planes* p = nullptr;
      check(zr_noise(base.get(), bn_fraction, *bn_seed, &p));
      Planes noisy(p);
      size_t w0 = 0, h0 = 0;
      check(zr_planes_size(noisy.get(), &w0, &h0));
      const zr_recon_options opt = bn_opt.resolve(g.threads);
      std::ostringstream csv;
      csv << "pixels,width,height,segments,segment_seconds,recon_seconds,total_seconds\n";
      std::vector<double> xs, ys;
      Json rows = Json::array();
      for (size_t target : bn_pixels) {
        const double s = std::sqrt(static_cast<double>(target) / static_cast<double>(w0 * h0));
        const size_t w = std::max<size_t>(1, std::lround(w0 * s)), h = std::max<size_t>(1, std::lround(h0 * s));
        check(zr_resample(noisy.get(), w, h, &p));
        Planes img(p);
        const auto t0 = std::chrono::steady_clock::now();
        check(zr_segment(img.get(), &bn_seg.p, &p));
        Planes labels(p);
        const auto t1 = std::chrono::steady_clock::now();
        check(zr_reconstruct(img.get(), lut.get(), labels.get(), &bn_seg.p, &opt, &p, nullptr));
        Planes result(p);
        const auto t2 = std::chrono::steady_clock::now();
        const double ts = std::chrono::duration<double>(t1 - t0).count();
        const double tr = std::chrono::duration<double>(t2 - t1).count();
        const size_t segments = planes_info(result.get())["meta"]["segments"].get<size_t>();
        csv << w * h << ',' << w << ',' << h << ',' << segments << ',' << fmt(ts) << ',' << fmt(tr) << ','
            << fmt(ts + tr) << '\n';
        xs.push_back(static_cast<double>(w * h));
        ys.push_back(ts + tr);
        rows.push_back({{"pixels", w * h}, {"segments", segments}, {"seconds", ts + tr}});
        note(std::to_string(w * h) + " pixels: " + fmt(ts + tr) + " s");
      }
      write_text(bn_out, csv.str());
      summary["rows"] = rows;
      summary["slope"] = log_log_slope(xs, ys);
      summary["out"] = bn_out;
    };
  });

  // export-csv
  auto* ex = app.add_subcommand("export-csv", "Export planes, or a per-object summary, as CSV");
  std::string ex_in, ex_out, ex_objects, ex_truth;
  ex->add_option("--in", ex_in, "Planes file (image, truth, result, ensemble, labels)")->required();
  ex->add_option("--out", ex_out, "Output CSV")->required();
  ex->add_option("--objects", ex_objects, "Object map: write a per-object summary of --in instead");
  ex->add_option("--truth", ex_truth, "Ground-truth map for the per-object summary");
  ex->callback([&] {
    command = "export-csv";
    action = [&] {
      need_output(ex_out);
      Planes in = load_planes(ex_in);
      if (!ex_objects.empty()) {
        if (ex_truth.empty()) fail(2, "per-object summary needs --truth");
        const Json rows = object_summary(ex_objects, ex_truth, in.get());
        write_summary_csv(ex_out, rows);
        summary["objects"] = rows;
      } else {
        check(zr_planes_write_csv(in.get(), ex_out.c_str()));
        const Json info = planes_info(in.get());
        summary["planes"] = info["planes"];
        summary["rows"] = info["width"].get<size_t>() * info["height"].get<size_t>();
      }
      summary["out"] = ex_out;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << '\n';
    std::cout << Json{{"status", "error"}, {"code", 2}, {"message", e.what()}}.dump() << '\n';
    return 2;
  }

  int code = 0;
  try {
    action();
  } catch (const CliError& e) {
    code = e.code;
    std::cerr << "error: " << e.message << '\n';
    summary = Json{{"status", "error"}, {"code", code}, {"message", e.message}};
  } catch (const std::exception& e) {
    code = 1;
    std::cerr << "error: " << e.what() << '\n';
    summary = Json{{"status", "error"}, {"code", code}, {"message", e.what()}};
  }
  if (code == 0) summary["status"] = "ok";
  summary["command"] = command;
  std::cout << summary.dump() << '\n';
  return code;
}
