#include "zrecon/zrecon.h"

#include "zrecon/calibrate.hpp"
#include "zrecon/error.hpp"
#include "zrecon/forward.hpp"
#include "zrecon/groundtruth.hpp"
#include "zrecon/hash.hpp"
#include "zrecon/io.hpp"
#include "zrecon/phantom.hpp"
#include "zrecon/recon.hpp"
#include "zrecon/segment.hpp"
#include "zrecon/summary.hpp"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <memory>
#include <new>
#include <string>

using namespace zrecon;

struct zr_library {
  std::shared_ptr<const CrossSectionLibrary> lib;
};

struct zr_model {
  ForwardModel fm;
};

struct zr_lookup {
  std::shared_ptr<const AttenuationLookup> lut;
};

struct zr_planes {
  PlaneSet ps;
};

struct zr_scene {
  Scene scene;
};

namespace {

thread_local std::string g_error;

zr_status set_error(zr_status code, const std::string& msg) {
  g_error = msg;
  return code;
}

template <class F>
zr_status guarded(F&& f) {
  try {
    f();
    return ZR_OK;
  } catch (const Error& e) {
    return set_error(static_cast<zr_status>(static_cast<int>(e.kind())), e.what());
  } catch (const nlohmann::json::exception& e) {
    return set_error(ZR_ERR_INPUT, std::string("invalid JSON: ") + e.what());
  } catch (const std::bad_alloc&) {
    return set_error(ZR_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(ZR_ERR_INTERNAL, e.what());
  } catch (...) {
    return set_error(ZR_ERR_INTERNAL, "unknown error");
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

template <class T>
void require(const T* p, const char* what) {
  if (!p) fail_input(std::string(what) + " must not be null");
}

BeamConfig to_config(const zr_beam_config* c) {
  BeamConfig cfg;
  if (c) {
    cfg.endpoint_high = c->endpoint_high_mev;
    cfg.endpoint_low = c->endpoint_low_mev;
    cfg.filter_cm = c->filter_cm;
    cfg.crystal_cm = c->crystal_cm;
  }
  if (!(cfg.endpoint_high > cfg.endpoint_low)) fail_input("high-energy endpoint must exceed the low-energy endpoint");
  if (!(cfg.filter_cm >= 0.0) || !(cfg.crystal_cm > 0.0)) fail_input("filter must be >= 0 and crystal length > 0");
  return cfg;
}

SegmentParams to_segment(const zr_segment_params* p) {
  SegmentParams s;
  if (p) {
    s.sigma = p->sigma;
    s.k = p->k;
    s.min_size = p->min_size;
    s.scale = p->scale;
  }
  if (!(s.sigma >= 0.0) || !(s.k >= 0.0) || !(s.scale > 0.0)) fail_input("invalid segmentation parameters");
  return s;
}

ReconOptions to_options(const zr_recon_options* o) {
  ReconOptions r;
  if (o) {
    r.max_iterations = o->max_iterations;
    r.tolerance = o->tolerance;
    r.max_halvings = o->max_halvings;
    r.warm_tolerance = o->warm_tolerance;
    switch (o->mode) {
      case ZR_SWEEP_WARM: r.mode = SweepMode::WarmWithFallback; break;
      case ZR_SWEEP_SINGLE_STEP: r.mode = SweepMode::SingleStep; break;
      case ZR_SWEEP_COLD: r.mode = SweepMode::Cold; break;
      default: fail_input("unknown sweep mode");
    }
    r.threads = o->threads;
    r.dual_margin = o->dual_margin;
  }
  if (r.max_iterations < 1 || !(r.tolerance > 0.0) || r.max_halvings < 0 || !(r.warm_tolerance > 0.0) ||
      !(r.dual_margin >= 0.0))
    fail_input("invalid reconstruction options");
  return r;
}

BeamParams params_or_default(const char* params_json) {
  if (!params_json) return BeamParams{};
  BeamParams p = params_from_json(params_json);
  p.high.validate();
  p.low.validate();
  return p;
}

Beam to_beam(zr_beam b) {
  if (b != ZR_BEAM_HIGH && b != ZR_BEAM_LOW) fail_input("unknown beam");
  return b == ZR_BEAM_HIGH ? Beam::High : Beam::Low;
}

SegmentLabelMap labels_or_segment(const PlaneSet& image, const zr_planes* labels, const zr_segment_params* seg) {
  if (labels) {
    SegmentLabelMap m = SegmentLabelMap::from_planes(labels->ps);
    if (m.width != image.width || m.height != image.height) fail_input("label map does not match the image");
    return m;
  }
  return felzenszwalb_segment(image, to_segment(seg));
}

}  // namespace

extern "C" {

const char* zr_last_error(void) { return g_error.c_str(); }
const char* zr_version(void) { return "1.0.0"; }
void zr_string_free(char* s) { std::free(s); }

zr_status zr_file_hash(const char* path, uint64_t* out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    if (!std::filesystem::is_regular_file(path)) fail_input(std::string("cannot open ") + path);
    *out = file_hash(path);
  });
}

void zr_hash_hex(uint64_t h, char out[17]) {
  if (!out) return;
  const std::string s = hash_hex(h);
  std::memcpy(out, s.c_str(), 17);
}

void zr_beam_config_default(zr_beam_config* cfg) {
  if (!cfg) return;
  const BeamConfig d;
  *cfg = {d.endpoint_high, d.endpoint_low, d.filter_cm, d.crystal_cm};
}

void zr_segment_params_default(zr_segment_params* p) {
  if (!p) return;
  const SegmentParams d;
  *p = {d.sigma, d.k, d.min_size, d.scale};
}

void zr_recon_options_default(zr_recon_options* o) {
  if (!o) return;
  const ReconOptions d;
  *o = {d.max_iterations, d.tolerance, d.max_halvings, d.warm_tolerance, ZR_SWEEP_WARM, d.threads, d.dual_margin};
}

zr_status zr_library_load(const char* dir, zr_library** out) {
  return guarded([&] {
    require(dir, "dir");
    require(out, "out");
    *out = new zr_library{std::make_shared<const CrossSectionLibrary>(CrossSectionLibrary::load(dir))};
  });
}

void zr_library_free(zr_library* lib) { delete lib; }

zr_status zr_library_mu(const zr_library* lib, double z, double e_mev, double out_pe_cs_pp[3]) {
  return guarded([&] {
    require(lib, "library");
    require(out_pe_cs_pp, "out");
    const MuTriple m = lib->lib->mu_fractional(z, e_mev);
    out_pe_cs_pp[0] = m.pe;
    out_pe_cs_pp[1] = m.cs;
    out_pe_cs_pp[2] = m.pp;
  });
}

zr_status zr_model_create(const zr_library* lib, const zr_beam_config* cfg, const char* params_json, zr_model** out) {
  return guarded([&] {
    require(lib, "library");
    require(out, "out");
    *out = new zr_model{ForwardModel(lib->lib, make_beam_model(to_config(cfg), *lib->lib), params_or_default(params_json))};
  });
}

zr_status zr_model_create_from_files(const zr_library* lib, const char* spectrum_high, const char* spectrum_low,
                                     const char* response, const char* params_json, zr_model** out) {
  return guarded([&] {
    require(lib, "library");
    require(spectrum_high, "spectrum_high");
    require(spectrum_low, "spectrum_low");
    require(response, "response");
    require(out, "out");
    BeamModel beam(load_spectrum(spectrum_high), load_spectrum(spectrum_low), load_response(response));
    *out = new zr_model{ForwardModel(lib->lib, std::move(beam), params_or_default(params_json))};
  });
}

void zr_model_free(zr_model* m) { delete m; }

zr_status zr_model_alpha(const zr_model* m, zr_beam beam, double lambda, double z, zr_alpha* out) {
  return guarded([&] {
    require(m, "model");
    require(out, "out");
    if (!(lambda >= 0.0) || !(z >= kMinZ && z <= kMaxZ)) fail_input("lambda must be >= 0 and Z in [1, 100]");
    const AlphaSample s = m->fm.alpha_derivs(to_beam(beam), lambda, z);
    *out = {s.alpha, s.d1, s.d2};
  });
}

zr_status zr_model_params_json(const zr_model* m, char** out) {
  return guarded([&] {
    require(m, "model");
    require(out, "out");
    *out = dup_string(params_to_json(m->fm.params()));
  });
}

zr_status zr_model_hash(const zr_model* m, uint64_t* out) {
  return guarded([&] {
    require(m, "model");
    require(out, "out");
    *out = m->fm.hash();
  });
}

zr_status zr_model_write_beam(const zr_model* m, const char* dir) {
  return guarded([&] {
    require(m, "model");
    require(dir, "dir");
    const std::filesystem::path d(dir);
    std::error_code ec;
    std::filesystem::create_directories(d, ec);
    if (ec) fail_io("cannot create " + d.string());
    const BeamModel& b = m->fm.beam();
    for (Beam which : {Beam::High, Beam::Low}) {
      const Spectrum& s = b.spectrum(which);
      write_spectrum_csv(d / (std::string("spectrum_") + beam_name(which) + ".csv"), s.grid, s.weights, s.endpoint);
    }
    write_spectrum_csv(d / "response.csv", b.grid(), b.response().response, 0.0);
  });
}

zr_status zr_calibrate(const zr_library* lib, const zr_beam_config* cfg, const char* measurements_json,
                       char** params_json, char** summary_json) {
  return guarded([&] {
    require(lib, "library");
    require(measurements_json, "measurements");
    require(params_json, "params_json");
    const auto ms = measurements_from_json(measurements_json);
    const CalibrationFit fit = fit_calibration(ms, lib->lib, make_beam_model(to_config(cfg), *lib->lib));
    std::string summary = Json{{"measurements", ms.size()},
                               {"residual_h", fit.residual_h},
                               {"residual_l", fit.residual_l},
                               {"iterations_h", fit.iterations_h},
                               {"iterations_l", fit.iterations_l}}
                              .dump();
    char* p = dup_string(params_to_json(fit.params));
    if (summary_json) {
      try {
        *summary_json = dup_string(summary);
      } catch (...) {
        std::free(p);
        throw;
      }
    }
    *params_json = p;
  });
}

zr_status zr_calibration_synthesize(const zr_model* m, const char* targets_json, char** measurements_json) {
  return guarded([&] {
    require(m, "model");
    require(targets_json, "targets");
    require(measurements_json, "out");
    const Json j = Json::parse(targets_json);
    if (!j.is_array()) fail_input("targets must be a JSON list");
    std::vector<std::pair<Material, double>> targets;
    for (const auto& e : j) {
      const Json& mat = e.at("material");
      targets.emplace_back(mat.is_number_integer() ? Material::element(mat.get<int>())
                                                   : parse_material(mat.get<std::string>()),
                           e.at("lambda_g_cm2").get<double>());
    }
    *measurements_json = dup_string(measurements_to_json(synthesize_measurements(m->fm, targets)));
  });
}

zr_status zr_lookup_build(const zr_model* m, double lambda_max, double lambda_step, int threads, zr_lookup** out) {
  return guarded([&] {
    require(m, "model");
    require(out, "out");
    *out = new zr_lookup{
        std::make_shared<const AttenuationLookup>(AttenuationLookup::build(m->fm, lambda_max, lambda_step, threads))};
  });
}

zr_status zr_lookup_load(const char* path, zr_lookup** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new zr_lookup{std::make_shared<const AttenuationLookup>(AttenuationLookup::load(path))};
  });
}

zr_status zr_lookup_save(const zr_lookup* t, const char* path) {
  return guarded([&] {
    require(t, "lookup");
    require(path, "path");
    t->lut->save(path);
  });
}

void zr_lookup_free(zr_lookup* t) { delete t; }

zr_status zr_lookup_eval(const zr_lookup* t, zr_beam beam, double lambda, int z, zr_alpha* out) {
  return guarded([&] {
    require(t, "lookup");
    require(out, "out");
    const AlphaSample s = t->lut->eval(to_beam(beam), lambda, z);
    *out = {s.alpha, s.d1, s.d2};
  });
}

zr_status zr_lookup_info(const zr_lookup* t, char** out) {
  return guarded([&] {
    require(t, "lookup");
    require(out, "out");
    const AttenuationLookup& l = *t->lut;
    Json j = {{"lambda_max", l.lambda_max()},
              {"lambda_step", l.lambda_step()},
              {"n_lambda", l.lambda_count()},
              {"z_min", kMinZ},
              {"z_max", kMaxZ},
              {"model_hash", hash_hex(l.model_hash())},
              {"table_hash", hash_hex(l.hash())},
              {"saturated_cells", l.saturated_count()},
              {"params", Json::parse(params_to_json(l.params()))}};
    *out = dup_string(j.dump());
  });
}

zr_status zr_lookup_check_model(const zr_lookup* t, const zr_model* m) {
  return guarded([&] {
    require(t, "lookup");
    require(m, "model");
    if (t->lut->model_hash() != m->fm.hash())
      fail_input("lookup tables were built from a different model (model hash " + hash_hex(t->lut->model_hash()) +
                 ", expected " + hash_hex(m->fm.hash()) + "); rebuild them");
  });
}

zr_status zr_planes_load(const char* path, zr_planes** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new zr_planes{PlaneSet::load(path)};
  });
}

zr_status zr_planes_save(const zr_planes* p, const char* path) {
  return guarded([&] {
    require(p, "planes");
    require(path, "path");
    p->ps.save(path);
  });
}

zr_status zr_planes_write_csv(const zr_planes* p, const char* path) {
  return guarded([&] {
    require(p, "planes");
    require(path, "path");
    p->ps.write_csv(path);
  });
}

void zr_planes_free(zr_planes* p) { delete p; }

zr_status zr_planes_create(const char* kind, size_t width, size_t height, zr_planes** out) {
  return guarded([&] {
    require(kind, "kind");
    require(out, "out");
    if (width == 0 || height == 0) fail_input("planes must have a positive size");
    auto* p = new zr_planes;
    p->ps.kind = kind;
    p->ps.width = width;
    p->ps.height = height;
    *out = p;
  });
}

zr_status zr_planes_add(zr_planes* p, const char* name, const double* values, size_t count) {
  return guarded([&] {
    require(p, "planes");
    require(name, "name");
    require(values, "values");
    if (p->ps.has(name)) fail_input(std::string("plane '") + name + "' already present");
    p->ps.add(name, std::vector<double>(values, values + count));
  });
}

zr_status zr_planes_info(const zr_planes* p, char** out) {
  return guarded([&] {
    require(p, "planes");
    require(out, "out");
    Json j = {{"kind", p->ps.kind},
              {"width", p->ps.width},
              {"height", p->ps.height},
              {"planes", p->ps.names},
              {"meta", p->ps.meta}};
    *out = dup_string(j.dump());
  });
}

zr_status zr_planes_size(const zr_planes* p, size_t* width, size_t* height) {
  return guarded([&] {
    require(p, "planes");
    if (width) *width = p->ps.width;
    if (height) *height = p->ps.height;
  });
}

zr_status zr_planes_get(const zr_planes* p, const char* name, const double** values, size_t* count) {
  return guarded([&] {
    require(p, "planes");
    require(name, "name");
    require(values, "values");
    const auto& v = p->ps.plane(name);
    *values = v.data();
    if (count) *count = v.size();
  });
}

zr_status zr_planes_set_meta(zr_planes* p, const char* key, const char* json_value) {
  return guarded([&] {
    require(p, "planes");
    require(key, "key");
    require(json_value, "value");
    p->ps.meta[key] = Json::parse(json_value);
  });
}

zr_status zr_scene_builtin(const char* name, double pitch_cm, zr_scene** out) {
  return guarded([&] {
    require(name, "name");
    require(out, "out");
    *out = new zr_scene{builtin_phantom(name, pitch_cm)};
  });
}

zr_status zr_scene_load(const char* path, zr_scene** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new zr_scene{read_scene(path)};
  });
}

zr_status zr_scene_save(const zr_scene* s, const char* path) {
  return guarded([&] {
    require(s, "scene");
    require(path, "path");
    write_scene(path, s->scene);
  });
}

void zr_scene_free(zr_scene* s) { delete s; }

zr_status zr_render(const zr_scene* s, const zr_model* m, double lambda_max, int threads, zr_planes** image) {
  return guarded([&] {
    require(s, "scene");
    require(m, "model");
    require(image, "out");
    *image = new zr_planes{render_ideal(s->scene, m->fm, lambda_max, threads).image};
  });
}

zr_status zr_ground_truth(const zr_scene* s, const zr_model* m, int threads, zr_planes** out) {
  return guarded([&] {
    require(s, "scene");
    require(m, "model");
    require(out, "out");
    PlaneSet gt = ground_truth_map(compute_path_lengths(s->scene), m->fm, threads);
    gt.meta["scene_hash"] = hash_hex(Fnv1a().str(scene_to_json(s->scene).dump()).value());
    *out = new zr_planes{std::move(gt)};
  });
}

zr_status zr_object_map(const zr_scene* s, zr_planes** out) {
  return guarded([&] {
    require(s, "scene");
    require(out, "out");
    *out = new zr_planes{object_planes(s->scene)};
  });
}

zr_status zr_noise(const zr_planes* image, double fraction, uint64_t seed, zr_planes** out) {
  return guarded([&] {
    require(image, "image");
    require(out, "out");
    *out = new zr_planes{apply_noise(image->ps, fraction, seed)};
  });
}

zr_status zr_upsample(const zr_planes* image, size_t factor, zr_planes** out) {
  return guarded([&] {
    require(image, "image");
    require(out, "out");
    *out = new zr_planes{upsample(image->ps, factor)};
  });
}

zr_status zr_resample(const zr_planes* image, size_t width, size_t height, zr_planes** out) {
  return guarded([&] {
    require(image, "image");
    require(out, "out");
    *out = new zr_planes{resample(image->ps, width, height)};
  });
}

zr_status zr_segment(const zr_planes* image, const zr_segment_params* params, zr_planes** labels) {
  return guarded([&] {
    require(image, "image");
    require(labels, "out");
    const SegmentParams sp = to_segment(params);
    PlaneSet ps = felzenszwalb_segment(image->ps, sp).to_planes();
    ps.meta["sigma"] = sp.sigma;
    ps.meta["k"] = sp.k;
    ps.meta["min_size"] = sp.min_size;
    ps.meta["scale"] = sp.scale;
    *labels = new zr_planes{std::move(ps)};
  });
}

zr_status zr_reconstruct(const zr_planes* image, const zr_lookup* t, const zr_planes* labels,
                         const zr_segment_params* seg, const zr_recon_options* opt, zr_planes** out,
                         char** report_json) {
  return guarded([&] {
    require(image, "image");
    require(t, "lookup");
    require(out, "out");
    const ReconOptions o = to_options(opt);
    ReconResult r = reconstruct(image->ps, *t->lut, labels_or_segment(image->ps, labels, seg), o);
    std::string report = report_json ? r.report().dump() : std::string();
    auto* p = new zr_planes{std::move(r.planes)};
    if (report_json) {
      try {
        *report_json = dup_string(report);
      } catch (...) {
        delete p;
        throw;
      }
    }
    *out = p;
  });
}

zr_status zr_strip(const zr_planes* image, const zr_model* m, const zr_lookup* t, const zr_planes* labels,
                   const zr_segment_params* seg, const uint8_t* object_region, const uint8_t* shield_region,
                   const zr_recon_options* opt, zr_planes** out, char** summary_json) {
  return guarded([&] {
    require(image, "image");
    require(m, "model");
    require(t, "lookup");
    require(object_region, "object_region");
    require(shield_region, "shield_region");
    require(out, "out");
    if (t->lut->model_hash() != m->fm.hash()) fail_input("lookup tables were built from a different model");
    const ReconOptions o = to_options(opt);
    const std::size_t n = image->ps.width * image->ps.height;
    const double lmax = t->lut->lambda_max(), step = t->lut->lambda_step();
    const int threads = o.threads;
    LookupBuilder builder = [lmax, step, threads](const ForwardModel& fm) {
      return std::make_shared<const AttenuationLookup>(AttenuationLookup::build(fm, lmax, step, threads));
    };
    StripResult r = strip_shield_reconstruct(image->ps, builder, m->fm, *t->lut,
                                             labels_or_segment(image->ps, labels, seg),
                                             std::span(object_region, n), std::span(shield_region, n), o);
    std::string summary;
    if (summary_json) {
      Json shield_z = Json::array();
      for (const auto& z : r.shield_solution.solutions) shield_z.push_back({{"z", z.z}, {"chi2", z.chi2}});
      summary = Json{{"shield", {{"z", r.shield.z}, {"lambda", r.shield.lambda}, {"candidates", shield_z}}},
                     {"prefilter_alpha_h", r.prefilter_alpha_h},
                     {"prefilter_alpha_l", r.prefilter_alpha_l},
                     {"segments", r.object.report()}}
                    .dump();
    }
    auto* p = new zr_planes{std::move(r.object.planes)};
    if (summary_json) {
      try {
        *summary_json = dup_string(summary);
      } catch (...) {
        delete p;
        throw;
      }
    }
    *out = p;
  });
}

zr_status zr_ensemble(const zr_planes* ideal, const zr_lookup* t, const zr_segment_params* seg,
                      const zr_recon_options* opt, size_t runs, uint64_t seed, double fraction, int threads,
                      zr_planes** out) {
  return guarded([&] {
    require(ideal, "image");
    require(t, "lookup");
    require(out, "out");
    ReconOptions o = to_options(opt);
    o.threads = 1;  // parallelism is over runs
    EnsembleConfig cfg;
    cfg.runs = runs;
    cfg.seed = seed;
    cfg.noise_fraction = fraction;
    cfg.threads = threads;
    PlaneSet ps = ensemble_stats(ideal->ps, cfg, segment_and_reconstruct(t->lut, to_segment(seg), o));
    ps.meta["lookup_hash"] = hash_hex(t->lut->hash());
    *out = new zr_planes{std::move(ps)};
  });
}

zr_status zr_object_summary(const zr_planes* objects, const zr_planes* truth, const zr_planes* result,
                            char** out_json) {
  return guarded([&] {
    require(objects, "objects");
    require(truth, "truth");
    require(result, "result");
    require(out_json, "out");
    *out_json = dup_string(summary_to_json(summarize_objects(objects->ps, truth->ps, result->ps)).dump());
  });
}

}  // extern "C"
