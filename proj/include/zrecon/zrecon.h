/* C interface to the zrecon dual-energy reconstruction library.
 *
 * Every function returns a zr_status. On failure the message is available from
 * zr_last_error() until the next failing call on the same thread. Objects are
 * opaque handles released with their matching *_free function; strings returned
 * through char** are released with zr_string_free.
 */
#ifndef ZRECON_H
#define ZRECON_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define ZR_API __declspec(dllexport)
#else
#define ZR_API __attribute__((visibility("default")))
#endif

typedef enum zr_status {
  ZR_OK = 0,
  ZR_ERR_INTERNAL = 1,
  ZR_ERR_INPUT = 2,
  ZR_ERR_NUMERIC = 3,
  ZR_ERR_IO = 4
} zr_status;

typedef enum zr_beam { ZR_BEAM_HIGH = 0, ZR_BEAM_LOW = 1 } zr_beam;

typedef enum zr_sweep_mode {
  ZR_SWEEP_WARM = 0,        /* single warm step, full iteration as fallback */
  ZR_SWEEP_SINGLE_STEP = 1, /* single warm step only */
  ZR_SWEEP_COLD = 2         /* full iteration at every Z */
} zr_sweep_mode;

typedef struct zr_library zr_library; /* cross-section tables */
typedef struct zr_model zr_model;     /* calibrated forward model */
typedef struct zr_lookup zr_lookup;   /* precomputed (lambda, Z) tables */
typedef struct zr_planes zr_planes;   /* named 2-D planes: images, maps, labels */
typedef struct zr_scene zr_scene;     /* phantom description */

typedef struct zr_beam_config {
  double endpoint_high_mev;
  double endpoint_low_mev;
  double filter_cm;
  double crystal_cm;
} zr_beam_config;

typedef struct zr_segment_params {
  double sigma;
  double k;
  size_t min_size;
  double scale;
} zr_segment_params;

typedef struct zr_recon_options {
  int max_iterations;
  double tolerance;
  int max_halvings;
  double warm_tolerance;
  int mode; /* zr_sweep_mode */
  int threads;
  double dual_margin; /* chi2 margin within which a second minimum is reported */
} zr_recon_options;

typedef struct zr_alpha {
  double alpha;
  double d1;
  double d2;
} zr_alpha;

ZR_API const char* zr_last_error(void);
ZR_API const char* zr_version(void);
ZR_API void zr_string_free(char* s);
/* Content hash of a file's bytes. */
ZR_API zr_status zr_file_hash(const char* path, uint64_t* out);
/* 16-digit lowercase hex form used in file headers. */
ZR_API void zr_hash_hex(uint64_t h, char out[17]);

ZR_API void zr_beam_config_default(zr_beam_config* cfg);
ZR_API void zr_segment_params_default(zr_segment_params* p);
ZR_API void zr_recon_options_default(zr_recon_options* o);

/* Cross sections */
ZR_API zr_status zr_library_load(const char* dir, zr_library** out);
ZR_API void zr_library_free(zr_library* lib);
ZR_API zr_status zr_library_mu(const zr_library* lib, double z, double e_mev, double out_pe_cs_pp[3]);

/* Forward model. params_json may be NULL for a = b = c = 1. */
ZR_API zr_status zr_model_create(const zr_library* lib, const zr_beam_config* cfg, const char* params_json,
                                 zr_model** out);
ZR_API zr_status zr_model_create_from_files(const zr_library* lib, const char* spectrum_high, const char* spectrum_low,
                                            const char* response, const char* params_json, zr_model** out);
ZR_API void zr_model_free(zr_model* m);
ZR_API zr_status zr_model_alpha(const zr_model* m, zr_beam beam, double lambda, double z, zr_alpha* out);
ZR_API zr_status zr_model_params_json(const zr_model* m, char** out);
ZR_API zr_status zr_model_hash(const zr_model* m, uint64_t* out);
/* Writes spectrum_h.csv, spectrum_l.csv and response.csv into dir. */
ZR_API zr_status zr_model_write_beam(const zr_model* m, const char* dir);

/* Calibration. measurements_json is a JSON list of {material, lambda_g_cm2, alpha_h, alpha_l}.
 * On success *params_json holds the fitted parameters and *summary_json the residuals. */
ZR_API zr_status zr_calibrate(const zr_library* lib, const zr_beam_config* cfg, const char* measurements_json,
                              char** params_json, char** summary_json);
/* Exact-model measurements for targets given as a JSON list of {material, lambda_g_cm2}. */
ZR_API zr_status zr_calibration_synthesize(const zr_model* m, const char* targets_json, char** measurements_json);

/* Lookup tables */
ZR_API zr_status zr_lookup_build(const zr_model* m, double lambda_max, double lambda_step, int threads,
                                 zr_lookup** out);
ZR_API zr_status zr_lookup_load(const char* path, zr_lookup** out);
ZR_API zr_status zr_lookup_save(const zr_lookup* t, const char* path);
ZR_API void zr_lookup_free(zr_lookup* t);
ZR_API zr_status zr_lookup_eval(const zr_lookup* t, zr_beam beam, double lambda, int z, zr_alpha* out);
/* Writes JSON with the grid, hashes and saturated-cell count. */
ZR_API zr_status zr_lookup_info(const zr_lookup* t, char** out);
/* ZR_ERR_INPUT when the tables were not built from this model. */
ZR_API zr_status zr_lookup_check_model(const zr_lookup* t, const zr_model* m);

/* Planes */
ZR_API zr_status zr_planes_load(const char* path, zr_planes** out);
ZR_API zr_status zr_planes_save(const zr_planes* p, const char* path);
ZR_API zr_status zr_planes_write_csv(const zr_planes* p, const char* path);
ZR_API void zr_planes_free(zr_planes* p);
ZR_API zr_status zr_planes_create(const char* kind, size_t width, size_t height, zr_planes** out);
ZR_API zr_status zr_planes_add(zr_planes* p, const char* name, const double* values, size_t count);
ZR_API zr_status zr_planes_info(const zr_planes* p, char** out); /* kind, size, plane names, meta */
ZR_API zr_status zr_planes_size(const zr_planes* p, size_t* width, size_t* height);
/* Borrowed pointer, valid until the planes object is modified or freed. */
ZR_API zr_status zr_planes_get(const zr_planes* p, const char* name, const double** values, size_t* count);
ZR_API zr_status zr_planes_set_meta(zr_planes* p, const char* key, const char* json_value);

/* Scenes and phantoms */
ZR_API zr_status zr_scene_builtin(const char* name, double pitch_cm, zr_scene** out);
ZR_API zr_status zr_scene_load(const char* path, zr_scene** out);
ZR_API zr_status zr_scene_save(const zr_scene* s, const char* path);
ZR_API void zr_scene_free(zr_scene* s);
ZR_API zr_status zr_render(const zr_scene* s, const zr_model* m, double lambda_max, int threads, zr_planes** image);
ZR_API zr_status zr_ground_truth(const zr_scene* s, const zr_model* m, int threads, zr_planes** out);
/* Plane "object": index into meta "labels", or -1. */
ZR_API zr_status zr_object_map(const zr_scene* s, zr_planes** out);

ZR_API zr_status zr_noise(const zr_planes* image, double fraction, uint64_t seed, zr_planes** out);
ZR_API zr_status zr_upsample(const zr_planes* image, size_t factor, zr_planes** out);
/* Nearest-neighbour resampling to width x height. */
ZR_API zr_status zr_resample(const zr_planes* image, size_t width, size_t height, zr_planes** out);

/* Segmentation: output planes hold one "label" plane. */
ZR_API zr_status zr_segment(const zr_planes* image, const zr_segment_params* params, zr_planes** labels);

/* Reconstruction. labels may be NULL, in which case the image is segmented with seg.
 * report_json (optional) receives the per-segment report. */
ZR_API zr_status zr_reconstruct(const zr_planes* image, const zr_lookup* t, const zr_planes* labels,
                                const zr_segment_params* seg, const zr_recon_options* opt, zr_planes** out,
                                char** report_json);

/* Two-pass shield stripping. Regions are per-pixel 0/1 arrays of width*height entries.
 * summary_json receives the shield estimate and per-segment report. */
ZR_API zr_status zr_strip(const zr_planes* image, const zr_model* m, const zr_lookup* t, const zr_planes* labels,
                          const zr_segment_params* seg, const uint8_t* object_region, const uint8_t* shield_region,
                          const zr_recon_options* opt, zr_planes** out, char** summary_json);

/* Ensemble of noisy reconstructions of an ideal image. threads parallelizes over runs. */
ZR_API zr_status zr_ensemble(const zr_planes* ideal, const zr_lookup* t, const zr_segment_params* seg,
                             const zr_recon_options* opt, size_t runs, uint64_t seed, double fraction, int threads,
                             zr_planes** out);

/* Per-object table: mean ground-truth Z and mean reconstructed Z (and spread) for each
 * labelled object. result may be a reconstruction or an ensemble output. JSON list. */
ZR_API zr_status zr_object_summary(const zr_planes* objects, const zr_planes* truth, const zr_planes* result,
                                   char** out_json);

#ifdef __cplusplus
}
#endif

#endif /* ZRECON_H */
