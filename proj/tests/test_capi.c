/* Compiled as C: the header must be usable without a C++ compiler. */
#include "zrecon/zrecon.h"

#include <math.h>
#include <string.h>

int capi_c_pipeline(const char* data_dir) {
  zr_library* lib = NULL;
  zr_model* model = NULL;
  zr_lookup* lut = NULL;
  zr_planes* img = NULL;
  zr_planes* out = NULL;
  zr_beam_config cfg;
  zr_segment_params seg;
  zr_recon_options opt;
  zr_alpha a;
  double ah[64], al[64];
  const double* z = NULL;
  size_t n = 0, i;
  int rc = 1;

  zr_beam_config_default(&cfg);
  zr_segment_params_default(&seg);
  zr_recon_options_default(&opt);
  if (zr_library_load(data_dir, &lib) != ZR_OK) goto done;
  if (zr_model_create(lib, &cfg, NULL, &model) != ZR_OK) goto done;
  if (zr_lookup_build(model, 200.0, 1.0, 1, &lut) != ZR_OK) goto done;
  if (zr_model_alpha(model, ZR_BEAM_HIGH, 50.0, 13.0, &a) != ZR_OK) goto done;
  for (i = 0; i < 64; ++i) ah[i] = a.alpha;
  if (zr_model_alpha(model, ZR_BEAM_LOW, 50.0, 13.0, &a) != ZR_OK) goto done;
  for (i = 0; i < 64; ++i) al[i] = a.alpha;
  if (zr_planes_create("image", 8, 8, &img) != ZR_OK) goto done;
  if (zr_planes_add(img, "alpha_h", ah, 64) != ZR_OK) goto done;
  if (zr_planes_add(img, "alpha_l", al, 64) != ZR_OK) goto done;
  if (zr_reconstruct(img, lut, NULL, &seg, &opt, &out, NULL) != ZR_OK) goto done;
  if (zr_planes_get(out, "z_low", &z, &n) != ZR_OK || n != 64) goto done;
  for (i = 0; i < n; ++i)
    if (z[i] != 13.0) goto done;
  rc = 0;
done:
  zr_planes_free(out);
  zr_planes_free(img);
  zr_lookup_free(lut);
  zr_model_free(model);
  zr_library_free(lib);
  return rc;
}
