#include "zrecon/forward.hpp"

#include "zrecon/error.hpp"
#include "zrecon/hash.hpp"
#include "zrecon/io.hpp"
#include "zrecon/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace zrecon {

namespace {

// Transparency below 1e-300 cannot be represented as a ratio of detector signals.
constexpr double kOpaqueAlpha = 690.0;

}  // namespace

void CalibrationParams::validate() const {
  for (double v : {a, b, c})
    if (!std::isfinite(v) || !(v > 0.0)) fail_input("calibration parameters must be finite and positive");
}

std::string params_to_json(const BeamParams& p) {
  Json j;
  for (Beam b : {Beam::High, Beam::Low}) j[beam_name(b)] = {{"a", p[b].a}, {"b", p[b].b}, {"c", p[b].c}};
  return j.dump(2) + "\n";
}

BeamParams params_from_json(const std::string& text) {
  BeamParams p;
  try {
    const Json j = Json::parse(text);
    for (Beam b : {Beam::High, Beam::Low}) {
      const Json& s = j.at(beam_name(b));
      p[b] = {s.at("a").get<double>(), s.at("b").get<double>(), s.at("c").get<double>()};
    }
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    fail_input(std::string("malformed calibration params: ") + e.what());
  }
  p.high.validate();
  p.low.validate();
  return p;
}

BeamParams read_params_json(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) fail_input("cannot open " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return params_from_json(ss.str());
}

void write_params_json(const std::filesystem::path& file, const BeamParams& p) {
  std::ofstream out(file, std::ios::binary);
  if (!out) fail_io("cannot write " + file.string());
  out << params_to_json(p);
}

double evaluate_alpha_exponent(std::span<const double> weights, std::span<const double> exponent) {
  double m = std::numeric_limits<double>::infinity();
  bool any_positive = false;
  for (std::size_t i = 0; i < weights.size(); ++i)
    if (weights[i] > 0.0) {
      m = std::min(m, exponent[i]);
      any_positive = any_positive || exponent[i] != 0.0;
    }
  if (!any_positive) return 0.0;
  double s0 = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i)
    if (weights[i] > 0.0) s0 += weights[i] * std::exp(-(exponent[i] - m));
  const double alpha = m - std::log(s0);
  if (alpha > kOpaqueAlpha) fail_numeric("opaque: transparency below 1e-300");
  return alpha;
}

AlphaSample evaluate_alpha(std::span<const double> weights, std::span<const double> mu, double lambda) {
  if (!(lambda >= 0.0)) fail_input("area density must be >= 0");
  double mu_min = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < weights.size(); ++i)
    if (weights[i] > 0.0) mu_min = std::min(mu_min, mu[i]);
  const double x_min = mu_min * lambda;
  double s0 = 0.0, s1 = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!(weights[i] > 0.0)) continue;
    const double e = weights[i] * std::exp(-(mu[i] * lambda - x_min));
    const double u = mu[i] - mu_min;
    s0 += e;
    s1 += e * u;
    s2 += e * u * u;
  }
  AlphaSample out;
  out.alpha = lambda == 0.0 ? 0.0 : x_min - std::log(s0);
  if (out.alpha > kOpaqueAlpha) fail_numeric("opaque: transparency below 1e-300");
  const double t1 = s1 / s0;
  out.d1 = mu_min + t1;
  out.d2 = -std::max(0.0, s2 / s0 - t1 * t1);
  return out;
}

ForwardModel::ForwardModel(std::shared_ptr<const CrossSectionLibrary> lib, BeamModel beam, BeamParams params)
    : lib_(std::move(lib)), beam_(std::move(beam)), params_(params) {
  if (!lib_) fail_input("forward model needs a cross-section library");
  params_.high.validate();
  params_.low.validate();
  if (lib_->min_z() > kMinZ || lib_->max_z() < kMaxZ) fail_input("cross-section library must cover Z = 1..100");
  init();
}

void ForwardModel::init() {
  const std::size_t n = bins();
  const auto centers = beam_.grid().centers();
  components_.resize(static_cast<std::size_t>(kMaxZ) * n);
  for (int z = kMinZ; z <= kMaxZ; ++z)
    for (std::size_t i = 0; i < n; ++i) components_[static_cast<std::size_t>(z - 1) * n + i] = lib_->mu(z, centers[i]);
  for (Beam b : {Beam::High, Beam::Low}) {
    const std::size_t k = idx(b);
    const CalibrationParams& p = params_[b];
    mu_int_[k].resize(components_.size());
    for (std::size_t j = 0; j < components_.size(); ++j) {
      const MuTriple& m = components_[j];
      mu_int_[k][j] = p.a * m.pe + p.b * m.cs + p.c * m.pp;
    }
    const Spectrum& s = beam_.spectrum(b);
    const auto& d = beam_.response().response;
    weights_[k].resize(n);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += d[i] * s.weights[i];
    for (std::size_t i = 0; i < n; ++i) weights_[k][i] = d[i] * s.weights[i] / sum;
  }
  Fnv1a h;
  h.u64(lib_->hash()).u64(beam_.hash());
  for (Beam b : {Beam::High, Beam::Low}) h.f64(params_[b].a).f64(params_[b].b).f64(params_[b].c);
  hash_ = h.value();
}

double ForwardModel::mu_tilde(Beam b, double e, double z) const {
  if (!(e >= beam_.grid().lower_edge() && e <= beam_.grid().upper_edge()))
    fail_input("energy outside the beam grid");
  const MuTriple m = lib_->mu_fractional(z, e);
  const CalibrationParams& p = params_[b];
  return p.a * m.pe + p.b * m.cs + p.c * m.pp;
}

std::span<const double> ForwardModel::mu_tilde_bins(Beam b, int z) const {
  if (z < kMinZ || z > kMaxZ) fail_input("Z=" + std::to_string(z) + " outside 1..100");
  const std::size_t n = bins();
  return std::span<const double>(mu_int_[idx(b)]).subspan(static_cast<std::size_t>(z - 1) * n, n);
}

std::vector<double> ForwardModel::mu_tilde_bins(Beam b, double z) const {
  if (!(z >= kMinZ && z <= kMaxZ)) fail_input("fractional Z outside [1, 100]");
  const int lo = static_cast<int>(std::floor(z));
  const double t = z - lo;
  if (t == 0.0) {
    auto s = mu_tilde_bins(b, lo);
    return {s.begin(), s.end()};
  }
  const std::size_t n = bins();
  const CalibrationParams& p = params_[b];
  std::vector<double> out(n);
  const MuTriple* a = &components_[static_cast<std::size_t>(lo - 1) * n];
  const MuTriple* c = &components_[static_cast<std::size_t>(lo) * n];
  for (std::size_t i = 0; i < n; ++i) {
    const double pe = interp_fractional_z(a[i].pe, c[i].pe, t);
    const double cs = interp_fractional_z(a[i].cs, c[i].cs, t);
    const double pp = interp_fractional_z(a[i].pp, c[i].pp, t);
    out[i] = p.a * pe + p.b * cs + p.c * pp;
  }
  return out;
}

std::vector<double> ForwardModel::mu_tilde_bins(Beam b, const Material& m) const {
  const std::size_t n = bins();
  const CalibrationParams& p = params_[b];
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    MuTriple sum;
    for (const auto& [z, f] : m.fractions()) sum += f * components_[static_cast<std::size_t>(z - 1) * n + i];
    out[i] = p.a * sum.pe + p.b * sum.cs + p.c * sum.pp;
  }
  return out;
}

AlphaSample ForwardModel::alpha_derivs(Beam b, double lambda, double z) const {
  const double zr = std::round(z);
  if (zr == z && z >= kMinZ && z <= kMaxZ)
    return evaluate_alpha(weights_[idx(b)], mu_tilde_bins(b, static_cast<int>(zr)), lambda);
  return evaluate_alpha(weights_[idx(b)], mu_tilde_bins(b, z), lambda);
}

double ForwardModel::alpha_heterogeneous(Beam b, std::span<const Layer> layers) const {
  for (const auto& l : layers)
    if (!(l.lambda >= 0.0)) fail_input("layer area density must be >= 0");
  if (layers.empty()) return 0.0;
  // Canonical order keeps the exponent sum independent of the caller's layer order.
  std::vector<std::size_t> order(layers.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<std::string> keys(layers.size());
  for (std::size_t i = 0; i < layers.size(); ++i) keys[i] = layers[i].material.key();
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    if (keys[x] != keys[y]) return keys[x] < keys[y];
    return layers[x].lambda < layers[y].lambda;
  });
  const std::size_t n = bins();
  std::vector<double> exponent(n, 0.0);
  for (std::size_t j : order) {
    const Layer& l = layers[j];
    const int z = l.material.single_z();
    if (z != 0) {
      const auto mu = mu_tilde_bins(b, z);
      for (std::size_t i = 0; i < n; ++i) exponent[i] += mu[i] * l.lambda;
    } else {
      const auto mu = mu_tilde_bins(b, l.material);
      for (std::size_t i = 0; i < n; ++i) exponent[i] += mu[i] * l.lambda;
    }
  }
  return evaluate_alpha_exponent(weights_[idx(b)], exponent);
}

ForwardModel ForwardModel::with_prefilter(std::span<const Layer> layers) const {
  ForwardModel out = *this;
  if (std::all_of(layers.begin(), layers.end(), [](const Layer& l) { return l.lambda == 0.0; })) return out;
  const std::size_t n = bins();
  Fnv1a h;
  h.u64(hash_);
  for (Beam b : {Beam::High, Beam::Low}) {
    const std::size_t k = idx(b);
    std::vector<double> exponent(n, 0.0);
    for (const Layer& l : layers) {
      if (!(l.lambda >= 0.0)) fail_input("prefilter area density must be >= 0");
      const auto mu = mu_tilde_bins(b, l.material);
      for (std::size_t i = 0; i < n; ++i) exponent[i] += mu[i] * l.lambda;
    }
    out.prefilter_alpha_[k] = prefilter_alpha_[k] + evaluate_alpha_exponent(weights_[k], exponent);
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i)
      if (weights_[k][i] > 0.0) m = std::min(m, exponent[i]);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      out.weights_[k][i] = weights_[k][i] > 0.0 ? weights_[k][i] * std::exp(-(exponent[i] - m)) : 0.0;
      sum += out.weights_[k][i];
    }
    if (!(sum > 0.0)) fail_numeric("prefilter removes the whole beam");
    for (double& w : out.weights_[k]) w /= sum;
    h.f64s(exponent);
  }
  out.hash_ = h.value();
  return out;
}

// --- lookup tables -----------------------------------------------------------

AttenuationLookup AttenuationLookup::build(const ForwardModel& fm, double lambda_max, double lambda_step, int threads) {
  if (!(lambda_max > 0.0) || !(lambda_step > 0.0)) fail_input("lookup grid: lambda_max and step must be positive");
  const double steps = lambda_max / lambda_step;
  if (std::abs(steps - std::round(steps)) > 1e-9 * steps) fail_input("lookup grid: lambda_max must be a multiple of step");
  AttenuationLookup t;
  t.lambda_max_ = lambda_max;
  t.step_ = lambda_step;
  t.n_lambda_ = static_cast<std::size_t>(std::llround(steps)) + 1;
  t.model_hash_ = fm.hash();
  t.params_ = fm.params();
  for (auto& c : t.cells_) c.resize(static_cast<std::size_t>(kMaxZ) * t.n_lambda_);
  parallel_for(static_cast<std::size_t>(kMaxZ), threads, [&](std::size_t zi) {
    const int z = static_cast<int>(zi) + 1;
    for (Beam b : {Beam::High, Beam::Low}) {
      AlphaSample* col = t.cells_[b == Beam::High ? 0 : 1].data() + zi * t.n_lambda_;
      const auto mu = fm.mu_tilde_bins(b, z);
      for (std::size_t i = 0; i < t.n_lambda_; ++i)
        col[i] = evaluate_alpha(fm.weights(b), mu, static_cast<double>(i) * lambda_step);
    }
  });
  t.finalize();
  return t;
}

void AttenuationLookup::finalize() {
  inv_step_ = 1.0 / step_;
  const double sat_alpha = -std::log(kSaturationTransparency);
  Fnv1a h;
  h.f64(lambda_max_).f64(step_).u64(model_hash_);
  for (int k = 0; k < 2; ++k) {
    saturated_[k].assign(cells_[k].size(), 0);
    for (std::size_t j = 0; j < cells_[k].size(); ++j) {
      const AlphaSample& c = cells_[k][j];
      if (!std::isfinite(c.alpha) || c.alpha > sat_alpha) saturated_[k][j] = 1;
      h.f64(c.alpha).f64(c.d1).f64(c.d2);
    }
  }
  table_hash_ = h.value();
}

AlphaSample AttenuationLookup::eval(Beam b, double lambda, int z) const {
  if (z < kMinZ || z > kMaxZ) fail_input("Z outside lookup table");
  if (!(lambda >= 0.0) || lambda > lambda_max_) fail_input("area density out of table");
  return eval_unchecked(b, lambda, z);
}

bool AttenuationLookup::saturated(Beam b, std::size_t lambda_index, int z) const {
  return saturated_[b == Beam::High ? 0 : 1][static_cast<std::size_t>(z - 1) * n_lambda_ + lambda_index] != 0;
}

std::size_t AttenuationLookup::saturated_count() const noexcept {
  std::size_t n = 0;
  for (const auto& s : saturated_)
    for (auto v : s) n += v;
  return n;
}

void AttenuationLookup::save(const std::filesystem::path& file) const {
  Json h;
  h["format"] = std::string(kLookupMagic);
  h["lambda_max"] = lambda_max_;
  h["lambda_step"] = step_;
  h["n_lambda"] = n_lambda_;
  h["z_min"] = kMinZ;
  h["z_max"] = kMaxZ;
  h["layout"] = "row-major [z][lambda]";
  h["arrays"] = {"alpha_h", "alpha_l", "d1_h", "d1_l", "d2_h", "d2_l"};
  h["beam_hash"] = hash_hex(model_hash_);
  h["table_hash"] = hash_hex(table_hash_);
  h["params"] = Json::parse(params_to_json(params_));
  h["saturated_cells"] = saturated_count();
  std::vector<std::vector<double>> arrays(6, std::vector<double>(cells_[0].size()));
  for (int k = 0; k < 2; ++k)
    for (std::size_t j = 0; j < cells_[k].size(); ++j) {
      arrays[static_cast<std::size_t>(k)][j] = cells_[k][j].alpha;
      arrays[static_cast<std::size_t>(2 + k)][j] = cells_[k][j].d1;
      arrays[static_cast<std::size_t>(4 + k)][j] = cells_[k][j].d2;
    }
  std::vector<std::span<const double>> spans(arrays.begin(), arrays.end());
  write_container(file, kLookupMagic, std::move(h), spans);
}

AttenuationLookup AttenuationLookup::load(const std::filesystem::path& file) {
  Container c = read_container(file, kLookupMagic);
  AttenuationLookup t;
  try {
    t.lambda_max_ = c.header.at("lambda_max").get<double>();
    t.step_ = c.header.at("lambda_step").get<double>();
    t.n_lambda_ = c.header.at("n_lambda").get<std::size_t>();
    t.model_hash_ = std::stoull(c.header.at("beam_hash").get<std::string>(), nullptr, 16);
    t.params_ = params_from_json(c.header.at("params").dump());
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    fail_input(file.string() + ": malformed lookup header");
  }
  const std::size_t cells = static_cast<std::size_t>(kMaxZ) * t.n_lambda_;
  if (t.n_lambda_ < 2 || c.arrays.size() != 6) fail_input(file.string() + ": lookup must hold six arrays");
  for (const auto& a : c.arrays)
    if (a.size() != cells) fail_input(file.string() + ": lookup array size mismatch");
  for (int k = 0; k < 2; ++k) {
    t.cells_[k].resize(cells);
    for (std::size_t j = 0; j < cells; ++j)
      t.cells_[k][j] = {c.arrays[static_cast<std::size_t>(k)][j], c.arrays[static_cast<std::size_t>(2 + k)][j],
                        c.arrays[static_cast<std::size_t>(4 + k)][j]};
  }
  t.finalize();
  const std::string stored = c.header.value("table_hash", std::string());
  if (!stored.empty() && stored != hash_hex(t.table_hash_)) fail_input(file.string() + ": table hash mismatch");
  return t;
}

}  // namespace zrecon
