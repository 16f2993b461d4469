#include "zrecon/calibrate.hpp"

#include "zrecon/error.hpp"
#include "zrecon/io.hpp"

#include <Eigen/Dense>

#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace zrecon {

namespace {

constexpr int kMaxIterations = 200;
constexpr double kStepTolerance = 1e-10;
constexpr double kJacobianStep = 1e-6;

struct Target {
  std::array<std::vector<double>, 3> comp;  // pe, cs, pp per bin
  double lambda;
  double alpha;
};

double model_alpha(std::span<const double> w, const Target& t, const Eigen::Vector3d& logp,
                   std::vector<double>& scratch) {
  const double a = std::exp(logp[0]), b = std::exp(logp[1]), c = std::exp(logp[2]);
  for (std::size_t i = 0; i < scratch.size(); ++i) scratch[i] = a * t.comp[0][i] + b * t.comp[1][i] + c * t.comp[2][i];
  return evaluate_alpha(w, scratch, t.lambda).alpha;
}

Eigen::VectorXd residuals(std::span<const double> w, const std::vector<Target>& ts, const Eigen::Vector3d& logp,
                          std::vector<double>& scratch) {
  Eigen::VectorXd r(static_cast<Eigen::Index>(ts.size()));
  for (std::size_t k = 0; k < ts.size(); ++k)
    r[static_cast<Eigen::Index>(k)] = model_alpha(w, ts[k], logp, scratch) - ts[k].alpha;
  return r;
}

CalibrationParams fit_beam(std::span<const double> w, const std::vector<Target>& ts, double& residual, int& iters) {
  std::vector<double> scratch(w.size());
  Eigen::Vector3d logp = Eigen::Vector3d::Zero();
  Eigen::VectorXd r = residuals(w, ts, logp, scratch);
  double sse = r.squaredNorm();
  const auto m = static_cast<Eigen::Index>(ts.size());
  for (iters = 1; iters <= kMaxIterations; ++iters) {
    Eigen::MatrixXd J(m, 3);
    for (int j = 0; j < 3; ++j) {
      Eigen::Vector3d hi = logp, lo = logp;
      hi[j] += kJacobianStep;
      lo[j] -= kJacobianStep;
      J.col(j) = (residuals(w, ts, hi, scratch) - residuals(w, ts, lo, scratch)) / (2.0 * kJacobianStep);
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(J);
    qr.setThreshold(1e-10);
    if (qr.rank() < 3) fail_numeric("singular calibration Jacobian: materials are not distinct enough");
    const Eigen::Vector3d step = -qr.solve(r);
    double scale = 1.0;
    Eigen::Vector3d trial;
    Eigen::VectorXd r_trial;
    double sse_trial = 0.0;
    bool accepted = false;
    for (int h = 0; h < 40; ++h, scale *= 0.5) {
      trial = logp + scale * step;
      r_trial = residuals(w, ts, trial, scratch);
      sse_trial = r_trial.squaredNorm();
      if (sse_trial <= sse) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // No descent direction left: the current point is the optimum to working precision.
      break;
    }
    const double moved = (scale * step).cwiseAbs().maxCoeff();
    logp = trial;
    r = r_trial;
    sse = sse_trial;
    if (moved < kStepTolerance) break;
  }
  if (iters > kMaxIterations) fail_numeric("calibration fit did not converge in 200 iterations");
  residual = std::sqrt(sse);
  return {std::exp(logp[0]), std::exp(logp[1]), std::exp(logp[2])};
}

}  // namespace

CalibrationFit fit_calibration(const std::vector<CalibrationMeasurement>& measurements,
                               std::shared_ptr<const CrossSectionLibrary> lib, const BeamModel& beam) {
  if (measurements.size() < 3) fail_input("insufficient calibration data: need at least three measurements");
  std::set<std::string> distinct;
  for (const auto& m : measurements) {
    if (!(m.lambda > 0.0)) fail_input("calibration measurement needs lambda > 0");
    for (double a : {m.alpha_h, m.alpha_l})
      if (!std::isfinite(a) || !(a > 0.0)) fail_input("calibration alpha must be finite and > 0");
    distinct.insert(m.material.key());
  }
  if (distinct.size() < 3) fail_input("insufficient calibration data: need at least three distinct materials");

  const ForwardModel unit(lib, beam, BeamParams{});
  const auto centers = beam.grid().centers();
  std::vector<Target> th, tl;
  for (const auto& m : measurements) {
    Target t;
    for (auto& c : t.comp) c.resize(centers.size());
    for (std::size_t i = 0; i < centers.size(); ++i) {
      const MuTriple mu = lib->mu_material(m.material, centers[i]);
      t.comp[0][i] = mu.pe;
      t.comp[1][i] = mu.cs;
      t.comp[2][i] = mu.pp;
    }
    t.lambda = m.lambda;
    t.alpha = m.alpha_h;
    th.push_back(t);
    t.alpha = m.alpha_l;
    tl.push_back(std::move(t));
  }
  CalibrationFit fit;
  fit.params.high = fit_beam(unit.weights(Beam::High), th, fit.residual_h, fit.iterations_h);
  fit.params.low = fit_beam(unit.weights(Beam::Low), tl, fit.residual_l, fit.iterations_l);
  return fit;
}

std::vector<CalibrationMeasurement> synthesize_measurements(const ForwardModel& fm,
                                                            const std::vector<std::pair<Material, double>>& targets) {
  std::vector<CalibrationMeasurement> out;
  for (const auto& [mat, lambda] : targets) {
    const Layer layer{mat, lambda};
    out.push_back({mat, lambda, fm.alpha_heterogeneous(Beam::High, std::span(&layer, 1)),
                   fm.alpha_heterogeneous(Beam::Low, std::span(&layer, 1))});
  }
  return out;
}

Material parse_material(const std::string& spec) {
  if (spec.empty()) fail_input("empty material");
  if (std::all_of(spec.begin(), spec.end(), [](unsigned char c) { return std::isdigit(c); })) {
    const int z = std::stoi(spec);
    if (z < kMinZ || z > kMaxZ) fail_input("material Z=" + spec + " outside 1..100");
    return Material::element(z);
  }
  return Material::from_formula(spec);
}

std::vector<CalibrationMeasurement> measurements_from_json(const std::string& text) {
  std::vector<CalibrationMeasurement> out;
  try {
    const Json j = Json::parse(text);
    if (!j.is_array()) fail_input("expected a JSON list of measurements");
    for (const auto& e : j) {
      const Json& mat = e.at("material");
      CalibrationMeasurement m;
      m.material = mat.is_number_integer() ? Material::element(mat.get<int>()) : parse_material(mat.get<std::string>());
      m.lambda = e.at("lambda_g_cm2").get<double>();
      m.alpha_h = e.at("alpha_h").get<double>();
      m.alpha_l = e.at("alpha_l").get<double>();
      out.push_back(std::move(m));
    }
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    fail_input(std::string("malformed calibration input: ") + e.what());
  }
  return out;
}

std::string measurements_to_json(const std::vector<CalibrationMeasurement>& ms) {
  Json j = Json::array();
  for (const auto& m : ms)
    j.push_back({{"material", m.material.name()}, {"lambda_g_cm2", m.lambda}, {"alpha_h", m.alpha_h},
                 {"alpha_l", m.alpha_l}});
  return j.dump(2) + "\n";
}

std::vector<CalibrationMeasurement> read_measurements_json(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) fail_input("cannot open " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return measurements_from_json(ss.str());
  } catch (const Error& e) {
    fail_input(file.string() + ": " + e.what());
  }
}

void write_measurements_json(const std::filesystem::path& file, const std::vector<CalibrationMeasurement>& ms) {
  std::ofstream out(file, std::ios::binary);
  if (!out) fail_io("cannot write " + file.string());
  out << measurements_to_json(ms);
}

}  // namespace zrecon
