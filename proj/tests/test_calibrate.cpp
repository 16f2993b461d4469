#include "support.hpp"

#include "zrecon/calibrate.hpp"
#include "zrecon/error.hpp"

#include <doctest.h>

#include <random>

using namespace zrecon;

namespace {

std::vector<std::pair<Material, double>> canonical() {
  return {{Material::element(6), 100.0}, {Material::element(26), 100.0}, {Material::element(82), 100.0}};
}

std::vector<CalibrationMeasurement> synth(const BeamParams& p, const std::vector<std::pair<Material, double>>& targets) {
  const ForwardModel fm(zt::library(), zt::model().beam(), p);
  return synthesize_measurements(fm, targets);
}

double max_diff(const CalibrationParams& a, const CalibrationParams& b) {
  return std::max({std::abs(a.a - b.a), std::abs(a.b - b.b), std::abs(a.c - b.c)});
}

double residual_norm(const BeamParams& p, const std::vector<CalibrationMeasurement>& ms, Beam b) {
  const ForwardModel fm(zt::library(), zt::model().beam(), p);
  double s = 0.0;
  for (const auto& m : ms) {
    const Layer layer{m.material, m.lambda};
    const double r = fm.alpha_heterogeneous(b, std::span(&layer, 1)) - (b == Beam::High ? m.alpha_h : m.alpha_l);
    s += r * r;
  }
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("unit parameters are recovered") {
  const auto ms = synth(BeamParams{}, canonical());
  const CalibrationFit fit = fit_calibration(ms, zt::library(), zt::model().beam());
  CHECK(max_diff(fit.params.high, CalibrationParams{}) < 1e-6);
  CHECK(max_diff(fit.params.low, CalibrationParams{}) < 1e-6);
  CHECK(fit.residual_h < 1e-9);
}

TEST_CASE("perturbed parameters are recovered") {
  const CalibrationParams truth{1.1, 0.97, 1.08};
  const auto ms = synth(BeamParams{truth, truth}, canonical());
  const CalibrationFit fit = fit_calibration(ms, zt::library(), zt::model().beam());
  CHECK(max_diff(fit.params.high, truth) < 1e-6);
  CHECK(max_diff(fit.params.low, truth) < 1e-6);
}

TEST_CASE("random parameters, residual never worse than the starting point") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.8, 1.2);
  for (int k = 0; k < 5; ++k) {
    const BeamParams truth{{u(rng), u(rng), u(rng)}, {u(rng), u(rng), u(rng)}};
    const auto ms = synth(truth, canonical());
    const CalibrationFit fit = fit_calibration(ms, zt::library(), zt::model().beam());
    CHECK(max_diff(fit.params.high, truth.high) < 1e-5);
    CHECK(max_diff(fit.params.low, truth.low) < 1e-5);
    for (Beam b : {Beam::High, Beam::Low})
      CHECK(residual_norm(fit.params, ms, b) <= residual_norm(BeamParams{}, ms, b));
  }
}

TEST_CASE("a fourth consistent measurement leaves the optimum in place") {
  const BeamParams truth{{1.05, 0.95, 1.1}, {0.9, 1.02, 0.85}};
  auto targets = canonical();
  const CalibrationFit three = fit_calibration(synth(truth, targets), zt::library(), zt::model().beam());
  targets.push_back({Material::element(50), 60.0});
  const CalibrationFit four = fit_calibration(synth(truth, targets), zt::library(), zt::model().beam());
  CHECK(max_diff(three.params.high, four.params.high) < 1e-6);
  CHECK(max_diff(three.params.low, four.params.low) < 1e-6);
}

TEST_CASE("insufficient data") {
  auto ms = synth(BeamParams{}, canonical());
  ms.pop_back();
  try {
    fit_calibration(ms, zt::library(), zt::model().beam());
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Input);
    CHECK(std::string(e.what()).find("insufficient calibration data") != std::string::npos);
  }
  // Three rows of one material are not three materials.
  auto same = synth(BeamParams{}, {{Material::element(26), 50.0}, {Material::element(26), 100.0}, {Material::element(26), 150.0}});
  CHECK_THROWS_AS(fit_calibration(same, zt::library(), zt::model().beam()), Error);

  auto bad = synth(BeamParams{}, canonical());
  bad[0].lambda = 0.0;
  CHECK_THROWS_AS(fit_calibration(bad, zt::library(), zt::model().beam()), Error);
  bad = synth(BeamParams{}, canonical());
  bad[1].alpha_l = std::nan("");
  CHECK_THROWS_AS(fit_calibration(bad, zt::library(), zt::model().beam()), Error);
}

TEST_CASE("measurement files") {
  const auto ms = synth(BeamParams{}, {{Material::element(6), 100.0}, {Material::from_formula("H2O"), 40.0}});
  const auto back = measurements_from_json(measurements_to_json(ms));
  REQUIRE(back.size() == 2);
  CHECK(back[1].material.key() == ms[1].material.key());
  CHECK(back[0].alpha_h == ms[0].alpha_h);
  CHECK(back[1].lambda == 40.0);

  const auto parsed = measurements_from_json(
      R"([{"material": 26, "lambda_g_cm2": 10, "alpha_h": 0.3, "alpha_l": 0.4},
          {"material": "Pb", "lambda_g_cm2": 10, "alpha_h": 0.5, "alpha_l": 0.6}])");
  CHECK(parsed[0].material.single_z() == 26);
  CHECK(parsed[1].material.single_z() == 82);
  CHECK_THROWS_AS(measurements_from_json("{}"), Error);
  CHECK_THROWS_AS(measurements_from_json(R"([{"material": 26}])"), Error);
  CHECK_THROWS_AS(parse_material("101"), Error);
}
