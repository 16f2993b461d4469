#pragma once

#include "zrecon/forward.hpp"

#include <filesystem>
#include <memory>
#include <vector>

namespace zrecon {

struct CalibrationMeasurement {
  Material material;
  double lambda = 0.0;
  double alpha_h = 0.0;
  double alpha_l = 0.0;
};

struct CalibrationFit {
  BeamParams params;
  double residual_h = 0.0;  // Euclidean norm of alpha residuals at the optimum
  double residual_l = 0.0;
  int iterations_h = 0;
  int iterations_l = 0;
};

/// Least-squares fit of (a, b, c) per beam against measured log-transparencies,
/// by damped Gauss-Newton in log-parameters starting from (1, 1, 1).
CalibrationFit fit_calibration(const std::vector<CalibrationMeasurement>& measurements,
                               std::shared_ptr<const CrossSectionLibrary> lib, const BeamModel& beam);

/// Forward-generates exact-model measurements (used for synthetic calibration data).
std::vector<CalibrationMeasurement> synthesize_measurements(const ForwardModel& fm,
                                                            const std::vector<std::pair<Material, double>>& targets);

/// JSON list of {material, lambda_g_cm2, alpha_h, alpha_l}; material is a formula, symbol or Z.
std::vector<CalibrationMeasurement> read_measurements_json(const std::filesystem::path& file);
void write_measurements_json(const std::filesystem::path& file, const std::vector<CalibrationMeasurement>& m);
std::vector<CalibrationMeasurement> measurements_from_json(const std::string& text);
std::string measurements_to_json(const std::vector<CalibrationMeasurement>& m);

/// Accepts an integer Z, an element symbol or a chemical formula.
Material parse_material(const std::string& spec);

}  // namespace zrecon
