#pragma once

#include "zrecon/forward.hpp"
#include "zrecon/io.hpp"
#include "zrecon/phantom.hpp"

#include <map>
#include <string>
#include <vector>

namespace zrecon {

struct EffectivePoint {
  double lambda = 0.0;
  double z = 0.0;
};

/// Homogeneous (lambda, Z) pairs reproducing both beams' log-transparency, sorted by z.
struct EffectiveSolution {
  std::vector<EffectivePoint> solutions;
  bool degenerate = false;
  bool empty = false;  // open beam: lambda 0, z undefined
};

/// Matches a pair of target alphas with a homogeneous material of continuous Z.
/// Caches mu~ on the z scan grid, so one solver serves many pixels.
class EffectiveSolver {
public:
  explicit EffectiveSolver(const ForwardModel& fm, double z_step = 0.25);

  EffectiveSolution solve(double alpha_h, double alpha_l) const;

  /// lambda such that alpha_H(lambda, z) = alpha_h.
  double lambda_for(double alpha_h, double z) const;
  /// alpha_L(lambda_for(alpha_h, z), z) - alpha_l.
  double residual(double alpha_h, double alpha_l, double z) const;

private:
  struct Column {
    std::vector<double> mu_h, mu_l;
    double mu_min_h, d1_zero_h;
  };
  Column column(double z) const;
  double lambda_for(double alpha_h, const Column& c, double guess) const;
  double residual(double alpha_h, double alpha_l, const Column& c, double guess, double& lambda) const;

  const ForwardModel* fm_;
  std::vector<double> z_grid_;
  std::vector<Column> columns_;
};

EffectiveSolution solve_effective(const ForwardModel& fm, double alpha_h, double alpha_l);

/// Per-pixel effective solutions for a path-length map. Pixels with no material are
/// empty (lambda 0, z NaN). Planes: lambda_eff (of the low-Z solution), z_eff_low,
/// z_eff_high (NaN when unique).
PlaneSet ground_truth_map(const PathLengthMap& paths, const ForwardModel& fm, int threads = 1);

/// Same, returning the full solution per pixel.
std::vector<EffectiveSolution> ground_truth_solutions(const PathLengthMap& paths, const ForwardModel& fm,
                                                     int threads = 1);

}  // namespace zrecon
