#include "zrecon/groundtruth.hpp"

#include "zrecon/error.hpp"
#include "zrecon/hash.hpp"
#include "zrecon/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace zrecon {

namespace {

constexpr double kResidualTol = 1e-10;
constexpr double kDuplicateZ = 1e-3;

}  // namespace

EffectiveSolver::EffectiveSolver(const ForwardModel& fm, double z_step) : fm_(&fm) {
  if (!(z_step > 0.0)) fail_input("z scan step must be positive");
  const auto n = static_cast<std::size_t>(std::llround((kMaxZ - kMinZ) / z_step));
  for (std::size_t i = 0; i <= n; ++i) z_grid_.push_back(std::min<double>(kMaxZ, kMinZ + static_cast<double>(i) * z_step));
  for (double z : z_grid_) columns_.push_back(column(z));
}

EffectiveSolver::Column EffectiveSolver::column(double z) const {
  Column c;
  c.mu_h = fm_->mu_tilde_bins(Beam::High, z);
  c.mu_l = fm_->mu_tilde_bins(Beam::Low, z);
  const auto w = fm_->weights(Beam::High);
  c.mu_min_h = std::numeric_limits<double>::infinity();
  c.d1_zero_h = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i)
    if (w[i] > 0.0) {
      c.mu_min_h = std::min(c.mu_min_h, c.mu_h[i]);
      c.d1_zero_h += w[i] * c.mu_h[i];
    }
  return c;
}

double EffectiveSolver::lambda_for(double alpha_h, const Column& c, double guess) const {
  if (alpha_h == 0.0) return 0.0;
  // alpha is concave and increasing with slope between mu_min and d1(0), which brackets the root.
  double lo = alpha_h / c.d1_zero_h, hi = alpha_h / c.mu_min_h;
  double x = (guess > lo && guess < hi) ? guess : lo;
  const auto w = fm_->weights(Beam::High);
  for (int it = 0; it < 100; ++it) {
    const AlphaSample s = evaluate_alpha(w, c.mu_h, x);
    const double f = s.alpha - alpha_h;
    if (f == 0.0) return x;
    if (f < 0.0)
      lo = x;
    else
      hi = x;
    double next = x - f / s.d1;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 1e-15 * std::max(1.0, x)) return next;
    x = next;
    if (hi - lo <= 4e-16 * hi) return x;
  }
  return x;
}

double EffectiveSolver::residual(double alpha_h, double alpha_l, const Column& c, double guess, double& lambda) const {
  lambda = lambda_for(alpha_h, c, guess);
  return evaluate_alpha(fm_->weights(Beam::Low), c.mu_l, lambda).alpha - alpha_l;
}

double EffectiveSolver::lambda_for(double alpha_h, double z) const { return lambda_for(alpha_h, column(z), 0.0); }

double EffectiveSolver::residual(double alpha_h, double alpha_l, double z) const {
  double lambda = 0.0;
  return residual(alpha_h, alpha_l, column(z), 0.0, lambda);
}

EffectiveSolution EffectiveSolver::solve(double alpha_h, double alpha_l) const {
  EffectiveSolution out;
  if (!(alpha_h >= 0.0 && alpha_l >= 0.0) || !std::isfinite(alpha_h) || !std::isfinite(alpha_l))
    fail_input("effective solve: targets must be finite and >= 0");
  if (alpha_h == 0.0 && alpha_l == 0.0) {
    out.empty = true;
    return out;
  }
  const double sat = -std::log(kSaturationTransparency);
  if (alpha_h > sat || alpha_l > sat) fail_numeric("effective solve: target alpha is saturated");
  if (alpha_h == 0.0 || alpha_l == 0.0) fail_numeric("unrepresentable measurement: one beam is unattenuated");

  const std::size_t n = z_grid_.size();
  std::vector<double> r(n), lam(n);
  double guess = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    r[i] = residual(alpha_h, alpha_l, columns_[i], guess, lam[i]);
    guess = lam[i];
  }
  std::vector<EffectivePoint> roots;
  auto push = [&](double z, double l) {
    for (const auto& p : roots)
      if (std::abs(p.z - z) < kDuplicateZ) return;
    roots.push_back({l, z});
  };
  for (std::size_t i = 0; i < n; ++i)
    if (std::abs(r[i]) < kResidualTol) push(z_grid_[i], lam[i]);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (std::abs(r[i]) < kResidualTol || std::abs(r[i + 1]) < kResidualTol) continue;
    if ((r[i] < 0.0) == (r[i + 1] < 0.0)) continue;
    // Illinois false position on the sign change.
    double a = z_grid_[i], b = z_grid_[i + 1], ra = r[i], rb = r[i + 1];
    double zm = 0.5 * (a + b), lm = lam[i];
    int side = 0;
    for (int it = 0; it < 200; ++it) {
      zm = b - rb * (b - a) / (rb - ra);
      if (!(zm > a && zm < b)) zm = 0.5 * (a + b);
      const double rm = residual(alpha_h, alpha_l, column(zm), lm, lm);
      if (std::abs(rm) < kResidualTol || b - a < 1e-13) break;
      if ((rm < 0.0) == (ra < 0.0)) {
        a = zm;
        ra = rm;
        if (side == -1) rb *= 0.5;
        side = -1;
      } else {
        b = zm;
        rb = rm;
        if (side == 1) ra *= 0.5;
        side = 1;
      }
    }
    push(zm, lm);
  }
  if (roots.empty()) fail_numeric("unrepresentable measurement: no Z in [1, 100] reproduces both beams");
  std::sort(roots.begin(), roots.end(), [](const auto& x, const auto& y) { return x.z < y.z; });
  if (roots.size() > 2) fail_numeric("effective solve found " + std::to_string(roots.size()) + " solutions");
  out.solutions = std::move(roots);
  out.degenerate = out.solutions.size() == 2;
  return out;
}

EffectiveSolution solve_effective(const ForwardModel& fm, double alpha_h, double alpha_l) {
  return EffectiveSolver(fm).solve(alpha_h, alpha_l);
}

std::vector<EffectiveSolution> ground_truth_solutions(const PathLengthMap& paths, const ForwardModel& fm,
                                                     int threads) {
  const std::size_t n = paths.pixels.size();
  std::map<std::vector<std::pair<int, double>>, std::size_t> unique;
  std::vector<std::size_t> which(n), representative;
  for (std::size_t i = 0; i < n; ++i) {
    auto [it, inserted] = unique.emplace(paths.pixels[i], representative.size());
    if (inserted) representative.push_back(i);
    which[i] = it->second;
  }
  const EffectiveSolver solver(fm);
  std::vector<EffectiveSolution> sol(representative.size());
  parallel_for(representative.size(), threads, [&](std::size_t u) {
    const auto layers = paths.layers(representative[u]);
    if (layers.empty()) {
      sol[u].empty = true;
      return;
    }
    sol[u] = solver.solve(fm.alpha_heterogeneous(Beam::High, layers), fm.alpha_heterogeneous(Beam::Low, layers));
  });
  std::vector<EffectiveSolution> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = sol[which[i]];
  return out;
}

PlaneSet ground_truth_map(const PathLengthMap& paths, const ForwardModel& fm, int threads) {
  const auto sol = ground_truth_solutions(paths, fm, threads);
  const std::size_t n = sol.size();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> lam(n, 0.0), zlo(n, nan), zhi(n, nan);
  for (std::size_t i = 0; i < n; ++i) {
    if (sol[i].empty) continue;
    lam[i] = sol[i].solutions.front().lambda;
    zlo[i] = sol[i].solutions.front().z;
    if (sol[i].degenerate) zhi[i] = sol[i].solutions.back().z;
  }
  PlaneSet ps;
  ps.kind = "groundtruth";
  ps.width = paths.width;
  ps.height = paths.height;
  ps.add("lambda_eff", std::move(lam));
  ps.add("z_eff_low", std::move(zlo));
  ps.add("z_eff_high", std::move(zhi));
  ps.meta["model_hash"] = hash_hex(fm.hash());
  return ps;
}

}  // namespace zrecon
