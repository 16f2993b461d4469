#include "support.hpp"

#include "zrecon/error.hpp"
#include "zrecon/groundtruth.hpp"
#include "zrecon/phantom.hpp"

#include <doctest.h>

#include <random>

using namespace zrecon;

namespace {

struct Targets {
  double h, l;
};

Targets targets(const std::vector<Layer>& layers) {
  const ForwardModel& fm = zt::model();
  return {fm.alpha_heterogeneous(Beam::High, layers), fm.alpha_heterogeneous(Beam::Low, layers)};
}

void check_reproduces(const EffectiveSolution& s, Targets t) {
  const ForwardModel& fm = zt::model();
  for (const auto& p : s.solutions) {
    CHECK(std::abs(fm.alpha(Beam::High, p.lambda, p.z) - t.h) < 1e-6);
    CHECK(std::abs(fm.alpha(Beam::Low, p.lambda, p.z) - t.l) < 1e-6);
  }
}

// Sign changes of the residual on a dense z grid, independent of the solver's own scan.
std::vector<double> dense_roots(const EffectiveSolver& solver, Targets t, double step) {
  std::vector<double> roots;
  double prev_z = 1.0, prev = solver.residual(t.h, t.l, 1.0);
  const int n = static_cast<int>(std::lround(99.0 / step));
  for (int k = 1; k <= n; ++k) {
    const double z = std::min(100.0, 1.0 + k * step);
    const double r = solver.residual(t.h, t.l, z);
    if ((prev < 0.0) != (r < 0.0)) roots.push_back(0.5 * (prev_z + z));
    prev_z = z;
    prev = r;
  }
  // A root sitting exactly on z = 100 produces no sign change.
  if (std::abs(prev) < 1e-12 && (roots.empty() || roots.back() < 100.0 - step)) roots.push_back(100.0);
  return roots;
}

}  // namespace

TEST_CASE("homogeneous stack") {
  const Targets t = targets({{Material::element(26), 80.0}});
  const EffectiveSolution s = solve_effective(zt::model(), t.h, t.l);
  REQUIRE(s.solutions.size() == 1);
  CHECK(std::abs(s.solutions[0].lambda - 80.0) < 1e-3);
  CHECK(std::abs(s.solutions[0].z - 26.0) < 1e-2);
  CHECK_FALSE(s.degenerate);
  check_reproduces(s, t);
}

TEST_CASE("two layers of one element add") {
  const Targets t = targets({{Material::element(13), 30.0}, {Material::element(13), 45.0}});
  const EffectiveSolution s = solve_effective(zt::model(), t.h, t.l);
  REQUIRE(s.solutions.size() == 1);
  CHECK(std::abs(s.solutions[0].z - 13.0) < 1e-2);
  CHECK(std::abs(s.solutions[0].lambda - 75.0) < 1e-3);
}

TEST_CASE("low-Z mixture lies between its constituents") {
  const Targets t = targets({{Material::from_formula("CH2"), 40.0}});
  const EffectiveSolver solver(zt::model());
  const EffectiveSolution s = solver.solve(t.h, t.l);
  REQUIRE(s.solutions.size() == 1);
  CHECK(s.solutions[0].z > 1.0);
  CHECK(s.solutions[0].z < 6.0);
  const auto dense = dense_roots(solver, t, 0.01);
  REQUIRE(dense.size() == 1);
  CHECK(std::abs(dense[0] - s.solutions[0].z) < 0.01);
  check_reproduces(s, t);
}

TEST_CASE("homogeneous round trip over random samples") {
  const EffectiveSolver solver(zt::model());
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ld(5.0, 250.0);
  std::uniform_int_distribution<int> zd(1, 100);
  const ForwardModel& fm = zt::model();
  int matched = 0;
  for (int k = 0; k < 200; ++k) {
    const double lambda = ld(rng);
    const int z = zd(rng);
    const Targets t{fm.alpha(Beam::High, lambda, z), fm.alpha(Beam::Low, lambda, z)};
    const EffectiveSolution s = solver.solve(t.h, t.l);
    CHECK(s.solutions.size() >= 1);
    CHECK(s.solutions.size() <= 2);
    check_reproduces(s, t);
    for (const auto& p : s.solutions)
      if (std::abs(p.z - z) < 1e-2 && std::abs(p.lambda - lambda) < 1e-3 * lambda) {
        ++matched;
        break;
      }
  }
  CHECK(matched == 200);
}

TEST_CASE("high-Z stacks can be degenerate") {
  // Scan heavy elements and require that dual solutions, when reported, are sorted,
  // match both beams and agree with the dense scan.
  const EffectiveSolver solver(zt::model());
  const ForwardModel& fm = zt::model();
  int dual = 0;
  for (int z = 60; z <= 100; z += 4) {
    const Targets t{fm.alpha(Beam::High, 100.0, z), fm.alpha(Beam::Low, 100.0, z)};
    const EffectiveSolution s = solver.solve(t.h, t.l);
    check_reproduces(s, t);
    if (s.solutions.size() == 2) {
      ++dual;
      CHECK(s.degenerate);
      CHECK(s.solutions[0].z < s.solutions[1].z);
    }
    CHECK(dense_roots(solver, t, 0.05).size() == s.solutions.size());
  }
  CHECK(dual > 0);
}

TEST_CASE("errors") {
  CHECK_THROWS_AS(solve_effective(zt::model(), -1.0, 0.2), Error);
  CHECK_THROWS_AS(solve_effective(zt::model(), 1.0, 0.0), Error);
  // Low beam far less attenuated than any element allows.
  CHECK_THROWS_AS(solve_effective(zt::model(), 2.0, 0.01), Error);
  const EffectiveSolution open = solve_effective(zt::model(), 0.0, 0.0);
  CHECK(open.empty);
}

TEST_CASE("ground truth map of a small scene") {
  Scene scene;
  scene.width = 10;
  scene.height = 4;
  scene.pitch = 1.0;
  Primitive wall;
  wall.shape = "rect";
  wall.x0 = 0;
  wall.x1 = 3;
  wall.y0 = 0;
  wall.y1 = 4;
  wall.material = Material::element(26);
  wall.density = 7.874;
  wall.depth = 0.4;  // two 0.2 cm walls
  Primitive water;
  water.shape = "rect";
  water.x0 = 3;
  water.x1 = 6;
  water.y0 = 0;
  water.y1 = 4;
  water.material = Material::from_formula("H2O");
  water.depth = 30.0;
  Primitive steel_side = wall;
  steel_side.x0 = 3;
  steel_side.x1 = 6;
  scene.primitives = {wall, water, steel_side};

  const PathLengthMap paths = compute_path_lengths(scene);
  const PlaneSet gt = ground_truth_map(paths, zt::model(), 2);
  const auto& z = gt.plane("z_eff_low");
  const auto& lam = gt.plane("lambda_eff");
  const auto& zh = gt.plane("z_eff_high");
  // Steel only.
  CHECK(std::abs(z[0] - 26.0) < 0.05);
  CHECK(std::abs(lam[0] - 7.874 * 0.4) < 1e-3);
  // Water behind steel.
  CHECK(z[4] > 7.0);
  CHECK(z[4] < 26.0);
  CHECK(std::isnan(zh[4]));
  // Empty.
  CHECK(lam[9] == 0.0);
  CHECK(std::isnan(z[9]));

  const auto sols = ground_truth_solutions(paths, zt::model(), 1);
  for (std::size_t i = 0; i < sols.size(); ++i) {
    CHECK(sols[i].solutions.size() <= 2);
    if (!sols[i].empty) {
      const auto layers = paths.layers(i);
      check_reproduces(sols[i], targets(layers));
    }
  }
}
