#include "support.hpp"

#include "zrecon/error.hpp"
#include "zrecon/phantom.hpp"

#include <doctest.h>

using namespace zrecon;

namespace {

std::size_t count_shape(const Scene& s, const std::string& shape) {
  std::size_t n = 0;
  for (const auto& p : s.primitives) n += p.shape == shape;
  return n;
}

double sum(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s;
}

}  // namespace

TEST_CASE("empty scene renders open beam") {
  Scene s;
  s.width = 10;
  s.height = 5;
  s.pitch = 1.0;
  const Rendered r = render_ideal(s, zt::model());
  CHECK(sum(r.image.plane("alpha_h")) == 0.0);
  CHECK(sum(r.image.plane("alpha_l")) == 0.0);
  CHECK(r.image.plane("sigma_h")[0] == kSigmaFloor);
}

TEST_CASE("iron box interior collapses to the single-layer model") {
  Scene s;
  s.width = 20;
  s.height = 20;
  s.pitch = 0.5;
  Primitive box;
  box.shape = "rect";
  box.x0 = box.y0 = 5;
  box.x1 = box.y1 = 15;
  box.material = Material::element(26);
  box.density = 7.9;
  box.depth = 10.0;
  s.primitives = {box};
  const Rendered r = render_ideal(s, zt::model());
  const std::size_t centre = 20 * 40 + 20;
  CHECK(r.image.plane("alpha_h")[centre] == zt::model().alpha(Beam::High, 79.0, 26));
  CHECK(r.image.plane("alpha_l")[centre] == zt::model().alpha(Beam::Low, 79.0, 26));
  CHECK(r.paths.total_lambda(centre) == doctest::Approx(79.0).epsilon(1e-12));
}

TEST_CASE("disc chords") {
  Primitive d;
  d.shape = "disc";
  d.cx = 10;
  d.cy = 10;
  d.radius = 4;
  CHECK(d.chord(10, 10) == 8.0);
  for (double y : {7.0, 8.5, 13.9})
    CHECK(d.chord(10, y) == doctest::Approx(2.0 * std::sqrt(16.0 - (y - 10) * (y - 10))));
  CHECK(d.chord(14.5, 10) == 0.0);
  d.inner_radius = 2;
  CHECK(d.chord(10, 10) == doctest::Approx(4.0));

  Primitive c;
  c.shape = "cylinder";
  c.cx = 5;
  c.radius = 3;
  c.y0 = 0;
  c.y1 = 10;
  CHECK(c.chord(5, 4) == 6.0);
  CHECK(c.chord(5, 11) == 0.0);
}

TEST_CASE("cargo phantom contents") {
  const Scene s = cargo_phantom();
  std::size_t boxes = 0, walls = 0;
  for (const auto& p : s.primitives)
    if (p.shape == "rect") (p.label.empty() ? walls : boxes)++;
  CHECK(boxes == 7);
  CHECK(walls == 2);
  CHECK(count_shape(s, "cylinder") == 3);
  CHECK(count_shape(s, "disc") == 2);
  CHECK(s.labels().size() == 12);

  // Declared areal densities at object centres (walls contribute 2 x 0.2 cm steel).
  const PathLengthMap paths = compute_path_lengths(s);
  const double wall = 2 * 0.2 * 7.874;
  const double declared[] = {30, 40, 79, 79, 79, 79, 76};
  for (int i = 0; i < 7; ++i) {
    const std::size_t ix = static_cast<std::size_t>((15.0 + 17.0 * i) / s.pitch);
    const std::size_t iy = static_cast<std::size_t>(50.0 / s.pitch);
    const double total = paths.total_lambda(iy * paths.width + ix);
    CHECK(std::abs(total - wall - declared[i]) < 1e-9);
  }
}

TEST_CASE("shielded phantom is a 5x5 grid with an open first column") {
  const Scene s = shielded_phantom();
  std::size_t steel = 0, objects = 0;
  for (const auto& p : s.primitives) (p.label.rfind("steel", 0) == 0 ? steel : objects)++;
  CHECK(objects == 25);
  CHECK(steel == 4);
  const PathLengthMap paths = compute_path_lengths(s);
  const auto at = [&](double x, double y) {
    return paths.total_lambda(static_cast<std::size_t>(y / s.pitch) * paths.width + static_cast<std::size_t>(x / s.pitch));
  };
  // Lead row, each column.
  const double shield[] = {0, 50, 100, 150, 200};
  for (int c = 0; c < 5; ++c) CHECK(std::abs(at(12.5 + 15.0 * c, 40.0) - 79.0 - shield[c]) < 1e-9);
}

TEST_CASE("translation equivariance") {
  Scene s;
  s.width = 30;
  s.height = 20;
  s.pitch = 1.0;
  Primitive d;
  d.shape = "disc";
  d.cx = 10;
  d.cy = 10;
  d.radius = 5;
  d.material = Material::element(13);
  d.density = 2.7;
  s.primitives = {d};
  const Rendered a = render_ideal(s, zt::model());
  s.primitives[0].cx += 1.0;
  const Rendered b = render_ideal(s, zt::model());
  const auto& pa = a.image.plane("alpha_h");
  const auto& pb = b.image.plane("alpha_h");
  for (std::size_t y = 0; y < 20; ++y)
    for (std::size_t x = 0; x + 1 < 30; ++x) CHECK(pb[y * 30 + x + 1] == pa[y * 30 + x]);
}

TEST_CASE("noise") {
  const PlaneSet img = make_image(2, 1, {0.0, 1.0}, {0.0, 1.5});
  CHECK(apply_noise(img, 0.0, 4).plane("alpha_h") == img.plane("alpha_h"));
  const PlaneSet n1 = apply_noise(img, 0.1, 4);
  CHECK(n1.plane("alpha_h")[0] == 0.0);
  CHECK(n1.plane("alpha_h")[1] != 1.0);
  CHECK(n1.plane("sigma_l")[1] == doctest::Approx(0.15));
  CHECK(apply_noise(img, 0.1, 4).plane("alpha_l") == n1.plane("alpha_l"));
  CHECK(apply_noise(img, 0.1, 5).plane("alpha_l") != n1.plane("alpha_l"));
  CHECK_THROWS_AS(apply_noise(img, -0.1, 1), Error);

  // Moments over 1e5 independent pixels at alpha = 2.
  const std::size_t n = 100000;
  const PlaneSet big = apply_noise(make_image(n, 1, std::vector<double>(n, 2.0), std::vector<double>(n, 2.0)), 0.1, 77);
  double m = 0, v = 0;
  for (double x : big.plane("alpha_h")) m += x;
  m /= n;
  for (double x : big.plane("alpha_h")) v += (x - m) * (x - m);
  const double sd = std::sqrt(v / (n - 1));
  CHECK(std::abs(m - 2.0) < 3.0 * 0.2 / std::sqrt(double(n)));
  CHECK(std::abs(sd - 0.2) < 0.02 * 0.2);
}

TEST_CASE("scene files and resampling") {
  const Scene s = cargo_phantom(1.0);
  zt::TempDir dir;
  write_scene(dir / "s.json", s);
  const Scene back = read_scene(dir / "s.json");
  CHECK(back.primitives.size() == s.primitives.size());
  CHECK(render_ideal(back, zt::model()).image.plane("alpha_l") == render_ideal(s, zt::model()).image.plane("alpha_l"));
  CHECK_THROWS_AS(builtin_phantom("nope"), Error);

  const PlaneSet img = make_image(2, 2, {1, 2, 3, 4}, {5, 6, 7, 8});
  const PlaneSet up = upsample(img, 2);
  CHECK(up.width == 4);
  CHECK(up.plane("alpha_h")[5] == 1.0);
  CHECK(up.plane("alpha_h")[15] == 4.0);
  const PlaneSet rs = resample(img, 3, 3);
  CHECK(rs.plane("alpha_h")[0] == 1.0);
  CHECK(rs.plane("alpha_h")[8] == 4.0);
  CHECK(resample(img, 4, 4).plane("alpha_l") == up.plane("alpha_l"));
}
