#include <doctest.h>

#include <cmath>

#include "support.hpp"

using namespace vcnn;
using namespace vcnn::testing;

namespace {

bool has_vertex(const ConvexPolytope& p, const Eigen::VectorXd& v,
                double tol = 1e-9) {
  for (const auto& u : p.vertices())
    if ((u - v).lpNorm<Eigen::Infinity>() <= tol) return true;
  return false;
}

std::vector<Halfspace> cube_hrep(int d, double lo = 0.0, double hi = 1.0) {
  std::vector<Halfspace> hs;
  for (int i = 0; i < d; ++i) {
    Eigen::VectorXd n = Eigen::VectorXd::Zero(d);
    n[i] = -1.0;
    hs.emplace_back(n, -lo);
    n[i] = 1.0;
    hs.emplace_back(n, hi);
  }
  return hs;
}

}  // namespace

TEST_SUITE("geometry") {

TEST_CASE("unit square: four vertices, four facets") {
  const ConvexPolytope sq = intersect_halfspaces(cube_hrep(2), 2);
  CHECK(!sq.empty());
  CHECK(sq.vertices().size() == 4);
  CHECK(sq.halfspaces().size() == 4);
  CHECK(has_vertex(sq, point({0, 0})));
  CHECK(has_vertex(sq, point({1, 0})));
  CHECK(has_vertex(sq, point({1, 1})));
  CHECK(has_vertex(sq, point({0, 1})));
}

TEST_CASE("contradictory constraints give the empty polytope") {
  // x <= 0 and x >= 1
  const ConvexPolytope p =
      intersect_halfspaces({hs1(1, 0), hs1(-1, -1)}, 1);
  CHECK(p.empty());
  CHECK(volume(p) == 0.0);
}

TEST_CASE("redundant halfspace is dropped from [0,1]^4") {
  std::vector<Halfspace> hs = cube_hrep(4);
  Eigen::VectorXd n = Eigen::VectorXd::Zero(4);
  n[0] = 1.0;
  hs.emplace_back(n, 2.0);  // x0 <= 2 never binds
  const ConvexPolytope p = intersect_halfspaces(hs, 4);
  CHECK(p.vertices().size() == 16);
  CHECK(p.halfspaces().size() == 8);
  CHECK(volume(p) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("degenerate feasible set is normalized to empty") {
  // The slab x <= 0.5, x >= 0.5 inside the unit square is a segment.
  std::vector<Halfspace> hs = cube_hrep(2);
  hs.push_back(hs2(1, 0, 0.5));
  hs.push_back(hs2(-1, 0, -0.5));
  const ConvexPolytope p = intersect_halfspaces(hs, 2);
  CHECK(p.empty());
  CHECK(volume(p) == 0.0);
}

TEST_CASE("unbounded intersection raises") {
  CHECK_THROWS_AS(intersect_halfspaces({hs1(-1, -0.5)}, 1), Error);
  try {
    intersect_halfspaces({hs2(-1, 0, 0), hs2(0, -1, 0)}, 2);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnboundedRegion);
  }
}

TEST_CASE("dimension limits") {
  try {
    intersect_halfspaces(cube_hrep(5), 5);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DimensionTooHigh);
  }
}

TEST_CASE("volume of boxes and the triangle") {
  CHECK(volume(intersect_halfspaces(cube_hrep(1), 1)) == doctest::Approx(1.0));
  CHECK(volume(intersect_halfspaces(cube_hrep(2), 2)) == doctest::Approx(1.0));
  CHECK(volume(intersect_halfspaces(cube_hrep(3), 3)) == doctest::Approx(1.0));
  // x >= 0, y >= 0, x + y <= 1
  const ConvexPolytope tri = intersect_halfspaces(
      {hs2(-1, 0, 0), hs2(0, -1, 0), hs2(1, 1, 1)}, 2);
  CHECK(volume(tri) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("random simplices match the determinant formula") {
  Rng rng(7);
  for (const int d : {2, 3, 4}) {
    for (int rep = 0; rep < 10; ++rep) {
      const auto pts = random_simplex(rng, d);
      const double expect = simplex_det_volume(pts);
      const double got = volume(intersect_halfspaces(simplex_hrep(pts), d));
      CHECK(got == doctest::Approx(expect).epsilon(1e-9));
    }
  }
}

TEST_CASE("splitting a polytope preserves volume") {
  Rng rng(11);
  for (const int d : {1, 2, 3, 4}) {
    for (int rep = 0; rep < 8; ++rep) {
      const auto pts = random_simplex(rng, d);
      std::vector<Halfspace> hs;
      if (d == 1) {
        const double a = std::min(pts[0][0], pts[1][0]);
        const double b = std::max(pts[0][0], pts[1][0]);
        hs = {hs1(-1, -a), hs1(1, b)};
      } else {
        hs = simplex_hrep(pts);
      }
      const ConvexPolytope p = intersect_halfspaces(hs, d);
      const double total = volume(p);

      Eigen::VectorXd n(d);
      for (int i = 0; i < d; ++i) n[i] = rng.uniform(-1.0, 1.0);
      if (n.norm() < 1e-3) n[0] = 1.0;
      Eigen::VectorXd centroid = Eigen::VectorXd::Zero(d);
      for (const auto& v : p.vertices()) centroid += v;
      centroid /= static_cast<double>(p.vertices().size());
      const double b = n.dot(centroid);

      auto plus = hs;
      plus.emplace_back(n, b);
      auto minus = hs;
      minus.emplace_back(-n, -b);
      const double sum = volume(intersect_halfspaces(plus, d)) +
                         volume(intersect_halfspaces(minus, d));
      CHECK(sum == doctest::Approx(total).epsilon(1e-9));
    }
  }
}

TEST_CASE("rotated rectangle keeps its area") {
  Rng rng(13);
  for (int rep = 0; rep < 10; ++rep) {
    const double a = rng.uniform(0.2, 2.0), b = rng.uniform(0.2, 2.0);
    const double t = rng.uniform(0.0, 6.283185307179586);
    const Eigen::Vector2d e1(std::cos(t), std::sin(t));
    const Eigen::Vector2d e2(-std::sin(t), std::cos(t));
    const Eigen::Vector2d c(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
    const std::vector<Halfspace> hs = {
        {e1, e1.dot(c) + a / 2}, {-e1, -e1.dot(c) + a / 2},
        {e2, e2.dot(c) + b / 2}, {-e2, -e2.dot(c) + b / 2}};
    CHECK(volume(intersect_halfspaces(hs, 2)) ==
          doctest::Approx(a * b).epsilon(1e-9));
  }
}

TEST_CASE("every enumerated vertex satisfies every stored halfspace") {
  Rng rng(17);
  for (int rep = 0; rep < 20; ++rep) {
    const int d = 2 + static_cast<int>(rng.uniform() * 3);
    const auto pts = random_simplex(rng, d);
    const ConvexPolytope p = intersect_halfspaces(simplex_hrep(pts), d);
    for (const auto& v : p.vertices())
      for (const auto& h : p.halfspaces())
        CHECK(h.normal.dot(v) <= h.offset + 1e-9);
  }
}

TEST_CASE("clip against a box") {
  // The halfplane x >= 0.5 is a valid raw H-representation.
  const ConvexPolytope halfplane({hs2(-1, 0, -0.5)}, 2);
  const ConvexPolytope clipped = clip(halfplane, box2(0, 0, 1, 1));
  CHECK(volume(clipped) == doctest::Approx(0.5).epsilon(1e-12));

  // A polytope already inside the box is unchanged in volume.
  const ConvexPolytope tri = intersect_halfspaces(
      {hs2(-1, 0, -0.25), hs2(0, -1, -0.25), hs2(1, 1, 1)}, 2);
  CHECK(volume(clip(tri, box2(0, 0, 1, 1))) ==
        doctest::Approx(volume(tri)).epsilon(1e-12));

  // Clipping the empty set stays empty.
  const ConvexPolytope none =
      intersect_halfspaces({hs1(1, 0), hs1(-1, -1)}, 1);
  CHECK(clip(none, box1(0, 1)).empty());
}

TEST_CASE("volume of a raw halfplane raises UnboundedRegion") {
  const ConvexPolytope halfplane({hs2(-1, 0, -0.5)}, 2);
  try {
    volume(halfplane);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnboundedRegion);
  }
}

TEST_CASE("bounding boxes") {
  const ConvexPolytope sq = intersect_halfspaces(cube_hrep(2), 2);
  const Box bb = bounding_box(sq);
  CHECK(bb.lo.isApprox(point({0, 0}), 1e-12));
  CHECK(bb.hi.isApprox(point({1, 1}), 1e-12));

  const ConvexPolytope tri = intersect_halfspaces(
      {hs2(-1, 0, 0), hs2(0, -1, 0), hs2(1, 1, 1)}, 2);
  const Box tb = bounding_box(tri);
  CHECK(tb.lo.isApprox(point({0, 0}), 1e-12));
  CHECK(tb.hi.isApprox(point({1, 1}), 1e-12));

  const Eigen::VectorXd t = point({3.25, -1.5});
  const Box sb = bounding_box(sq.translated(t));
  CHECK(sb.lo.isApprox(point({3.25, -1.5}), 1e-12));
  CHECK(sb.hi.isApprox(point({4.25, -0.5}), 1e-12));

  const ConvexPolytope none =
      intersect_halfspaces({hs1(1, 0), hs1(-1, -1)}, 1);
  try {
    bounding_box(none);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EmptyPolytope);
  }
}

TEST_CASE("containment uses the closed-set convention") {
  const ConvexPolytope sq = intersect_halfspaces(cube_hrep(2), 2);
  CHECK(contains(sq, point({0.5, 0.5})));
  CHECK(!contains(sq, point({1.5, 0.5})));
  CHECK(contains(sq, point({1.0, 0.5})));  // boundary point
}

TEST_CASE("coupling polytope of unit intervals") {
  const ConvexPolytope seg = interval(0, 1);
  const ConvexPolytope cp = coupling_polytope(seg, seg, seg);
  CHECK(cp.dim() == 2);
  // {0<=x<=1, 0<=y<=1, 0<=x+y<=1} is the standard triangle.
  CHECK(volume(cp) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("disjoint shifted supports give an empty coupling polytope") {
  const ConvexPolytope cp =
      coupling_polytope(interval(0, 1), interval(5, 6), interval(0, 1));
  CHECK(volume(cp) == 0.0);
}

TEST_CASE("coupling volume of random boxes matches the analytic product") {
  Rng rng(23);
  for (int rep = 0; rep < 20; ++rep) {
    const auto rand_box = [&]() {
      const double x0 = rng.uniform(-1, 1), y0 = rng.uniform(-1, 1);
      return box2(x0, y0, x0 + rng.uniform(0.1, 1.0),
                  y0 + rng.uniform(0.1, 1.0));
    };
    const Box ub = rand_box(), vb = rand_box(), wb = rand_box();
    const ConvexPolytope u = intersect_halfspaces(ub.halfspaces(), 2);
    const ConvexPolytope v = intersect_halfspaces(vb.halfspaces(), 2);
    const ConvexPolytope w = intersect_halfspaces(wb.halfspaces(), 2);
    const double got = volume(coupling_polytope(u, v, w));
    const double expect = box_coupling(ub, vb, wb);
    CHECK(got == doctest::Approx(expect).epsilon(1e-9));
  }
}

TEST_CASE("coupling volume of random boxes within four MC standard errors") {
  Rng rng(29);
  const Box ub = box2(0.1, -0.2, 0.9, 0.5);
  const Box vb = box2(-0.3, 0.0, 0.4, 0.8);
  const Box wb = box2(0.0, 0.1, 1.0, 1.0);
  const ConvexPolytope u = intersect_halfspaces(ub.halfspaces(), 2);
  const ConvexPolytope v = intersect_halfspaces(vb.halfspaces(), 2);
  const ConvexPolytope w = intersect_halfspaces(wb.halfspaces(), 2);
  const double exact = volume(coupling_polytope(u, v, w));
  const McEstimate mc = monte_carlo_coupling(u, v, w, 200000, 12345);
  CHECK(std::abs(exact - mc.estimate) <= 4.0 * mc.std_error);
}

TEST_CASE("coupling volume is symmetric in U and V") {
  Rng rng(31);
  for (int rep = 0; rep < 8; ++rep) {
    const ConvexPolytope u =
        intersect_halfspaces(simplex_hrep(random_simplex(rng, 2)), 2);
    const ConvexPolytope v =
        intersect_halfspaces(simplex_hrep(random_simplex(rng, 2)), 2);
    const ConvexPolytope w = intersect_halfspaces(
        box2(0.2, 0.2, 1.4, 1.4).halfspaces(), 2);
    const double a = volume(coupling_polytope(u, v, w));
    const double b = volume(coupling_polytope(v, u, w));
    CHECK(a == doctest::Approx(b).epsilon(1e-9));
  }
}

TEST_CASE("coupling volume is invariant under U,W translation") {
  Rng rng(37);
  for (int rep = 0; rep < 8; ++rep) {
    const ConvexPolytope u =
        intersect_halfspaces(simplex_hrep(random_simplex(rng, 2)), 2);
    const ConvexPolytope v =
        intersect_halfspaces(simplex_hrep(random_simplex(rng, 2)), 2);
    const ConvexPolytope w = intersect_halfspaces(
        box2(0.1, 0.0, 1.2, 1.1).halfspaces(), 2);
    const double base = volume(coupling_polytope(u, v, w));
    const Eigen::VectorXd t = point({rng.uniform(-2, 2), rng.uniform(-2, 2)});
    const double moved =
        volume(coupling_polytope(u.translated(t), v, w.translated(t)));
    CHECK(moved == doctest::Approx(base).epsilon(1e-9));
  }
}

TEST_CASE("coupling volume scales as s^(2a)") {
  Rng rng(41);
  for (int rep = 0; rep < 8; ++rep) {
    const ConvexPolytope u =
        intersect_halfspaces(simplex_hrep(random_simplex(rng, 2)), 2);
    const ConvexPolytope v =
        intersect_halfspaces(simplex_hrep(random_simplex(rng, 2)), 2);
    const ConvexPolytope w = intersect_halfspaces(
        box2(0.1, 0.1, 1.3, 1.2).halfspaces(), 2);
    const double base = volume(coupling_polytope(u, v, w));
    const double s = rng.uniform(0.5, 2.0);
    const double scaled =
        volume(coupling_polytope(u.scaled(s), v.scaled(s), w.scaled(s)));
    CHECK(scaled == doctest::Approx(std::pow(s, 4) * base).epsilon(1e-9));
  }
}

TEST_CASE("coupling polytope dimension checks") {
  try {
    coupling_polytope(interval(0, 1), interval(0, 1),
                      intersect_halfspaces(cube_hrep(2), 2));
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DimensionMismatch);
  }
}

}  // TEST_SUITE
