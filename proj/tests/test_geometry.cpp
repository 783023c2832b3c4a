#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "mad/errors.hpp"
#include "mad/geometry.hpp"

using namespace mad;

namespace {

constexpr double kPi = std::numbers::pi;

Quaternion about_z(double angle) {
  const double axis[3] = {0.0, 0.0, 1.0};
  return Quaternion::from_axis_angle(axis, angle);
}

bool close(const Quaternion& a, const Quaternion& b, double tol = 1e-12) {
  return std::abs(a.w - b.w) < tol && std::abs(a.x - b.x) < tol && std::abs(a.y - b.y) < tol &&
         std::abs(a.z - b.z) < tol;
}

std::vector<SymmetryGroup> all_groups() {
  return {build_symmetry_group(SymmetryKind::kCyclicZ, 4), build_symmetry_group(SymmetryKind::kTetrahedral),
          build_symmetry_group(SymmetryKind::kOctahedral), build_symmetry_group(SymmetryKind::kIcosahedral)};
}

}  // namespace

TEST_CASE("Hamilton product basics") {
  const Quaternion i{0, 1, 0, 0}, j{0, 0, 1, 0}, k{0, 0, 0, 1};
  CHECK(close(quat_mul(i, j), k));
  CHECK(close(quat_mul(j, k), i));
  CHECK(close(quat_mul(k, i), j));
  CHECK(close(quat_mul(j, i), -k));
  CHECK(close(quat_mul(i, i), Quaternion{-1, 0, 0, 0}));

  Rng rng(3);
  for (int t = 0; t < 100; ++t) {
    const Quaternion q = Quaternion::random(rng);
    CHECK(std::abs(q.norm() - 1.0) < 1e-12);
    CHECK(close(quat_mul(Quaternion::identity(), q), q));
    CHECK(close(quat_mul(q, q.conjugate()), Quaternion::identity()));
    const Quaternion r = quat_mul(q, Quaternion::random(rng));
    CHECK(std::abs(r.norm() - 1.0) < 1e-9);
  }
  CHECK_THROWS_AS(Quaternion::normalized(0, 0, 0, 0), DegenerateInputError);
}

TEST_CASE("geodesic distance") {
  Rng rng(5);
  const Quaternion q = Quaternion::random(rng);
  CHECK(geodesic_distance(q, q) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(geodesic_distance(q, -q) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(geodesic_distance(Quaternion::identity(), about_z(kPi / 2)) == doctest::Approx(kPi / 2).epsilon(1e-14));
  CHECK(geodesic_distance(Quaternion::identity(), about_z(kPi)) == doctest::Approx(kPi).epsilon(1e-14));
  // Tiny angles survive (the arccos form loses them).
  CHECK(geodesic_distance(Quaternion::identity(), about_z(1e-9)) == doctest::Approx(1e-9).epsilon(1e-6));

  for (int t = 0; t < 500; ++t) {
    const Quaternion a = Quaternion::random(rng), b = Quaternion::random(rng), c = Quaternion::random(rng);
    const double ab = geodesic_distance(a, b);
    CHECK(ab >= 0.0);
    CHECK(ab <= kPi);
    CHECK(ab == doctest::Approx(geodesic_distance(b, a)).epsilon(1e-14));
    CHECK(ab == doctest::Approx(geodesic_distance(-a, b)).epsilon(1e-14));
    CHECK(ab == doctest::Approx(2.0 * std::acos(std::min(1.0, std::abs(quat_dot(a, b))))).epsilon(1e-9));
    CHECK(geodesic_distance(a, c) <= ab + geodesic_distance(b, c) + 1e-9);
  }
}

TEST_CASE("symmetry groups have the right size, closure and inverses") {
  CHECK(build_symmetry_group(SymmetryKind::kCyclicZ, 1).size() == 1);
  const std::size_t expected[] = {4, 12, 24, 60};
  const auto groups = all_groups();
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const SymmetryGroup& g = groups[gi];
    CHECK(g.size() == expected[gi]);
    CHECK(close(g.elements()[0], Quaternion::identity()));
    for (const Quaternion& a : g.elements()) {
      CHECK(a.w >= 0.0);
      CHECK(g.find(a.conjugate()).has_value());
      for (const Quaternion& b : g.elements()) CHECK(g.find(quat_mul(a, b)).has_value());
    }
    for (std::size_t i = 0; i < g.size(); ++i)
      for (std::size_t j = i + 1; j < g.size(); ++j) CHECK_FALSE(same_rotation(g.elements()[i], g.elements()[j]));
  }
  for (int m : {1, 2, 3, 5, 7}) CHECK(build_symmetry_group(SymmetryKind::kCyclicZ, m).size() == static_cast<std::size_t>(m));
  CHECK_THROWS_AS(build_symmetry_group(SymmetryKind::kCyclicZ, 0), ValidationError);
}

TEST_CASE("parse_symmetry_group") {
  CHECK(parse_symmetry_group("cyclic:6").size() == 6);
  CHECK(parse_symmetry_group("octahedral").size() == 24);
  CHECK(parse_symmetry_group("identity").size() == 1);
  CHECK_THROWS_AS(parse_symmetry_group("dodecagonal"), ValidationError);
  CHECK_THROWS_AS(parse_symmetry_group("cyclic:x"), ValidationError);
}

TEST_CASE("canonicalize: worked example and invariants") {
  const SymmetryGroup c4 = build_symmetry_group(SymmetryKind::kCyclicZ, 4);
  const Quaternion got = canonicalize(about_z(50.0 * kPi / 180.0), c4);
  // Brute force over the four rotations: 50 + 90k degrees closest to 0 is -40.
  CHECK(close(got, about_z(-40.0 * kPi / 180.0), 1e-12));

  Rng rng(11);
  for (const SymmetryGroup& g : all_groups()) {
    CHECK(close(canonicalize(Quaternion::identity(), g), Quaternion::identity()));
    for (int t = 0; t < 1000; ++t) {
      const Quaternion q = Quaternion::random(rng);
      const Quaternion c = canonicalize(q, g);
      CHECK(c.w >= 0.0);
      CHECK(close(canonicalize(c, g), c));
      for (const Quaternion& e : g.elements()) {
        CHECK(c.w >= std::abs(quat_mul(q, e).w) - 1e-12);
        CHECK(close(canonicalize(quat_mul(q, e), g), c, 1e-9));
      }
    }
  }
}

TEST_CASE("lift undoes canonicalize and samples the orbit uniformly") {
  Rng rng(17);
  const SymmetryGroup trivial = build_symmetry_group(SymmetryKind::kCyclicZ, 1);
  const Quaternion q = Quaternion::random(rng);
  CHECK(close(lift(q, trivial, rng), q));

  const SymmetryGroup tet = build_symmetry_group(SymmetryKind::kTetrahedral);
  const Quaternion qc = canonicalize(q, tet);
  std::vector<int> counts(tet.size(), 0);
  const int n = 10000;
  for (int t = 0; t < n; ++t) {
    const Quaternion l = lift(qc, tet, rng);
    CHECK(close(canonicalize(l, tet), qc, 1e-9));
    const auto idx = tet.find(quat_mul(qc.conjugate(), l));
    REQUIRE(idx.has_value());
    ++counts[*idx];
  }
  const double p = 1.0 / 12.0, sd = std::sqrt(n * p * (1 - p));
  for (int c : counts) CHECK(std::abs(c - n * p) < 3.0 * sd);
}

TEST_CASE("manifold construction rules") {
  CHECK_THROWS_AS(Manifold::discrete(Matrix{{1.0, 0.0}}), ValidationError);
  CHECK_THROWS_AS(Manifold::discrete(Matrix{{1.0, 0.0}, {1.0, 0.0}}), ValidationError);
  CHECK_THROWS_AS(Manifold::sphere(0), ValidationError);
  CHECK(Manifold::sphere(2).ambient_dim() == 3);
  CHECK(Manifold::sphere(5).sphere_dim() == 5);
  CHECK(Manifold::rotations().ambient_dim() == 4);
  CHECK(Manifold::rotations().sphere_dim() == 3);
  CHECK(Manifold::discrete(Matrix{{-1.0, 0.0}, {1.0, 0.0}}).ambient_dim() == 2);
}

TEST_CASE("projection") {
  const Manifold s2 = Manifold::sphere(2);
  const Vector p = project(std::vector<double>{0, 0, 2}, s2);
  CHECK(p == Vector{0, 0, 1});
  CHECK_THROWS_AS(project(std::vector<double>{0, 0, 0}, s2), DegenerateInputError);

  const Manifold two = Manifold::discrete(Matrix{{-1.0, 0.0}, {1.0, 0.0}});
  CHECK(project(std::vector<double>{0.2, 0.5}, two) == Vector{1.0, 0.0});
  CHECK(project(std::vector<double>{0.0, 0.5}, two) == Vector{-1.0, 0.0});  // tie: lowest index
  CHECK(project(std::vector<double>{-1.0, 0.0}, two) == Vector{-1.0, 0.0});

  Rng rng(23);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 200; ++t) {
    Vector x{nd(rng), nd(rng), nd(rng)};
    const Vector px = project(x, s2);
    CHECK(std::abs(norm(px) - 1.0) < 1e-15);
    const Vector ppx = project(px, s2);
    for (int i = 0; i < 3; ++i) CHECK(ppx[i] == doctest::Approx(px[i]).epsilon(1e-15));
    // No other unit vector is closer.
    Vector u{nd(rng), nd(rng), nd(rng)};
    const double un = norm(u);
    for (double& v : u) v /= un;
    CHECK(squared_distance(x, px) <= squared_distance(x, u) + 1e-12);
  }
}
