#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mad/linalg.hpp"
#include "mad/random.hpp"

namespace mad {

// Unit quaternion (w + xi + yj + zk). q and -q encode the same rotation.
struct Quaternion {
  double w = 1.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  static Quaternion identity() { return {}; }
  // Rotation by `angle` radians about `axis` (normalized internally).
  static Quaternion from_axis_angle(std::span<const double> axis, double angle);
  // Normalizing constructor; DegenerateInputError for the zero quaternion.
  static Quaternion normalized(double w, double x, double y, double z);
  static Quaternion from_vector(std::span<const double> v);
  static Quaternion random(Rng& rng);

  Quaternion conjugate() const { return {w, -x, -y, -z}; }
  Quaternion operator-() const { return {-w, -x, -y, -z}; }
  double norm() const;
  Vector to_vector() const { return {w, x, y, z}; }

  bool operator==(const Quaternion&) const = default;
};

double quat_dot(const Quaternion& a, const Quaternion& b);

// Hamilton product, renormalized.
Quaternion quat_mul(const Quaternion& a, const Quaternion& b);

// Rotation angle between a and b in [0, pi]; blind to the sign of either.
double geodesic_distance(const Quaternion& a, const Quaternion& b);

// True when a == b or a == -b within tol, coordinate-wise.
bool same_rotation(const Quaternion& a, const Quaternion& b, double tol = 1e-9);

enum class SymmetryKind { kCyclicZ, kTetrahedral, kOctahedral, kIcosahedral };

// Finite rotation group G stored as one quaternion per element, with sign
// fixed to Re >= 0 (ties: first nonzero coordinate positive). The identity is
// element 0; the remaining order comes from breadth-first closure.
class SymmetryGroup {
 public:
  SymmetryKind kind() const noexcept { return kind_; }
  int order_parameter() const noexcept { return m_; }  // m for CyclicZ, else 0
  std::string name() const;
  const std::vector<Quaternion>& elements() const noexcept { return elements_; }
  std::size_t size() const noexcept { return elements_.size(); }

  // Index of the element equal to q up to sign, or nullopt.
  std::optional<std::size_t> find(const Quaternion& q, double tol = 1e-9) const;

 private:
  friend SymmetryGroup build_symmetry_group(SymmetryKind, int);
  SymmetryKind kind_ = SymmetryKind::kCyclicZ;
  int m_ = 1;
  std::vector<Quaternion> elements_;
};

// Closes the standard generator set of the named group under quat_mul.
// `m` is the order of the cyclic group (ignored otherwise).
SymmetryGroup build_symmetry_group(SymmetryKind kind, int m = 1);
// Parses "cyclic:4", "tetrahedral", "octahedral", "icosahedral", "identity".
SymmetryGroup parse_symmetry_group(std::string_view text);

// Sign-fixed representative closest to the identity: argmax_g |Re(q g)|, then
// Re >= 0. Ties go to the lowest element index.
Quaternion canonicalize(const Quaternion& q, const SymmetryGroup& group);

// q_canon * g with g uniform over the group.
Quaternion lift(const Quaternion& q_canon, const SymmetryGroup& group, Rng& rng);

// Support of the target distribution.
struct DiscreteSet {
  Matrix points;
};
struct Sphere {
  int n = 2;  // intrinsic dimension; ambient dimension n + 1
};
struct RotationGroup {
  std::optional<SymmetryGroup> symmetry;
};

class Manifold {
 public:
  using Kind = std::variant<DiscreteSet, Sphere, RotationGroup>;

  // >= 2 distinct points of equal dimension.
  static Manifold discrete(Matrix points);
  static Manifold sphere(int n);
  static Manifold rotations(std::optional<SymmetryGroup> symmetry = std::nullopt);

  const Kind& kind() const noexcept { return kind_; }
  std::size_t ambient_dim() const noexcept { return ambient_dim_; }
  bool is_discrete() const noexcept { return std::holds_alternative<DiscreteSet>(kind_); }
  // Sphere or RotationGroup: support is the unit sphere of the ambient space.
  bool is_spherical() const noexcept { return !is_discrete(); }
  // Intrinsic sphere dimension (3 for rotations); only for spherical supports.
  int sphere_dim() const;
  const Matrix& points() const;  // DiscreteSet only
  std::string describe() const;

 private:
  Manifold(Kind kind, std::size_t ambient_dim) : kind_(std::move(kind)), ambient_dim_(ambient_dim) {}
  Kind kind_;
  std::size_t ambient_dim_;
};

// Index of the nearest point (lowest index on ties).
std::size_t nearest_point(const Matrix& points, std::span<const double> x);

// Closest point of the support: radial normalization on spheres, nearest point
// on discrete sets. DegenerateInputError for the origin on spheres.
Vector project(std::span<const double> x, const Manifold& manifold);

}  // namespace mad
