#include "mad/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "mad/errors.hpp"

namespace mad {
namespace {

constexpr double kSignTieTolerance = 1e-12;

// Representative with Re >= 0; for Re == 0 the first nonzero coordinate is
// made positive.
Quaternion fix_sign(Quaternion q) {
  const double coords[4] = {q.w, q.x, q.y, q.z};
  for (double c : coords) {
    if (std::abs(c) > kSignTieTolerance) return c < 0.0 ? -q : q;
  }
  return q;
}

Quaternion snap(Quaternion q) {
  for (double* c : {&q.w, &q.x, &q.y, &q.z})
    if (std::abs(*c) < 1e-14) *c = 0.0;
  return q;
}

std::vector<Quaternion> generators(SymmetryKind kind, int m) {
  const double pi = std::numbers::pi;
  const double z_axis[3] = {0.0, 0.0, 1.0};
  const Quaternion three_fold{0.5, 0.5, 0.5, 0.5};  // 120 deg about (1,1,1)
  switch (kind) {
    case SymmetryKind::kCyclicZ:
      return {Quaternion::from_axis_angle(z_axis, 2.0 * pi / m)};
    case SymmetryKind::kTetrahedral:
      return {Quaternion{0.0, 0.0, 0.0, 1.0}, three_fold};
    case SymmetryKind::kOctahedral:
      return {Quaternion::from_axis_angle(z_axis, pi / 2.0), three_fold};
    case SymmetryKind::kIcosahedral: {
      const double phi = std::numbers::phi;
      // 72 deg rotation; an even permutation of (0, 1, 1/phi, phi) / 2.
      return {Quaternion::normalized(0.5 * phi, 0.5 / phi, 0.5, 0.0), three_fold};
    }
  }
  return {};
}

}  // namespace

Quaternion Quaternion::from_axis_angle(std::span<const double> axis, double angle) {
  if (axis.size() != 3) throw ValidationError("from_axis_angle: axis must have 3 components");
  const double n = mad::norm(axis);
  if (n == 0.0) throw DegenerateInputError("from_axis_angle: zero axis");
  const double s = std::sin(0.5 * angle) / n;
  return normalized(std::cos(0.5 * angle), s * axis[0], s * axis[1], s * axis[2]);
}

Quaternion Quaternion::normalized(double w, double x, double y, double z) {
  const double n = std::sqrt(w * w + x * x + y * y + z * z);
  if (!(n > 0.0) || !std::isfinite(n)) throw DegenerateInputError("quaternion: cannot normalize");
  return {w / n, x / n, y / n, z / n};
}

Quaternion Quaternion::from_vector(std::span<const double> v) {
  if (v.size() != 4) throw ValidationError("quaternion: expected 4 coordinates");
  return normalized(v[0], v[1], v[2], v[3]);
}

Quaternion Quaternion::random(Rng& rng) {
  std::normal_distribution<double> normal;
  for (;;) {
    const double w = normal(rng), x = normal(rng), y = normal(rng), z = normal(rng);
    if (w * w + x * x + y * y + z * z > 1e-12) return normalized(w, x, y, z);
  }
}

double Quaternion::norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

double quat_dot(const Quaternion& a, const Quaternion& b) {
  return a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z;
}

Quaternion quat_mul(const Quaternion& a, const Quaternion& b) {
  return Quaternion::normalized(a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
                                a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
                                a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
                                a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w);
}

double geodesic_distance(const Quaternion& a, const Quaternion& b) {
  // 2 arccos|<a,b>| evaluated as 2 atan2(|vec(a* b)|, |Re(a* b)|), which stays
  // accurate near 0 and pi.
  const Quaternion a_conj = a.conjugate();
  const double rw = a_conj.w * b.w - a_conj.x * b.x - a_conj.y * b.y - a_conj.z * b.z;
  const double rx = a_conj.w * b.x + a_conj.x * b.w + a_conj.y * b.z - a_conj.z * b.y;
  const double ry = a_conj.w * b.y - a_conj.x * b.z + a_conj.y * b.w + a_conj.z * b.x;
  const double rz = a_conj.w * b.z + a_conj.x * b.y - a_conj.y * b.x + a_conj.z * b.w;
  const double vec = std::sqrt(rx * rx + ry * ry + rz * rz);
  return 2.0 * std::atan2(vec, std::abs(rw));
}

bool same_rotation(const Quaternion& a, const Quaternion& b, double tol) {
  auto close = [tol](const Quaternion& p, const Quaternion& q) {
    return std::abs(p.w - q.w) <= tol && std::abs(p.x - q.x) <= tol &&
           std::abs(p.y - q.y) <= tol && std::abs(p.z - q.z) <= tol;
  };
  return close(a, b) || close(a, -b);
}

std::string SymmetryGroup::name() const {
  switch (kind_) {
    case SymmetryKind::kCyclicZ:
      return "cyclic:" + std::to_string(m_);
    case SymmetryKind::kTetrahedral:
      return "tetrahedral";
    case SymmetryKind::kOctahedral:
      return "octahedral";
    case SymmetryKind::kIcosahedral:
      return "icosahedral";
  }
  return "unknown";
}

std::optional<std::size_t> SymmetryGroup::find(const Quaternion& q, double tol) const {
  for (std::size_t i = 0; i < elements_.size(); ++i)
    if (same_rotation(elements_[i], q, tol)) return i;
  return std::nullopt;
}

SymmetryGroup build_symmetry_group(SymmetryKind kind, int m) {
  if (kind == SymmetryKind::kCyclicZ && m < 1)
    throw ValidationError("build_symmetry_group: cyclic order must be >= 1");
  SymmetryGroup group;
  group.kind_ = kind;
  group.m_ = kind == SymmetryKind::kCyclicZ ? m : 0;
  group.elements_.push_back(Quaternion::identity());

  const std::vector<Quaternion> gens = generators(kind, m);
  constexpr std::size_t kMaxElements = 1000;
  for (std::size_t i = 0; i < group.elements_.size(); ++i) {
    for (const Quaternion& g : gens) {
      const Quaternion p = snap(fix_sign(quat_mul(group.elements_[i], g)));
      if (!group.find(p, 1e-9)) group.elements_.push_back(p);
    }
    if (group.elements_.size() > kMaxElements)
      throw ClosureError("build_symmetry_group: closure did not terminate for " + group.name());
  }
  return group;
}

SymmetryGroup parse_symmetry_group(std::string_view text) {
  if (text == "identity" || text == "none") return build_symmetry_group(SymmetryKind::kCyclicZ, 1);
  if (text == "tetrahedral") return build_symmetry_group(SymmetryKind::kTetrahedral);
  if (text == "octahedral") return build_symmetry_group(SymmetryKind::kOctahedral);
  if (text == "icosahedral") return build_symmetry_group(SymmetryKind::kIcosahedral);
  constexpr std::string_view prefix = "cyclic:";
  if (text.starts_with(prefix)) {
    const std::string digits(text.substr(prefix.size()));
    std::size_t used = 0;
    int m = 0;
    try {
      m = std::stoi(digits, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == digits.size() && !digits.empty() && m >= 1)
      return build_symmetry_group(SymmetryKind::kCyclicZ, m);
  }
  throw ValidationError("unknown symmetry group '" + std::string(text) + "'");
}

Quaternion canonicalize(const Quaternion& q, const SymmetryGroup& group) {
  Quaternion best = q;
  double best_score = -1.0;
  for (const Quaternion& g : group.elements()) {
    const Quaternion candidate = quat_mul(q, g);
    const double score = std::abs(candidate.w);
    if (score > best_score) {
      best_score = score;
      best = candidate;
    }
  }
  return best.w < 0.0 ? -best : best;
}

Quaternion lift(const Quaternion& q_canon, const SymmetryGroup& group, Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, group.size() - 1);
  return quat_mul(q_canon, group.elements()[pick(rng)]);
}

Manifold Manifold::discrete(Matrix points) {
  if (points.rows() < 2) throw ValidationError("discrete manifold needs at least 2 points");
  if (points.cols() == 0) throw ValidationError("discrete manifold points have zero dimension");
  for (std::size_t i = 0; i < points.rows(); ++i)
    for (std::size_t j = i + 1; j < points.rows(); ++j)
      if (squared_distance(points.row(i), points.row(j)) == 0.0)
        throw ValidationError("discrete manifold points must be distinct");
  const std::size_t dim = points.cols();
  return Manifold(DiscreteSet{std::move(points)}, dim);
}

Manifold Manifold::sphere(int n) {
  if (n < 1) throw ValidationError("sphere dimension must be >= 1");
  return Manifold(Sphere{n}, static_cast<std::size_t>(n) + 1);
}

Manifold Manifold::rotations(std::optional<SymmetryGroup> symmetry) {
  return Manifold(RotationGroup{std::move(symmetry)}, 4);
}

int Manifold::sphere_dim() const {
  if (const auto* s = std::get_if<Sphere>(&kind_)) return s->n;
  if (std::holds_alternative<RotationGroup>(kind_)) return 3;
  throw ValidationError("sphere_dim: manifold is a discrete set");
}

const Matrix& Manifold::points() const {
  if (const auto* d = std::get_if<DiscreteSet>(&kind_)) return d->points;
  throw ValidationError("points: manifold is not a discrete set");
}

std::string Manifold::describe() const {
  std::ostringstream os;
  if (const auto* d = std::get_if<DiscreteSet>(&kind_)) {
    os << "discrete(" << d->points.rows() << " points in R^" << ambient_dim_ << ")";
  } else if (const auto* s = std::get_if<Sphere>(&kind_)) {
    os << "sphere(" << s->n << ")";
  } else {
    const auto& r = std::get<RotationGroup>(kind_);
    os << "so3(" << (r.symmetry ? r.symmetry->name() : "identity") << ")";
  }
  return os.str();
}

std::size_t nearest_point(const Matrix& points, std::span<const double> x) {
  std::size_t best = 0;
  double best_d = squared_distance(points.row(0), x);
  for (std::size_t i = 1; i < points.rows(); ++i) {
    const double d = squared_distance(points.row(i), x);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

Vector project(std::span<const double> x, const Manifold& manifold) {
  if (x.size() != manifold.ambient_dim())
    throw ValidationError("project: dimension mismatch");
  if (manifold.is_discrete()) return manifold.points().row_vector(nearest_point(manifold.points(), x));
  const double n = norm(x);
  if (!(n > 0.0)) throw DegenerateInputError("project: zero vector has no radial projection");
  Vector out(x.begin(), x.end());
  for (double& v : out) v /= n;
  return out;
}

}  // namespace mad
