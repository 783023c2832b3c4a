#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include "doctest.h"
#include "mad/data.hpp"
#include "mad/errors.hpp"
#include "mad/eval.hpp"
#include "mad/geometry.hpp"
#include "json.hpp"

using namespace mad;
namespace fs = std::filesystem;

namespace {

Matrix vmf_batch(std::vector<double> mean, double kappa, std::size_t n, std::uint64_t seed) {
  VmfMixture mix;
  mix.manifold_n = 2;
  mix.components.push_back({std::move(mean), kappa, 1.0});
  return sample_vmf_mixture(mix, n, seed).points;
}

Matrix reversed(const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto src = m.row(m.rows() - 1 - r);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

Quaternion rotate_by(const Quaternion& q, double angle, Rng& rng) {
  std::normal_distribution<double> g;
  std::vector<double> axis{g(rng), g(rng), g(rng)};
  return quat_mul(q, Quaternion::from_axis_angle(axis, angle));
}

const char* const kGroups[] = {"cyclic:4", "tetrahedral", "octahedral", "icosahedral"};

}  // namespace

TEST_CASE("mmd of a batch with itself") {
  const Matrix x = vmf_batch({0, 0, 1}, 5.0, 300, 1);
  const MetricReport r = mmd(x, x);
  CHECK(r.value == 0.0);
  CHECK(std::stod(r.config.at("mmd2")) <= 0.0);
  CHECK(r.config.at("bandwidth_rule") == "median");
  CHECK(r.config.at("n_x") == "300");
}

TEST_CASE("mmd symmetry and permutation invariance") {
  const Matrix x = vmf_batch({0, 0, 1}, 5.0, 200, 2);
  const Matrix y = vmf_batch({1, 0, 0}, 5.0, 150, 3);
  const double xy = mmd(x, y).value;
  CHECK(xy > 0.0);
  CHECK(mmd(y, x).value == doctest::Approx(xy).epsilon(1e-12));
  CHECK(mmd(reversed(x), y).value == doctest::Approx(xy).epsilon(1e-12));
  CHECK(mmd(x, reversed(y), 0.7).value == doctest::Approx(mmd(x, y, 0.7).value).epsilon(1e-12));
}

TEST_CASE("mmd separates distinct vMF modes") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Matrix a = vmf_batch({0, 0, 1}, 20.0, 500, 100 + seed);
    const Matrix a2 = vmf_batch({0, 0, 1}, 20.0, 500, 200 + seed);
    const Matrix b = vmf_batch({1, 0, 0}, 20.0, 500, 300 + seed);
    const double same = mmd(a, a2).value;
    const double diff = mmd(a, b).value;
    CAPTURE(seed);
    CHECK(diff >= 5.0 * same);
  }
}

TEST_CASE("unclamped mmd is unbiased under equal distributions") {
  std::vector<double> v;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Matrix a = vmf_batch({0, 1, 0}, 4.0, 200, 1000 + seed);
    const Matrix b = vmf_batch({0, 1, 0}, 4.0, 200, 2000 + seed);
    v.push_back(std::stod(mmd(a, b).config.at("mmd2")));
  }
  const double n = double(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double e : v) ss += (e - mean) * (e - mean);
  const double se = std::sqrt(ss / (n - 1) / n);
  CHECK(std::abs(mean) <= 2.0 * se);
}

TEST_CASE("mmd input validation") {
  const Matrix x = vmf_batch({0, 0, 1}, 5.0, 10, 1);
  CHECK_THROWS_AS(mmd(x, Matrix(10, 2)), ValidationError);
  CHECK_THROWS_AS(mmd(x, Matrix(1, 3)), ValidationError);
  CHECK_THROWS_AS(mmd(x, x, 0.0), ValidationError);
  CHECK_THROWS_AS(mmd(x, x, -1.0), ValidationError);
}

TEST_CASE("spread on exact orbits is zero") {
  Rng rng(3);
  for (const char* name : kGroups) {
    const SymmetryGroup g = parse_symmetry_group(name);
    const Quaternion gt = Quaternion::random(rng);
    std::vector<Quaternion> samples;
    for (const Quaternion& e : g.elements()) samples.push_back(quat_mul(gt, e));
    CHECK(spread(samples, gt, g).value < 1e-6);
  }
}

TEST_CASE("spread of 2 degree perturbations") {
  Rng rng(4);
  const double angle = 2.0 * std::numbers::pi / 180.0;
  for (const char* name : kGroups) {
    const SymmetryGroup g = parse_symmetry_group(name);
    const Quaternion gt = Quaternion::random(rng);
    std::vector<Quaternion> samples;
    for (int rep = 0; rep < 5; ++rep)
      for (const Quaternion& e : g.elements()) samples.push_back(rotate_by(quat_mul(gt, e), angle, rng));
    const MetricReport r = spread(samples, gt, g);
    CAPTURE(name);
    CHECK(std::abs(r.value - 2.0) < 1e-6);
    CHECK(r.config.at("units") == "degrees");
    CHECK(r.config.at("n") == std::to_string(samples.size()));
  }
}

TEST_CASE("spread invariances") {
  Rng rng(5);
  const SymmetryGroup g = parse_symmetry_group("octahedral");
  const Quaternion gt = Quaternion::random(rng);
  std::vector<Quaternion> samples;
  for (int i = 0; i < 50; ++i) samples.push_back(Quaternion::random(rng));
  const double base = spread(samples, gt, g).value;
  for (const Quaternion& e : g.elements())
    CHECK(spread(samples, quat_mul(gt, e), g).value == doctest::Approx(base).epsilon(1e-9));
  std::vector<Quaternion> flipped = samples;
  for (std::size_t i = 0; i < flipped.size(); i += 2) flipped[i] = -flipped[i];
  CHECK(spread(flipped, gt, g).value == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("spread with the identity group") {
  Rng rng(6);
  const SymmetryGroup id = parse_symmetry_group("identity");
  const Quaternion gt = Quaternion::random(rng);
  const std::vector<Quaternion> one{gt};
  CHECK(spread(one, gt, id).value < 1e-6);
  std::vector<Quaternion> samples;
  double expected = 0.0;
  for (int i = 0; i < 20; ++i) {
    samples.push_back(Quaternion::random(rng));
    expected += geodesic_distance(samples.back(), gt);
  }
  expected = expected / 20.0 * 180.0 / std::numbers::pi;
  CHECK(spread(samples, gt, id).value == doctest::Approx(expected).epsilon(1e-12));
  CHECK_THROWS_AS(spread(std::vector<Quaternion>{}, gt, id), ValidationError);
}

TEST_CASE("manifold drift") {
  CHECK(manifold_drift(Matrix{{1, 0, 0}, {0, 0.6, 0.8}}).value == doctest::Approx(0.0).scale(1));
  const MetricReport one = manifold_drift(Matrix{{0.75, 1.0}});
  CHECK(one.value == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(std::stod(one.config.at("max")) == doctest::Approx(0.25));

  // Orthogonal transforms leave norms unchanged.
  Rng rng(7);
  std::normal_distribution<double> g;
  Matrix x(100, 3);
  for (double& v : x.storage()) v = g(rng);
  const Quaternion q = Quaternion::random(rng);
  const double w = q.w, a = q.x, b = q.y, c = q.z;
  const double rot[3][3] = {{1 - 2 * (b * b + c * c), 2 * (a * b - c * w), 2 * (a * c + b * w)},
                            {2 * (a * b + c * w), 1 - 2 * (a * a + c * c), 2 * (b * c - a * w)},
                            {2 * (a * c - b * w), 2 * (b * c + a * w), 1 - 2 * (a * a + b * b)}};
  Matrix y(100, 3);
  for (std::size_t r = 0; r < 100; ++r)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) y(r, i) += rot[i][j] * x(r, j);
  CHECK(manifold_drift(y).value == doctest::Approx(manifold_drift(x).value).epsilon(1e-12));
}

TEST_CASE("discrete total variation") {
  const Matrix pts = circle_points(8);
  const std::vector<double> uniform(8, 0.125);

  SUBCASE("point mass against uniform") {
    Matrix batch(40, 2);
    for (std::size_t r = 0; r < 40; ++r) {
      batch(r, 0) = 1.01;
      batch(r, 1) = 0.02;
    }
    CHECK(discrete_tv(batch, pts, uniform).value == doctest::Approx(7.0 / 8.0).epsilon(1e-15));
  }
  SUBCASE("empirical equals target") {
    Matrix batch(0, 2);
    for (std::size_t i = 0; i < 8; ++i)
      for (int k = 0; k < 3; ++k) batch.append_row(pts.row(i));
    CHECK(discrete_tv(batch, pts, uniform).value == 0.0);
  }
  SUBCASE("perfect sampler at 1e4 samples") {
    const auto pmf = skewed_pmf(8);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto b = sample_discrete(pts, pmf, 10000, seed);
      const double tv = discrete_tv(b.points, pts, pmf).value;
      CHECK(tv >= 0.0);
      CHECK(tv < 0.02);
    }
  }
  SUBCASE("range") {
    Rng rng(8);
    std::normal_distribution<double> g;
    const auto pmf = skewed_pmf(8, 2.0);
    for (int t = 0; t < 20; ++t) {
      Matrix batch(30, 2);
      for (double& v : batch.storage()) v = 3.0 * g(rng);
      const double tv = discrete_tv(batch, pts, pmf).value;
      CHECK(tv >= 0.0);
      CHECK(tv <= 1.0);
    }
  }
  SUBCASE("validation") {
    CHECK_THROWS_AS(discrete_tv(Matrix{{1, 0}}, pts, std::vector<double>(7, 1.0 / 7)),
                    ValidationError);
    CHECK_THROWS_AS(discrete_tv(Matrix{{1, 0}}, pts, std::vector<double>(8, 0.1)), ValidationError);
    CHECK_THROWS_AS(discrete_tv(Matrix{{1, 0, 0}}, pts, uniform), ValidationError);
    CHECK_THROWS_AS(discrete_tv(Matrix(0, 2), pts, uniform), ValidationError);
  }
}

TEST_CASE("report lines") {
  MetricReport r;
  r.name = "mmd";
  r.value = 0.1;
  r.config["z"] = "1";
  r.config["a"] = "x";
  const std::string line = r.to_line();
  CHECK(line == R"({"name":"mmd","value":0.1,"std_error":null,"config":{"a":"x","z":"1"}})");
  r.std_error = 0.25;
  CHECK(line.find('\n') == std::string::npos);
  const auto j = nlohmann::json::parse(r.to_line());
  CHECK(j["std_error"].get<double>() == 0.25);

  const fs::path log = fs::temp_directory_path() / "mad_test_eval_metrics.jsonl";
  fs::remove(log);
  append_report(log, r);
  append_report(log, r);
  std::ifstream in(log);
  std::string l;
  int count = 0;
  while (std::getline(in, l)) {
    CHECK(l == r.to_line());
    ++count;
  }
  CHECK(count == 2);
}

TEST_CASE("format_double keeps every digit") {
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("oracle cell statuses") {
  const Manifold two = Manifold::discrete(Matrix{{-1, 0}, {1, 0}});
  const std::vector<double> x{0.3, 0.2};
  const OracleCell ok = oracle_cell(two, x, 0.5, 20000, 9);
  CHECK(ok.status == OracleStatus::kPass);
  CHECK(ok.rel_error < 0.05);

  // A deliberately wrong closed form fails.
  const ClosedFormScore wrong = [](const ScoreQuery& q) {
    Vector v = base_score(q);
    for (double& e : v) e *= 1.5;
    return v;
  };
  CHECK(oracle_cell(two, x, 0.5, 20000, 9, wrong).status == OracleStatus::kFail);

  // Too few samples to trust.
  const Manifold s2 = Manifold::sphere(2);
  const std::vector<double> far{40.0, 0.0, 0.0};
  CHECK(oracle_cell(s2, far, 0.05, 50, 1).status == OracleStatus::kInconclusive);
  CHECK(to_string(OracleStatus::kInconclusive) == "INCONCLUSIVE");
}
