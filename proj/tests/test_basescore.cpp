#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "mad/basescore.hpp"
#include "mad/data.hpp"
#include "mad/errors.hpp"

using namespace mad;

namespace {

using ClosedForm = Vector (*)(const ScoreQuery&);

Matrix two_points() { return Matrix{{-1.0, 0.0}, {1.0, 0.0}}; }

// log sum_i p_i exp(-||x - u_i||^2 / (2 sigma^2)) in long double.
long double log_mixture(const std::vector<long double>& x, double sigma, const Matrix& pts,
                        const std::vector<double>& probs) {
  long double total = 0.0L;
  for (std::size_t i = 0; i < pts.rows(); ++i) {
    long double d2 = 0.0L;
    for (std::size_t j = 0; j < pts.cols(); ++j) d2 += (x[j] - pts(i, j)) * (x[j] - pts(i, j));
    total += probs[i] * std::exp(-d2 / (2.0L * sigma * sigma));
  }
  return std::log(total);
}

Vector fd_score(std::span<const double> x, double sigma, const Matrix& pts, const std::vector<double>& probs) {
  const long double h = 1e-5L;
  Vector g(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    std::vector<long double> xp(x.begin(), x.end()), xm(x.begin(), x.end());
    xp[j] += h;
    xm[j] -= h;
    g[j] = static_cast<double>((log_mixture(xp, sigma, pts, probs) - log_mixture(xm, sigma, pts, probs)) / (2 * h));
  }
  return g;
}

double max_abs_diff(const Vector& a, const Vector& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

Vector diff(const Vector& a, const Vector& b) {
  Vector d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return d;
}

Vector scaled(double r, Vector dir) {
  const double n = norm(dir);
  for (double& v : dir) v *= r / n;
  return dir;
}

// |closed - mc| <= max(1% ||closed||, 4 SE) per coordinate.
void check_against_oracle(const Manifold& m, const Vector& x, double sigma, ClosedForm closed = base_score) {
  Rng rng(1234);
  const ScoreQuery q{x, sigma, m};
  const McScoreEstimate mc = mc_score_oracle(q, 1000000, rng);
  const Vector cf = closed(q);
  const double scale = norm(cf);
  for (std::size_t i = 0; i < x.size(); ++i) {
    INFO("coord " << i << " closed=" << cf[i] << " mc=" << mc.value[i] << " se=" << mc.std_error[i]);
    CHECK(std::abs(cf[i] - mc.value[i]) <= std::max(0.01 * scale, 4.0 * mc.std_error[i]));
  }
}

}  // namespace

TEST_CASE("discrete posterior mean") {
  const Manifold two = Manifold::discrete(two_points());
  for (double s : {0.1, 0.5, 2.0, 1e-4}) {
    const Vector e = base_posterior_mean_discrete({std::vector<double>{0.0, 0.0}, s, two});
    CHECK(e[0] == 0.0);
    CHECK(e[1] == 0.0);
  }
  const Vector e = base_posterior_mean_discrete({std::vector<double>{1.0, 0.0}, 1e-3, two});
  CHECK(e[0] == doctest::Approx(1.0).epsilon(1e-15));

  // 8-point circle at (0.9, 0.1), sigma 0.5 against a long-double direct sum.
  const Matrix pts = circle_points(8);
  const Manifold circle = Manifold::discrete(pts);
  const std::vector<double> x{0.9, 0.1};
  long double num[2] = {0, 0}, den = 0;
  for (std::size_t i = 0; i < 8; ++i) {
    const long double d2 = (x[0] - pts(i, 0)) * (x[0] - pts(i, 0)) + (x[1] - pts(i, 1)) * (x[1] - pts(i, 1));
    const long double w = std::exp(-d2 / (2.0L * 0.25L));
    num[0] += w * pts(i, 0);
    num[1] += w * pts(i, 1);
    den += w;
  }
  const Vector got = base_posterior_mean_discrete({x, 0.5, circle});
  CHECK(std::abs(got[0] - static_cast<double>(num[0] / den)) < 1e-12);
  CHECK(std::abs(got[1] - static_cast<double>(num[1] / den)) < 1e-12);
}

TEST_CASE("discrete base score equals the finite-difference gradient of the log density") {
  const Matrix pts = circle_points(8);
  const Manifold circle = Manifold::discrete(pts);
  const std::vector<double> uniform(8, 0.125);
  const std::vector<double> skewed = skewed_pmf(8);
  Rng rng(7);
  std::normal_distribution<double> nd(0.0, 0.8);
  for (double sigma : {0.3, 0.5, 1.0, 2.0}) {
    for (int t = 0; t < 10; ++t) {
      const std::vector<double> x{nd(rng), nd(rng)};
      CHECK(max_abs_diff(base_score_discrete({x, sigma, circle}), fd_score(x, sigma, pts, uniform)) < 1e-5);
      CHECK(max_abs_diff(exact_score_discrete(x, sigma, pts, skewed), fd_score(x, sigma, pts, skewed)) < 1e-5);
      const Vector a = exact_score_discrete(x, sigma, pts, uniform);
      const Vector b = base_score_discrete({x, sigma, circle});
      for (int i = 0; i < 2; ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-14 * std::max(1.0, std::abs(b[i])));
    }
  }
}

TEST_CASE("discrete base score near a support point and the two-point field") {
  const Manifold two = Manifold::discrete(two_points());
  const Vector s = base_score_discrete({std::vector<double>{1.0, 0.0}, 1e-3, two});
  CHECK(std::abs(s[0]) < 1e-9);
  CHECK(s[1] == 0.0);

  // At sigma = 0.8 the field points back toward the (symmetric) weighted mean.
  const Vector f = base_score_discrete({std::vector<double>{1.0, 0.0}, 0.8, two});
  CHECK(f[0] < 0.0);
  CHECK(f[1] == 0.0);

  // With most of the mass on (1, 0) the exact score there is weaker than the base one.
  const std::vector<double> p{0.1, 0.9};
  const Vector full = exact_score_discrete(std::vector<double>{1.0, 0.0}, 0.8, two_points(), p);
  CHECK(full[0] < 0.0);
  CHECK(norm(full) < norm(f));
}

TEST_CASE("exact discrete score validates its probabilities") {
  const std::vector<double> x{0.3, 0.2};
  CHECK_THROWS_AS(exact_score_discrete(x, 0.5, two_points(), std::vector<double>{0.0, 1.0}), DomainError);
  CHECK_THROWS_AS(exact_score_discrete(x, 0.5, two_points(), std::vector<double>{0.5, 0.6}), DomainError);
  CHECK_THROWS_AS(exact_score_discrete(x, 0.5, two_points(), std::vector<double>{1.0}), ValidationError);
  CHECK_THROWS_AS(log_score_gap_discrete(x, 0.5, two_points(), std::vector<double>{0.0, 1.0}), DomainError);
}

// log of 2/sigma^2 |w_base - w_exact| for the far point, where the far point
// sits 2/sigma^2 nats below the near one; long double keeps e^-800.
long double two_point_log_gap(double sigma, double p_far) {
  const long double s2 = (long double)sigma * sigma;
  const long double e = std::exp(-2.0L / s2);
  const long double w_base = e / (1.0L + e);
  const long double w_exact = p_far * e / ((1.0L - p_far) + p_far * e);
  return std::log(2.0L / s2 * std::abs(w_base - w_exact));
}

TEST_CASE("gap between exact and base score closes away from equidistant points") {
  const Manifold two = Manifold::discrete(two_points());
  const std::vector<double> p{0.1, 0.9};
  const std::vector<double> x{1.0, 0.0};
  double prev = INFINITY;
  for (double sigma : {0.8, 0.4, 0.2, 0.1, 0.05}) {
    const double log_gap = log_score_gap_discrete(x, sigma, two_points(), p);
    CAPTURE(sigma);
    CHECK(log_gap == doctest::Approx(double(two_point_log_gap(sigma, 0.1))).epsilon(1e-12));
    CHECK(log_gap < prev);
    prev = log_gap;
    if (sigma >= 0.4) {
      const double direct =
          norm(diff(exact_score_discrete(x, sigma, two_points(), p), base_score({x, sigma, two})));
      CHECK(std::abs(std::exp(log_gap) / direct - 1.0) < 1e-9);
    }
  }
  CHECK(prev < std::log(1e-6));
  // Far below double range: both scores agree to every bit there.
  CHECK(norm(diff(exact_score_discrete(x, 0.05, two_points(), p), base_score({x, 0.05, two}))) == 0.0);

  const std::vector<double> origin{0.0, 0.0};
  const auto gap_at = [&](double sigma) {
    return norm(diff(exact_score_discrete(origin, sigma, two_points(), p), base_score({origin, sigma, two})));
  };
  CHECK(gap_at(0.05) > gap_at(0.2));
  CHECK(std::exp(log_score_gap_discrete(origin, 0.05, two_points(), p)) ==
        doctest::Approx(gap_at(0.05)).epsilon(1e-12));
  // sigma^2 * gap tends to |E_p - E_base| = 0.8 at the equidistant point.
  CHECK(gap_at(0.05) * 0.05 * 0.05 == doctest::Approx(0.8).epsilon(1e-12));

  // Uniform probabilities: no gap at all.
  CHECK(log_score_gap_discrete(x, 0.3, two_points(), std::vector<double>{0.5, 0.5}) ==
        -std::numeric_limits<double>::infinity());
  // More points, direct and log-domain agree where the gap is resolvable.
  const Matrix eight = circle_points(8);
  const auto pmf = skewed_pmf(8);
  const Manifold m8 = Manifold::discrete(eight);
  for (double sigma : {1.0, 0.5, 0.3}) {
    const std::vector<double> q{0.4, -0.7};
    const double direct = norm(diff(exact_score_discrete(q, sigma, eight, pmf), base_score({q, sigma, m8})));
    CHECK(direct > 1e-6);
    CHECK(std::abs(std::exp(log_score_gap_discrete(q, sigma, eight, pmf)) / direct - 1.0) < 1e-9);
  }
}

TEST_CASE("sphere scores are radial and odd") {
  Rng rng(29);
  std::normal_distribution<double> nd;
  for (int n = 1; n <= 6; ++n) {
    const Manifold m = Manifold::sphere(n);
    for (int t = 0; t < 30; ++t) {
      Vector x(static_cast<std::size_t>(n + 1));
      for (double& v : x) v = nd(rng);
      const double sigma = 0.05 + std::abs(nd(rng));
      Vector neg = x;
      for (double& v : neg) v = -v;
      for (ClosedForm f : {base_score_nsphere, base_score}) {
        const Vector s = f({x, sigma, m});
        const Vector sn = f({neg, sigma, m});
        const double c = dot(s, x) / dot(x, x);
        for (std::size_t i = 0; i < x.size(); ++i) {
          CHECK(std::abs(s[i] - c * x[i]) <= 1e-12 * norm(s));
          CHECK(sn[i] == -s[i]);
        }
      }
    }
  }
}

TEST_CASE("S^2 and S^3 corollaries agree with the general formula") {
  for (double r : {0.3, 0.7, 1.0, 1.6}) {
    for (double z : {1e-6, 1e-3, 0.1, 0.24, 0.26, 0.5, 0.99, 1.01, 5.0, 39.0, 41.0, 100.0, 500.0}) {
      const double sigma = std::sqrt(r / z);
      const double a = s2_score_coefficient(r, sigma), b = nsphere_score_coefficient(2, r, sigma);
      INFO("r=" << r << " z=" << z);
      CHECK(std::abs(a - b) <= 1e-12 * std::abs(b));
      const double c = s3_score_coefficient(r, sigma), d = nsphere_score_coefficient(3, r, sigma);
      CHECK(std::abs(c - d) <= 1e-12 * std::abs(d));
    }
  }
  const Vector x{0.2, -0.5, 0.9};
  const Manifold s2 = Manifold::sphere(2);
  const Vector a = base_score_s2({x, 0.4, s2}), b = base_score_nsphere({x, 0.4, s2});
  CHECK(max_abs_diff(a, b) < 1e-9 * norm(b));
}

// I_{nu+1}(z) / I_nu(z) from the power series, summed in long double.
long double series_ratio(double nu, double z) {
  const long double h = 0.25L * z * z;
  long double a = 1.0L / std::tgamma(static_cast<long double>(nu) + 1.0L);
  long double b = 1.0L / std::tgamma(static_cast<long double>(nu) + 2.0L);
  long double sa = 0.0L, sb = 0.0L;
  for (int k = 0; k < 200; ++k) {
    sa += a;
    sb += b;
    a *= h / ((k + 1) * (k + 1 + nu));
    b *= h / ((k + 1) * (k + 2 + nu));
  }
  return 0.5L * z * sb / sa;
}

TEST_CASE("sphere coefficients match a series oracle where the terms cancel") {
  const double r = 0.8;
  for (int n : {2, 3, 5}) {
    for (double z : {1e-7, 1e-4, 0.01, 0.2, 0.3, 0.9, 1.1, 3.0}) {
      const double sigma = std::sqrt(r / z), s2 = sigma * sigma;
      const long double want = -1.0L / s2 + series_ratio(0.5 * (n - 1), z) / (s2 * r);
      INFO("n=" << n << " z=" << z);
      CHECK(std::abs(nsphere_score_coefficient(n, r, sigma) - want) <= 1e-13L * std::abs(want));
      if (n == 2) CHECK(std::abs(s2_score_coefficient(r, sigma) - want) <= 1e-13L * std::abs(want));
      if (n == 3) CHECK(std::abs(s3_score_coefficient(r, sigma) - want) <= 1e-13L * std::abs(want));
    }
  }
}

TEST_CASE("S^2 posterior mean collapses onto the projection") {
  const Manifold s2 = Manifold::sphere(2);
  const Vector x = scaled(0.7, {0.3, -0.2, 0.5});
  const double sigma = 1e-3;
  const Vector s = base_score_s2({x, sigma, s2});
  Vector e(3);
  for (int i = 0; i < 3; ++i) e[i] = x[i] + sigma * sigma * s[i];
  Vector proj = x;
  for (double& v : proj) v /= 0.7;
  CHECK(norm(diff(e, proj)) < 1e-5);
}

TEST_CASE("base scores stay finite down to sigma = 1e-6") {
  for (int n = 1; n <= 6; ++n) {
    const Manifold m = Manifold::sphere(n);
    for (double r : {0.5, 0.9, 1.0, 1.3, 2.0}) {
      for (double sigma : {1e-6, 1e-5, 1e-4, 1e-2}) {
        Vector x(static_cast<std::size_t>(n + 1), 0.0);
        x[0] = r;
        for (ClosedForm f : {base_score_nsphere, base_score}) {
          const Vector s = f({x, sigma, m});
          for (double v : s) CHECK(std::isfinite(v));
        }
      }
    }
  }
  const Manifold circle = Manifold::discrete(circle_points(8));
  const Vector s = base_score({std::vector<double>{0.3, 1.7}, 1e-6, circle});
  for (double v : s) CHECK(std::isfinite(v));
}

TEST_CASE("sphere queries at the origin are rejected") {
  const Manifold s2 = Manifold::sphere(2);
  CHECK_THROWS_AS(base_score({std::vector<double>{0, 0, 0}, 0.5, s2}), DegenerateInputError);
  CHECK_THROWS_AS(base_score_s3({std::vector<double>{1e-9, 0, 0, 0}, 0.5, Manifold::sphere(3)}),
                  DegenerateInputError);
  CHECK_THROWS_AS(base_score_nsphere({std::vector<double>{0, 0, 0, 0, 0, 0}, 0.5, Manifold::sphere(5)}),
                  DegenerateInputError);
}

TEST_CASE("rotations use the S^3 score") {
  const Manifold rot = Manifold::rotations();
  const Vector x{0.3, 0.1, -0.7, 0.2};
  CHECK(base_score({x, 0.5, rot}) == base_score_s3({x, 0.5, Manifold::sphere(3)}));
}

TEST_CASE("batched scores equal row-wise scores") {
  const Manifold s3 = Manifold::sphere(3);
  const Matrix x{{0.1, 0.2, 0.3, 0.4}, {-1.0, 0.5, 0.2, 0.0}, {0.0, 0.0, 0.0, 2.0}};
  const std::vector<double> sig{0.1, 0.5, 1.5};
  const Matrix b = base_score_batch(x, sig, s3);
  for (std::size_t i = 0; i < 3; ++i) {
    const Vector r = base_score({x.row(i), sig[i], s3});
    for (std::size_t j = 0; j < 4; ++j) CHECK(b(i, j) == r[j]);
  }
}

TEST_CASE("closed forms agree with the Monte-Carlo oracle") {
  check_against_oracle(Manifold::sphere(3), scaled(1.0, {1, 2, 3, 4}), 0.5, base_score_nsphere);
  check_against_oracle(Manifold::sphere(2), {0.0, 0.0, 1.2}, 0.5, base_score_s2);
  check_against_oracle(Manifold::sphere(2), scaled(1.3, {1, -1, 2}), 0.6, base_score_s2);
  check_against_oracle(Manifold::sphere(3), scaled(0.9, {-1, 2, 0.5, 1}), 0.4, base_score_s3);
  check_against_oracle(Manifold::sphere(1), scaled(0.8, {1, 2}), 0.5, base_score_nsphere);
  check_against_oracle(Manifold::sphere(5), scaled(1.2, {1, 2, 3, 4, 5, 6}), 0.6, base_score_nsphere);
  check_against_oracle(Manifold::discrete(two_points()), {0.3, 0.4}, 0.7, base_score_discrete);
  check_against_oracle(Manifold::discrete(circle_points(8)), {0.9, 0.1}, 0.3, base_score_discrete);
}

TEST_CASE("oracle is antipodally symmetric and deterministic") {
  const Manifold s2 = Manifold::sphere(2);
  const Vector x{0.4, 0.5, -0.6};
  const Vector nx{-0.4, -0.5, 0.6};
  Rng r1(5), r2(6), r3(5);
  const auto a = mc_score_oracle({x, 0.7, s2}, 200000, r1);
  const auto b = mc_score_oracle({nx, 0.7, s2}, 200000, r2);
  for (int i = 0; i < 3; ++i)
    CHECK(std::abs(a.value[i] + b.value[i]) <= 4.0 * std::hypot(a.std_error[i], b.std_error[i]));
  const auto c = mc_score_oracle({x, 0.7, s2}, 200000, r3);
  CHECK(a.value == c.value);
  CHECK(a.n_samples == 200000);
  CHECK(a.ess > 100.0);
}

TEST_CASE("oracle refuses to answer with a tiny effective sample size") {
  Rng rng(9);
  CHECK_THROWS_AS(mc_score_oracle({std::vector<double>{0, 0, 1}, 0.01, Manifold::sphere(2)}, 2000, rng),
                  UnreliableEstimateError);
}
