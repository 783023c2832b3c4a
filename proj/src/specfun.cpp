#include "mad/specfun.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "mad/errors.hpp"

namespace mad::specfun {
namespace {

constexpr double kSeriesTolerance = 1e-17;
constexpr double kAsymptoticTolerance = 1e-17;

void check_argument(BesselOrder nu, double x) {
  if (!(x >= 0.0)) throw DomainError("bessel: argument must be >= 0, got " + std::to_string(x));
  if (nu.twice() < 0 && x == 0.0) throw DomainError("bessel: I_{-1/2} is singular at 0");
}

// sum_k (x/2)^{2k+nu} / (k! Gamma(k+nu+1)), terms all positive.
double power_series(double nu, double x) {
  if (x == 0.0) return nu == 0.0 ? 1.0 : 0.0;
  const double half = 0.5 * x;
  const double q = half * half;
  double term = std::exp(nu * std::log(half) - std::lgamma(nu + 1.0));
  double sum = term;
  for (int k = 1; k < 1000; ++k) {
    term *= q / (k * (k + nu));
    sum += term;
    if (term < kSeriesTolerance * sum) break;
  }
  return sum;
}

// sqrt(2 pi x) e^{-x} I_nu(x) ~ sum_k (-1)^k prod_{j<=k} (4nu^2 - (2j-1)^2) / (k! (8x)^k),
// truncated at convergence or at the smallest term.
double asymptotic_scaled(double nu, double x) {
  const double mu = 4.0 * nu * nu;
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < 200; ++k) {
    const double odd = 2.0 * k - 1.0;
    const double next = -term * (mu - odd * odd) / (k * 8.0 * x);
    if (std::abs(next) >= std::abs(term)) break;
    term = next;
    sum += term;
    if (std::abs(term) < kAsymptoticTolerance * std::abs(sum)) break;
  }
  return sum / std::sqrt(2.0 * std::numbers::pi * x);
}

// e^{-x} I_{-1/2}(x), e^{-x} I_{1/2}(x) from the elementary closed forms.
double scaled_minus_half(double x) {
  return std::sqrt(2.0 / (std::numbers::pi * x)) * 0.5 * (1.0 + std::exp(-2.0 * x));
}
double scaled_plus_half(double x) {
  return std::sqrt(2.0 / (std::numbers::pi * x)) * 0.5 * -std::expm1(-2.0 * x);
}

double scaled_order0_or_1(int order, double x) {
  if (x < kSeriesCrossover) return std::exp(-x) * power_series(order, x);
  return asymptotic_scaled(order, x);
}

// Ratio I_nu(x) / I_base(x) by backward recurrence I_{v-1} = I_{v+1} + (2v/x) I_v
// started far above nu (Miller's algorithm). Orders step by 1 from base to nu.
double downward_ratio(double nu, double base, double x) {
  const double steps_needed = nu - base;
  const int start = 2 * (static_cast<int>(steps_needed) +
                         static_cast<int>(std::sqrt(40.0 * (steps_needed + 1.0)))) +
                    static_cast<int>(2.0 * x) + 20;
  double above = 0.0;   // I_{v+1}
  double current = 1.0;  // I_v
  double at_nu = 0.0;
  constexpr double kRescale = 1e250;
  for (int j = start; j > 0; --j) {
    const double v = base + j;
    const double below = above + (2.0 * v / x) * current;
    above = current;
    current = below;
    if (std::abs(current) > kRescale) {
      current /= kRescale;
      above /= kRescale;
      at_nu /= kRescale;
    }
    if (j - 1 == static_cast<int>(steps_needed)) at_nu = current;
  }
  // `current` now holds the unnormalized I_base.
  return at_nu / current;
}

// Upward recurrence I_{v+1} = I_{v-1} - (2v/x) I_v from two seeds; stable
// while x is large relative to the orders involved.
double upward(double seed_lo, double seed_hi, double order_hi, double nu, double x) {
  double lo = seed_lo;
  double hi = seed_hi;
  for (double v = order_hi; v < nu - 0.25; v += 1.0) {
    const double next = lo - (2.0 * v / x) * hi;
    lo = hi;
    hi = next;
  }
  return hi;
}

}  // namespace

BesselOrder::BesselOrder(double nu) {
  const double twice = 2.0 * nu;
  if (!std::isfinite(twice) || twice != std::floor(twice) || twice < -1.0 || twice > 1e6)
    throw DomainError("BesselOrder: order must be an integer >= 0 or half-integer >= -1/2");
  twice_ = static_cast<int>(twice);
}

BesselOrder BesselOrder::from_twice(int twice_nu) {
  if (twice_nu < -1) throw DomainError("BesselOrder: order below -1/2");
  return BesselOrder(Twice{}, twice_nu);
}

double bessel_i_scaled(BesselOrder nu, double x) {
  check_argument(nu, x);
  const int t = nu.twice();
  const double order = nu.value();
  if (x == 0.0) return t == 0 ? 1.0 : 0.0;

  if (!nu.is_integer()) {
    if (t == -1) return scaled_minus_half(x);
    if (t == 1) return scaled_plus_half(x);
    if (x >= kSeriesCrossover && x >= order)
      return upward(scaled_minus_half(x), scaled_plus_half(x), 0.5, order, x);
    return scaled_plus_half(x) * downward_ratio(order, 0.5, x);
  }

  if (t == 0 || t == 2) return scaled_order0_or_1(t / 2, x);
  if (x >= kSeriesCrossover && x >= 2.0 * order)
    return upward(scaled_order0_or_1(0, x), scaled_order0_or_1(1, x), 1.0, order, x);
  return scaled_order0_or_1(0, x) * downward_ratio(order, 0.0, x);
}

double bessel_i(BesselOrder nu, double x) {
  check_argument(nu, x);
  const double scaled = bessel_i_scaled(nu, x);
  if (x < 700.0) return scaled * std::exp(x);
  const double log_value = x + std::log(scaled);
  if (log_value >= std::log(std::numeric_limits<double>::max()))
    throw OverflowError("bessel_i: I_" + std::to_string(nu.value()) + "(" + std::to_string(x) +
                        ") overflows; use bessel_i_scaled");
  return std::exp(log_value);
}

double bessel_ratio_i0_i1(double x) {
  if (!(x > 0.0)) throw DomainError("bessel_ratio_i0_i1: argument must be > 0");
  return bessel_i_scaled(BesselOrder::from_twice(0), x) /
         bessel_i_scaled(BesselOrder::from_twice(2), x);
}

}  // namespace mad::specfun
