#pragma once

// Modified Bessel functions of the first kind, I_nu(x), for the integer and
// half-integer orders that appear in sphere base scores.

namespace mad::specfun {

// nu in {-1/2, 0, 1/2, 1, 3/2, ...}, stored as 2*nu.
class BesselOrder {
 public:
  // Throws DomainError unless 2*nu is an integer >= -1.
  explicit BesselOrder(double nu);
  static BesselOrder from_twice(int twice_nu);

  double value() const noexcept { return 0.5 * twice_; }
  int twice() const noexcept { return twice_; }
  bool is_integer() const noexcept { return twice_ % 2 == 0; }

  bool operator==(const BesselOrder&) const = default;

 private:
  struct Twice {};
  BesselOrder(Twice, int twice) : twice_(twice) {}
  int twice_;
};

// Small/large argument crossover for the integer orders.
inline constexpr double kSeriesCrossover = 15.0;

// I_nu(x). DomainError for x < 0 (or x == 0 with nu = -1/2); OverflowError when
// the value exceeds the double range.
double bessel_i(BesselOrder nu, double x);

// exp(-x) * I_nu(x), finite for every representable x >= 0 (x > 0 for nu = -1/2).
double bessel_i_scaled(BesselOrder nu, double x);

// I_0(x) / I_1(x) for x > 0, from scaled values.
double bessel_ratio_i0_i1(double x);

}  // namespace mad::specfun
