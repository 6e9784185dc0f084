#include "screenlab/special.hpp"

#include <cmath>
#include <limits>

#include "screenlab/error.hpp"

namespace screenlab::special {

namespace {

constexpr double kAsymptoticStart = 10.0;

}  // namespace

double digamma(double x) {
  if (!(x > 0.0) || std::isnan(x)) throw DomainError("digamma: argument must be > 0");
  if (std::isinf(x)) return x;
  double shift = 0.0;
  while (x < kAsymptoticStart) {
    shift -= 1.0 / x;
    x += 1.0;
  }
  // psi(x) ~ ln x - 1/(2x) - sum_k B_2k / (2k x^2k)
  const double r = 1.0 / (x * x);
  const double series =
      r * (1.0 / 12 -
           r * (1.0 / 120 -
                r * (1.0 / 252 -
                     r * (1.0 / 240 - r * (1.0 / 132 - r * (691.0 / 32760 - r * (1.0 / 12)))))));
  return shift + std::log(x) - 0.5 / x - series;
}

double trigamma(double x) {
  if (!(x > 0.0) || std::isnan(x)) throw DomainError("trigamma: argument must be > 0");
  if (std::isinf(x)) return 0.0;
  double shift = 0.0;
  while (x < kAsymptoticStart) {
    shift += 1.0 / (x * x);
    x += 1.0;
  }
  // psi'(x) ~ 1/x + 1/(2x^2) + sum_k B_2k / x^(2k+1)
  const double r = 1.0 / (x * x);
  const double series =
      r * (1.0 / 6 - r * (1.0 / 30 - r * (1.0 / 42 - r * (1.0 / 30 - r * (5.0 / 66)))));
  return shift + 1.0 / x + 0.5 * r + series / x;
}

double inverse_digamma(double y) {
  if (!std::isfinite(y)) throw DomainError("inverse_digamma: argument must be finite");
  // Minka, "Estimating a Dirichlet distribution", appendix C.
  double x = y >= -2.22 ? std::exp(y) + 0.5 : -1.0 / (y + kEulerGamma);
  for (int iter = 0; iter < 100; ++iter) {
    const double residual = digamma(x) - y;
    if (residual == 0.0) break;
    double next = x - residual / trigamma(x);
    if (!(next > 0.0)) next = 0.5 * x;
    const double step = std::fabs(next - x);
    x = next;
    if (step <= 4 * std::numeric_limits<double>::epsilon() * x) break;
  }
  return x;
}

double log_gamma(double x) {
  if (!(x > 0.0) || std::isnan(x)) throw DomainError("log_gamma: argument must be > 0");
  return std::lgamma(x);
}

namespace {

double beta_continued_fraction(double a, double b, double x) {
  constexpr double tiny = 1e-300;
  constexpr double eps = 1e-16;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 10000; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < eps) return h;
  }
  return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw DomainError("incomplete_beta: a and b must be > 0");
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("incomplete_beta: x must lie in [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  // The continued fraction converges fast for x < (a+1)/(a+b+2); use the
  // symmetry I_x(a,b) = 1 - I_{1-x}(b,a) on the other side.
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double f_distribution_sf(double f, double d1, double d2) {
  if (!(d1 > 0.0) || !(d2 > 0.0)) throw DomainError("F distribution: degrees of freedom must be > 0");
  if (std::isnan(f)) throw DomainError("F distribution: statistic is NaN");
  if (f <= 0.0) return 1.0;
  if (std::isinf(f)) return 0.0;
  // P(F > f) = I_{d2/(d2 + d1 f)}(d2/2, d1/2)
  const double x = d2 / (d2 + d1 * f);
  return incomplete_beta(0.5 * d2, 0.5 * d1, x);
}

}  // namespace screenlab::special
