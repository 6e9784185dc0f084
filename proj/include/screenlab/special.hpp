#pragma once

namespace screenlab::special {

inline constexpr double kEulerGamma = 0.57721566490153286060651209008240243;

/// psi(x) for x > 0: upward recurrence to x >= 10, then the asymptotic
/// series. Absolute error below 1e-13 for x >= 1, relative below 1e-14
/// elsewhere. Throws DomainError for x <= 0 or NaN.
double digamma(double x);

/// psi'(x) for x > 0, same scheme as digamma.
double trigamma(double x);

/// Solves psi(x) = y for x > 0. Minka's starting point followed by
/// safeguarded Newton steps until |psi(x) - y| <= 1e-10 (or machine
/// precision of x is reached). Throws DomainError for non-finite y.
double inverse_digamma(double y);

/// log Gamma(x) for x > 0.
double log_gamma(double x);

/// Regularized incomplete beta I_x(a, b), continued fraction (modified Lentz).
double incomplete_beta(double a, double b, double x);

/// Upper tail P(F > f) of the F distribution with (d1, d2) degrees of freedom.
double f_distribution_sf(double f, double d1, double d2);

}  // namespace screenlab::special
