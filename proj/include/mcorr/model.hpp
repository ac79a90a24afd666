#pragma once

#include "mcorr/types.hpp"

namespace mcorr {

/// R = b' Phi g / sqrt(b' Phi b * g' Phi g).
///
/// Throws NumericalError(DegenerateDirection) when either quadratic form is
/// below 1e-12 * trace(Phi) * |v|^2, and NumericalError(Inconsistent) when the
/// ratio leaves [-1, 1] by more than round-off.
double microbial_correlation(const Vector& beta, const Vector& gamma, const Matrix& phi);

/// Cosine of the Euclidean angle between beta and gamma.
double genetic_r1(const Vector& beta, const Vector& gamma);

/// Correlation of beta'x and gamma'x under the total covariance of x
/// (Phi + Sigma), with no confounder adjustment.
double genetic_r2(const Vector& beta, const Vector& gamma, const Matrix& sigma_total);

namespace detail {

/// Clamp round-off excursions (<= 1e-12) back into [-1, 1]; throw on larger ones.
double clamp_correlation(double r);

/// The scale-free positivity floor used for quadratic forms v' Phi v.
double positivity_tolerance(const Matrix& phi, const Vector& v);

}  // namespace detail

}  // namespace mcorr
