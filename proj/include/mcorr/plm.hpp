#pragma once

#include "mcorr/kernel.hpp"
#include "mcorr/types.hpp"

#include <vector>

namespace mcorr {

/// Truncated covariance of the confounder-adjusted abundances,
/// n^-1 sum_i (x_i - h_x(z_i))(x_i - h_x(z_i))' I(l_i > b).
struct PhiEstimate {
    Matrix matrix;
    Index retained_count = 0;
    double cutoff_used = 0.0;
    double bandwidth_used = 0.0;
    /// lambda_max / lambda_min, +inf when Phi-hat is not positive definite.
    double condition_number = 0.0;

    /// x_i - h_x(z_i) for every subject (truncated or not).
    Matrix residuals;
    /// I(l_i > b) per subject.
    std::vector<char> retained;
    Vector density;
};

/// Phi-hat at an explicit bandwidth and cutoff. The divisor is n, not the
/// retained count. Throws NumericalError(AllTruncated) if no subject survives.
PhiEstimate estimate_phi(const Matrix& x, const Matrix& z, double bandwidth, double cutoff, const KernelFunction& kernel,
                         bool leave_one_out = false);

/// Phi-hat at the paired-cohort bandwidth and cutoff of `config`.
PhiEstimate estimate_phi(const Matrix& x, const Matrix& z, const SmootherConfig& config);

/// Phi-hat from the covariate-only cohort at the external bandwidth and cutoff.
PhiEstimate estimate_external_phi(const ExternalDataset& external, const SmootherConfig& config);

/// Truncated least squares of one outcome on the residualised abundances held
/// by `phi` (which must come from the same X, Z and bandwidth).
///
/// Throws NumericalError(SingularPhi) when phi.condition_number exceeds
/// config.max_condition.
PLMFit fit_plm(const Matrix& x, const Matrix& z, const Vector& outcome, const SmootherConfig& config,
               const PhiEstimate& phi);

/// fit_plm for every column of `outcomes`, sharing one smoothing pass.
std::vector<PLMFit> fit_plm_many(const Matrix& z, const Matrix& outcomes, const SmootherConfig& config,
                                 const PhiEstimate& phi);

/// Constants of the default bandwidth/cutoff schedule.
struct ScheduleConstants {
    /// a = bandwidth_scale * n^-alpha on standardised confounders.
    double bandwidth_scale = 0.7;
    /// b = cutoff_scale * (2 pi)^(-q/2) * n^-theta, i.e. a fraction of the peak
    /// density of a standard q-variate normal.
    double cutoff_scale = 0.2;
};

/// Rate exponents (alpha, theta) with a = n^-alpha, b = n^-theta.
/// Paired cohort: alpha = 1/(q + 2m), theta = (2m - q) / (8 (q + 2m)); for
/// q = m = 2 this is a = n^-1/6, b = n^(-1/12 + 1/24).
std::pair<double, double> paired_rate_exponents(Index q, int m);

/// External cohort: (1/5, 1/20) for q = m = 2; otherwise alpha at the midpoint
/// of (1/(4m), 1/(2q)) and theta = (1 - 2 q alpha) / 8.
std::pair<double, double> external_rate_exponents(Index q, int m);

/// Default configuration for paired size n, external size n_external, q
/// confounders and kernel order m.
SmootherConfig default_smoother_config(Index n, Index n_external, Index q, int m = 2,
                                       const ScheduleConstants& constants = {});

}  // namespace mcorr
