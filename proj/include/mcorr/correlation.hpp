#pragma once

#include "mcorr/plm.hpp"
#include "mcorr/types.hpp"

#include <cstdint>
#include <vector>

namespace mcorr {

/// Random partition of the paired rows into two halves. Half A (the larger
/// when n is odd) fits the first outcome, half B the second.
struct SplitPlan {
    std::uint64_t seed = 0;
    std::vector<Index> indices_a;
    std::vector<Index> indices_b;

    /// Uniform random halving of 0..n-1 driven by `seed`; both halves sorted.
    static SplitPlan random(Index n, std::uint64_t seed);

    /// Throws ValidationError unless A and B partition 0..n-1 with sizes
    /// differing by at most one.
    void validate(Index n) const;
};

/// Full-sample quantities that enter the asymptotic variance of R-hat_ss.
struct VarianceInputs {
    Vector beta;
    Vector gamma;
    Matrix phi;
    double sigma2_eps = 0.0;
    double sigma2_delta = 0.0;
    double phi_condition_number = 1.0;
    Index retained_count = 0;
};

VarianceInputs estimate_variance_inputs(const PairedDataset& data, const SmootherConfig& config);

/// Plug-in estimator on the full paired sample. std_err is left empty.
CorrelationEstimate estimate_r_plugin(const PairedDataset& data, const SmootherConfig& config);

/// Calibrated estimator: beta from half A (outcome y), gamma from half B
/// (outcome w), Phi from the external cohort. std_err = sigma_r / sqrt(n)
/// evaluated at the full-sample plug-in quantities.
CorrelationEstimate estimate_r_calibrated(const PairedDataset& data, const ExternalDataset& external,
                                          const SmootherConfig& config, const SplitPlan& split);

/// Same, reusing a precomputed external Phi-hat and full-sample variance inputs.
CorrelationEstimate estimate_r_calibrated(const PairedDataset& data, const PhiEstimate& external_phi,
                                          const SmootherConfig& config, const SplitPlan& split,
                                          const VarianceInputs& variance);

/// n / |A| and n / |B|: the variance inflation of each half relative to the
/// full sample (2 and 2 for an even split).
struct HalfFractions {
    double a = 2.0;
    double b = 2.0;

    static HalfFractions of(const SplitPlan& split);
};

/// Delta-method covariance blocks of (b'Phi g, b'Phi b, g'Phi g) scaled by n,
/// for independent half-sample coefficient estimators and a fixed Phi.
struct DeltaBlocks {
    double s11 = 0.0;
    double s22 = 0.0;
    double s33 = 0.0;
    double s12 = 0.0;
    double s13 = 0.0;
    double s23 = 0.0;
};

DeltaBlocks delta_blocks(const Vector& beta, const Vector& gamma, const Matrix& phi, double sigma2_eps,
                         double sigma2_delta, HalfFractions halves = {});

/// Asymptotic variance of sqrt(n) (R-hat_ss - R): the quadratic form of the
/// gradient of b'Phi g / sqrt(b'Phi b g'Phi g) with the delta blocks.
/// Negative round-off is clamped to zero.
double sigma_r(const Vector& beta, const Vector& gamma, const Matrix& phi, double sigma2_eps, double sigma2_delta,
               HalfFractions halves = {});

}  // namespace mcorr
