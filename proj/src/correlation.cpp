#include "mcorr/correlation.hpp"

#include "mcorr/errors.hpp"
#include "mcorr/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace mcorr {

SplitPlan SplitPlan::random(Index n, std::uint64_t seed) {
    if (n < 2) {
        throw ValidationError("sample splitting needs at least two subjects");
    }
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    const auto half_a = static_cast<std::ptrdiff_t>((n + 1) / 2);
    SplitPlan plan;
    plan.seed = seed;
    plan.indices_a.assign(order.begin(), order.begin() + half_a);
    plan.indices_b.assign(order.begin() + half_a, order.end());
    std::sort(plan.indices_a.begin(), plan.indices_a.end());
    std::sort(plan.indices_b.begin(), plan.indices_b.end());
    return plan;
}

void SplitPlan::validate(Index n) const {
    const auto na = static_cast<Index>(indices_a.size());
    const auto nb = static_cast<Index>(indices_b.size());
    if (na + nb != n || std::abs(na - nb) > 1 || na == 0 || nb == 0) {
        throw ValidationError("split halves must partition the sample into near-equal nonempty parts");
    }
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    for (const auto* half : {&indices_a, &indices_b}) {
        for (Index i : *half) {
            if (i < 0 || i >= n || seen[static_cast<std::size_t>(i)]) {
                throw ValidationError("split halves overlap or reference rows outside the sample");
            }
            seen[static_cast<std::size_t>(i)] = 1;
        }
    }
}

HalfFractions HalfFractions::of(const SplitPlan& split) {
    const auto na = static_cast<double>(split.indices_a.size());
    const auto nb = static_cast<double>(split.indices_b.size());
    return {(na + nb) / na, (na + nb) / nb};
}

VarianceInputs estimate_variance_inputs(const PairedDataset& data, const SmootherConfig& config) {
    const PhiEstimate phi = estimate_phi(data.x(), data.z(), config);
    Matrix outcomes(data.n(), 2);
    outcomes.col(0) = data.y();
    outcomes.col(1) = data.w();
    auto fits = fit_plm_many(data.z(), outcomes, config, phi);

    VarianceInputs out;
    out.beta = std::move(fits[0].coefficients);
    out.gamma = std::move(fits[1].coefficients);
    out.sigma2_eps = fits[0].residual_variance;
    out.sigma2_delta = fits[1].residual_variance;
    out.phi = phi.matrix;
    out.phi_condition_number = phi.condition_number;
    out.retained_count = phi.retained_count;
    return out;
}

CorrelationEstimate estimate_r_plugin(const PairedDataset& data, const SmootherConfig& config) {
    const VarianceInputs full = estimate_variance_inputs(data, config);
    CorrelationEstimate out;
    out.r_hat = microbial_correlation(full.beta, full.gamma, full.phi);
    out.n_effective = full.retained_count;
    out.phi_condition_number = full.phi_condition_number;
    return out;
}

CorrelationEstimate estimate_r_calibrated(const PairedDataset& data, const ExternalDataset& external,
                                          const SmootherConfig& config, const SplitPlan& split) {
    external.check_conforms(data);
    const PhiEstimate external_phi = estimate_external_phi(external, config);
    const VarianceInputs variance = estimate_variance_inputs(data, config);
    return estimate_r_calibrated(data, external_phi, config, split, variance);
}

CorrelationEstimate estimate_r_calibrated(const PairedDataset& data, const PhiEstimate& external_phi,
                                          const SmootherConfig& config, const SplitPlan& split,
                                          const VarianceInputs& variance) {
    if (external_phi.matrix.rows() != data.p()) {
        throw ValidationError("external Phi-hat and paired abundances differ in the number of taxa");
    }
    split.validate(data.n());

    const PairedDataset half_a = data.subset(split.indices_a);
    const PairedDataset half_b = data.subset(split.indices_b);
    const PhiEstimate phi_a = estimate_phi(half_a.x(), half_a.z(), config);
    const PhiEstimate phi_b = estimate_phi(half_b.x(), half_b.z(), config);
    const PLMFit fit_a = fit_plm(half_a.x(), half_a.z(), half_a.y(), config, phi_a);
    const PLMFit fit_b = fit_plm(half_b.x(), half_b.z(), half_b.w(), config, phi_b);

    CorrelationEstimate out;
    out.r_hat = microbial_correlation(fit_a.coefficients, fit_b.coefficients, external_phi.matrix);
    const double var = sigma_r(variance.beta, variance.gamma, variance.phi, variance.sigma2_eps,
                               variance.sigma2_delta, HalfFractions::of(split));
    out.std_err = std::sqrt(var / static_cast<double>(data.n()));
    out.n_effective = fit_a.retained_count + fit_b.retained_count;
    out.split_seed = split.seed;
    out.phi_condition_number =
        std::max({phi_a.condition_number, phi_b.condition_number, variance.phi_condition_number});
    return out;
}

DeltaBlocks delta_blocks(const Vector& beta, const Vector& gamma, const Matrix& phi, double sigma2_eps,
                         double sigma2_delta, HalfFractions halves) {
    const double u = beta.dot(phi * gamma);
    const double v = beta.dot(phi * beta);
    const double w = gamma.dot(phi * gamma);
    // Each half estimator has covariance (n / n_half) sigma^2 Phi^-1 / n.
    const double ea = halves.a * sigma2_eps;
    const double db = halves.b * sigma2_delta;
    DeltaBlocks s;
    s.s11 = ea * w + db * v;
    s.s22 = 4.0 * ea * v;
    s.s33 = 4.0 * db * w;
    s.s12 = 2.0 * ea * u;
    s.s13 = 2.0 * db * u;
    s.s23 = 0.0;
    return s;
}

double sigma_r(const Vector& beta, const Vector& gamma, const Matrix& phi, double sigma2_eps, double sigma2_delta,
               HalfFractions halves) {
    if (beta.size() != gamma.size() || phi.rows() != beta.size() || phi.cols() != beta.size()) {
        throw ValidationError("coefficient vectors and covariance matrix are not conformable");
    }
    if (sigma2_eps < 0.0 || sigma2_delta < 0.0) {
        throw ValidationError("noise variances must be nonnegative");
    }
    const double u = beta.dot(phi * gamma);
    const double v = beta.dot(phi * beta);
    const double w = gamma.dot(phi * gamma);
    if (!(v > detail::positivity_tolerance(phi, beta)) || !(w > detail::positivity_tolerance(phi, gamma))) {
        throw NumericalError(NumericalError::Kind::DegenerateDirection,
                             "coefficient vector has no variance under Phi (metabolite without microbial signal)");
    }
    const DeltaBlocks s = delta_blocks(beta, gamma, phi, sigma2_eps, sigma2_delta, halves);
    const double var = s.s11 / (w * v) + u * u * s.s22 / (4.0 * v * v * v * w) +
                       u * u * s.s33 / (4.0 * w * w * w * v) - u * s.s12 / (v * v * w) - u * s.s13 / (v * w * w) +
                       u * u * s.s23 / (2.0 * v * v * w * w);
    return std::max(var, 0.0);
}

}  // namespace mcorr
