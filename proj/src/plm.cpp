#include "mcorr/plm.hpp"

#include "mcorr/errors.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace mcorr {

namespace {

double condition_number(const Matrix& phi) {
    if (phi.size() == 0) {
        return std::numeric_limits<double>::infinity();
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(phi, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (!(lo > 0.0)) {
        return std::numeric_limits<double>::infinity();
    }
    return hi / lo;
}

Vector solve_phi(const PhiEstimate& phi, const Vector& rhs, double max_condition) {
    if (!(phi.condition_number <= max_condition)) {
        std::ostringstream msg;
        msg << "Phi-hat is singular at the configured threshold (condition number " << phi.condition_number
            << " > " << max_condition << ")";
        throw NumericalError(NumericalError::Kind::SingularPhi, msg.str());
    }
    return phi.matrix.ldlt().solve(rhs);
}

PLMFit finish_fit(const PhiEstimate& phi, const Vector& outcome, const Vector& fitted, double max_condition) {
    const Index n = phi.residuals.rows();
    const Index p = phi.residuals.cols();
    const Vector centred = outcome - fitted;

    Vector cross = Vector::Zero(p);
    for (Index i = 0; i < n; ++i) {
        if (phi.retained[static_cast<std::size_t>(i)]) {
            cross.noalias() += centred(i) * phi.residuals.row(i).transpose();
        }
    }
    cross /= static_cast<double>(n);

    PLMFit fit;
    fit.coefficients = solve_phi(phi, cross, max_condition);
    fit.retained_count = phi.retained_count;
    fit.fitted_confounder_effect = fitted;

    double sse = 0.0;
    for (Index i = 0; i < n; ++i) {
        if (phi.retained[static_cast<std::size_t>(i)]) {
            const double r = centred(i) - phi.residuals.row(i).dot(fit.coefficients);
            sse += r * r;
        }
    }
    fit.residual_variance = sse / static_cast<double>(phi.retained_count);
    return fit;
}

void check_phi_matches(const Matrix& z, const PhiEstimate& phi, const SmootherConfig& config) {
    if (phi.residuals.rows() != z.rows()) {
        throw ValidationError("Phi estimate was computed on a different number of subjects");
    }
    if (phi.bandwidth_used != config.bandwidth) {
        throw ValidationError("Phi estimate was computed at a different bandwidth than the outcome fit");
    }
}

}  // namespace

PhiEstimate estimate_phi(const Matrix& x, const Matrix& z, double bandwidth, double cutoff,
                         const KernelFunction& kernel, bool leave_one_out) {
    if (x.rows() != z.rows()) {
        throw ValidationError("abundance and confounder blocks disagree on row count");
    }
    if (!(cutoff > 0.0)) {
        throw ValidationError("truncation cutoff must be positive");
    }
    const SmootherFit smoothed = smooth(x, z, bandwidth, kernel, leave_one_out);
    const Index n = x.rows();
    const Index p = x.cols();

    PhiEstimate out;
    out.bandwidth_used = bandwidth;
    out.cutoff_used = cutoff;
    out.residuals = x - smoothed.fitted;
    out.density = smoothed.density;
    out.retained.assign(static_cast<std::size_t>(n), 0);
    out.matrix = Matrix::Zero(p, p);
    for (Index i = 0; i < n; ++i) {
        if (smoothed.density(i) > cutoff) {
            out.retained[static_cast<std::size_t>(i)] = 1;
            ++out.retained_count;
            out.matrix.selfadjointView<Eigen::Lower>().rankUpdate(out.residuals.row(i).transpose());
        }
    }
    if (out.retained_count == 0) {
        std::ostringstream msg;
        msg << "every subject truncated: max density estimate " << smoothed.density.maxCoeff()
            << " does not exceed cutoff " << cutoff;
        throw NumericalError(NumericalError::Kind::AllTruncated, msg.str());
    }
    out.matrix = out.matrix.selfadjointView<Eigen::Lower>();
    out.matrix /= static_cast<double>(n);
    out.condition_number = condition_number(out.matrix);
    return out;
}

PhiEstimate estimate_phi(const Matrix& x, const Matrix& z, const SmootherConfig& config) {
    config.validate(z.cols());
    return estimate_phi(x, z, config.bandwidth, config.cutoff, KernelFunction(config.kernel_order),
                        config.leave_one_out);
}

PhiEstimate estimate_external_phi(const ExternalDataset& external, const SmootherConfig& config) {
    config.validate(external.q());
    return estimate_phi(external.x(), external.z(), config.external_bandwidth, config.external_cutoff,
                        KernelFunction(config.kernel_order), config.leave_one_out);
}

PLMFit fit_plm(const Matrix& x, const Matrix& z, const Vector& outcome, const SmootherConfig& config,
               const PhiEstimate& phi) {
    if (x.rows() != z.rows() || outcome.size() != z.rows()) {
        throw ValidationError("abundances, confounders and outcome disagree on row count");
    }
    if (phi.residuals.cols() != x.cols()) {
        throw ValidationError("Phi estimate has a different number of taxa");
    }
    auto fits = fit_plm_many(z, outcome, config, phi);
    return std::move(fits.front());
}

std::vector<PLMFit> fit_plm_many(const Matrix& z, const Matrix& outcomes, const SmootherConfig& config,
                                 const PhiEstimate& phi) {
    config.validate(z.cols());
    check_phi_matches(z, phi, config);
    if (outcomes.rows() != z.rows()) {
        throw ValidationError("outcomes and confounders disagree on row count");
    }
    const Matrix fitted =
        nw_regress(outcomes, z, config.bandwidth, KernelFunction(config.kernel_order), config.leave_one_out);
    std::vector<PLMFit> fits;
    fits.reserve(static_cast<std::size_t>(outcomes.cols()));
    for (Index k = 0; k < outcomes.cols(); ++k) {
        fits.push_back(finish_fit(phi, outcomes.col(k), fitted.col(k), config.max_condition));
    }
    return fits;
}

std::pair<double, double> paired_rate_exponents(Index q, int m) {
    const double qd = static_cast<double>(q);
    const double alpha = 1.0 / (qd + 2.0 * m);
    const double theta = (2.0 * m - qd) / (8.0 * (qd + 2.0 * m));
    return {alpha, theta};
}

std::pair<double, double> external_rate_exponents(Index q, int m) {
    if (q == 2 && m == 2) {
        return {1.0 / 5.0, 1.0 / 20.0};
    }
    const double qd = static_cast<double>(q);
    const double alpha = 0.5 * (1.0 / (4.0 * m) + 1.0 / (2.0 * qd));
    const double theta = (1.0 - 2.0 * qd * alpha) / 8.0;
    return {alpha, theta};
}

SmootherConfig default_smoother_config(Index n, Index n_external, Index q, int m,
                                       const ScheduleConstants& constants) {
    if (n < 1 || n_external < 1 || q < 1) {
        throw ValidationError("default schedule needs n, N, q >= 1");
    }
    SmootherConfig config;
    config.kernel_order = m;
    const double peak = std::pow(2.0 * std::numbers::pi, -0.5 * static_cast<double>(q));
    const auto [alpha, theta] = paired_rate_exponents(q, m);
    const auto [alpha_ss, theta_ss] = external_rate_exponents(q, m);
    const double nd = static_cast<double>(n);
    const double big_n = static_cast<double>(n_external);
    config.bandwidth = constants.bandwidth_scale * std::pow(nd, -alpha);
    config.cutoff = constants.cutoff_scale * peak * std::pow(nd, -theta);
    config.external_bandwidth = constants.bandwidth_scale * std::pow(big_n, -alpha_ss);
    config.external_cutoff = constants.cutoff_scale * peak * std::pow(big_n, -theta_ss);
    config.validate(q);
    return config;
}

}  // namespace mcorr
