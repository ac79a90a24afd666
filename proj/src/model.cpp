#include "mcorr/model.hpp"

#include "mcorr/errors.hpp"

#include <cmath>
#include <sstream>

namespace mcorr {

namespace {

void require_finite(const Matrix& m, const char* block) {
    if (!m.allFinite()) {
        throw ValidationError(std::string("non-finite entry in ") + block);
    }
}

void require_finite(const Vector& v, const char* block) {
    if (!v.allFinite()) {
        throw ValidationError(std::string("non-finite entry in ") + block);
    }
}

}  // namespace

PairedDataset::PairedDataset(Matrix z, Matrix x, Vector y, Vector w)
    : z_(std::move(z)), x_(std::move(x)), y_(std::move(y)), w_(std::move(w)) {
    const Index n = x_.rows();
    if (n < 1) {
        throw ValidationError("paired dataset needs at least one subject");
    }
    if (z_.rows() != n || y_.size() != n || w_.size() != n) {
        std::ostringstream msg;
        msg << "paired dataset blocks disagree on row count: Z " << z_.rows() << ", X " << n << ", y "
            << y_.size() << ", w " << w_.size();
        throw ValidationError(msg.str());
    }
    if (z_.cols() < 1 || x_.cols() < 1) {
        throw ValidationError("paired dataset needs q >= 1 and p >= 1");
    }
    require_finite(z_, "Z");
    require_finite(x_, "X");
    require_finite(y_, "y");
    require_finite(w_, "w");
}

PairedDataset PairedDataset::subset(const std::vector<Index>& rows) const {
    Matrix z(static_cast<Index>(rows.size()), q());
    Matrix x(static_cast<Index>(rows.size()), p());
    Vector y(static_cast<Index>(rows.size()));
    Vector w(static_cast<Index>(rows.size()));
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const Index i = rows[k];
        const auto r = static_cast<Index>(k);
        z.row(r) = z_.row(i);
        x.row(r) = x_.row(i);
        y(r) = y_(i);
        w(r) = w_(i);
    }
    return PairedDataset(std::move(z), std::move(x), std::move(y), std::move(w));
}

ExternalDataset::ExternalDataset(Matrix z, Matrix x) : z_(std::move(z)), x_(std::move(x)) {
    if (x_.rows() < 1) {
        throw ValidationError("external dataset needs at least one subject");
    }
    if (z_.rows() != x_.rows()) {
        throw ValidationError("external dataset blocks disagree on row count");
    }
    if (z_.cols() < 1 || x_.cols() < 1) {
        throw ValidationError("external dataset needs q >= 1 and p >= 1");
    }
    require_finite(z_, "external Z");
    require_finite(x_, "external X");
}

void ExternalDataset::check_conforms(const PairedDataset& data) const {
    if (p() != data.p() || q() != data.q()) {
        std::ostringstream msg;
        msg << "external cohort has (p, q) = (" << p() << ", " << q() << ") but paired cohort has (" << data.p()
            << ", " << data.q() << ")";
        throw ValidationError(msg.str());
    }
}

void SmootherConfig::validate(Index q) const {
    if (kernel_order < 2 || kernel_order % 2 != 0) {
        throw ValidationError("kernel order must be an even integer >= 2, got " + std::to_string(kernel_order));
    }
    if (2 * kernel_order <= q) {
        throw ValidationError("kernel order " + std::to_string(kernel_order) + " must exceed q/2 for q = " +
                              std::to_string(q));
    }
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw ValidationError(std::string(name) + " must be a positive finite number");
        }
    };
    positive(bandwidth, "bandwidth");
    positive(cutoff, "cutoff");
    positive(external_bandwidth, "external bandwidth");
    positive(external_cutoff, "external cutoff");
    if (!(max_condition > 1.0)) {
        throw ValidationError("condition-number threshold must exceed 1");
    }
}

bool PairwiseResultRow::estimable() const { return std::isfinite(r_median); }

namespace detail {

double clamp_correlation(double r) {
    constexpr double round_off = 1e-12;
    if (std::abs(r) <= 1.0) {
        return r;
    }
    if (std::abs(r) <= 1.0 + round_off) {
        return std::copysign(1.0, r);
    }
    std::ostringstream msg;
    msg.precision(17);
    msg << "correlation " << r << " outside [-1, 1]; Phi is not positive semi-definite";
    throw NumericalError(NumericalError::Kind::Inconsistent, msg.str());
}

double positivity_tolerance(const Matrix& phi, const Vector& v) {
    return 1e-12 * std::abs(phi.trace()) * v.squaredNorm();
}

}  // namespace detail

namespace {

double normalised_form(const Vector& beta, const Vector& gamma, const Matrix& phi) {
    if (beta.size() != gamma.size() || phi.rows() != beta.size() || phi.cols() != beta.size()) {
        throw ValidationError("coefficient vectors and covariance matrix are not conformable");
    }
    const Vector phi_beta = phi * beta;
    const Vector phi_gamma = phi * gamma;
    const double bb = beta.dot(phi_beta);
    const double gg = gamma.dot(phi_gamma);
    // Averaging both orders keeps R(b, g) == R(g, b) bit for bit.
    const double bg = 0.5 * (beta.dot(phi_gamma) + gamma.dot(phi_beta));
    if (!(bb > detail::positivity_tolerance(phi, beta)) || !(gg > detail::positivity_tolerance(phi, gamma))) {
        throw NumericalError(NumericalError::Kind::DegenerateDirection,
                             "coefficient vector has no variance under Phi (metabolite without microbial signal)");
    }
    return detail::clamp_correlation(bg / std::sqrt(bb * gg));
}

}  // namespace

double microbial_correlation(const Vector& beta, const Vector& gamma, const Matrix& phi) {
    return normalised_form(beta, gamma, phi);
}

double genetic_r1(const Vector& beta, const Vector& gamma) {
    if (beta.size() != gamma.size()) {
        throw ValidationError("coefficient vectors differ in length");
    }
    const double nb = beta.norm();
    const double ng = gamma.norm();
    if (nb == 0.0 || ng == 0.0) {
        throw ValidationError("genetic_r1 is undefined for a zero coefficient vector");
    }
    return detail::clamp_correlation(beta.dot(gamma) / (nb * ng));
}

double genetic_r2(const Vector& beta, const Vector& gamma, const Matrix& sigma_total) {
    return normalised_form(beta, gamma, sigma_total);
}

}  // namespace mcorr
