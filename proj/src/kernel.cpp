#include "mcorr/kernel.hpp"

#include "mcorr/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace mcorr {

namespace {

const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);

// Coefficients (in powers of u^2) of sum_{j<r} (-1)^j / (2^j j!) He_{2j}(u),
// where He are the probabilists' Hermite polynomials.
std::vector<double> gaussian_order_polynomial(int order) {
    const int r = order / 2;
    std::vector<double> poly(static_cast<std::size_t>(r), 0.0);
    for (int j = 0; j < r; ++j) {
        const double outer = ((j % 2 == 0) ? 1.0 : -1.0) / (std::pow(2.0, j) * std::tgamma(j + 1.0));
        // He_{2j}(u) = sum_k (-1)^k (2j)! / (k! (2j - 2k)! 2^k) u^{2j - 2k}
        for (int k = 0; k <= j; ++k) {
            const double he = ((k % 2 == 0) ? 1.0 : -1.0) * std::tgamma(2.0 * j + 1.0) /
                              (std::tgamma(k + 1.0) * std::tgamma(2.0 * j - 2.0 * k + 1.0) * std::pow(2.0, k));
            poly[static_cast<std::size_t>(j - k)] += outer * he;
        }
    }
    return poly;
}

// Composite Simpson rule for int u^s k(u) du over [-14, 14]; the Gaussian
// factor is below 1e-42 outside that range.
double moment(const KernelFunction& kernel, int s) {
    constexpr int intervals = 5600;
    constexpr double lo = -14.0;
    constexpr double hi = 14.0;
    const double h = (hi - lo) / intervals;
    double acc = 0.0;
    for (int i = 0; i <= intervals; ++i) {
        const double u = lo + i * h;
        const double weight = (i == 0 || i == intervals) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
        acc += weight * std::pow(u, s) * kernel(u);
    }
    return acc * h / 3.0;
}

void verify_moments(const KernelFunction& kernel) {
    for (int s = 0; s < kernel.order(); ++s) {
        const double expected = (s == 0) ? 1.0 : 0.0;
        const double value = moment(kernel, s);
        if (std::abs(value - expected) > 1e-9) {
            std::ostringstream msg;
            msg << "order-" << kernel.order() << " kernel fails moment " << s << ": " << value;
            throw NumericalError(NumericalError::Kind::Inconsistent, msg.str());
        }
    }
}

constexpr Index block_rows = 64;

// Squared scaled distances are capped here so exp() stays in the normal range;
// subnormal weights slow every later operation by an order of magnitude.
constexpr double max_d2 = 1400.0;

// Fills `block` (n x rows) with K((z_i - z_j) / a) for i in [first, first + rows),
// one contiguous column per target point i.
void kernel_block(const Matrix& z, Index first, Index rows, double bandwidth, const KernelFunction& kernel,
                  bool leave_one_out, Matrix& block) {
    const Index n = z.rows();
    const Index q = z.cols();
    const bool gaussian = kernel.order() == 2;
    const double norm = std::pow(inv_sqrt_2pi, static_cast<double>(q));
    Eigen::ArrayXd d2(n);
    Eigen::ArrayXd u(n);
    Eigen::ArrayXd poly(n);
    for (Index r = 0; r < rows; ++r) {
        const Index i = first + r;
        d2.setZero();
        if (!gaussian) {
            poly.setOnes();
        }
        for (Index k = 0; k < q; ++k) {
            u = (z.col(k).array() - z(i, k)) / bandwidth;
            d2 += u.square();
            if (!gaussian) {
                poly *= u.square().unaryExpr([&kernel](double v) { return kernel.polynomial_factor(v); });
            }
        }
        auto col = block.col(r).array();
        col = norm * (-0.5 * d2.min(max_d2)).exp();
        if (!gaussian) {
            col *= poly;
        }
        if (leave_one_out) {
            block(i, r) = 0.0;
        }
    }
}

}  // namespace

KernelFunction::KernelFunction(int order) : order_(order) {
    if (order < 2 || order % 2 != 0) {
        throw ValidationError("kernel order must be an even integer >= 2, got " + std::to_string(order));
    }
    poly_ = gaussian_order_polynomial(order);
    verify_moments(*this);
}

double KernelFunction::polynomial_factor(double u_squared) const {
    double acc = 0.0;
    for (auto it = poly_.rbegin(); it != poly_.rend(); ++it) {
        acc = acc * u_squared + *it;
    }
    return acc;
}

double KernelFunction::operator()(double u) const {
    return polynomial_factor(u * u) * inv_sqrt_2pi * std::exp(-0.5 * u * u);
}

double kernel_eval(double u, const KernelFunction& kernel) { return kernel(u); }

double product_kernel(std::span<const double> z_diff, double bandwidth, const KernelFunction& kernel) {
    double acc = 1.0;
    for (double d : z_diff) {
        acc *= kernel(d / bandwidth);
    }
    return acc;
}

SmootherFit smooth(const Matrix& targets, const Matrix& z, double bandwidth, const KernelFunction& kernel,
                   bool leave_one_out) {
    const Index n = z.rows();
    if (n < 1) {
        throw ValidationError("smoother needs at least one sample");
    }
    if (targets.rows() != n) {
        throw ValidationError("smoother targets and confounders disagree on row count");
    }
    if (!(bandwidth > 0.0)) {
        throw ValidationError("bandwidth must be positive");
    }
    const Index d = targets.cols();
    SmootherFit fit;
    fit.bandwidth = bandwidth;
    fit.fitted.resize(n, d);
    fit.density.resize(n);

    const Index terms = leave_one_out ? n - 1 : n;
    const double density_scale = 1.0 / (static_cast<double>(std::max<Index>(terms, 1)) *
                                         std::pow(bandwidth, static_cast<double>(z.cols())));
    // Weights this small relative to the self-weight K(0) mean the point has
    // no effective neighbours (or the higher-order weights cancelled out).
    const double self_weight = std::pow(inv_sqrt_2pi * kernel.polynomial_factor(0.0), static_cast<double>(z.cols()));
    const double capped_weight = std::pow(inv_sqrt_2pi, static_cast<double>(z.cols())) * std::exp(-0.5 * max_d2);
    const double floor =
        kernel.order() == 2 ? 2.0 * static_cast<double>(terms) * capped_weight : 1e-8 * self_weight;

    Matrix block(n, block_rows);
    for (Index first = 0; first < n; first += block_rows) {
        const Index rows = std::min(block_rows, n - first);
        if (rows != block.cols()) {
            block.resize(n, rows);
        }
        kernel_block(z, first, rows, bandwidth, kernel, leave_one_out, block);
        const Vector denom = block.colwise().sum().transpose();
        fit.fitted.middleRows(first, rows).noalias() = block.transpose() * targets;
        for (Index r = 0; r < rows; ++r) {
            if (!(denom(r) > floor) || !std::isfinite(denom(r))) {
                std::ostringstream msg;
                msg << "kernel weights vanish at sample " << first + r << " (bandwidth " << bandwidth << ")";
                throw NumericalError(NumericalError::Kind::VanishingDenominator, msg.str());
            }
            fit.fitted.row(first + r) /= denom(r);
            fit.density(first + r) = density_scale * denom(r);
        }
    }
    return fit;
}

Vector density_estimate(const Matrix& z, double bandwidth, const KernelFunction& kernel, bool leave_one_out) {
    const Index n = z.rows();
    if (n < 1) {
        throw ValidationError("density estimate needs at least one sample");
    }
    if (!(bandwidth > 0.0)) {
        throw ValidationError("bandwidth must be positive");
    }
    const Index terms = leave_one_out ? n - 1 : n;
    const double scale =
        1.0 / (static_cast<double>(std::max<Index>(terms, 1)) * std::pow(bandwidth, static_cast<double>(z.cols())));
    Vector out(n);
    Matrix block(n, block_rows);
    for (Index first = 0; first < n; first += block_rows) {
        const Index rows = std::min(block_rows, n - first);
        if (rows != block.cols()) {
            block.resize(n, rows);
        }
        kernel_block(z, first, rows, bandwidth, kernel, leave_one_out, block);
        out.segment(first, rows) = scale * block.colwise().sum().transpose();
    }
    return out;
}

Matrix nw_regress(const Matrix& targets, const Matrix& z, double bandwidth, const KernelFunction& kernel,
                  bool leave_one_out) {
    return smooth(targets, z, bandwidth, kernel, leave_one_out).fitted;
}

}  // namespace mcorr
