#pragma once

#include "mcorr/types.hpp"

#include <span>
#include <vector>

namespace mcorr {

/// Gaussian-based kernel of even order m: k(u) = P(u^2) * phi(u), where P is
/// chosen so that the first m - 1 moments vanish (P == 1 for m = 2, and
/// P(u^2) = (3 - u^2) / 2 for m = 4).
class KernelFunction {
public:
    /// Builds the order-m kernel and checks its moments by quadrature;
    /// throws ValidationError for odd or < 2 orders.
    explicit KernelFunction(int order = 2);

    int order() const noexcept { return order_; }

    /// Coefficients of P in powers of u^2, lowest first.
    const std::vector<double>& polynomial() const noexcept { return poly_; }

    double operator()(double u) const;

    /// Polynomial factor P(u^2) alone.
    double polynomial_factor(double u_squared) const;

private:
    int order_;
    std::vector<double> poly_;
};

/// Smoothed values and density estimate from a single pass over the kernel matrix.
struct SmootherFit {
    Matrix fitted;   // n x d, h-hat of every target column
    Vector density;  // l-hat, (n a^q)^-1 sum_j K_ij
    double bandwidth = 0.0;
};

double kernel_eval(double u, const KernelFunction& kernel);

/// prod_j k(z_diff_j / a).
double product_kernel(std::span<const double> z_diff, double bandwidth, const KernelFunction& kernel);

/// l-hat_i = (n a^q)^-1 sum_j K((z_i - z_j) / a), self term included unless
/// `leave_one_out`.
Vector density_estimate(const Matrix& z, double bandwidth, const KernelFunction& kernel, bool leave_one_out = false);

/// Nadaraya-Watson conditional means sum_j t_j K_ij / sum_j K_ij, column-wise.
/// Throws NumericalError(VanishingDenominator) if the weights vanish at a point.
Matrix nw_regress(const Matrix& targets, const Matrix& z, double bandwidth, const KernelFunction& kernel,
                  bool leave_one_out = false);

/// Both of the above in one pass.
SmootherFit smooth(const Matrix& targets, const Matrix& z, double bandwidth, const KernelFunction& kernel,
                   bool leave_one_out = false);

}  // namespace mcorr
