#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mcorr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Paired microbiome-metabolome cohort: confounders Z (n x q), log-ratio
/// abundances X (n x p) and two metabolite outcomes y, w.
class PairedDataset {
public:
    PairedDataset(Matrix z, Matrix x, Vector y, Vector w);

    const Matrix& z() const noexcept { return z_; }
    const Matrix& x() const noexcept { return x_; }
    const Vector& y() const noexcept { return y_; }
    const Vector& w() const noexcept { return w_; }

    Index n() const noexcept { return x_.rows(); }
    Index p() const noexcept { return x_.cols(); }
    Index q() const noexcept { return z_.cols(); }

    /// Same covariate block with the outcomes swapped.
    PairedDataset swapped() const { return PairedDataset(z_, x_, w_, y_); }

    /// Rows selected by `rows`, in the given order.
    PairedDataset subset(const std::vector<Index>& rows) const;

private:
    Matrix z_;
    Matrix x_;
    Vector y_;
    Vector w_;
};

/// Covariate-only cohort used to estimate Phi independently of the outcomes.
class ExternalDataset {
public:
    ExternalDataset(Matrix z, Matrix x);

    const Matrix& z() const noexcept { return z_; }
    const Matrix& x() const noexcept { return x_; }

    Index n() const noexcept { return x_.rows(); }
    Index p() const noexcept { return x_.cols(); }
    Index q() const noexcept { return z_.cols(); }

    /// Throws ValidationError unless the column counts match `data`.
    void check_conforms(const PairedDataset& data) const;

private:
    Matrix z_;
    Matrix x_;
};

struct SmootherConfig {
    int kernel_order = 2;
    double bandwidth = 1.0;
    double cutoff = 1e-3;
    double external_bandwidth = 1.0;
    double external_cutoff = 1e-3;
    /// Drop the j == i term from every kernel sum.
    bool leave_one_out = false;
    /// Phi-hat is treated as singular above this condition number.
    double max_condition = 1e10;

    /// Throws ValidationError if the kernel order or any scale is inadmissible
    /// for `q` confounders.
    void validate(Index q) const;
};

/// Truncated least-squares fit of one outcome on the residualised abundances.
struct PLMFit {
    Vector coefficients;
    double residual_variance = 0.0;
    Index retained_count = 0;
    /// h-hat of the outcome at every sample point.
    Vector fitted_confounder_effect;
};

struct CorrelationEstimate {
    double r_hat = 0.0;
    /// Standard error of r_hat; absent for the plug-in estimator.
    std::optional<double> std_err;
    Index n_effective = 0;
    std::uint64_t split_seed = 0;
    double phi_condition_number = 1.0;
};

struct PairwiseResultRow {
    std::string metabolite_id_1;
    std::string metabolite_id_2;
    /// NaN when the pair was not estimable.
    double r_median = 0.0;
    double p_value = 1.0;
    double p_adjusted = 1.0;
    bool significant = false;
    int n_splits = 0;

    bool estimable() const;
};

using PairwiseResultTable = std::vector<PairwiseResultRow>;

}  // namespace mcorr
