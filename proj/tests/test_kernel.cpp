#include "mcorr/errors.hpp"
#include "mcorr/kernel.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <algorithm>
#include <functional>
#include <numeric>
#include <random>

using namespace mcorr;

namespace {

const double k0 = 1.0 / std::sqrt(2.0 * std::numbers::pi);
const double k1 = std::exp(-0.5) / std::sqrt(2.0 * std::numbers::pi);

// Direct double loop over the kernel matrix.
struct BruteForce {
    Matrix fitted;
    Vector density;
};

BruteForce brute_force(const Matrix& targets, const Matrix& z, double a, const KernelFunction& k, bool loo) {
    const Index n = z.rows();
    BruteForce out{Matrix::Zero(n, targets.cols()), Vector::Zero(n)};
    for (Index i = 0; i < n; ++i) {
        double denom = 0.0;
        for (Index j = 0; j < n; ++j) {
            if (loo && i == j) continue;
            double w = 1.0;
            for (Index c = 0; c < z.cols(); ++c) w *= k((z(i, c) - z(j, c)) / a);
            denom += w;
            out.fitted.row(i) += w * targets.row(j);
        }
        out.fitted.row(i) /= denom;
        const double terms = loo ? static_cast<double>(n - 1) : static_cast<double>(n);
        out.density(i) = denom / (terms * std::pow(a, static_cast<double>(z.cols())));
    }
    return out;
}

double simpson(const std::function<double(double)>& f, double lo, double hi, int intervals) {
    const double h = (hi - lo) / intervals;
    double acc = f(lo) + f(hi);
    for (int i = 1; i < intervals; ++i) acc += (i % 2 ? 4.0 : 2.0) * f(lo + i * h);
    return acc * h / 3.0;
}

}  // namespace

TEST(KernelFunction, GaussianValues) {
    const KernelFunction k(2);
    EXPECT_NEAR(kernel_eval(0.0, k), 0.398942280401433, 1e-15);
    EXPECT_NEAR(kernel_eval(1.0, k), 0.241970724519143, 1e-15);
    EXPECT_NEAR(kernel_eval(-1.0, k), kernel_eval(1.0, k), 0.0);
}

TEST(KernelFunction, FourthOrderHasClosedForm) {
    const KernelFunction k(4);
    for (double u : {0.0, 0.5, 1.3, 2.7}) {
        EXPECT_NEAR(k(u), 0.5 * (3.0 - u * u) * k0 * std::exp(-0.5 * u * u), 1e-15);
    }
}

TEST(KernelFunction, MomentConditionsHoldByQuadrature) {
    for (int m : {2, 4, 6, 8}) {
        const KernelFunction k(m);
        for (int s = 0; s < m; ++s) {
            const double moment =
                simpson([&](double u) { return std::pow(u, s) * k(u); }, -10.0, 10.0, 4000);
            EXPECT_NEAR(moment, s == 0 ? 1.0 : 0.0, 1e-6) << "m=" << m << " s=" << s;
        }
        // The m-th moment does not vanish.
        const double mth = simpson([&](double u) { return std::pow(u, m) * k(u); }, -10.0, 10.0, 4000);
        EXPECT_GT(std::abs(mth), 1e-3);
    }
}

TEST(KernelFunction, RejectsInvalidOrders) {
    EXPECT_THROW(KernelFunction(0), ValidationError);
    EXPECT_THROW(KernelFunction(3), ValidationError);
}

TEST(ProductKernel, Examples) {
    const KernelFunction k(2);
    const double zero[2] = {0.0, 0.0};
    const double one[2] = {1.0, 1.0};
    EXPECT_NEAR(product_kernel(zero, 1.0, k), 1.0 / (2.0 * std::numbers::pi), 1e-15);
    EXPECT_NEAR(product_kernel(one, 1.0, k), k1 * k1, 1e-15);
    EXPECT_NEAR(product_kernel(one, 1.0, k), 0.058550, 1e-6);
    const double single[1] = {0.7};
    EXPECT_DOUBLE_EQ(product_kernel(single, 1.0, k), kernel_eval(0.7, k));
    const double scaled[1] = {1.0};
    EXPECT_DOUBLE_EQ(product_kernel(scaled, 2.0, k), kernel_eval(0.5, k));
}

TEST(DensityEstimate, Examples) {
    const KernelFunction k(2);
    Matrix one(1, 1);
    one << 3.0;
    EXPECT_NEAR(density_estimate(one, 1.0, k)(0), k0, 1e-15);

    Matrix same = Matrix::Constant(5, 2, 1.5);
    const Vector d = density_estimate(same, 0.5, k);
    for (Index i = 0; i < 5; ++i) EXPECT_NEAR(d(i), std::pow(0.5, -2.0) * k0 * k0, 1e-13);

    Matrix two(2, 1);
    two << 0.0, 1.0;
    const Vector l = density_estimate(two, 1.0, k);
    EXPECT_NEAR(l(0), (k0 + k1) / 2.0, 1e-15);
    EXPECT_NEAR(l(1), 0.320457, 1e-6);
}

TEST(NadarayaWatson, TwoPointExample) {
    const KernelFunction k(2);
    Matrix z(2, 1), t(2, 1);
    z << 0.0, 1.0;
    t << 0.0, 1.0;
    const Matrix h = nw_regress(t, z, 1.0, k);
    EXPECT_NEAR(h(0, 0), k1 / (k0 + k1), 1e-15);
    EXPECT_NEAR(h(0, 0), 0.377541, 1e-6);
}

TEST(NadarayaWatson, ReproducesConstants) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> normal;
    Matrix z(40, 2);
    for (Index i = 0; i < z.size(); ++i) z.data()[i] = normal(rng);
    const Matrix t = Matrix::Constant(40, 3, -2.25);
    for (double a : {0.1, 0.5, 3.0}) {
        const Matrix h = nw_regress(t, z, a, KernelFunction(2));
        EXPECT_NEAR((h.array() + 2.25).abs().maxCoeff(), 0.0, 1e-14);
    }
}

TEST(NadarayaWatson, LargeBandwidthGivesColumnMeans) {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> normal;
    Matrix z(30, 2), t(30, 2);
    for (Index i = 0; i < z.size(); ++i) z.data()[i] = normal(rng);
    for (Index i = 0; i < t.size(); ++i) t.data()[i] = normal(rng);
    const Matrix h = nw_regress(t, z, 1e6, KernelFunction(2));
    const Eigen::RowVectorXd mean = t.colwise().mean();
    for (Index i = 0; i < 30; ++i) EXPECT_LT((h.row(i) - mean).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(NadarayaWatson, PermutationEquivariance) {
    std::mt19937_64 rng(13);
    std::normal_distribution<double> normal;
    const Index n = 25;
    Matrix z(n, 2), t(n, 2);
    for (Index i = 0; i < z.size(); ++i) z.data()[i] = normal(rng);
    for (Index i = 0; i < t.size(); ++i) t.data()[i] = normal(rng);
    std::vector<Index> perm(n);
    std::iota(perm.begin(), perm.end(), Index{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    Matrix zp(n, 2), tp(n, 2);
    for (Index i = 0; i < n; ++i) {
        zp.row(i) = z.row(perm[i]);
        tp.row(i) = t.row(perm[i]);
    }
    const KernelFunction k(2);
    const Matrix h = nw_regress(t, z, 0.6, k);
    const Matrix hp = nw_regress(tp, zp, 0.6, k);
    for (Index i = 0; i < n; ++i) EXPECT_LT((hp.row(i) - h.row(perm[i])).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(NadarayaWatson, MatchesBruteForceDoubleLoop) {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> normal;
    std::uniform_int_distribution<int> size(1, 50);
    std::uniform_real_distribution<double> bw(0.3, 2.0);
    for (int rep = 0; rep < 40; ++rep) {
        const Index n = size(rng);
        const Index q = 1 + rep % 3;
        const int m = (rep % 4 == 3) ? 4 : 2;
        const bool loo = (rep % 5 == 4) && n > 1;
        Matrix z(n, q), t(n, 2);
        for (Index i = 0; i < z.size(); ++i) z.data()[i] = normal(rng);
        for (Index i = 0; i < t.size(); ++i) t.data()[i] = normal(rng);
        const double a = bw(rng);
        const KernelFunction k(m);
        SmootherFit fit;
        try {
            fit = smooth(t, z, a, k, loo);
        } catch (const NumericalError&) {
            continue;  // higher-order weights may cancel for tiny samples
        }
        const BruteForce ref = brute_force(t, z, a, k, loo);
        EXPECT_LT((fit.fitted - ref.fitted).cwiseAbs().maxCoeff(), 1e-12) << "rep " << rep;
        EXPECT_LT((fit.density - ref.density).cwiseAbs().maxCoeff(), 1e-12) << "rep " << rep;
        EXPECT_LT((density_estimate(z, a, k, loo) - ref.density).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(NadarayaWatson, IsolatedPointWithoutSelfTermThrows) {
    Matrix z(2, 1), t(2, 1);
    z << 0.0, 1000.0;
    t << 1.0, 2.0;
    try {
        nw_regress(t, z, 0.1, KernelFunction(2), true);
        FAIL() << "expected a vanishing-denominator error";
    } catch (const NumericalError& e) {
        EXPECT_EQ(e.kind(), NumericalError::Kind::VanishingDenominator);
    }
    // With the self term every point keeps its own weight.
    EXPECT_NO_THROW(nw_regress(t, z, 0.1, KernelFunction(2), false));
}

TEST(NadarayaWatson, InputValidation) {
    const KernelFunction k(2);
    EXPECT_THROW(nw_regress(Matrix::Zero(3, 1), Matrix::Zero(2, 1), 1.0, k), ValidationError);
    EXPECT_THROW(nw_regress(Matrix::Zero(2, 1), Matrix::Zero(2, 1), 0.0, k), ValidationError);
    EXPECT_THROW(density_estimate(Matrix::Zero(0, 1), 1.0, k), ValidationError);
}
