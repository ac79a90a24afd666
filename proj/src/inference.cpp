#include "mcorr/inference.hpp"

#include "mcorr/errors.hpp"
#include "mcorr/plm.hpp"
#include "mcorr/seeding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

namespace mcorr {

double two_sided_normal_tail(double t) { return std::erfc(t / std::numbers::sqrt2); }

TestResult test_statistics(const CorrelationEstimate& estimate, Index n, double r0) {
    if (!(r0 >= 0.0 && r0 < 1.0)) {
        throw ValidationError("r0 must lie in [0, 1)");
    }
    if (n < 1) {
        throw ValidationError("test needs n >= 1");
    }
    if (!estimate.std_err || !std::isfinite(*estimate.std_err) || *estimate.std_err < 0.0) {
        throw ValidationError("test needs an estimate with a finite standard error");
    }
    const double sigma = std::sqrt(static_cast<double>(n)) * *estimate.std_err;
    const double excess = std::abs(estimate.r_hat) - r0;
    const double root_n = std::sqrt(static_cast<double>(n));
    const double inf = std::numeric_limits<double>::infinity();

    TestResult out;
    out.r0 = r0;
    if (sigma > 0.0) {
        out.t_plus = root_n * std::max(excess, 0.0) / sigma;
        out.t_minus = root_n * std::min(excess, 0.0) / sigma;
    } else {
        out.t_plus = excess > 0.0 ? inf : 0.0;
        out.t_minus = excess < 0.0 ? -inf : 0.0;
    }
    out.p_value = two_sided_normal_tail(std::max(out.t_plus, out.t_minus));
    return out;
}

std::uint64_t split_seed(std::uint64_t seed, std::uint64_t index) { return derive_seed(seed, {0x5311u, index}); }

std::vector<SplitPlan> make_split_plans(Index n, int n_splits, std::uint64_t seed) {
    if (n_splits < 1) {
        throw ValidationError("number of splits must be at least 1");
    }
    std::vector<SplitPlan> plans;
    plans.reserve(static_cast<std::size_t>(n_splits));
    for (int s = 0; s < n_splits; ++s) {
        plans.push_back(SplitPlan::random(n, split_seed(seed, static_cast<std::uint64_t>(s))));
    }
    return plans;
}

MultiSplitResult aggregate_splits(std::vector<CorrelationEstimate> estimates, int n_failed, Index n, double r0,
                                  MedianRule rule) {
    MultiSplitResult out;
    out.n_failed = n_failed;
    std::vector<std::size_t> ok;
    for (std::size_t s = 0; s < estimates.size(); ++s) {
        if (std::isfinite(estimates[s].r_hat)) {
            ok.push_back(s);
        }
    }
    out.n_ok = static_cast<int>(ok.size());
    const int total = out.n_ok + out.n_failed;
    out.estimable = out.n_ok > 0 && 2 * out.n_failed <= total;
    out.estimates = std::move(estimates);
    if (!out.estimable) {
        out.r_median = std::numeric_limits<double>::quiet_NaN();
        out.p_value = std::numeric_limits<double>::quiet_NaN();
        out.std_err = std::numeric_limits<double>::quiet_NaN();
        return out;
    }

    // Stable order by estimate, ties broken by split index.
    std::stable_sort(ok.begin(), ok.end(),
                     [&](std::size_t lhs, std::size_t rhs) { return out.estimates[lhs].r_hat < out.estimates[rhs].r_hat; });
    const std::size_t k = ok.size();
    const std::size_t lower = (k - 1) / 2;
    const CorrelationEstimate& at_median = out.estimates[ok[lower]];
    out.r_median = (k % 2 == 1) ? at_median.r_hat : 0.5 * (at_median.r_hat + out.estimates[ok[lower + 1]].r_hat);

    if (rule == MedianRule::MedianSplit) {
        out.std_err = at_median.std_err.value_or(std::numeric_limits<double>::quiet_NaN());
        out.p_value = test_statistics(at_median, n, r0).p_value;
    } else {
        std::vector<double> errs;
        errs.reserve(k);
        for (std::size_t s : ok) {
            errs.push_back(out.estimates[s].std_err.value_or(std::numeric_limits<double>::quiet_NaN()));
        }
        std::sort(errs.begin(), errs.end());
        out.std_err = (k % 2 == 1) ? errs[lower] : 0.5 * (errs[lower] + errs[lower + 1]);
        CorrelationEstimate pooled = at_median;
        pooled.r_hat = out.r_median;
        pooled.std_err = out.std_err;
        out.p_value = test_statistics(pooled, n, r0).p_value;
    }
    return out;
}

MultiSplitResult multi_split_inference(const PairedDataset& data, const PhiEstimate& external_phi,
                                       const SmootherConfig& config, const std::vector<SplitPlan>& plans, double r0,
                                       const VarianceInputs& variance, MedianRule rule) {
    if (plans.empty()) {
        throw ValidationError("number of splits must be at least 1");
    }
    if (!(r0 >= 0.0 && r0 < 1.0)) {
        throw ValidationError("r0 must lie in [0, 1)");
    }
    std::vector<CorrelationEstimate> estimates;
    estimates.reserve(plans.size());
    int failed = 0;
    for (const SplitPlan& plan : plans) {
        try {
            estimates.push_back(estimate_r_calibrated(data, external_phi, config, plan, variance));
        } catch (const NumericalError&) {
            CorrelationEstimate dropped;
            dropped.r_hat = std::numeric_limits<double>::quiet_NaN();
            dropped.split_seed = plan.seed;
            estimates.push_back(dropped);
            ++failed;
        }
    }
    return aggregate_splits(std::move(estimates), failed, data.n(), r0, rule);
}

MultiSplitResult multi_split_inference(const PairedDataset& data, const ExternalDataset& external,
                                       const SmootherConfig& config, int n_splits, double r0, std::uint64_t seed,
                                       MedianRule rule) {
    external.check_conforms(data);
    const auto plans = make_split_plans(data.n(), n_splits, seed);
    const PhiEstimate external_phi = estimate_external_phi(external, config);
    const VarianceInputs variance = estimate_variance_inputs(data, config);
    return multi_split_inference(data, external_phi, config, plans, r0, variance, rule);
}

FdrResult by_fdr(const std::vector<double>& p_values, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw ValidationError("FDR level must lie in (0, 1)");
    }
    const std::size_t m = p_values.size();
    for (std::size_t i = 0; i < m; ++i) {
        if (!(p_values[i] >= 0.0 && p_values[i] <= 1.0)) {
            std::ostringstream msg;
            msg << "p-value " << p_values[i] << " at position " << i << " is outside [0, 1]";
            throw ValidationError(msg.str());
        }
    }
    FdrResult out;
    out.p_adjusted.assign(m, 1.0);
    out.significant.assign(m, 0);
    if (m == 0) {
        return out;
    }
    double harmonic = 0.0;
    for (std::size_t k = 1; k <= m; ++k) {
        harmonic += 1.0 / static_cast<double>(k);
    }
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t lhs, std::size_t rhs) { return p_values[lhs] < p_values[rhs]; });

    const double scale = static_cast<double>(m) * harmonic;
    double running = 1.0;
    for (std::size_t rank = m; rank >= 1; --rank) {
        const std::size_t i = order[rank - 1];
        running = std::min(running, p_values[i] * scale / static_cast<double>(rank));
        out.p_adjusted[i] = running;
    }
    for (std::size_t i = 0; i < m; ++i) {
        out.significant[i] = out.p_adjusted[i] <= alpha ? 1 : 0;
    }
    return out;
}

}  // namespace mcorr
