#pragma once

#include "mcorr/correlation.hpp"
#include "mcorr/types.hpp"

#include <cstdint>
#include <vector>

namespace mcorr {

/// Test of H0: |R| <= r0 against H1: |R| > r0.
struct TestResult {
    double r0 = 0.0;
    double t_plus = 0.0;   // sqrt(n) (|R| - r0)_+ / sigma
    double t_minus = 0.0;  // sqrt(n) (|R| - r0)_- / sigma
    double p_value = 1.0;  // 2 Pr(Z >= max(t_plus, t_minus))
};

/// 2 Pr(Z >= t) for standard normal Z, via erfc.
double two_sided_normal_tail(double t);

/// Throws ValidationError for r0 outside [0, 1) or an estimate without a
/// finite standard error. A zero standard error gives p = 0 when |R| > r0.
TestResult test_statistics(const CorrelationEstimate& estimate, Index n, double r0);

/// How the p-value is attached to the median over splits.
enum class MedianRule {
    /// The p-value of the split attaining the (lower) median estimate.
    MedianSplit,
    /// Recompute the test at the median estimate with the median standard error.
    MedianEstimateMedianSe,
};

struct MultiSplitResult {
    double r_median = 0.0;
    double p_value = 1.0;
    double std_err = 0.0;
    int n_ok = 0;
    int n_failed = 0;
    /// False when more than half of the splits failed; r_median and p_value
    /// are then NaN.
    bool estimable = false;
    std::vector<CorrelationEstimate> estimates;
};

/// Seed of split `index` derived from a run seed.
std::uint64_t split_seed(std::uint64_t seed, std::uint64_t index);

/// n_splits independent random halvings of the paired sample.
std::vector<SplitPlan> make_split_plans(Index n, int n_splits, std::uint64_t seed);

MultiSplitResult multi_split_inference(const PairedDataset& data, const ExternalDataset& external,
                                       const SmootherConfig& config, int n_splits, double r0, std::uint64_t seed,
                                       MedianRule rule = MedianRule::MedianSplit);

/// Same over explicit plans, with the external Phi-hat and the full-sample
/// variance inputs already computed.
MultiSplitResult multi_split_inference(const PairedDataset& data, const PhiEstimate& external_phi,
                                       const SmootherConfig& config, const std::vector<SplitPlan>& plans, double r0,
                                       const VarianceInputs& variance, MedianRule rule = MedianRule::MedianSplit);

/// Reduces per-split estimates (NaN r_hat marks a failed split) to the median
/// and its p-value. Shared by the single-pair and the batched pairwise paths.
MultiSplitResult aggregate_splits(std::vector<CorrelationEstimate> estimates, int n_failed, Index n, double r0,
                                  MedianRule rule);

struct FdrResult {
    std::vector<double> p_adjusted;
    std::vector<char> significant;
};

/// Benjamini-Yekutieli step-up adjustment with c(M) = sum_{k<=M} 1/k.
FdrResult by_fdr(const std::vector<double>& p_values, double alpha);

}  // namespace mcorr
