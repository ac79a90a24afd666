#pragma once

#include "mcorr/inference.hpp"
#include "mcorr/plm.hpp"
#include "mcorr/types.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace mcorr {

/// Shape of the confounder effects h_x, f, g as functions of s = sum_k z_k.
enum class ConfounderFamily { Linear, Exponential, Triangular };

enum class PhiScenario { Identity, UpperTriangularD };

std::string to_string(ConfounderFamily family);
std::string to_string(PhiScenario scenario);
ConfounderFamily parse_family(const std::string& name);
PhiScenario parse_phi_scenario(const std::string& name);

struct ScenarioConfig {
    Index n = 100;
    Index p = 6;
    Index q = 2;
    /// External cohort size N = round(external_factor * n).
    double external_factor = 10.0;
    ConfounderFamily family = ConfounderFamily::Linear;
    PhiScenario phi_scenario = PhiScenario::Identity;
    double r0_true = 0.0;
    int replications = 500;
    std::uint64_t seed = 1;
    /// Replaces the scenario's Phi (any symmetric PSD p x p matrix).
    std::optional<Matrix> phi_override;

    void validate() const;
    Index external_n() const;
};

/// I_p, or D D' with D upper triangular, unit diagonal and 0.5 above it.
Matrix build_phi(PhiScenario scenario, Index p);

/// Coefficient pair whose microbial correlation under build_phi(scenario, 6)
/// equals r0. For the D D' scenario both base vectors are multiplied by D^-T.
std::pair<Vector, Vector> construct_coefficients(double r0, PhiScenario scenario, Index p = 6);

struct Scenario {
    PairedDataset paired;
    std::optional<ExternalDataset> external;
    double truth = 0.0;
    Vector beta;
    Vector gamma;
    Matrix phi;
};

/// R implied by the scenario's coefficients and Phi (r0_true unless Phi is
/// overridden).
double scenario_truth(const ScenarioConfig& config);

/// Draws one paired cohort (and, if requested, an external cohort of size N).
Scenario generate_scenario(const ScenarioConfig& config, std::mt19937_64& rng, bool with_external = true);

struct ReplicationOptions {
    double alpha = 0.05;
    /// Record the plug-in estimate (bias) of each replication.
    bool plugin = true;
    /// Run the calibrated test of H0: |R| <= r0_test.
    bool calibrated = true;
    int n_splits = 1;
    unsigned threads = 0;
    /// Overrides the default schedule for (n, N).
    std::optional<SmootherConfig> smoother;
    ScheduleConstants constants;
};

struct ReplicationRecord {
    double r_plugin = 0.0;  // NaN if skipped or failed
    double r_ss = 0.0;      // NaN if skipped or failed
    double std_err = 0.0;
    double p_value = 1.0;
    bool rejected = false;
};

struct ReplicationSummary {
    double truth = 0.0;
    double r0_test = 0.0;
    /// Over replications whose calibrated test completed.
    double rejection_rate = 0.0;
    /// r_plugin - truth, per completed replication.
    std::vector<double> biases;
    double median_bias = 0.0;
    double median_abs_bias = 0.0;
    int plugin_failures = 0;
    int test_failures = 0;
    std::vector<ReplicationRecord> records;
};

/// Runs config.replications independent replications (replication k seeded
/// by derive_seed(config.seed, {k})) and aggregates them. The result does not
/// depend on the thread count.
ReplicationSummary run_replications(const ScenarioConfig& config, double r0_test,
                                    const ReplicationOptions& options = {});

double median(std::vector<double> values);

}  // namespace mcorr
