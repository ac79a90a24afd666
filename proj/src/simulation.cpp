#include "mcorr/simulation.hpp"

#include "mcorr/correlation.hpp"
#include "mcorr/errors.hpp"
#include "mcorr/model.hpp"
#include "mcorr/parallel.hpp"
#include "mcorr/seeding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mcorr {

std::string to_string(ConfounderFamily family) {
    switch (family) {
    case ConfounderFamily::Linear:
        return "linear";
    case ConfounderFamily::Exponential:
        return "exponential";
    case ConfounderFamily::Triangular:
        return "triangular";
    }
    return "?";
}

std::string to_string(PhiScenario scenario) {
    return scenario == PhiScenario::Identity ? "identity" : "upper_triangular";
}

ConfounderFamily parse_family(const std::string& name) {
    if (name == "linear") return ConfounderFamily::Linear;
    if (name == "exponential") return ConfounderFamily::Exponential;
    if (name == "triangular") return ConfounderFamily::Triangular;
    throw ValidationError("unknown confounder family '" + name + "' (linear, exponential, triangular)");
}

PhiScenario parse_phi_scenario(const std::string& name) {
    if (name == "identity") return PhiScenario::Identity;
    if (name == "upper_triangular") return PhiScenario::UpperTriangularD;
    throw ValidationError("unknown Phi scenario '" + name + "' (identity, upper_triangular)");
}

void ScenarioConfig::validate() const {
    if (n < 2) throw ValidationError("scenario needs n >= 2");
    if (p < 1 || q < 1) throw ValidationError("scenario needs p, q >= 1");
    if (replications < 1) throw ValidationError("scenario needs at least one replication");
    if (!(external_factor > 0.0)) throw ValidationError("external factor must be positive");
    if (!(std::abs(r0_true) < 1.0)) throw ValidationError("true correlation must lie in (-1, 1)");
    if (phi_override && (phi_override->rows() != p || phi_override->cols() != p)) {
        throw ValidationError("Phi override must be p x p");
    }
}

Index ScenarioConfig::external_n() const {
    return std::max<Index>(1, static_cast<Index>(std::llround(external_factor * static_cast<double>(n))));
}

Matrix build_phi(PhiScenario scenario, Index p) {
    if (p < 1) throw ValidationError("Phi needs p >= 1");
    if (scenario == PhiScenario::Identity) {
        return Matrix::Identity(p, p);
    }
    Matrix d = Matrix::Identity(p, p);
    for (Index i = 0; i < p; ++i) {
        for (Index j = i + 1; j < p; ++j) {
            d(i, j) = 0.5;
        }
    }
    return d * d.transpose();
}

std::pair<Vector, Vector> construct_coefficients(double r0, PhiScenario scenario, Index p) {
    if (p != 6) {
        throw ValidationError("the controlled-R coefficient construction is defined for p = 6 only");
    }
    if (!(std::abs(r0) <= 1.0)) {
        throw ValidationError("target correlation must lie in [-1, 1]");
    }
    const double third = std::sqrt(3.0) / 3.0;
    const double rest = std::sqrt((1.0 - r0 * r0) / 3.0);
    Vector beta(6);
    Vector gamma(6);
    beta << third, third, third, 0.0, 0.0, 0.0;
    gamma << r0 / std::sqrt(3.0), r0 / std::sqrt(3.0), r0 / std::sqrt(3.0), rest, rest, rest;
    if (scenario == PhiScenario::UpperTriangularD) {
        Matrix d = Matrix::Identity(6, 6);
        for (Index i = 0; i < 6; ++i) {
            for (Index j = i + 1; j < 6; ++j) {
                d(i, j) = 0.5;
            }
        }
        // b' D D' g = b0' g0 requires b = D^-T b0.
        const auto dt = d.transpose().triangularView<Eigen::Lower>();
        beta = dt.solve(beta);
        gamma = dt.solve(gamma);
    }
    return {beta, gamma};
}

namespace {

struct Effects {
    double hx;
    double f;
    double g;
};

Effects confounder_effects(ConfounderFamily family, double s) {
    switch (family) {
    case ConfounderFamily::Linear:
        return {s, s, s};
    case ConfounderFamily::Exponential: {
        const double e = std::exp(-0.5 * s * s);
        return {e, e, e};
    }
    case ConfounderFamily::Triangular:
        return {std::sin(s), std::sin(s), std::cos(s)};
    }
    return {0.0, 0.0, 0.0};
}

// Square root of a PSD matrix: Cholesky when positive definite, otherwise
// the symmetric eigen square root with negative eigenvalues floored at 0.
Matrix psd_sqrt(const Matrix& phi) {
    Eigen::LLT<Matrix> llt(phi);
    if (llt.info() == Eigen::Success) {
        return llt.matrixL();
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(phi);
    const Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

struct Cohort {
    Matrix z;
    Matrix x;
    Vector s;
};

Cohort draw_cohort(Index n, Index p, Index q, ConfounderFamily family, const Matrix& phi_root, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Cohort c{Matrix(n, q), Matrix(n, p), Vector(n)};
    for (Index i = 0; i < n; ++i) {
        for (Index k = 0; k < q; ++k) {
            c.z(i, k) = normal(rng);
        }
    }
    Matrix xi(n, p);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < p; ++j) {
            xi(i, j) = normal(rng);
        }
    }
    const Matrix tau = xi * phi_root.transpose();
    for (Index i = 0; i < n; ++i) {
        c.s(i) = c.z.row(i).sum();
        const double hx = confounder_effects(family, c.s(i)).hx;
        c.x.row(i) = tau.row(i).array() + hx;
    }
    return c;
}

}  // namespace

double scenario_truth(const ScenarioConfig& config) {
    if (!config.phi_override) {
        return config.r0_true;
    }
    const auto [beta, gamma] = construct_coefficients(config.r0_true, config.phi_scenario, config.p);
    try {
        return microbial_correlation(beta, gamma, *config.phi_override);
    } catch (const NumericalError&) {
        return std::numeric_limits<double>::quiet_NaN();
    }
}

Scenario generate_scenario(const ScenarioConfig& config, std::mt19937_64& rng, bool with_external) {
    config.validate();
    const Matrix phi = config.phi_override ? *config.phi_override : build_phi(config.phi_scenario, config.p);
    auto [beta, gamma] = construct_coefficients(config.r0_true, config.phi_scenario, config.p);
    const Matrix root = psd_sqrt(phi);

    Cohort paired = draw_cohort(config.n, config.p, config.q, config.family, root, rng);
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector y(config.n);
    Vector w(config.n);
    for (Index i = 0; i < config.n; ++i) {
        const Effects e = confounder_effects(config.family, paired.s(i));
        const double eps = normal(rng);
        const double delta = normal(rng);
        y(i) = e.f + paired.x.row(i).dot(beta) + eps;
        w(i) = e.g + paired.x.row(i).dot(gamma) + delta;
    }

    std::optional<ExternalDataset> external;
    if (with_external) {
        Cohort ext = draw_cohort(config.external_n(), config.p, config.q, config.family, root, rng);
        external.emplace(std::move(ext.z), std::move(ext.x));
    }

    const double truth = scenario_truth(config);
    return Scenario{PairedDataset(std::move(paired.z), std::move(paired.x), std::move(y), std::move(w)),
                    std::move(external), truth, std::move(beta), std::move(gamma), phi};
}

double median(std::vector<double> values) {
    if (values.empty()) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    std::sort(values.begin(), values.end());
    const std::size_t k = values.size();
    return (k % 2 == 1) ? values[k / 2] : 0.5 * (values[k / 2 - 1] + values[k / 2]);
}

ReplicationSummary run_replications(const ScenarioConfig& config, double r0_test, const ReplicationOptions& options) {
    config.validate();
    if (!(r0_test >= 0.0 && r0_test < 1.0)) {
        throw ValidationError("test threshold r0 must lie in [0, 1)");
    }
    if (!(options.alpha > 0.0 && options.alpha < 1.0)) {
        throw ValidationError("test level must lie in (0, 1)");
    }
    if (options.n_splits < 1) {
        throw ValidationError("number of splits must be at least 1");
    }
    const SmootherConfig smoother =
        options.smoother ? *options.smoother
                         : default_smoother_config(config.n, config.external_n(), config.q, 2, options.constants);
    smoother.validate(config.q);

    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<ReplicationRecord> records(static_cast<std::size_t>(config.replications));

    parallel_for(records.size(), options.threads, [&](std::size_t k) {
        std::mt19937_64 rng(derive_seed(config.seed, {static_cast<std::uint64_t>(k)}));
        const Scenario scenario = generate_scenario(config, rng, options.calibrated);
        ReplicationRecord& rec = records[k];
        rec.r_plugin = nan;
        rec.r_ss = nan;
        rec.std_err = nan;
        rec.p_value = nan;
        if (options.plugin) {
            try {
                rec.r_plugin = estimate_r_plugin(scenario.paired, smoother).r_hat;
            } catch (const NumericalError&) {
            }
        }
        if (options.calibrated) {
            try {
                const std::uint64_t split_base = derive_seed(config.seed, {static_cast<std::uint64_t>(k), 1u});
                const MultiSplitResult result = multi_split_inference(
                    scenario.paired, *scenario.external, smoother, options.n_splits, r0_test, split_base);
                if (result.estimable) {
                    rec.r_ss = result.r_median;
                    rec.std_err = result.std_err;
                    rec.p_value = result.p_value;
                    rec.rejected = result.p_value <= options.alpha;
                }
            } catch (const NumericalError&) {
            }
        }
    });

    ReplicationSummary summary;
    summary.truth = scenario_truth(config);
    summary.r0_test = r0_test;
    int tested = 0;
    int rejected = 0;
    std::vector<double> abs_biases;
    for (const ReplicationRecord& rec : records) {
        if (options.plugin) {
            if (std::isfinite(rec.r_plugin)) {
                summary.biases.push_back(rec.r_plugin - summary.truth);
                abs_biases.push_back(std::abs(rec.r_plugin - summary.truth));
            } else {
                ++summary.plugin_failures;
            }
        }
        if (options.calibrated) {
            if (std::isfinite(rec.r_ss)) {
                ++tested;
                rejected += rec.rejected ? 1 : 0;
            } else {
                ++summary.test_failures;
            }
        }
    }
    summary.rejection_rate = tested > 0 ? static_cast<double>(rejected) / tested : nan;
    summary.median_bias = median(summary.biases);
    summary.median_abs_bias = median(abs_biases);
    summary.records = std::move(records);
    return summary;
}

}  // namespace mcorr
