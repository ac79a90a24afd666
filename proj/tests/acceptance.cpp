// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails.

#include "mcorr/commands.hpp"
#include "mcorr/correlation.hpp"
#include "mcorr/errors.hpp"
#include "mcorr/inference.hpp"
#include "mcorr/kernel.hpp"
#include "mcorr/model.hpp"
#include "mcorr/plm.hpp"
#include "mcorr/simulation.hpp"
#include "mcorr/tables.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace mcorr;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t acceptance_seed = 20240611;

struct Outcome {
    bool pass = false;
    std::string detail;
};

Matrix gaussian(Index rows, Index cols, std::mt19937_64& rng) {
    std::normal_distribution<double> d;
    Matrix m(rows, cols);
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i) m(i, j) = d(rng);
    return m;
}

std::string fmt(double v) {
    std::ostringstream s;
    s.precision(4);
    s << v;
    return s.str();
}

// 1. Closed-form R against empirical correlations of b'x and g'x.
Outcome closed_form_oracle() {
    std::mt19937_64 rng(acceptance_seed + 1);
    const Index draws = 1000000;
    const Index p_max = 6;
    // Draws of x ~ N(0, Phi) are L g with g standard normal, so the empirical
    // covariance of (b'x, g'x) only needs the empirical covariance of g.
    Matrix g = gaussian(draws, p_max, rng);
    const Eigen::RowVectorXd mean = g.colwise().mean();
    g.rowwise() -= mean;
    const Matrix s = g.transpose() * g / static_cast<double>(draws);
    g.resize(0, 0);

    std::uniform_int_distribution<Index> dim(2, p_max);
    double worst = 0.0;
    bool ok = true;
    for (int t = 0; t < 1000; ++t) {
        const Index p = dim(rng);
        const Matrix a = gaussian(p, p, rng);
        const Matrix phi = a * a.transpose() + 0.05 * Matrix::Identity(p, p);
        const Vector beta = gaussian(p, 1, rng).col(0);
        const Vector gamma = gaussian(p, 1, rng).col(0);
        const double r = microbial_correlation(beta, gamma, phi);
        ok = ok && r >= -1.0 && r <= 1.0 && r == microbial_correlation(gamma, beta, phi);
        const Matrix l = Eigen::LLT<Matrix>(phi).matrixL();
        const Vector u = l.transpose() * beta;
        const Vector v = l.transpose() * gamma;
        const Matrix sp = s.topLeftCorner(p, p);
        const double emp = u.dot(sp * v) / std::sqrt(u.dot(sp * u) * v.dot(sp * v));
        worst = std::max(worst, std::abs(emp - r));
    }
    ok = ok && worst <= 0.01;
    return {ok, "max |R - empirical| = " + fmt(worst) + " over 1000 triples"};
}

// 2. Kernel smoother against double loops, and kernel moments by quadrature.
Outcome kernel_oracle() {
    std::mt19937_64 rng(acceptance_seed + 2);
    std::uniform_int_distribution<int> nd(2, 50), qd(1, 3);
    std::uniform_real_distribution<double> ad(0.2, 2.0);
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
        const Index n = nd(rng), q = qd(rng);
        const double a = ad(rng);
        const KernelFunction k(t % 4 == 3 ? 4 : 2);
        const bool loo = t % 5 == 4 && n > 2;
        const Matrix z = gaussian(n, q, rng) * 0.5;
        const Matrix y = gaussian(n, 2, rng);
        Matrix fitted;
        Vector density;
        try {
            fitted = nw_regress(y, z, a, k, loo);
            density = density_estimate(z, a, k, loo);
        } catch (const NumericalError&) {
            continue;
        }
        for (Index i = 0; i < n; ++i) {
            double den = 0.0;
            Eigen::RowVectorXd num = Eigen::RowVectorXd::Zero(2);
            for (Index j = 0; j < n; ++j) {
                if (loo && i == j) continue;
                double w = 1.0;
                for (Index c = 0; c < q; ++c) w *= k((z(i, c) - z(j, c)) / a);
                den += w;
                num += w * y.row(j);
            }
            const double terms = static_cast<double>(loo ? n - 1 : n);
            worst = std::max(worst, (fitted.row(i) - num / den).cwiseAbs().maxCoeff());
            worst = std::max(worst, std::abs(density(i) - den / (terms * std::pow(a, static_cast<double>(q)))));
        }
    }
    double moment_err = 0.0;
    for (int m : {2, 4, 6, 8}) {
        const KernelFunction k(m);
        const int steps = 20000;
        const double lo = -14.0, hi = 14.0, h = (hi - lo) / steps;
        std::vector<double> mom(static_cast<std::size_t>(m), 0.0);
        for (int i = 0; i <= steps; ++i) {
            const double u = lo + i * h;
            const double wgt = (i == 0 || i == steps) ? 1.0 : (i % 2 ? 4.0 : 2.0);
            const double ku = k(u);
            double pw = 1.0;
            for (int r = 0; r < m; ++r) {
                mom[static_cast<std::size_t>(r)] += wgt * pw * ku;
                pw *= u;
            }
        }
        for (int r = 0; r < m; ++r) {
            const double target = r == 0 ? 1.0 : 0.0;
            moment_err = std::max(moment_err, std::abs(mom[static_cast<std::size_t>(r)] * h / 3.0 - target));
        }
    }
    const bool ok = worst <= 1e-12 && moment_err <= 1e-6;
    return {ok, "max smoother error " + fmt(worst) + ", max moment error " + fmt(moment_err)};
}

// 3. Constant confounder and vanishing cutoff reduce to centred OLS.
Outcome degenerate_equivalence() {
    std::mt19937_64 rng(acceptance_seed + 3);
    double worst_beta = 0.0, worst_r = 0.0;
    for (int t = 0; t < 20; ++t) {
        const Index n = 60 + 10 * t, p = 2 + t % 4;
        const Matrix x = gaussian(n, p, rng);
        const Matrix z = Matrix::Constant(n, 1, 1.5);
        const Vector y = x * gaussian(p, 1, rng).col(0) + gaussian(n, 1, rng).col(0);
        const Vector w = x * gaussian(p, 1, rng).col(0) + gaussian(n, 1, rng).col(0);
        SmootherConfig cfg;
        cfg.bandwidth = 0.5;
        cfg.cutoff = 1e-300;
        const PhiEstimate phi = estimate_phi(x, z, cfg);
        const PLMFit fit = fit_plm(x, z, y, cfg, phi);
        const Matrix xc = x.rowwise() - x.colwise().mean();
        const Matrix gram = xc.transpose() * xc;
        const Vector b = gram.ldlt().solve(xc.transpose() * (y.array() - y.mean()).matrix());
        const Vector g = gram.ldlt().solve(xc.transpose() * (w.array() - w.mean()).matrix());
        worst_beta = std::max(worst_beta, (fit.coefficients - b).cwiseAbs().maxCoeff());
        const Matrix s = gram / static_cast<double>(n);
        const double r_ols = b.dot(s * g) / std::sqrt(b.dot(s * b) * g.dot(s * g));
        const double r = estimate_r_plugin(PairedDataset(z, x, y, w), cfg).r_hat;
        worst_r = std::max(worst_r, std::abs(r - r_ols));
    }
    return {worst_beta <= 1e-8 && worst_r <= 1e-8,
            "max |beta - OLS| = " + fmt(worst_beta) + ", max |R - OLS R| = " + fmt(worst_r)};
}

ReplicationSummary calibrated_runs(ConfounderFamily family, double truth, double r0_test, int reps,
                                   std::uint64_t seed) {
    ScenarioConfig c;
    c.n = 500;
    c.family = family;
    c.phi_scenario = PhiScenario::Identity;
    c.r0_true = truth;
    c.replications = reps;
    c.seed = seed;
    ReplicationOptions opt;
    opt.plugin = false;
    return run_replications(c, r0_test, opt);
}

// 4. Type-I error of the single-split test.
Outcome type_one_error() {
    const auto s = calibrated_runs(ConfounderFamily::Linear, 0.0, 0.0, 500, acceptance_seed + 4);
    const bool ok = s.rejection_rate >= 0.025 && s.rejection_rate <= 0.085;
    return {ok, "rejection rate " + fmt(s.rejection_rate) + " (" + std::to_string(s.test_failures) +
                    " failed replications)"};
}

// 5. Plug-in bias shrinks from n = 100 to n = 500 and is small at n = 500.
Outcome bias_shrinkage() {
    bool ok = true;
    double worst_500 = 0.0;
    std::string failing;
    for (auto fam : {ConfounderFamily::Linear, ConfounderFamily::Exponential, ConfounderFamily::Triangular}) {
        for (auto phi : {PhiScenario::Identity, PhiScenario::UpperTriangularD}) {
            for (double r : {0.0, 0.4}) {
                double med[2];
                int k = 0;
                for (Index n : {100, 500}) {
                    ScenarioConfig c;
                    c.n = n;
                    c.family = fam;
                    c.phi_scenario = phi;
                    c.r0_true = r;
                    c.replications = 200;
                    c.seed = acceptance_seed + 5 + static_cast<std::uint64_t>(n);
                    ReplicationOptions opt;
                    opt.calibrated = false;
                    med[k++] = run_replications(c, 0.0, opt).median_abs_bias;
                }
                worst_500 = std::max(worst_500, med[1]);
                if (!(med[1] < med[0]) || !(med[1] <= 0.06)) {
                    ok = false;
                    failing += " " + to_string(fam) + "/" + to_string(phi) + "/R=" + fmt(r) + " (" + fmt(med[0]) +
                               " -> " + fmt(med[1]) + ")";
                }
            }
        }
    }
    return {ok, "worst median |bias| at n=500: " + fmt(worst_500) + (failing.empty() ? "" : ";" + failing)};
}

// 6. Reported standard errors match the spread of R-hat_ss.
Outcome variance_calibration() {
    const auto s = calibrated_runs(ConfounderFamily::Triangular, 0.3, 0.3, 500, acceptance_seed + 6);
    double m1 = 0.0, m2 = 0.0, se = 0.0;
    int k = 0;
    for (const auto& r : s.records) {
        if (!std::isfinite(r.r_ss)) continue;
        m1 += r.r_ss;
        m2 += r.r_ss * r.r_ss;
        se += r.std_err;
        ++k;
    }
    m1 /= k;
    se /= k;
    const double sd = std::sqrt((m2 - k * m1 * m1) / (k - 1));
    const double ratio = sd / se;
    return {std::abs(ratio - 1.0) <= 0.2,
            "sd " + fmt(sd) + ", mean std_err " + fmt(se) + ", ratio " + fmt(ratio) + " over " + std::to_string(k)};
}

// 7. Composite null |R| <= 0.3.
Outcome composite_null() {
    const auto inside = calibrated_runs(ConfounderFamily::Linear, 0.2, 0.3, 500, acceptance_seed + 7);
    const auto outside = calibrated_runs(ConfounderFamily::Linear, 0.5, 0.3, 500, acceptance_seed + 8);
    const bool ok = inside.rejection_rate <= 0.02 && outside.rejection_rate >= 0.5;
    return {ok, "rejections at R=0.2: " + fmt(inside.rejection_rate) + ", power at R=0.5: " +
                    fmt(outside.rejection_rate)};
}

// 8. End-to-end `test` run on a synthetic study.
Outcome end_to_end() {
    const fs::path dir = fs::temp_directory_path() / ("mcorr_acceptance_" + std::to_string(acceptance_seed));
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::mt19937_64 rng(acceptance_seed + 9);
    std::normal_distribution<double> g;
    const int taxa = 12, metabolites = 20, n = 127, big_n = 1270;
    const int duplicated_pairs = 4;
    // Metabolites 2k and 2k+1 (k < 4) are identical and exactly log-linear in
    // the CLR coordinates the pipeline builds from these counts (pseudocount
    // 0.5), so both half-sample fits recover the same direction. The rest are
    // noise unrelated to the microbes.
    std::vector<Vector> loadings;
    for (int k = 0; k < duplicated_pairs; ++k) loadings.push_back(gaussian(taxa, 1, rng).col(0));

    auto write = [&](const std::string& prefix, int size, bool paired) {
        std::ofstream ab(dir / (prefix + "_abundance.tsv"));
        std::ofstream cov(dir / (prefix + "_covariates.tsv"));
        std::ofstream met;
        ab << "sample_id";
        for (int t = 0; t < taxa; ++t) ab << "\tk__Bacteria|f__F" << t;
        ab << '\n';
        cov << "sample_id\tage\tbmi\n";
        if (paired) {
            met.open(dir / (prefix + "_metabolites.tsv"));
            met << "sample_id";
            for (int m = 0; m < metabolites; ++m) met << "\tM" << (m < 10 ? "0" : "") << m;
            met << "\n";
        }
        for (int i = 0; i < size; ++i) {
            const double z1 = g(rng), z2 = g(rng);
            const std::string id = prefix + std::to_string(i);
            Vector logs(taxa);
            ab << id;
            for (int t = 0; t < taxa; ++t) {
                const double count = std::round(50.0 * std::exp(2.0 + 0.4 * std::sin(z1 + z2) + 0.8 * g(rng)));
                logs(t) = std::log(count + 0.5);
                ab << '\t' << count;
            }
            ab << '\n';
            cov << id << '\t' << 60.0 + 8.0 * z1 << '\t' << 24.0 + 3.0 * z2 << '\n';
            if (paired) {
                const Vector centred = logs.array() - logs.mean();
                met << id << std::setprecision(17);
                double shared = 0.0;
                for (int m = 0; m < metabolites; ++m) {
                    if (m < 2 * duplicated_pairs) {
                        if (m % 2 == 0) {
                            const Vector& load = loadings[static_cast<std::size_t>(m / 2)];
                            shared = std::exp(0.5 * load.dot(centred));
                        }
                        met << '\t' << shared;
                    } else {
                        met << '\t' << std::exp(0.2 * z1 + g(rng));
                    }
                }
                met << '\n';
            }
        }
    };
    write("p", n, true);
    write("e", big_n, false);

    auto run = [&](const std::string& out) {
        std::ostringstream log, err;
        const std::vector<std::string> args{"test",
                                            "--abundance",
                                            (dir / "p_abundance.tsv").string(),
                                            "--covariates",
                                            (dir / "p_covariates.tsv").string(),
                                            "--metabolites",
                                            (dir / "p_metabolites.tsv").string(),
                                            "--external-abundance",
                                            (dir / "e_abundance.tsv").string(),
                                            "--external-covariates",
                                            (dir / "e_covariates.tsv").string(),
                                            "--splits",
                                            "100",
                                            "--alpha",
                                            "0.05",
                                            "--seed",
                                            "7",
                                            "--out",
                                            (dir / out).string()};
        const int code = run_cli(args, log, err);
        if (code != 0) std::cerr << err.str();
        return code;
    };
    if (run("first.tsv") != 0 || run("second.tsv") != 0) {
        return {false, "`test` exited with an error"};
    }
    auto slurp = [&](const std::string& name) {
        std::ifstream in(dir / name, std::ios::binary);
        std::stringstream s;
        s << in.rdbuf();
        return s.str();
    };
    const bool deterministic = slurp("first.tsv") == slurp("second.tsv");
    const TextTable table = read_text_tsv_file((dir / "first.tsv").string());
    int dup_found = 0, noise_pairs = 0, noise_sig = 0;
    for (const auto& row : table.rows) {
        const int a = std::stoi(row[0].substr(1)), b = std::stoi(row[1].substr(1));
        const bool sig = row[5] == "true";
        if (a < 2 * duplicated_pairs && b == a + 1 && a % 2 == 0) {
            dup_found += sig && std::stod(row[2]) == 1.0;
        } else if (a >= 2 * duplicated_pairs && b >= 2 * duplicated_pairs) {
            ++noise_pairs;
            noise_sig += sig;
        }
    }
    fs::remove_all(dir);
    const double noise_rate = static_cast<double>(noise_sig) / noise_pairs;
    const bool ok = deterministic && table.rows.size() == 190 && dup_found == duplicated_pairs && noise_rate <= 0.05;
    return {ok, std::string(deterministic ? "deterministic" : "NOT deterministic") + ", " + std::to_string(dup_found) +
                    "/" + std::to_string(duplicated_pairs) + " duplicated pairs significant with r_median = 1, " +
                    std::to_string(noise_sig) + "/" + std::to_string(noise_pairs) + " noise pairs significant"};
}

// 9. Benjamini-Yekutieli under the global null, and the two-hypothesis example.
Outcome fdr_property() {
    std::mt19937_64 rng(acceptance_seed + 10);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double fdp_sum = 0.0;
    for (int rep = 0; rep < 200; ++rep) {
        std::vector<double> p(1000);
        for (auto& v : p) v = u(rng);
        const FdrResult r = by_fdr(p, 0.05);
        const long discoveries = std::count(r.significant.begin(), r.significant.end(), 1);
        // Every discovery is false, so the false discovery proportion is 1 whenever any occurs.
        fdp_sum += discoveries > 0 ? 1.0 : 0.0;
    }
    const double fdr = fdp_sum / 200.0;
    const FdrResult hand = by_fdr({0.01, 0.5}, 0.05);
    const bool hand_ok = std::abs(hand.p_adjusted[0] - 0.03) < 1e-15 && std::abs(hand.p_adjusted[1] - 0.75) < 1e-15;
    return {fdr <= 0.05 && hand_ok,
            "empirical FDR " + fmt(fdr) + ", hand example " + (hand_ok ? "exact" : "WRONG")};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"1 closed-form oracle", closed_form_oracle},
        {"2 kernel oracle", kernel_oracle},
        {"3 degenerate equivalence", degenerate_equivalence},
        {"4 type-I error", type_one_error},
        {"5 bias shrinkage", bias_shrinkage},
        {"6 variance calibration", variance_calibration},
        {"7 composite null", composite_null},
        {"8 end-to-end pipeline", end_to_end},
        {"9 FDR property", fdr_property},
    };
    int failures = 0;
    for (const auto& [name, check] : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome outcome;
        try {
            outcome = check();
        } catch (const std::exception& e) {
            outcome = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        failures += !outcome.pass;
        std::cout << (outcome.pass ? "PASS" : "FAIL") << "  criterion " << name << ": " << outcome.detail << " ["
                  << fmt(secs) << " s]" << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
