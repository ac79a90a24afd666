#include "mcorr/commands.hpp"

#include "mcorr/correlation.hpp"
#include "mcorr/errors.hpp"
#include "mcorr/format.hpp"
#include "mcorr/inference.hpp"
#include "mcorr/model.hpp"
#include "mcorr/parallel.hpp"
#include "mcorr/pipeline.hpp"
#include "mcorr/seeding.hpp"
#include "mcorr/simulation.hpp"
#include "mcorr/tables.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <unordered_set>

namespace mcorr {

namespace {

struct SmootherOptions {
    int kernel_order = 2;
    std::optional<double> bandwidth;
    std::optional<double> cutoff;
    std::optional<double> external_bandwidth;
    std::optional<double> external_cutoff;
    double bandwidth_scale = ScheduleConstants{}.bandwidth_scale;
    double cutoff_scale = ScheduleConstants{}.cutoff_scale;
    bool leave_one_out = false;
    double max_condition = 1e10;

    void bind(CLI::App& app) {
        app.add_option("--kernel-order", kernel_order, "Even kernel order m")->capture_default_str();
        app.add_option("--bandwidth", bandwidth, "Paired-cohort bandwidth a (default: schedule)");
        app.add_option("--cutoff", cutoff, "Paired-cohort density cutoff b (default: schedule)");
        app.add_option("--external-bandwidth", external_bandwidth, "External-cohort bandwidth (default: schedule)");
        app.add_option("--external-cutoff", external_cutoff, "External-cohort density cutoff (default: schedule)");
        app.add_option("--bandwidth-scale", bandwidth_scale, "Multiplier of the default bandwidth schedule")
            ->capture_default_str();
        app.add_option("--cutoff-scale", cutoff_scale,
                       "Default cutoff as a fraction of the standard normal peak density")
            ->capture_default_str();
        app.add_option("--leave-one-out", leave_one_out, "Drop the self term from kernel sums (true/false)")
            ->capture_default_str();
        app.add_option("--max-condition", max_condition, "Condition number above which Phi-hat is singular")
            ->capture_default_str();
    }

    ScheduleConstants constants() const { return {bandwidth_scale, cutoff_scale}; }

    SmootherConfig resolve(Index n, Index n_external, Index q) const {
        if (!(bandwidth_scale > 0.0) || !(cutoff_scale > 0.0)) {
            throw ValidationError("schedule scales must be positive");
        }
        SmootherConfig config = default_smoother_config(n, n_external, q, kernel_order, constants());
        if (bandwidth) config.bandwidth = *bandwidth;
        if (cutoff) config.cutoff = *cutoff;
        if (external_bandwidth) config.external_bandwidth = *external_bandwidth;
        if (external_cutoff) config.external_cutoff = *external_cutoff;
        config.leave_one_out = leave_one_out;
        config.max_condition = max_condition;
        config.validate(q);
        return config;
    }
};

struct InputOptions {
    std::string abundance;
    std::string covariates;
    std::string metabolites;
    std::string external_abundance;
    std::string external_covariates;
    std::string rank;
    double min_prevalence = 0.2;
    double pseudocount = 0.5;
    double max_missing = 0.5;
    std::string imputation = "half-minimum";
    bool standardize = true;
    bool intersect_taxa = false;

    void bind(CLI::App& app, bool external_required) {
        app.add_option("--abundance", abundance, "Paired taxon abundance TSV")->required();
        app.add_option("--covariates", covariates, "Paired confounder TSV")->required();
        app.add_option("--metabolites", metabolites, "Paired metabolite level TSV")->required();
        auto* ext_a = app.add_option("--external-abundance", external_abundance, "External taxon abundance TSV");
        auto* ext_c = app.add_option("--external-covariates", external_covariates, "External confounder TSV");
        if (external_required) {
            ext_a->required();
            ext_c->required();
        } else {
            ext_a->needs(ext_c);
            ext_c->needs(ext_a);
        }
        app.add_option("--rank", rank, "Aggregate taxa to this rank before filtering (default: no aggregation)");
        app.add_option("--min-prevalence", min_prevalence, "Keep taxa present in at least this fraction of samples")
            ->capture_default_str();
        app.add_option("--pseudocount", pseudocount, "Pseudocount added before the log-ratio transform")
            ->capture_default_str();
        app.add_option("--max-missing", max_missing, "Drop metabolites missing in at least this fraction of samples")
            ->capture_default_str();
        app.add_option("--imputation", imputation, "half-minimum or drop-sample-pairwise")->capture_default_str();
        app.add_option("--standardize-covariates", standardize, "Z-score each confounder within its cohort (true/false)")
            ->capture_default_str();
        app.add_flag("--intersect-taxa", intersect_taxa,
                     "Analyse the taxa retained in both cohorts instead of failing on a mismatch");
    }
};

struct Study {
    Matrix x;
    Matrix z;
    PreparedMetabolites metabolites;
    std::optional<ExternalDataset> external;
    std::vector<std::string> taxa;
};

LabeledMatrix read_input(const std::string& path) { return read_matrix_tsv_file(path); }

Matrix finite_matrix(const LabeledMatrix& table, const std::string& source) {
    for (Index i = 0; i < table.values.rows(); ++i) {
        for (Index j = 0; j < table.values.cols(); ++j) {
            if (!std::isfinite(table.values(i, j))) {
                throw ValidationError(source + ": missing or non-finite value for '" +
                                      table.column_ids[static_cast<std::size_t>(j)] + "' in sample '" +
                                      table.row_ids[static_cast<std::size_t>(i)] + "'");
            }
        }
    }
    return table.values;
}

AbundanceTable restrict_taxa(const AbundanceTable& table, const std::vector<std::string>& taxa) {
    AbundanceTable out;
    out.sample_ids = table.sample_ids;
    out.taxon_ids = taxa;
    out.counts.resize(table.counts.rows(), static_cast<Index>(taxa.size()));
    for (std::size_t t = 0; t < taxa.size(); ++t) {
        const auto it = std::find(table.taxon_ids.begin(), table.taxon_ids.end(), taxa[t]);
        out.counts.col(static_cast<Index>(t)) = table.counts.col(it - table.taxon_ids.begin());
    }
    return out;
}

// CLR coordinates sum to zero, so the last one is dropped to keep Phi-hat
// invertible. R is unchanged: shifting beta along the ones vector leaves
// every Phi-weighted form invariant when Phi annihilates that vector.
Matrix log_ratio_block(const AbundanceTable& table, double pseudocount) {
    const Matrix clr = clr_transform(table, pseudocount);
    return clr.leftCols(clr.cols() - 1);
}

Study load_study(const InputOptions& in) {
    const Imputation mode = parse_imputation(in.imputation);
    if (!in.rank.empty() && !is_known_rank(in.rank)) {
        throw ValidationError("unknown taxonomic rank '" + in.rank + "'");
    }
    AbundanceTable paired = AbundanceTable::from_labeled(read_input(in.abundance), in.abundance);
    paired = aggregate_and_filter(paired, in.rank, in.min_prevalence);

    const LabeledMatrix cov = read_input(in.covariates).align_rows(paired.sample_ids, in.covariates);
    const LabeledMatrix met = read_input(in.metabolites).align_rows(paired.sample_ids, in.metabolites);

    Study study;
    study.z = finite_matrix(cov, in.covariates);
    study.metabolites = prepare_metabolites(MetaboliteTable::from_labeled(met, in.metabolites), in.max_missing, mode);

    std::optional<AbundanceTable> external;
    std::optional<Matrix> external_z;
    if (!in.external_abundance.empty()) {
        AbundanceTable ext = AbundanceTable::from_labeled(read_input(in.external_abundance), in.external_abundance);
        ext = aggregate_and_filter(ext, in.rank, in.min_prevalence);
        const LabeledMatrix ext_cov =
            read_input(in.external_covariates).align_rows(ext.sample_ids, in.external_covariates);
        if (ext_cov.column_ids != cov.column_ids) {
            throw ValidationError("external confounder columns differ from the paired confounder columns");
        }
        external_z = finite_matrix(ext_cov, in.external_covariates);

        const std::unordered_set<std::string> ext_taxa(ext.taxon_ids.begin(), ext.taxon_ids.end());
        const std::unordered_set<std::string> paired_taxa(paired.taxon_ids.begin(), paired.taxon_ids.end());
        std::vector<std::string> shared;
        for (const auto& t : paired.taxon_ids) {
            if (ext_taxa.count(t)) {
                shared.push_back(t);
            }
        }
        if (!in.intersect_taxa && (shared.size() != paired_taxa.size() || shared.size() != ext_taxa.size())) {
            std::ostringstream msg;
            msg << "paired and external cohorts retain different taxa (" << paired_taxa.size() << " vs "
                << ext_taxa.size() << ", " << shared.size() << " shared)";
            for (const auto& t : paired.taxon_ids) {
                if (!ext_taxa.count(t)) {
                    msg << "; e.g. '" << t << "' only in the paired cohort";
                    break;
                }
            }
            for (const auto& t : ext.taxon_ids) {
                if (!paired_taxa.count(t)) {
                    msg << "; e.g. '" << t << "' only in the external cohort";
                    break;
                }
            }
            msg << " (use --intersect-taxa to analyse the shared taxa)";
            throw ValidationError(msg.str());
        }
        paired = restrict_taxa(paired, shared);
        external = restrict_taxa(ext, shared);
    }
    if (paired.taxon_ids.size() < 2) {
        throw ValidationError("at least two taxa must survive filtering for a log-ratio transform");
    }
    study.taxa = paired.taxon_ids;
    study.x = log_ratio_block(paired, in.pseudocount);
    if (in.standardize) {
        study.z = standardize_columns(study.z);
    }
    if (external) {
        Matrix ext_x = log_ratio_block(*external, in.pseudocount);
        Matrix ext_z = in.standardize ? standardize_columns(*external_z) : *external_z;
        study.external.emplace(std::move(ext_z), std::move(ext_x));
    }
    return study;
}

void write_manifest(const CLI::App& app, const std::string& output) {
    std::ofstream out(output + ".manifest.toml");
    if (!out) {
        throw IoError("cannot write manifest next to '" + output + "'");
    }
    out << "# mcorr " << version << "\n" << app.config_to_str(true, false);
}

std::string cell_name(ConfounderFamily family, PhiScenario phi, Index n, double r) {
    std::ostringstream s;
    s << "family=" << to_string(family) << " phi=" << to_string(phi) << " n=" << n << " R=" << format_double(r);
    return s.str();
}

// --- simulate ---------------------------------------------------------------

struct SimulateOptions {
    std::vector<Index> n{100, 300, 500};
    std::vector<std::string> families{"linear", "exponential", "triangular"};
    std::vector<std::string> phi{"identity", "upper_triangular"};
    std::vector<double> r{-0.5, -0.4, -0.3, -0.2, -0.1, 0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
    std::vector<double> alpha{0.05, 0.1};
    double r0_test = 0.0;
    int replications = 500;
    double external_factor = 10.0;
    int splits = 1;
    std::uint64_t seed = 1;
    unsigned threads = 0;
    std::string out;
    SmootherOptions smoother;
};

void run_simulate(const SimulateOptions& o, std::ostream& log) {
    if (o.replications < 1) throw ValidationError("replications must be at least 1");
    if (o.splits < 1) throw ValidationError("splits must be at least 1");
    if (!(o.r0_test >= 0.0 && o.r0_test < 1.0)) throw ValidationError("--r0-test must lie in [0, 1)");
    if (!(o.external_factor > 0.0)) throw ValidationError("--external-factor must be positive");
    for (double a : o.alpha) {
        if (!(a > 0.0 && a < 1.0)) throw ValidationError("every --alpha must lie in (0, 1)");
    }
    for (double r : o.r) {
        if (!(std::abs(r) < 1.0)) {
            throw ValidationError("true correlation " + format_double(r) + " must lie in (-1, 1)");
        }
    }
    for (Index n : o.n) {
        if (n < 4) throw ValidationError("sample sizes must be at least 4");
    }
    std::vector<ConfounderFamily> families;
    for (const auto& f : o.families) families.push_back(parse_family(f));
    std::vector<PhiScenario> phis;
    for (const auto& p : o.phi) phis.push_back(parse_phi_scenario(p));
    if (o.smoother.bandwidth || o.smoother.cutoff || o.smoother.external_bandwidth || o.smoother.external_cutoff) {
        if (o.n.size() > 1) {
            throw ValidationError("explicit bandwidths or cutoffs need a single --n; use the schedule scales instead");
        }
    }

    TextTable table;
    table.header = {"family",        "phi",          "n",           "N",          "r_true",
                    "r0_test",       "alpha",        "replications", "tested",    "rejection_rate",
                    "median_bias",   "median_abs_bias", "plugin_failures", "test_failures"};
    for (std::size_t fi = 0; fi < families.size(); ++fi) {
        for (std::size_t pi = 0; pi < phis.size(); ++pi) {
            for (Index n : o.n) {
                for (double r : o.r) {
                    ScenarioConfig config;
                    config.n = n;
                    config.family = families[fi];
                    config.phi_scenario = phis[pi];
                    config.r0_true = r;
                    config.replications = o.replications;
                    config.external_factor = o.external_factor;
                    config.seed = derive_seed(o.seed, {static_cast<std::uint64_t>(families[fi]),
                                                       static_cast<std::uint64_t>(phis[pi]),
                                                       static_cast<std::uint64_t>(n),
                                                       static_cast<std::uint64_t>(std::llround(r * 1e6))});
                    ReplicationOptions rep;
                    rep.n_splits = o.splits;
                    rep.threads = o.threads;
                    rep.constants = o.smoother.constants();
                    const std::string name = cell_name(families[fi], phis[pi], n, r);
                    ReplicationSummary summary;
                    try {
                        rep.smoother = o.smoother.resolve(n, config.external_n(), config.q);
                        summary = run_replications(config, o.r0_test, rep);
                    } catch (const ValidationError& e) {
                        throw ValidationError(name + ": " + e.what());
                    } catch (const NumericalError& e) {
                        throw NumericalError(e.kind(), name + ": " + e.what());
                    }
                    const int tested = o.replications - summary.test_failures;
                    for (double a : o.alpha) {
                        int rejected = 0;
                        for (const auto& rec : summary.records) {
                            if (std::isfinite(rec.p_value) && rec.p_value <= a) {
                                ++rejected;
                            }
                        }
                        const double rate = tested > 0 ? static_cast<double>(rejected) / tested
                                                       : std::numeric_limits<double>::quiet_NaN();
                        table.rows.push_back({to_string(families[fi]), to_string(phis[pi]), std::to_string(n),
                                              std::to_string(config.external_n()), format_double(r),
                                              format_double(o.r0_test), format_double(a),
                                              std::to_string(o.replications), std::to_string(tested),
                                              format_double(rate), format_double(summary.median_bias),
                                              format_double(summary.median_abs_bias),
                                              std::to_string(summary.plugin_failures),
                                              std::to_string(summary.test_failures)});
                    }
                    log << name << " done\n";
                }
            }
        }
    }
    write_text_tsv_file(o.out, table);
}

// --- estimate / test ----------------------------------------------------------

struct EstimateOptions {
    InputOptions inputs;
    SmootherOptions smoother;
    std::uint64_t seed = 1;
    unsigned threads = 0;
    std::string out;
};

void run_estimate(const EstimateOptions& o) {
    const Study study = load_study(o.inputs);
    const Index n = study.x.rows();
    const Index n_ext = study.external ? study.external->n() : n;
    const SmootherConfig config = o.smoother.resolve(n, n_ext, study.z.cols());
    std::optional<PhiEstimate> external_phi;
    if (study.external) {
        external_phi = estimate_external_phi(*study.external, config);
    }

    const auto& ids = study.metabolites.ids;
    std::vector<Index> order(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) order[i] = static_cast<Index>(i);
    std::sort(order.begin(), order.end(), [&](Index a, Index b) {
        return ids[static_cast<std::size_t>(a)] < ids[static_cast<std::size_t>(b)];
    });
    std::vector<std::pair<Index, Index>> pairs;
    for (std::size_t a = 0; a < order.size(); ++a) {
        for (std::size_t b = a + 1; b < order.size(); ++b) {
            pairs.emplace_back(order[a], order[b]);
        }
    }
    if (pairs.empty()) {
        throw ValidationError("estimation needs at least two metabolites");
    }

    const double nan = std::numeric_limits<double>::quiet_NaN();
    TextTable table;
    table.header = {"metabolite_id_1", "metabolite_id_2", "r_plugin",          "r_calibrated",
                    "std_err",         "n_effective",     "split_seed",        "phi_condition_number"};
    table.rows.resize(pairs.size());
    const Matrix& levels = study.metabolites.values;
    parallel_for(pairs.size(), o.threads, [&](std::size_t k) {
        const auto [i, j] = pairs[k];
        std::vector<Index> rows;
        for (Index r = 0; r < n; ++r) {
            if (std::isfinite(levels(r, i)) && std::isfinite(levels(r, j))) rows.push_back(r);
        }
        double r_plugin = nan;
        double r_cal = nan;
        double se = nan;
        double cond = nan;
        Index n_eff = 0;
        std::uint64_t seed_used = 0;
        if (rows.size() >= 2) {
            Matrix xs(static_cast<Index>(rows.size()), study.x.cols());
            Matrix zs(static_cast<Index>(rows.size()), study.z.cols());
            Vector ys(static_cast<Index>(rows.size()));
            Vector ws(static_cast<Index>(rows.size()));
            for (std::size_t r = 0; r < rows.size(); ++r) {
                const auto rr = static_cast<Index>(r);
                xs.row(rr) = study.x.row(rows[r]);
                zs.row(rr) = study.z.row(rows[r]);
                ys(rr) = levels(rows[r], i);
                ws(rr) = levels(rows[r], j);
            }
            const PairedDataset data(std::move(zs), std::move(xs), std::move(ys), std::move(ws));
            try {
                const VarianceInputs variance = estimate_variance_inputs(data, config);
                r_plugin = microbial_correlation(variance.beta, variance.gamma, variance.phi);
                n_eff = variance.retained_count;
                cond = variance.phi_condition_number;
                if (external_phi) {
                    const SplitPlan plan = SplitPlan::random(data.n(), split_seed(o.seed, 0));
                    seed_used = plan.seed;
                    const CorrelationEstimate est =
                        estimate_r_calibrated(data, *external_phi, config, plan, variance);
                    r_cal = est.r_hat;
                    se = est.std_err.value_or(nan);
                    n_eff = est.n_effective;
                    cond = est.phi_condition_number;
                }
            } catch (const NumericalError&) {
            }
        }
        table.rows[k] = {ids[static_cast<std::size_t>(i)], ids[static_cast<std::size_t>(j)], format_double(r_plugin),
                         format_double(r_cal), format_double(se), std::to_string(n_eff),
                         external_phi ? std::to_string(seed_used) : "NA", format_double(cond)};
    });
    write_text_tsv_file(o.out, table);
}

struct TestOptions {
    InputOptions inputs;
    SmootherOptions smoother;
    int splits = 100;
    double r0 = 0.0;
    double alpha = 0.05;
    std::string median_rule = "median-split";
    std::uint64_t seed = 1;
    unsigned threads = 0;
    std::string out;
};

void run_test(const TestOptions& o) {
    MedianRule rule = MedianRule::MedianSplit;
    if (o.median_rule == "median-estimate") {
        rule = MedianRule::MedianEstimateMedianSe;
    } else if (o.median_rule != "median-split") {
        throw ValidationError("unknown median rule '" + o.median_rule + "' (median-split, median-estimate)");
    }
    if (o.splits < 1) throw ValidationError("--splits must be at least 1");
    if (!(o.r0 >= 0.0 && o.r0 < 1.0)) throw ValidationError("--r0 must lie in [0, 1)");
    if (!(o.alpha > 0.0 && o.alpha < 1.0)) throw ValidationError("--alpha must lie in (0, 1)");
    const Study study = load_study(o.inputs);
    const SmootherConfig config = o.smoother.resolve(study.x.rows(), study.external->n(), study.z.cols());
    PairwiseOptions options;
    options.n_splits = o.splits;
    options.r0 = o.r0;
    options.alpha = o.alpha;
    options.seed = o.seed;
    options.threads = o.threads;
    options.rule = rule;
    const PairwiseResultTable results = pairwise_analysis(study.x, study.z, study.metabolites.values,
                                                          study.metabolites.ids, *study.external, config, options);
    write_text_tsv_file(o.out, results_to_table(results));
}

struct NetworkOptions {
    std::string results;
    double threshold = 0.3;
    std::string out;
};

void run_network(const NetworkOptions& o) {
    const PairwiseResultTable results = results_from_table(read_text_tsv_file(o.results), o.results);
    write_text_tsv_file(o.out, edges_to_table(export_network(results, o.threshold)));
}

int exit_code_for(const Error& e) {
    switch (e.category()) {
    case Error::Category::Validation:
        return exit_validation;
    case Error::Category::Io:
        return exit_io;
    case Error::Category::Numerical:
        return exit_numerical;
    }
    return exit_internal;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Confounder-adjusted microbial correlation between metabolite pairs"};
    app.set_config("--config", "", "TOML run configuration; command-line flags take precedence");
    app.set_version_flag("--version", version);
    app.require_subcommand(1);

    SimulateOptions sim;
    auto* simulate = app.add_subcommand("simulate", "Monte-Carlo rejection rates and biases over a scenario grid");
    simulate->add_option("--n", sim.n, "Paired sample sizes")->capture_default_str();
    simulate->add_option("--family", sim.families, "Confounder families: linear, exponential, triangular")
        ->capture_default_str();
    simulate->add_option("--phi", sim.phi, "Phi scenarios: identity, upper_triangular")->capture_default_str();
    simulate->add_option("--r", sim.r, "True microbial correlations")->capture_default_str();
    simulate->add_option("--alpha", sim.alpha, "Test levels")->capture_default_str();
    simulate->add_option("--r0-test", sim.r0_test, "Threshold r0 of H0: |R| <= r0")->capture_default_str();
    simulate->add_option("--replications", sim.replications, "Replications per cell")->capture_default_str();
    simulate->add_option("--external-factor", sim.external_factor, "External cohort size as a multiple of n")
        ->capture_default_str();
    simulate->add_option("--splits", sim.splits, "Sample splits per replication")->capture_default_str();
    simulate->add_option("--seed", sim.seed, "Base random seed")->capture_default_str();
    simulate->add_option("--threads", sim.threads, "Worker threads (0: all cores)")->capture_default_str();
    simulate->add_option("--out", sim.out, "Summary TSV")->required();
    sim.smoother.bind(*simulate);

    EstimateOptions est;
    auto* estimate = app.add_subcommand("estimate", "Plug-in and single-split calibrated estimates for every pair");
    est.inputs.bind(*estimate, false);
    est.smoother.bind(*estimate);
    estimate->add_option("--seed", est.seed, "Random seed of the sample split")->capture_default_str();
    estimate->add_option("--threads", est.threads, "Worker threads (0: all cores)")->capture_default_str();
    estimate->add_option("--out", est.out, "Estimate TSV")->required();

    TestOptions tst;
    auto* test = app.add_subcommand("test", "Multi-split tests with Benjamini-Yekutieli control for every pair");
    tst.inputs.bind(*test, true);
    tst.smoother.bind(*test);
    test->add_option("--splits", tst.splits, "Sample splits per pair")->capture_default_str();
    test->add_option("--r0", tst.r0, "Threshold r0 of H0: |R| <= r0")->capture_default_str();
    test->add_option("--alpha", tst.alpha, "FDR level")->capture_default_str();
    test->add_option("--median-rule", tst.median_rule, "median-split or median-estimate")->capture_default_str();
    test->add_option("--seed", tst.seed, "Base random seed of the split plans")->capture_default_str();
    test->add_option("--threads", tst.threads, "Worker threads (0: all cores)")->capture_default_str();
    test->add_option("--out", tst.out, "Result TSV")->required();

    NetworkOptions net;
    auto* network = app.add_subcommand("network", "Edge list of the significant pairs of a result table");
    network->add_option("--results", net.results, "Result TSV written by `test`")->required();
    network->add_option("--threshold", net.threshold, "Solid edges at |r_median| >= threshold")
        ->capture_default_str();
    network->add_option("--out", net.out, "Edge list TSV")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? exit_ok : exit_validation;
    }

    try {
        if (simulate->parsed()) {
            run_simulate(sim, out);
            write_manifest(app, sim.out);
        } else if (estimate->parsed()) {
            run_estimate(est);
            write_manifest(app, est.out);
        } else if (test->parsed()) {
            run_test(tst);
            write_manifest(app, tst.out);
        } else if (network->parsed()) {
            run_network(net);
            write_manifest(app, net.out);
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return exit_internal;
    }
    return exit_ok;
}

}  // namespace mcorr
