#include "mcorr/pipeline.hpp"

#include "mcorr/correlation.hpp"
#include "mcorr/errors.hpp"
#include "mcorr/format.hpp"
#include "mcorr/model.hpp"
#include "mcorr/parallel.hpp"
#include "mcorr/plm.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace mcorr {

namespace {

constexpr std::array<std::pair<const char*, const char*>, 7> rank_prefixes{{
    {"kingdom", "k__"},
    {"phylum", "p__"},
    {"class", "c__"},
    {"order", "o__"},
    {"family", "f__"},
    {"genus", "g__"},
    {"species", "s__"},
}};

void require_unique_ids(const std::vector<std::string>& ids, const std::string& what) {
    std::unordered_set<std::string> seen;
    for (const auto& id : ids) {
        if (!seen.insert(id).second) {
            throw ValidationError("duplicate " + what + " '" + id + "'");
        }
    }
}

// Lineage prefix of `taxon` up to and including the component for `prefix`.
std::optional<std::string> lineage_prefix(const std::string& taxon, const std::string& prefix) {
    std::size_t start = 0;
    while (start <= taxon.size()) {
        const std::size_t bar = taxon.find('|', start);
        const std::size_t end = bar == std::string::npos ? taxon.size() : bar;
        if (taxon.compare(start, prefix.size(), prefix) == 0) {
            return taxon.substr(0, end);
        }
        if (bar == std::string::npos) {
            break;
        }
        start = bar + 1;
    }
    return std::nullopt;
}

Matrix closed_logs(const AbundanceTable& table, double pseudocount) {
    table.validate();
    if (!(pseudocount >= 0.0) || !std::isfinite(pseudocount)) {
        throw ValidationError("pseudocount must be a nonnegative finite number");
    }
    Matrix shifted = table.counts.array() + pseudocount;
    for (Index i = 0; i < shifted.rows(); ++i) {
        for (Index j = 0; j < shifted.cols(); ++j) {
            if (!(shifted(i, j) > 0.0)) {
                std::ostringstream msg;
                msg << "zero abundance for taxon '" << table.taxon_ids[static_cast<std::size_t>(j)] << "' in sample '"
                    << table.sample_ids[static_cast<std::size_t>(i)] << "' requires a positive pseudocount";
                throw ValidationError(msg.str());
            }
        }
        shifted.row(i) /= shifted.row(i).sum();
    }
    return shifted.array().log().matrix();
}

}  // namespace

void AbundanceTable::validate() const {
    if (counts.rows() != static_cast<Index>(sample_ids.size()) ||
        counts.cols() != static_cast<Index>(taxon_ids.size())) {
        throw ValidationError("abundance table ids do not match its matrix shape");
    }
    require_unique_ids(sample_ids, "sample id");
    require_unique_ids(taxon_ids, "taxon id");
    for (Index i = 0; i < counts.rows(); ++i) {
        for (Index j = 0; j < counts.cols(); ++j) {
            if (!std::isfinite(counts(i, j)) || counts(i, j) < 0.0) {
                std::ostringstream msg;
                msg << "abundance for taxon '" << taxon_ids[static_cast<std::size_t>(j)] << "' in sample '"
                    << sample_ids[static_cast<std::size_t>(i)] << "' must be a nonnegative number, got "
                    << format_double(counts(i, j));
                throw ValidationError(msg.str());
            }
        }
    }
}

AbundanceTable AbundanceTable::from_labeled(LabeledMatrix table, const std::string& source) {
    AbundanceTable out{std::move(table.row_ids), std::move(table.column_ids), std::move(table.values)};
    try {
        out.validate();
    } catch (const ValidationError& e) {
        throw ValidationError(source + ": " + e.what());
    }
    return out;
}

MetaboliteTable MetaboliteTable::from_labeled(LabeledMatrix table, const std::string& source) {
    MetaboliteTable out{std::move(table.row_ids), std::move(table.column_ids), std::move(table.values)};
    for (Index i = 0; i < out.levels.rows(); ++i) {
        for (Index j = 0; j < out.levels.cols(); ++j) {
            const double v = out.levels(i, j);
            if (std::isinf(v) || v < 0.0) {
                std::ostringstream msg;
                msg << source << ": level of '" << out.metabolite_ids[static_cast<std::size_t>(j)] << "' in sample '"
                    << out.sample_ids[static_cast<std::size_t>(i)] << "' must be nonnegative or NA";
                throw ValidationError(msg.str());
            }
        }
    }
    return out;
}

bool is_known_rank(const std::string& rank) {
    return std::any_of(rank_prefixes.begin(), rank_prefixes.end(),
                       [&](const auto& entry) { return rank == entry.first; });
}

AbundanceTable aggregate(const AbundanceTable& table, const std::string& rank) {
    const auto it = std::find_if(rank_prefixes.begin(), rank_prefixes.end(),
                                 [&](const auto& entry) { return rank == entry.first; });
    if (it == rank_prefixes.end()) {
        throw ValidationError("unknown taxonomic rank '" + rank +
                              "' (kingdom, phylum, class, order, family, genus, species)");
    }
    table.validate();
    std::vector<std::string> groups;
    std::unordered_map<std::string, Index> group_of;
    std::vector<Index> member_group;
    for (const auto& taxon : table.taxon_ids) {
        const auto key = lineage_prefix(taxon, it->second);
        if (!key) {
            throw ValidationError("taxon '" + taxon + "' has no " + rank + "-level component");
        }
        auto [pos, inserted] = group_of.emplace(*key, static_cast<Index>(groups.size()));
        if (inserted) {
            groups.push_back(*key);
        }
        member_group.push_back(pos->second);
    }
    AbundanceTable out;
    out.sample_ids = table.sample_ids;
    out.taxon_ids = groups;
    out.counts = Matrix::Zero(table.counts.rows(), static_cast<Index>(groups.size()));
    for (std::size_t t = 0; t < member_group.size(); ++t) {
        out.counts.col(member_group[t]) += table.counts.col(static_cast<Index>(t));
    }
    return out;
}

AbundanceTable filter_prevalence(const AbundanceTable& table, double min_prevalence) {
    if (!(min_prevalence >= 0.0 && min_prevalence <= 1.0)) {
        throw ValidationError("minimum prevalence must lie in [0, 1]");
    }
    table.validate();
    const auto n = static_cast<double>(table.counts.rows());
    std::vector<Index> keep;
    for (Index j = 0; j < table.counts.cols(); ++j) {
        const auto present = static_cast<double>((table.counts.col(j).array() > 0.0).count());
        if (present >= min_prevalence * n) {
            keep.push_back(j);
        }
    }
    AbundanceTable out;
    out.sample_ids = table.sample_ids;
    out.counts.resize(table.counts.rows(), static_cast<Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) {
        out.taxon_ids.push_back(table.taxon_ids[static_cast<std::size_t>(keep[k])]);
        out.counts.col(static_cast<Index>(k)) = table.counts.col(keep[k]);
    }
    return out;
}

AbundanceTable aggregate_and_filter(const AbundanceTable& table, const std::string& rank, double min_prevalence) {
    if (rank.empty()) {
        return filter_prevalence(table, min_prevalence);
    }
    return filter_prevalence(aggregate(table, rank), min_prevalence);
}

Matrix clr_transform(const AbundanceTable& table, double pseudocount) {
    Matrix logs = closed_logs(table, pseudocount);
    const Vector means = logs.rowwise().mean();
    logs.colwise() -= means;
    return logs;
}

Matrix alr_transform(const AbundanceTable& table, const std::string& reference_taxon, double pseudocount) {
    const auto it = std::find(table.taxon_ids.begin(), table.taxon_ids.end(), reference_taxon);
    if (it == table.taxon_ids.end()) {
        throw ValidationError("reference taxon '" + reference_taxon + "' is not in the table");
    }
    const auto ref = static_cast<Index>(it - table.taxon_ids.begin());
    const Matrix logs = closed_logs(table, pseudocount);
    Matrix out(logs.rows(), logs.cols() - 1);
    Index c = 0;
    for (Index j = 0; j < logs.cols(); ++j) {
        if (j != ref) {
            out.col(c++) = logs.col(j) - logs.col(ref);
        }
    }
    return out;
}

Imputation parse_imputation(const std::string& name) {
    if (name == "half-minimum") return Imputation::HalfMinimum;
    if (name == "drop-sample-pairwise") return Imputation::DropSamplePairwise;
    throw ValidationError("unknown imputation mode '" + name + "' (half-minimum, drop-sample-pairwise)");
}

std::string to_string(Imputation mode) {
    return mode == Imputation::HalfMinimum ? "half-minimum" : "drop-sample-pairwise";
}

PreparedMetabolites prepare_metabolites(const MetaboliteTable& table, double max_missing, Imputation mode) {
    if (!(max_missing > 0.0 && max_missing <= 1.0)) {
        throw ValidationError("maximum missing fraction must lie in (0, 1]");
    }
    const Index n = table.levels.rows();
    if (n < 1) {
        throw ValidationError("metabolite table has no samples");
    }
    PreparedMetabolites out;
    std::vector<Index> keep;
    for (Index j = 0; j < table.levels.cols(); ++j) {
        const auto missing = static_cast<double>(table.levels.col(j).array().isNaN().count());
        if (missing < max_missing * static_cast<double>(n)) {
            keep.push_back(j);
        }
    }
    if (keep.empty()) {
        throw ValidationError("every metabolite exceeds the missing-value threshold");
    }
    out.values.resize(n, static_cast<Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) {
        const Index j = keep[k];
        const std::string& id = table.metabolite_ids[static_cast<std::size_t>(j)];
        out.ids.push_back(id);
        double observed_min = std::numeric_limits<double>::infinity();
        for (Index i = 0; i < n; ++i) {
            const double v = table.levels(i, j);
            if (std::isnan(v)) {
                continue;
            }
            if (!(v > 0.0)) {
                std::ostringstream msg;
                msg << "metabolite '" << id << "' has non-positive level " << format_double(v) << " in sample '"
                    << table.sample_ids[static_cast<std::size_t>(i)] << "'; mark missing values as NA";
                throw ValidationError(msg.str());
            }
            observed_min = std::min(observed_min, v);
        }
        for (Index i = 0; i < n; ++i) {
            double v = table.levels(i, j);
            if (std::isnan(v) && mode == Imputation::HalfMinimum) {
                v = 0.5 * observed_min;
            }
            out.values(i, static_cast<Index>(k)) = std::log(v);
        }
    }
    return out;
}

Matrix standardize_columns(const Matrix& m) {
    Matrix out = m;
    for (Index j = 0; j < out.cols(); ++j) {
        const double mean = out.col(j).mean();
        out.col(j).array() -= mean;
        const double sd = std::sqrt(out.col(j).squaredNorm() / static_cast<double>(out.rows()));
        if (sd > 0.0) {
            out.col(j) /= sd;
        }
    }
    return out;
}

namespace {

struct HalfFit {
    bool ok = false;
    Matrix coefficients;  // p x M
    double condition_number = 0.0;
    Index retained_count = 0;
};

HalfFit fit_half(const Matrix& x, const Matrix& z, const Matrix& outcomes, const std::vector<Index>& rows,
                 const SmootherConfig& config) {
    HalfFit out;
    const auto m = static_cast<Index>(rows.size());
    Matrix xs(m, x.cols());
    Matrix zs(m, z.cols());
    Matrix ys(m, outcomes.cols());
    for (Index k = 0; k < m; ++k) {
        const Index i = rows[static_cast<std::size_t>(k)];
        xs.row(k) = x.row(i);
        zs.row(k) = z.row(i);
        ys.row(k) = outcomes.row(i);
    }
    try {
        const PhiEstimate phi = estimate_phi(xs, zs, config);
        const auto fits = fit_plm_many(zs, ys, config, phi);
        out.coefficients.resize(x.cols(), ys.cols());
        for (std::size_t c = 0; c < fits.size(); ++c) {
            out.coefficients.col(static_cast<Index>(c)) = fits[c].coefficients;
        }
        out.condition_number = phi.condition_number;
        out.retained_count = phi.retained_count;
        out.ok = true;
    } catch (const NumericalError&) {
        out.ok = false;
    }
    return out;
}

PairwiseResultRow not_estimable_row(const std::string& id1, const std::string& id2) {
    PairwiseResultRow row;
    row.metabolite_id_1 = id1;
    row.metabolite_id_2 = id2;
    row.r_median = std::numeric_limits<double>::quiet_NaN();
    row.p_value = std::numeric_limits<double>::quiet_NaN();
    row.p_adjusted = std::numeric_limits<double>::quiet_NaN();
    row.significant = false;
    row.n_splits = 0;
    return row;
}

}  // namespace

PairwiseResultTable pairwise_analysis(const Matrix& x, const Matrix& z, const Matrix& metabolites,
                                      const std::vector<std::string>& metabolite_ids,
                                      const ExternalDataset& external, const SmootherConfig& config,
                                      const PairwiseOptions& options) {
    const Index n = x.rows();
    if (z.rows() != n || metabolites.rows() != n) {
        std::ostringstream msg;
        msg << "paired blocks disagree on sample count: X " << n << ", Z " << z.rows() << ", metabolites "
            << metabolites.rows();
        throw ValidationError(msg.str());
    }
    if (metabolites.cols() != static_cast<Index>(metabolite_ids.size())) {
        throw ValidationError("metabolite ids do not match the metabolite matrix");
    }
    if (metabolites.cols() < 2) {
        throw ValidationError("pairwise analysis needs at least two metabolites");
    }
    require_unique_ids(metabolite_ids, "metabolite id");
    if (options.n_splits < 1) {
        throw ValidationError("number of splits must be at least 1");
    }
    if (!(options.r0 >= 0.0 && options.r0 < 1.0)) {
        throw ValidationError("r0 must lie in [0, 1)");
    }
    if (!(options.alpha > 0.0 && options.alpha < 1.0)) {
        throw ValidationError("FDR level must lie in (0, 1)");
    }
    config.validate(z.cols());
    if (external.p() != x.cols() || external.q() != z.cols()) {
        std::ostringstream msg;
        msg << "external cohort has (p, q) = (" << external.p() << ", " << external.q()
            << ") but paired cohort has (" << x.cols() << ", " << z.cols() << ")";
        throw ValidationError(msg.str());
    }
    if (!x.allFinite() || !z.allFinite()) {
        throw ValidationError("paired abundances and confounders must be finite");
    }

    const Index m_total = metabolites.cols();
    std::vector<Index> order(static_cast<std::size_t>(m_total));
    std::iota(order.begin(), order.end(), Index{0});
    std::sort(order.begin(), order.end(), [&](Index a, Index b) {
        return metabolite_ids[static_cast<std::size_t>(a)] < metabolite_ids[static_cast<std::size_t>(b)];
    });

    // Complete metabolites go through the batched path; position in `complete`
    // indexes the columns of every coefficient matrix below.
    std::vector<Index> complete_slot(static_cast<std::size_t>(m_total), -1);
    std::vector<Index> complete;
    for (Index j = 0; j < m_total; ++j) {
        if (metabolites.col(j).allFinite()) {
            complete_slot[static_cast<std::size_t>(j)] = static_cast<Index>(complete.size());
            complete.push_back(j);
        }
    }
    Matrix outcomes(n, static_cast<Index>(complete.size()));
    for (std::size_t c = 0; c < complete.size(); ++c) {
        outcomes.col(static_cast<Index>(c)) = metabolites.col(complete[c]);
    }

    const PhiEstimate external_phi = estimate_external_phi(external, config);
    const std::vector<SplitPlan> plans = make_split_plans(n, options.n_splits, options.seed);

    std::vector<PLMFit> full_fits;
    PhiEstimate full_phi;
    std::vector<HalfFit> halves_a(plans.size());
    std::vector<HalfFit> halves_b(plans.size());
    if (!complete.empty()) {
        full_phi = estimate_phi(x, z, config);
        full_fits = fit_plm_many(z, outcomes, config, full_phi);
        parallel_for(plans.size(), options.threads, [&](std::size_t s) {
            halves_a[s] = fit_half(x, z, outcomes, plans[s].indices_a, config);
            halves_b[s] = fit_half(x, z, outcomes, plans[s].indices_b, config);
        });
    }

    struct PairJob {
        Index first;
        Index second;
    };
    std::vector<PairJob> jobs;
    for (std::size_t a = 0; a < order.size(); ++a) {
        for (std::size_t b = a + 1; b < order.size(); ++b) {
            jobs.push_back({order[a], order[b]});
        }
    }

    PairwiseResultTable rows(jobs.size());
    parallel_for(jobs.size(), options.threads, [&](std::size_t k) {
        const Index i = jobs[k].first;
        const Index j = jobs[k].second;
        const std::string& id1 = metabolite_ids[static_cast<std::size_t>(i)];
        const std::string& id2 = metabolite_ids[static_cast<std::size_t>(j)];
        rows[k] = not_estimable_row(id1, id2);

        MultiSplitResult result;
        const Index si = complete_slot[static_cast<std::size_t>(i)];
        const Index sj = complete_slot[static_cast<std::size_t>(j)];
        if (si >= 0 && sj >= 0) {
            const PLMFit& fi = full_fits[static_cast<std::size_t>(si)];
            const PLMFit& fj = full_fits[static_cast<std::size_t>(sj)];
            std::optional<double> std_err;
            try {
                const double var = sigma_r(fi.coefficients, fj.coefficients, full_phi.matrix, fi.residual_variance,
                                           fj.residual_variance, HalfFractions::of(plans.front()));
                std_err = std::sqrt(var / static_cast<double>(n));
            } catch (const NumericalError&) {
            }
            std::vector<CorrelationEstimate> estimates;
            estimates.reserve(plans.size());
            int failed = 0;
            for (std::size_t s = 0; s < plans.size(); ++s) {
                CorrelationEstimate est;
                est.split_seed = plans[s].seed;
                est.r_hat = std::numeric_limits<double>::quiet_NaN();
                const HalfFit& ha = halves_a[s];
                const HalfFit& hb = halves_b[s];
                if (std_err && ha.ok && hb.ok) {
                    try {
                        est.r_hat = microbial_correlation(ha.coefficients.col(si), hb.coefficients.col(sj),
                                                          external_phi.matrix);
                        est.std_err = std_err;
                        est.n_effective = ha.retained_count + hb.retained_count;
                        est.phi_condition_number =
                            std::max({ha.condition_number, hb.condition_number, full_phi.condition_number});
                    } catch (const NumericalError&) {
                        est.r_hat = std::numeric_limits<double>::quiet_NaN();
                    }
                }
                if (!std::isfinite(est.r_hat)) {
                    ++failed;
                }
                estimates.push_back(est);
            }
            result = aggregate_splits(std::move(estimates), failed, n, options.r0, options.rule);
        } else {
            std::vector<Index> observed;
            for (Index r = 0; r < n; ++r) {
                if (std::isfinite(metabolites(r, i)) && std::isfinite(metabolites(r, j))) {
                    observed.push_back(r);
                }
            }
            try {
                Matrix xs(static_cast<Index>(observed.size()), x.cols());
                Matrix zs(static_cast<Index>(observed.size()), z.cols());
                Vector ys(static_cast<Index>(observed.size()));
                Vector ws(static_cast<Index>(observed.size()));
                for (std::size_t r = 0; r < observed.size(); ++r) {
                    const auto rr = static_cast<Index>(r);
                    xs.row(rr) = x.row(observed[r]);
                    zs.row(rr) = z.row(observed[r]);
                    ys(rr) = metabolites(observed[r], i);
                    ws(rr) = metabolites(observed[r], j);
                }
                const PairedDataset data(std::move(zs), std::move(xs), std::move(ys), std::move(ws));
                const auto sub_plans = make_split_plans(data.n(), options.n_splits, options.seed);
                const VarianceInputs variance = estimate_variance_inputs(data, config);
                result = multi_split_inference(data, external_phi, config, sub_plans, options.r0, variance,
                                               options.rule);
            } catch (const Error&) {
                return;
            }
        }
        if (result.estimable) {
            rows[k].r_median = result.r_median;
            rows[k].p_value = result.p_value;
            rows[k].n_splits = result.n_ok;
        }
    });

    std::vector<double> p_values;
    std::vector<std::size_t> tested;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        if (rows[k].estimable()) {
            p_values.push_back(rows[k].p_value);
            tested.push_back(k);
        }
    }
    const FdrResult fdr = by_fdr(p_values, options.alpha);
    for (std::size_t t = 0; t < tested.size(); ++t) {
        rows[tested[t]].p_adjusted = fdr.p_adjusted[t];
        rows[tested[t]].significant = fdr.significant[t] != 0;
    }
    return rows;
}

std::vector<NetworkEdge> export_network(const PairwiseResultTable& results, double solid_threshold) {
    if (!(solid_threshold >= 0.0)) {
        throw ValidationError("solid-edge threshold must be nonnegative");
    }
    std::vector<NetworkEdge> edges;
    for (const auto& row : results) {
        if (!row.significant || !row.estimable()) {
            continue;
        }
        NetworkEdge edge;
        edge.node1 = row.metabolite_id_1;
        edge.node2 = row.metabolite_id_2;
        edge.weight = row.r_median;
        edge.sign = row.r_median >= 0.0 ? "positive" : "negative";
        edge.style = std::abs(row.r_median) >= solid_threshold ? "solid" : "dashed";
        edges.push_back(std::move(edge));
    }
    return edges;
}

namespace {

const std::vector<std::string> result_columns{"metabolite_id_1", "metabolite_id_2", "r_median", "p_value",
                                              "p_adjusted",      "significant",     "n_splits"};

}  // namespace

TextTable results_to_table(const PairwiseResultTable& results) {
    TextTable out;
    out.header = result_columns;
    for (const auto& row : results) {
        out.rows.push_back({row.metabolite_id_1, row.metabolite_id_2, format_double(row.r_median),
                            format_double(row.p_value), format_double(row.p_adjusted),
                            row.significant ? "true" : "false", std::to_string(row.n_splits)});
    }
    return out;
}

PairwiseResultTable results_from_table(const TextTable& table, const std::string& source) {
    if (table.header != result_columns) {
        std::ostringstream msg;
        msg << source << ": expected columns";
        for (const auto& c : result_columns) {
            msg << ' ' << c;
        }
        throw ValidationError(msg.str());
    }
    PairwiseResultTable out;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& f = table.rows[r];
        auto fail = [&](std::size_t col) {
            std::ostringstream msg;
            msg << source << ": line " << r + 2 << ", column " << col + 1 << " ('" << result_columns[col]
                << "'): cannot parse '" << f[col] << "'";
            throw ValidationError(msg.str());
        };
        PairwiseResultRow row;
        row.metabolite_id_1 = f[0];
        row.metabolite_id_2 = f[1];
        if (!parse_double(f[2], row.r_median)) fail(2);
        if (!parse_double(f[3], row.p_value)) fail(3);
        if (!parse_double(f[4], row.p_adjusted)) fail(4);
        if (f[5] == "true") {
            row.significant = true;
        } else if (f[5] == "false") {
            row.significant = false;
        } else {
            fail(5);
        }
        double splits = 0.0;
        if (!parse_double(f[6], splits) || splits < 0.0 || splits != std::floor(splits)) fail(6);
        row.n_splits = static_cast<int>(splits);
        out.push_back(std::move(row));
    }
    return out;
}

TextTable edges_to_table(const std::vector<NetworkEdge>& edges) {
    TextTable out;
    out.header = {"node1", "node2", "weight", "sign", "style"};
    for (const auto& e : edges) {
        out.rows.push_back({e.node1, e.node2, format_double(e.weight), e.sign, e.style});
    }
    return out;
}

}  // namespace mcorr
