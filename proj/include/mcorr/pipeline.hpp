#pragma once

#include "mcorr/inference.hpp"
#include "mcorr/tables.hpp"
#include "mcorr/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mcorr {

/// Taxon counts or relative abundances, one row per sample. Taxon ids are
/// '|'-separated lineages with rank prefixes, e.g.
/// "k__Bacteria|p__Firmicutes|c__Clostridia|o__Clostridiales|f__Lachnospiraceae".
struct AbundanceTable {
    std::vector<std::string> sample_ids;
    std::vector<std::string> taxon_ids;
    Matrix counts;

    /// Throws ValidationError on negative or non-finite entries, duplicate ids
    /// or shape mismatches.
    void validate() const;
    static AbundanceTable from_labeled(LabeledMatrix table, const std::string& source);
};

/// Metabolite levels, one row per sample; NaN marks a missing value.
struct MetaboliteTable {
    std::vector<std::string> sample_ids;
    std::vector<std::string> metabolite_ids;
    Matrix levels;

    static MetaboliteTable from_labeled(LabeledMatrix table, const std::string& source);
};

/// Rank names accepted by aggregate(): kingdom, phylum, class, order, family,
/// genus, species.
bool is_known_rank(const std::string& rank);

/// Sums taxa sharing the lineage prefix up to `rank`. Groups keep the order of
/// their first member. Throws ValidationError for an unknown rank or a taxon
/// whose lineage stops above it.
AbundanceTable aggregate(const AbundanceTable& table, const std::string& rank);

/// Keeps taxa with a nonzero entry in at least min_prevalence of the samples.
AbundanceTable filter_prevalence(const AbundanceTable& table, double min_prevalence);

/// aggregate() followed by filter_prevalence(). An empty rank skips aggregation.
AbundanceTable aggregate_and_filter(const AbundanceTable& table, const std::string& rank, double min_prevalence);

/// Centered log-ratio: log of the closed (pseudocount-shifted) composition
/// minus its row mean. Throws ValidationError on zeros when pseudocount is 0.
Matrix clr_transform(const AbundanceTable& table, double pseudocount = 0.5);

/// Additive log-ratio against `reference_taxon`; the remaining taxa keep their
/// order.
Matrix alr_transform(const AbundanceTable& table, const std::string& reference_taxon, double pseudocount = 0.5);

enum class Imputation {
    /// Missing levels become half the metabolite's observed minimum.
    HalfMinimum,
    /// Missing levels stay NaN; each pair uses the samples observed for both.
    DropSamplePairwise,
};

Imputation parse_imputation(const std::string& name);
std::string to_string(Imputation mode);

struct PreparedMetabolites {
    std::vector<std::string> ids;
    /// Natural-log levels (NaN where missing under DropSamplePairwise).
    Matrix values;
};

/// Drops metabolites missing in at least max_missing of the samples, imputes
/// per `mode` and takes natural logs. Throws ValidationError if no metabolite
/// survives or an observed level is not positive.
PreparedMetabolites prepare_metabolites(const MetaboliteTable& table, double max_missing,
                                        Imputation mode = Imputation::HalfMinimum);

/// Column-wise z-scores (population standard deviation). Constant columns are
/// only centred.
Matrix standardize_columns(const Matrix& m);

struct PairwiseOptions {
    int n_splits = 100;
    double r0 = 0.0;
    double alpha = 0.05;
    std::uint64_t seed = 1;
    unsigned threads = 0;
    MedianRule rule = MedianRule::MedianSplit;
};

/// Multi-split calibrated tests for every unordered metabolite pair, then
/// Benjamini-Yekutieli over the estimable pairs. Rows are ordered by
/// (metabolite_id_1, metabolite_id_2) with metabolite_id_1 < metabolite_id_2;
/// metabolite_id_1 is the outcome fitted on the first half of every split.
/// All pairs share the same split plans. Columns of `metabolites` with NaN
/// entries are analysed pair by pair on the jointly observed samples.
PairwiseResultTable pairwise_analysis(const Matrix& x, const Matrix& z, const Matrix& metabolites,
                                      const std::vector<std::string>& metabolite_ids,
                                      const ExternalDataset& external, const SmootherConfig& config,
                                      const PairwiseOptions& options);

struct NetworkEdge {
    std::string node1;
    std::string node2;
    double weight = 0.0;
    std::string sign;   // "positive" or "negative"
    std::string style;  // "solid" or "dashed"
};

/// One edge per significant row; solid when |r_median| >= solid_threshold.
std::vector<NetworkEdge> export_network(const PairwiseResultTable& results, double solid_threshold = 0.3);

TextTable results_to_table(const PairwiseResultTable& results);
PairwiseResultTable results_from_table(const TextTable& table, const std::string& source);
TextTable edges_to_table(const std::vector<NetworkEdge>& edges);

}  // namespace mcorr
