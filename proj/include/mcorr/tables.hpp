#pragma once

#include "mcorr/types.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace mcorr {

/// A numeric TSV table: one row per sample, first column the sample id.
/// Missing values ("NA") are stored as NaN.
struct LabeledMatrix {
    std::vector<std::string> row_ids;
    std::vector<std::string> column_ids;
    Matrix values;

    /// Columns selected by `columns`, in the given order.
    LabeledMatrix select_columns(const std::vector<Index>& columns) const;
    /// Rows reordered to follow `ids`; throws ValidationError naming the first
    /// id that is absent.
    LabeledMatrix align_rows(const std::vector<std::string>& ids, const std::string& what) const;
};

/// Reads a TSV with a header row. `source` names the input in diagnostics.
/// Throws ValidationError with line and column on malformed content; ids
/// must be unique.
LabeledMatrix read_matrix_tsv(std::istream& in, const std::string& source);
LabeledMatrix read_matrix_tsv_file(const std::string& path);

void write_matrix_tsv(std::ostream& out, const LabeledMatrix& table, const std::string& id_header = "sample_id");

/// A string-valued TSV (header plus rows), for result tables.
struct TextTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

TextTable read_text_tsv(std::istream& in, const std::string& source);
TextTable read_text_tsv_file(const std::string& path);
void write_text_tsv(std::ostream& out, const TextTable& table);
void write_text_tsv_file(const std::string& path, const TextTable& table);

/// Splits one line on tabs (a trailing '\r' is dropped first).
std::vector<std::string> split_tabs(const std::string& line);

}  // namespace mcorr
