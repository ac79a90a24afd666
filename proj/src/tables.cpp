#include "mcorr/tables.hpp"

#include "mcorr/errors.hpp"
#include "mcorr/format.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace mcorr {

std::vector<std::string> split_tabs(const std::string& line) {
    std::string_view view(line);
    if (!view.empty() && view.back() == '\r') {
        view.remove_suffix(1);
    }
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t tab = view.find('\t', start);
        if (tab == std::string_view::npos) {
            fields.emplace_back(view.substr(start));
            break;
        }
        fields.emplace_back(view.substr(start, tab - start));
        start = tab + 1;
    }
    return fields;
}

namespace {

void require_unique(const std::vector<std::string>& ids, const std::string& source, const std::string& what) {
    std::unordered_set<std::string> seen;
    for (const auto& id : ids) {
        if (!seen.insert(id).second) {
            throw ValidationError(source + ": duplicate " + what + " '" + id + "'");
        }
    }
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open '" + path + "' for reading");
    }
    return in;
}

}  // namespace

LabeledMatrix LabeledMatrix::select_columns(const std::vector<Index>& columns) const {
    LabeledMatrix out;
    out.row_ids = row_ids;
    out.values.resize(values.rows(), static_cast<Index>(columns.size()));
    for (std::size_t c = 0; c < columns.size(); ++c) {
        out.column_ids.push_back(column_ids[static_cast<std::size_t>(columns[c])]);
        out.values.col(static_cast<Index>(c)) = values.col(columns[c]);
    }
    return out;
}

LabeledMatrix LabeledMatrix::align_rows(const std::vector<std::string>& ids, const std::string& what) const {
    std::unordered_map<std::string, Index> position;
    for (std::size_t i = 0; i < row_ids.size(); ++i) {
        position.emplace(row_ids[i], static_cast<Index>(i));
    }
    if (ids.size() != row_ids.size()) {
        std::ostringstream msg;
        msg << what << " has " << row_ids.size() << " samples, expected " << ids.size();
        throw ValidationError(msg.str());
    }
    LabeledMatrix out;
    out.column_ids = column_ids;
    out.row_ids = ids;
    out.values.resize(static_cast<Index>(ids.size()), values.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const auto it = position.find(ids[i]);
        if (it == position.end()) {
            throw ValidationError(what + " has no sample '" + ids[i] + "'");
        }
        out.values.row(static_cast<Index>(i)) = values.row(it->second);
    }
    return out;
}

LabeledMatrix read_matrix_tsv(std::istream& in, const std::string& source) {
    const TextTable text = read_text_tsv(in, source);
    if (text.header.size() < 2) {
        throw ValidationError(source + ": header needs a sample id column and at least one data column");
    }
    LabeledMatrix out;
    out.column_ids.assign(text.header.begin() + 1, text.header.end());
    require_unique(out.column_ids, source, "column");
    const Index rows = static_cast<Index>(text.rows.size());
    const Index cols = static_cast<Index>(out.column_ids.size());
    out.values.resize(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        const auto& fields = text.rows[static_cast<std::size_t>(i)];
        out.row_ids.push_back(fields[0]);
        for (Index j = 0; j < cols; ++j) {
            const std::string& cell = fields[static_cast<std::size_t>(j + 1)];
            double value = 0.0;
            if (!parse_double(cell, value)) {
                std::ostringstream msg;
                msg << source << ": line " << i + 2 << ", column " << j + 2 << " ('" << text.header[j + 1]
                    << "'): cannot parse '" << cell << "' as a number";
                throw ValidationError(msg.str());
            }
            out.values(i, j) = value;
        }
    }
    require_unique(out.row_ids, source, "sample id");
    return out;
}

LabeledMatrix read_matrix_tsv_file(const std::string& path) {
    std::ifstream in = open_input(path);
    return read_matrix_tsv(in, path);
}

void write_matrix_tsv(std::ostream& out, const LabeledMatrix& table, const std::string& id_header) {
    out << id_header;
    for (const auto& id : table.column_ids) {
        out << '\t' << id;
    }
    out << '\n';
    for (Index i = 0; i < table.values.rows(); ++i) {
        out << table.row_ids[static_cast<std::size_t>(i)];
        for (Index j = 0; j < table.values.cols(); ++j) {
            out << '\t' << format_double(table.values(i, j));
        }
        out << '\n';
    }
}

TextTable read_text_tsv(std::istream& in, const std::string& source) {
    TextTable out;
    std::string line;
    if (!std::getline(in, line)) {
        throw ValidationError(source + ": empty file (a header row is required)");
    }
    out.header = split_tabs(line);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") {
            continue;
        }
        auto fields = split_tabs(line);
        if (fields.size() != out.header.size()) {
            std::ostringstream msg;
            msg << source << ": line " << line_no << " has " << fields.size() << " fields, header has "
                << out.header.size();
            throw ValidationError(msg.str());
        }
        out.rows.push_back(std::move(fields));
    }
    if (in.bad()) {
        throw IoError(source + ": read failed");
    }
    return out;
}

TextTable read_text_tsv_file(const std::string& path) {
    std::ifstream in = open_input(path);
    return read_text_tsv(in, path);
}

void write_text_tsv(std::ostream& out, const TextTable& table) {
    auto write_row = [&out](const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i > 0) {
                out << '\t';
            }
            out << fields[i];
        }
        out << '\n';
    };
    write_row(table.header);
    for (const auto& row : table.rows) {
        write_row(row);
    }
}

void write_text_tsv_file(const std::string& path, const TextTable& table) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot open '" + path + "' for writing");
    }
    write_text_tsv(out, table);
    out.flush();
    if (!out) {
        throw IoError("write to '" + path + "' failed");
    }
}

}  // namespace mcorr
