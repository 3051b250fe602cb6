#include "disparity/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

namespace disparity::data {

int Dataset::add_column(const std::string& name, ColumnKind kind, std::vector<double> values) {
    if (has_column(name)) throw input_error("duplicate column: " + name);
    if (!columns_.empty() && values.size() != rows()) {
        throw input_error("column " + name + " length mismatch");
    }
    names_.push_back(name);
    kinds_.push_back(kind);
    columns_.push_back(std::move(values));
    return static_cast<int>(names_.size()) - 1;
}

int Dataset::column_index(const std::string& name) const {
    for (int i = 0; i < column_count(); ++i) {
        if (names_[static_cast<std::size_t>(i)] == name) return i;
    }
    throw input_error("unknown column: " + name);
}

bool Dataset::has_column(const std::string& name) const {
    return std::find(names_.begin(), names_.end(), name) != names_.end();
}

void Dataset::set_roles(const std::string& exposure, const std::string& outcome,
                        const std::vector<std::string>& contexts) {
    if (exposure == outcome) throw input_error("exposure and outcome must differ");
    exposure_ = column_index(exposure);
    outcome_ = column_index(outcome);
    contexts_.clear();
    for (const auto& c : contexts) {
        const int idx = column_index(c);
        if (idx == outcome_) throw input_error("context set must exclude the outcome");
        contexts_.push_back(idx);
    }
}

bool Dataset::is_context(int c) const {
    return std::find(contexts_.begin(), contexts_.end(), c) != contexts_.end();
}

std::vector<int> Dataset::covariates() const {
    std::vector<int> out;
    for (int i = 0; i < column_count(); ++i) {
        if (i != exposure_ && i != outcome_) out.push_back(i);
    }
    return out;
}

std::vector<std::size_t> Dataset::group_rows(int group) const {
    if (exposure_ < 0) throw input_error("exposure column not set");
    std::vector<std::size_t> out;
    const auto& r = col(exposure_);
    for (std::size_t i = 0; i < r.size(); ++i) {
        if (static_cast<int>(r[i]) == group) out.push_back(i);
    }
    return out;
}

Dataset Dataset::select_rows(const std::vector<std::size_t>& idx) const {
    Dataset out;
    for (int c = 0; c < column_count(); ++c) {
        std::vector<double> v;
        v.reserve(idx.size());
        for (std::size_t i : idx) v.push_back(columns_[static_cast<std::size_t>(c)].at(i));
        out.add_column(names_[static_cast<std::size_t>(c)], kinds_[static_cast<std::size_t>(c)],
                       std::move(v));
    }
    out.exposure_ = exposure_;
    out.outcome_ = outcome_;
    out.contexts_ = contexts_;
    return out;
}

void Dataset::validate() const {
    if (rows() == 0) throw input_error("dataset has no rows");
    if (exposure_ >= 0) {
        bool has0 = false;
        bool has1 = false;
        for (double v : col(exposure_)) {
            if (std::isnan(v)) throw input_error("missing value in exposure column");
            if (v == 0.0) has0 = true;
            if (v == 1.0) has1 = true;
        }
        if (!has0 || !has1) throw input_error("exposure column must contain both 0 and 1");
    }
    for (int c = 0; c < column_count(); ++c) {
        for (double v : columns_[static_cast<std::size_t>(c)]) {
            if (std::isnan(v) || std::isinf(v)) {
                throw input_error("non-finite value in column " + names_[static_cast<std::size_t>(c)]);
            }
        }
    }
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

ColumnKind infer_kind(const std::vector<double>& v) {
    std::set<double> distinct(v.begin(), v.end());
    if (distinct.size() <= 2) return ColumnKind::Binary;
    bool integral = true;
    for (double x : v) {
        if (x != std::floor(x)) {
            integral = false;
            break;
        }
    }
    if (integral && distinct.size() <= 10) return ColumnKind::Categorical;
    return ColumnKind::Continuous;
}

}  // namespace

Dataset read_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw input_error("empty CSV input");
    const auto header = split_csv_line(line);
    std::vector<std::vector<double>> cols(header.size());
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != header.size()) {
            throw input_error("CSV row " + std::to_string(row) + " has " +
                              std::to_string(fields.size()) + " fields, expected " +
                              std::to_string(header.size()));
        }
        for (std::size_t c = 0; c < fields.size(); ++c) {
            try {
                std::size_t pos = 0;
                const double v = std::stod(fields[c], &pos);
                if (pos != fields[c].size()) throw std::invalid_argument("trailing chars");
                cols[c].push_back(v);
            } catch (const std::exception&) {
                throw input_error("CSV row " + std::to_string(row) + ", column " + header[c] +
                                  ": cannot parse '" + fields[c] + "'");
            }
        }
    }
    Dataset d;
    for (std::size_t c = 0; c < header.size(); ++c) {
        const ColumnKind kind = infer_kind(cols[c]);
        d.add_column(header[c], kind, std::move(cols[c]));
    }
    return d;
}

Dataset read_csv_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw input_error("cannot open CSV file: " + path);
    return read_csv(f);
}

void write_csv(const Dataset& d, std::ostream& out) {
    for (int c = 0; c < d.column_count(); ++c) {
        if (c) out << ',';
        out << d.name(c);
    }
    out << '\n';
    out << std::setprecision(17);
    for (std::size_t r = 0; r < d.rows(); ++r) {
        for (int c = 0; c < d.column_count(); ++c) {
            if (c) out << ',';
            out << d.col(c)[r];
        }
        out << '\n';
    }
}

void write_csv_file(const Dataset& d, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw input_error("cannot open output file: " + path);
    write_csv(d, f);
}

}  // namespace disparity::data
