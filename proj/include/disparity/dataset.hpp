#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace disparity::data {

enum class ColumnKind { Binary, Categorical, Continuous };

struct input_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Columnar table with per-column kind and designated exposure, outcome and
/// context roles. Exposure is binary with 1 = advantaged group.
class Dataset {
public:
    Dataset() = default;

    int add_column(const std::string& name, ColumnKind kind, std::vector<double> values);
    int column_index(const std::string& name) const;
    bool has_column(const std::string& name) const;

    std::size_t rows() const { return columns_.empty() ? 0 : columns_[0].size(); }
    int column_count() const { return static_cast<int>(names_.size()); }
    const std::string& name(int c) const { return names_.at(static_cast<std::size_t>(c)); }
    const std::vector<std::string>& names() const { return names_; }
    ColumnKind kind(int c) const { return kinds_.at(static_cast<std::size_t>(c)); }
    void set_kind(int c, ColumnKind k) { kinds_.at(static_cast<std::size_t>(c)) = k; }
    const std::vector<double>& col(int c) const { return columns_.at(static_cast<std::size_t>(c)); }
    const std::vector<double>& col(const std::string& name) const { return col(column_index(name)); }

    void set_roles(const std::string& exposure, const std::string& outcome,
                   const std::vector<std::string>& contexts);
    int exposure() const { return exposure_; }
    int outcome() const { return outcome_; }
    const std::vector<int>& contexts() const { return contexts_; }
    bool is_context(int c) const;

    /// Covariate columns: everything except exposure and outcome.
    std::vector<int> covariates() const;

    /// Row indices with the exposure equal to `group` (0 or 1).
    std::vector<std::size_t> group_rows(int group) const;

    /// New dataset with the given rows (indices may repeat, as in a bootstrap
    /// resample); roles carried over.
    Dataset select_rows(const std::vector<std::size_t>& idx) const;

    /// Validates the invariants (both exposure values present, contexts
    /// exclude outcome, n >= 1); throws input_error on violation.
    void validate() const;

private:
    std::vector<std::string> names_;
    std::vector<ColumnKind> kinds_;
    std::vector<std::vector<double>> columns_;
    int exposure_ = -1;
    int outcome_ = -1;
    std::vector<int> contexts_;
};

/// Reads a headered CSV. Kinds are inferred per column (<= 2 distinct values
/// -> binary; integer-valued with <= 10 levels -> categorical; else
/// continuous); roles applied afterwards.
Dataset read_csv(std::istream& in);
Dataset read_csv_file(const std::string& path);
void write_csv(const Dataset& d, std::ostream& out);
void write_csv_file(const Dataset& d, const std::string& path);

}  // namespace disparity::data
