#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace txmsm {

enum class ColumnKind { intercept, indicator, continuous, spline };

struct DesignColumn {
    std::string name;
    ColumnKind kind = ColumnKind::continuous;
    /// Indicator columns from one categorical share a group name.
    std::string group;
    std::vector<double> values;
};

/// Named model matrix. Categorical variables expand to 0/1 indicators with the
/// first level as the omitted reference.
class DesignMatrix {
  public:
    explicit DesignMatrix(std::size_t n_rows = 0) : n_rows_{n_rows} {}

    std::size_t n_rows() const noexcept { return n_rows_; }
    std::size_t n_cols() const noexcept { return columns_.size(); }
    const std::vector<DesignColumn> &columns() const noexcept { return columns_; }
    const DesignColumn &column(std::size_t j) const { return columns_.at(j); }
    std::vector<std::string> names() const;

    void add_intercept();
    void add_continuous(std::string name, std::span<const double> values);
    void add_spline_column(std::string name, std::span<const double> values);
    /// Adds one indicator per non-reference level. Labels outside `levels` throw.
    void add_categorical(const std::string &name, std::span<const std::string> labels,
                         std::span<const std::string> levels);
    void add_column(DesignColumn column);

    Eigen::MatrixXd to_matrix() const;

  private:
    std::size_t n_rows_;
    std::vector<DesignColumn> columns_;
};

/// Greedy left-to-right rank check: a column is aliased when it lies (within a
/// relative tolerance) in the span of the columns kept before it. With
/// `center`, columns are centered first so constants count as aliased.
std::vector<bool> find_aliased_columns(const Eigen::MatrixXd &x, bool center, double tol = 1e-7);

} // namespace txmsm
