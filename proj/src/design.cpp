#include "txmsm/design.hpp"

#include "txmsm/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <unordered_map>

namespace txmsm {

std::vector<std::string> DesignMatrix::names() const {
    std::vector<std::string> out;
    out.reserve(columns_.size());
    for (const auto &c : columns_) {
        out.push_back(c.name);
    }
    return out;
}

void DesignMatrix::add_column(DesignColumn column) {
    if (column.values.size() != n_rows_) {
        throw InputError("DesignMismatch", fmt::format("column '{}' has {} values, expected {}",
                                                       column.name, column.values.size(), n_rows_));
    }
    for (const auto &c : columns_) {
        if (c.name == column.name) {
            throw InputError("DesignMismatch", fmt::format("duplicate column '{}'", column.name));
        }
    }
    columns_.push_back(std::move(column));
}

void DesignMatrix::add_intercept() {
    add_column(DesignColumn{"(Intercept)", ColumnKind::intercept, "", std::vector<double>(n_rows_, 1.0)});
}

void DesignMatrix::add_continuous(std::string name, std::span<const double> values) {
    add_column(DesignColumn{std::move(name), ColumnKind::continuous, "",
                            std::vector<double>(values.begin(), values.end())});
}

void DesignMatrix::add_spline_column(std::string name, std::span<const double> values) {
    add_column(DesignColumn{std::move(name), ColumnKind::spline, "",
                            std::vector<double>(values.begin(), values.end())});
}

void DesignMatrix::add_categorical(const std::string &name, std::span<const std::string> labels,
                                   std::span<const std::string> levels) {
    if (labels.size() != n_rows_) {
        throw InputError("DesignMismatch", fmt::format("categorical '{}' has {} labels, expected {}",
                                                       name, labels.size(), n_rows_));
    }
    std::unordered_map<std::string, std::size_t> level_index;
    for (std::size_t k = 0; k < levels.size(); ++k) {
        level_index.emplace(levels[k], k);
    }
    std::vector<std::vector<double>> indicators(levels.size() > 0 ? levels.size() - 1 : 0,
                                                std::vector<double>(n_rows_, 0.0));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto it = level_index.find(labels[i]);
        if (it == level_index.end()) {
            throw InputError("DesignMismatch",
                             fmt::format("'{}' is not a level of '{}'", labels[i], name));
        }
        if (it->second > 0) {
            indicators[it->second - 1][i] = 1.0;
        }
    }
    for (std::size_t k = 1; k < levels.size(); ++k) {
        add_column(DesignColumn{fmt::format("{}={}", name, levels[k]), ColumnKind::indicator, name,
                                std::move(indicators[k - 1])});
    }
}

Eigen::MatrixXd DesignMatrix::to_matrix() const {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n_rows_), static_cast<Eigen::Index>(columns_.size()));
    for (std::size_t j = 0; j < columns_.size(); ++j) {
        x.col(static_cast<Eigen::Index>(j)) =
            Eigen::Map<const Eigen::VectorXd>(columns_[j].values.data(),
                                              static_cast<Eigen::Index>(n_rows_));
    }
    return x;
}

std::vector<bool> find_aliased_columns(const Eigen::MatrixXd &x, bool center, double tol) {
    const auto p = x.cols();
    std::vector<bool> aliased(static_cast<std::size_t>(p), false);
    std::vector<Eigen::VectorXd> basis;
    for (Eigen::Index j = 0; j < p; ++j) {
        Eigen::VectorXd v = x.col(j);
        if (center && v.size() > 0) {
            v.array() -= v.mean();
        }
        const double scale = std::max(v.norm(), x.col(j).norm());
        if (scale == 0.0) {
            aliased[static_cast<std::size_t>(j)] = true;
            continue;
        }
        for (int pass = 0; pass < 2; ++pass) {
            for (const auto &q : basis) {
                v -= q.dot(v) * q;
            }
        }
        const double residual = v.norm();
        if (residual <= tol * scale) {
            aliased[static_cast<std::size_t>(j)] = true;
            continue;
        }
        basis.push_back(v / residual);
    }
    return aliased;
}

} // namespace txmsm
