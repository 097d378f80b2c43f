#include "txmsm/multinomial.hpp"

#include "txmsm/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace txmsm {

double MultinomialFit::coefficient(const std::string &category, const std::string &column) const {
    auto cat = std::find(categories.begin(), categories.end(), category);
    auto col = std::find(column_names.begin(), column_names.end(), column);
    if (cat == categories.end() || col == column_names.end()) {
        throw InputError("DesignMismatch",
                         fmt::format("no coefficient for ({}, {})", category, column));
    }
    if (cat == categories.begin()) {
        return 0.0;
    }
    return coefficients(cat - categories.begin() - 1, col - column_names.begin());
}

MultinomialObjective::MultinomialObjective(const Eigen::MatrixXd &x, std::vector<int> y,
                                           int n_categories, double ridge,
                                           std::vector<bool> penalized)
    : x_{x}, y_{std::move(y)}, n_categories_{n_categories}, ridge_{ridge},
      penalized_{std::move(penalized)} {
    if (penalized_.empty()) {
        penalized_.assign(static_cast<std::size_t>(x_.cols()), true);
    }
}

Eigen::MatrixXd MultinomialObjective::linear_predictors(const Eigen::VectorXd &theta) const {
    const auto p = x_.cols();
    const Eigen::Map<const Eigen::MatrixXd> beta(theta.data(), p, n_categories_ - 1);
    return x_ * beta;
}

namespace {

/// Row-wise log of the softmax normaliser with the reference predictor fixed at 0.
Eigen::VectorXd log_normalisers(const Eigen::MatrixXd &eta) {
    Eigen::VectorXd out(eta.rows());
    for (Eigen::Index i = 0; i < eta.rows(); ++i) {
        const double m = std::max(0.0, eta.row(i).maxCoeff());
        double s = std::exp(-m);
        for (Eigen::Index k = 0; k < eta.cols(); ++k) {
            s += std::exp(eta(i, k) - m);
        }
        out(i) = m + std::log(s);
    }
    return out;
}

} // namespace

double MultinomialObjective::value(const Eigen::VectorXd &theta) const {
    const Eigen::MatrixXd eta = linear_predictors(theta);
    const Eigen::VectorXd lse = log_normalisers(eta);
    double ll = 0.0;
    for (Eigen::Index i = 0; i < eta.rows(); ++i) {
        const int yi = y_[static_cast<std::size_t>(i)];
        ll += (yi > 0 ? eta(i, yi - 1) : 0.0) - lse(i);
    }
    const auto p = x_.cols();
    for (int k = 0; k + 1 < n_categories_; ++k) {
        for (Eigen::Index j = 0; j < p; ++j) {
            if (penalized_[static_cast<std::size_t>(j)]) {
                const double t = theta(k * p + j);
                ll -= 0.5 * ridge_ * t * t;
            }
        }
    }
    return ll;
}

Eigen::VectorXd MultinomialObjective::gradient(const Eigen::VectorXd &theta) const {
    const Eigen::MatrixXd eta = linear_predictors(theta);
    const Eigen::VectorXd lse = log_normalisers(eta);
    const auto n = x_.rows();
    const auto p = x_.cols();
    const int km1 = n_categories_ - 1;
    Eigen::MatrixXd residual(n, km1);
    for (Eigen::Index i = 0; i < n; ++i) {
        const int yi = y_[static_cast<std::size_t>(i)];
        for (int k = 0; k < km1; ++k) {
            residual(i, k) = (yi == k + 1 ? 1.0 : 0.0) - std::exp(eta(i, k) - lse(i));
        }
    }
    Eigen::MatrixXd g = x_.transpose() * residual; // p x (K-1)
    Eigen::VectorXd out(p * km1);
    for (int k = 0; k < km1; ++k) {
        for (Eigen::Index j = 0; j < p; ++j) {
            double v = g(j, k);
            if (penalized_[static_cast<std::size_t>(j)]) {
                v -= ridge_ * theta(k * p + j);
            }
            out(k * p + j) = v;
        }
    }
    return out;
}

Eigen::MatrixXd MultinomialObjective::information(const Eigen::VectorXd &theta) const {
    const Eigen::MatrixXd eta = linear_predictors(theta);
    const Eigen::VectorXd lse = log_normalisers(eta);
    const auto n = x_.rows();
    const auto p = x_.cols();
    const int km1 = n_categories_ - 1;
    Eigen::MatrixXd prob(n, km1);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (int k = 0; k < km1; ++k) {
            prob(i, k) = std::exp(eta(i, k) - lse(i));
        }
    }
    Eigen::MatrixXd info = Eigen::MatrixXd::Zero(p * km1, p * km1);
    for (int k = 0; k < km1; ++k) {
        for (int l = k; l < km1; ++l) {
            Eigen::VectorXd w(n);
            for (Eigen::Index i = 0; i < n; ++i) {
                w(i) = prob(i, k) * ((k == l ? 1.0 : 0.0) - prob(i, l));
            }
            const Eigen::MatrixXd block = x_.transpose() * w.asDiagonal() * x_;
            info.block(k * p, l * p, p, p) = block;
            if (l != k) {
                info.block(l * p, k * p, p, p) = block.transpose();
            }
        }
    }
    for (int k = 0; k < km1; ++k) {
        for (Eigen::Index j = 0; j < p; ++j) {
            if (penalized_[static_cast<std::size_t>(j)]) {
                info(k * p + j, k * p + j) += ridge_;
            }
        }
    }
    return info;
}

MultinomialFit fit_multinomial(const DesignMatrix &design, std::span<const std::string> y,
                               std::span<const std::string> category_order,
                               const MultinomialOptions &options) {
    if (y.size() != design.n_rows()) {
        throw InputError("DesignMismatch", fmt::format("{} outcomes for {} design rows", y.size(),
                                                       design.n_rows()));
    }
    MultinomialFit fit;
    fit.column_names = design.names();

    // Observed categories, ordered by the hint then by first appearance.
    std::vector<std::string> observed;
    for (const auto &label : y) {
        if (std::find(observed.begin(), observed.end(), label) == observed.end()) {
            observed.push_back(label);
        }
    }
    for (const auto &c : category_order) {
        if (std::find(observed.begin(), observed.end(), c) != observed.end()) {
            fit.categories.push_back(c);
        }
    }
    for (const auto &c : observed) {
        if (std::find(fit.categories.begin(), fit.categories.end(), c) == fit.categories.end()) {
            fit.categories.push_back(c);
        }
    }
    if (fit.categories.size() < 2) {
        throw InputError("TooFewCategories",
                         fmt::format("need at least 2 observed categories, found {}",
                                     fit.categories.size()));
    }
    std::unordered_map<std::string, int> code;
    for (std::size_t k = 0; k < fit.categories.size(); ++k) {
        code.emplace(fit.categories[k], static_cast<int>(k));
    }
    std::vector<int> codes;
    codes.reserve(y.size());
    for (const auto &label : y) {
        codes.push_back(code.at(label));
    }
    const int n_categories = static_cast<int>(fit.categories.size());

    // Drop aliased columns; the intercept (if any) must survive.
    const Eigen::MatrixXd x_full = design.to_matrix();
    fit.aliased = find_aliased_columns(x_full, false);
    std::vector<Eigen::Index> kept;
    bool has_intercept = false;
    for (std::size_t j = 0; j < design.n_cols(); ++j) {
        const auto &col = design.column(j);
        if (fit.aliased[j]) {
            if (col.kind == ColumnKind::intercept) {
                throw InputError("RankDeficient", "the intercept column is aliased");
            }
            fit.warnings.push_back(fmt::format("dropped aliased column '{}'", col.name));
            continue;
        }
        has_intercept = has_intercept || col.kind == ColumnKind::intercept;
        kept.push_back(static_cast<Eigen::Index>(j));
    }
    const auto p = static_cast<Eigen::Index>(kept.size());

    // Internal centering/scaling of continuous columns for conditioning.
    Eigen::MatrixXd x(x_full.rows(), p);
    std::vector<double> shift(kept.size(), 0.0);
    std::vector<double> scale(kept.size(), 1.0);
    std::vector<bool> penalized(kept.size(), true);
    Eigen::Index intercept_pos = -1;
    for (Eigen::Index c = 0; c < p; ++c) {
        const auto &col = design.column(static_cast<std::size_t>(kept[static_cast<std::size_t>(c)]));
        Eigen::VectorXd v = x_full.col(kept[static_cast<std::size_t>(c)]);
        if (col.kind == ColumnKind::intercept) {
            intercept_pos = c;
            penalized[static_cast<std::size_t>(c)] = false;
        } else if (col.kind == ColumnKind::continuous || col.kind == ColumnKind::spline) {
            const double m = has_intercept ? v.mean() : 0.0;
            const double var = (v.array() - v.mean()).square().sum() / std::max<double>(1.0, static_cast<double>(v.size() - 1));
            const double s = var > 0.0 ? std::sqrt(var) : 1.0;
            shift[static_cast<std::size_t>(c)] = m;
            scale[static_cast<std::size_t>(c)] = s;
            v = (v.array() - m) / s;
        }
        x.col(c) = v;
    }

    MultinomialObjective objective(x, codes, n_categories, options.ridge, penalized);
    const int n_par = objective.n_parameters();
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(n_par);
    // Start the intercepts at the marginal log-odds.
    if (intercept_pos >= 0) {
        std::vector<double> counts(static_cast<std::size_t>(n_categories), 0.0);
        for (int c : codes) {
            counts[static_cast<std::size_t>(c)] += 1.0;
        }
        for (int k = 1; k < n_categories; ++k) {
            theta((k - 1) * p + intercept_pos) =
                std::log(counts[static_cast<std::size_t>(k)] / counts[0]);
        }
    }

    double ll = objective.value(theta);
    fit.log_likelihood_trace.push_back(ll);
    Eigen::VectorXd grad = objective.gradient(theta);
    for (int iter = 0; iter < options.max_iterations; ++iter) {
        const Eigen::MatrixXd info = objective.information(theta);
        Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
            throw NumericalError("SingularInformation",
                                 "multinomial information matrix is not positive definite");
        }
        const Eigen::VectorXd step = ldlt.solve(grad);
        if (grad.norm() <= options.gradient_tolerance && step.cwiseAbs().maxCoeff() <= 1e-3) {
            // A few last full steps: near the optimum they are quadratically
            // better, while the likelihood only changes at rounding level.
            Eigen::VectorXd polish = step;
            for (int k = 0; k < 3; ++k) {
                const Eigen::VectorXd polished = theta + polish;
                const double polished_ll = objective.value(polished);
                if (!(polished_ll >= ll - 1e-12 * std::abs(ll))) {
                    break;
                }
                theta = polished;
                ll = std::max(ll, polished_ll);
                grad = objective.gradient(theta);
                polish = objective.information(theta).ldlt().solve(grad);
            }
            fit.converged = true;
            break;
        }
        double factor = 1.0;
        Eigen::VectorXd candidate = theta + step;
        double candidate_ll = objective.value(candidate);
        int halvings = 0;
        while (!(candidate_ll >= ll - 1e-12 * std::abs(ll)) && halvings < 40) {
            factor *= 0.5;
            candidate = theta + factor * step;
            candidate_ll = objective.value(candidate);
            ++halvings;
        }
        if (!(candidate_ll >= ll - 1e-12 * std::abs(ll))) {
            break;
        }
        theta = candidate;
        ll = std::max(candidate_ll, ll);
        fit.log_likelihood_trace.push_back(candidate_ll);
        grad = objective.gradient(theta);
        fit.n_iterations = iter + 1;
        // Converged fits never reach the bound; getting there means the
        // likelihood keeps rising along a ray.
        if (theta.cwiseAbs().maxCoeff() > options.separation_bound) {
            throw NumericalError(
                "SeparationDetected",
                fmt::format("a coefficient exceeded {} on the logit scale after {} iterations",
                            options.separation_bound, fit.n_iterations));
        }
    }
    if (!fit.converged && grad.norm() <= options.gradient_tolerance) {
        const Eigen::MatrixXd info = objective.information(theta);
        const Eigen::VectorXd step = info.ldlt().solve(grad);
        fit.converged = step.cwiseAbs().maxCoeff() <= 1e-3;
    }
    fit.log_likelihood = objective.value(theta);
    fit.gradient_norm = grad.norm();
    if (!fit.converged) {
        fit.warnings.push_back(
            fmt::format("did not converge in {} iterations (gradient norm {:.3g})",
                        options.max_iterations, fit.gradient_norm));
    }

    // Back-transform to the original covariate scale.
    fit.coefficients = Eigen::MatrixXd::Zero(n_categories - 1, static_cast<Eigen::Index>(design.n_cols()));
    for (int k = 0; k < n_categories - 1; ++k) {
        double intercept_adjust = 0.0;
        for (Eigen::Index c = 0; c < p; ++c) {
            const auto sc = static_cast<std::size_t>(c);
            const double internal = theta(k * p + c);
            const double original = internal / scale[sc];
            fit.coefficients(k, kept[sc]) = original;
            intercept_adjust += original * shift[sc];
        }
        if (intercept_pos >= 0) {
            fit.coefficients(k, kept[static_cast<std::size_t>(intercept_pos)]) -= intercept_adjust;
        }
    }
    return fit;
}

Eigen::MatrixXd predict_probabilities(const MultinomialFit &fit, const DesignMatrix &design) {
    if (design.names() != fit.column_names) {
        throw InputError("DesignMismatch", "design columns do not match the fitted model");
    }
    const Eigen::MatrixXd x = design.to_matrix();
    const Eigen::MatrixXd eta = x * fit.coefficients.transpose(); // n x (K-1)
    const auto n = x.rows();
    const auto k = static_cast<Eigen::Index>(fit.categories.size());
    Eigen::MatrixXd prob(n, k);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double m = std::max(0.0, eta.row(i).maxCoeff());
        double total = std::exp(-m);
        prob(i, 0) = std::exp(-m);
        for (Eigen::Index c = 1; c < k; ++c) {
            prob(i, c) = std::exp(eta(i, c - 1) - m);
            total += prob(i, c);
        }
        prob.row(i) /= total;
    }
    return prob;
}

} // namespace txmsm
