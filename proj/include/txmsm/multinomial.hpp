#pragma once

#include "txmsm/design.hpp"

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

namespace txmsm {

struct MultinomialOptions {
    /// L2 penalty on non-intercept coefficients (internal standardized scale).
    double ridge = 0.0;
    double gradient_tolerance = 1e-8;
    int max_iterations = 100;
    /// |coefficient| beyond this on the logit scale is treated as separation.
    double separation_bound = 30.0;
};

struct MultinomialFit {
    /// categories[0] is the reference with an implicit zero coefficient row.
    std::vector<std::string> categories;
    std::vector<std::string> column_names;
    /// (K-1) x p, original covariate scale; aliased columns hold 0.
    Eigen::MatrixXd coefficients;
    std::vector<bool> aliased;
    double log_likelihood = 0.0;
    int n_iterations = 0;
    bool converged = false;
    double gradient_norm = 0.0;
    /// Log-likelihood after each accepted iteration, starting with the initial value.
    std::vector<double> log_likelihood_trace;
    std::vector<std::string> warnings;

    double coefficient(const std::string &category, const std::string &column) const;
};

/// Multinomial log-likelihood and derivatives for a fixed design, with the
/// parameter vector laid out category-major: theta[(k - 1) * p + j].
class MultinomialObjective {
  public:
    MultinomialObjective(const Eigen::MatrixXd &x, std::vector<int> y, int n_categories,
                         double ridge = 0.0, std::vector<bool> penalized = {});

    int n_parameters() const { return (n_categories_ - 1) * static_cast<int>(x_.cols()); }
    double value(const Eigen::VectorXd &theta) const;
    Eigen::VectorXd gradient(const Eigen::VectorXd &theta) const;
    /// Negative Hessian (observed information), positive semidefinite.
    Eigen::MatrixXd information(const Eigen::VectorXd &theta) const;

  private:
    Eigen::MatrixXd linear_predictors(const Eigen::VectorXd &theta) const;

    Eigen::MatrixXd x_;
    std::vector<int> y_;
    int n_categories_;
    double ridge_;
    std::vector<bool> penalized_;
};

/// Newton-Raphson with step-halving. `category_order` fixes the order (and
/// reference) of categories; observed labels missing from it are appended in
/// first-appearance order. Throws InputError TooFewCategories / RankDeficient
/// and NumericalError SeparationDetected.
MultinomialFit fit_multinomial(const DesignMatrix &x, std::span<const std::string> y,
                               std::span<const std::string> category_order = {},
                               const MultinomialOptions &options = {});

/// n x K matrix of fitted category probabilities (columns follow fit.categories).
/// Throws InputError DesignMismatch when the columns differ from the fit's.
Eigen::MatrixXd predict_probabilities(const MultinomialFit &fit, const DesignMatrix &x);

} // namespace txmsm
