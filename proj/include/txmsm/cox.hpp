#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace txmsm {

/// One counting-process record (t_begin, t_end] for the Cox engine.
struct SurvivalRecord {
    std::string pin;
    double t_begin = 0.0;
    double t_end = 1.0;
    bool event = false;
    std::vector<double> covariates;
    double weight = 1.0;
    std::optional<std::string> stratum;
};

/// Columnar form of a record set; clusters and strata are dense integer ids.
struct SurvivalData {
    std::vector<double> start;
    std::vector<double> stop;
    std::vector<std::uint8_t> event;
    std::vector<double> weight;
    std::vector<int> cluster;
    std::vector<int> stratum;
    Eigen::MatrixXd x;
    std::vector<std::string> covariate_names;
    int n_clusters = 0;
    int n_strata = 1;

    std::size_t size() const noexcept { return start.size(); }
    Eigen::Index n_covariates() const noexcept { return x.cols(); }

    static SurvivalData from_records(std::span<const SurvivalRecord> records,
                                     std::vector<std::string> covariate_names = {});

    /// Throws InputError InvalidRecord on t_begin >= t_end, non-positive or
    /// non-finite weights, or inconsistent column lengths.
    void validate() const;
};

/// Right-continuous step function of cumulative baseline hazard at x = 0.
struct BaselineHazard {
    std::vector<double> times;
    std::vector<double> increments;
    std::vector<double> cumulative;

    double at(double t) const;
};

struct CoxOptions {
    double gradient_tolerance = 1e-8;
    int max_iterations = 50;
    /// |beta_j| beyond this is reported as a monotone likelihood.
    double monotone_bound = 30.0;
    /// Multiply the cluster meat by G / (G - 1).
    bool small_sample_correction = false;
    /// Instead of throwing MonotoneLikelihood, drop the diverging columns
    /// (coefficient fixed at 0, listed in CoxFit::divergent) and refit.
    bool drop_divergent_columns = false;
};

struct CoxFit {
    std::vector<std::string> covariate_names;
    Eigen::VectorXd beta;
    Eigen::MatrixXd naive_covariance;
    Eigen::MatrixXd robust_covariance;
    /// Columns with no information (constant or collinear); their beta and
    /// covariance entries are fixed at 0.
    std::vector<bool> aliased;
    /// Columns dropped because their coefficient diverged (subset of aliased).
    std::vector<bool> divergent;
    /// One step function per stratum.
    std::vector<BaselineHazard> baseline_hazard;
    double log_partial_likelihood = 0.0;
    double log_partial_likelihood_null = 0.0;
    bool converged = false;
    int n_iterations = 0;
    double gradient_norm = 0.0;
    std::size_t n_events = 0;
    std::size_t n_records = 0;
    int n_clusters = 0;
    std::string ties_method = "breslow";
    std::vector<std::string> warnings;

    Eigen::VectorXd naive_se() const;
    Eigen::VectorXd robust_se() const;
    Eigen::Index index_of(const std::string &name) const;
};

/// Weighted Breslow partial likelihood maximised by Newton-Raphson with
/// step-halving. Throws NumericalError NoEvents or MonotoneLikelihood.
CoxFit fit_cox(const SurvivalData &data, const CoxOptions &options = {});
CoxFit fit_cox(std::span<const SurvivalRecord> records, const CoxOptions &options = {});

double cox_log_partial_likelihood(const SurvivalData &data, const Eigen::VectorXd &beta);
Eigen::VectorXd cox_score(const SurvivalData &data, const Eigen::VectorXd &beta);
/// Observed information (negative Hessian of the log partial likelihood).
Eigen::MatrixXd cox_information(const SurvivalData &data, const Eigen::VectorXd &beta);

/// Breslow estimate: at each event time, weighted event count over the
/// weighted risk-set sum of exp(beta'x).
BaselineHazard baseline_cumhaz(const CoxFit &fit, const SurvivalData &data, int stratum = 0);

struct PathSegment {
    double t_begin = 0.0;
    double t_end = 0.0;
    std::vector<double> covariates;
};

/// exp(-sum over segments of [L0(t_end) - L0(t_begin)] * exp(beta'x)).
/// Throws InputError PathGap if segments are not contiguous.
double survival_given_path(const CoxFit &fit, std::span<const PathSegment> path, int stratum = 0);

/// Square roots of the diagonal of the cluster sandwich covariance.
Eigen::VectorXd robust_se(const CoxFit &fit);

/// Wald interval exp(beta +/- z * se).
struct HazardRatio {
    double hr = 1.0;
    double lower = 1.0;
    double upper = 1.0;
};
HazardRatio wald_interval(double beta, double se, double z = 1.959963984540054);

} // namespace txmsm
