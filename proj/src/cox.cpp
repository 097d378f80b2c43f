#include "txmsm/cox.hpp"

#include "txmsm/design.hpp"
#include "txmsm/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <unordered_map>

namespace txmsm {

SurvivalData SurvivalData::from_records(std::span<const SurvivalRecord> records,
                                        std::vector<std::string> covariate_names) {
    SurvivalData d;
    const std::size_t n = records.size();
    const std::size_t p = n > 0 ? records.front().covariates.size() : covariate_names.size();
    if (covariate_names.empty()) {
        for (std::size_t j = 0; j < p; ++j) {
            covariate_names.push_back(fmt::format("x{}", j + 1));
        }
    }
    if (covariate_names.size() != p) {
        throw InputError("InvalidRecord", fmt::format("{} covariate names for {} covariates",
                                                      covariate_names.size(), p));
    }
    d.covariate_names = std::move(covariate_names);
    d.start.reserve(n);
    d.stop.reserve(n);
    d.event.reserve(n);
    d.weight.reserve(n);
    d.cluster.reserve(n);
    d.stratum.reserve(n);
    d.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
    std::unordered_map<std::string, int> clusters;
    std::unordered_map<std::string, int> strata;
    for (std::size_t i = 0; i < n; ++i) {
        const auto &r = records[i];
        if (r.covariates.size() != p) {
            throw InputError("InvalidRecord",
                             fmt::format("record {} has {} covariates, expected {}", i + 1,
                                         r.covariates.size(), p));
        }
        d.start.push_back(r.t_begin);
        d.stop.push_back(r.t_end);
        d.event.push_back(r.event ? 1 : 0);
        d.weight.push_back(r.weight);
        d.cluster.push_back(
            clusters.emplace(r.pin, static_cast<int>(clusters.size())).first->second);
        d.stratum.push_back(
            strata.emplace(r.stratum.value_or(""), static_cast<int>(strata.size())).first->second);
        for (std::size_t j = 0; j < p; ++j) {
            d.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = r.covariates[j];
        }
    }
    d.n_clusters = static_cast<int>(clusters.size());
    d.n_strata = std::max<int>(1, static_cast<int>(strata.size()));
    d.validate();
    return d;
}

void SurvivalData::validate() const {
    const std::size_t n = start.size();
    if (stop.size() != n || event.size() != n || weight.size() != n || cluster.size() != n ||
        stratum.size() != n || static_cast<std::size_t>(x.rows()) != n ||
        covariate_names.size() != static_cast<std::size_t>(x.cols())) {
        throw InputError("InvalidRecord", "survival data columns have inconsistent lengths");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!(std::isfinite(start[i]) && std::isfinite(stop[i]) && start[i] < stop[i])) {
            throw InputError("InvalidRecord", fmt::format("record {}: interval ({}, {}] is empty",
                                                          i + 1, start[i], stop[i]));
        }
        if (!(std::isfinite(weight[i]) && weight[i] > 0.0)) {
            throw InputError("InvalidRecord",
                             fmt::format("record {}: weight {} is not positive", i + 1, weight[i]));
        }
        if (cluster[i] < 0 || cluster[i] >= n_clusters || stratum[i] < 0 ||
            stratum[i] >= n_strata) {
            throw InputError("InvalidRecord", fmt::format("record {}: bad cluster/stratum id", i + 1));
        }
    }
    if (!x.allFinite()) {
        throw InputError("InvalidRecord", "covariates contain non-finite values");
    }
}

double BaselineHazard::at(double t) const {
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) {
        return 0.0;
    }
    return cumulative[static_cast<std::size_t>(it - times.begin() - 1)];
}

Eigen::VectorXd CoxFit::naive_se() const { return naive_covariance.diagonal().cwiseMax(0.0).cwiseSqrt(); }

Eigen::VectorXd CoxFit::robust_se() const { return robust_covariance.diagonal().cwiseMax(0.0).cwiseSqrt(); }

Eigen::Index CoxFit::index_of(const std::string &name) const {
    const auto it = std::find(covariate_names.begin(), covariate_names.end(), name);
    if (it == covariate_names.end()) {
        throw InputError("DesignMismatch", fmt::format("no covariate named '{}'", name));
    }
    return it - covariate_names.begin();
}

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Level { value, score, information };

struct StratumIndex {
    std::vector<int> by_stop;  // descending stop
    std::vector<int> by_start; // descending start
    std::vector<double> event_times; // descending, unique
    std::vector<int> event_rows;     // grouped by event_times
    std::vector<std::size_t> event_offsets;
};

/// Per-stratum event-time summaries, ascending in time.
struct StratumEvents {
    std::vector<double> times;
    std::vector<double> d;      // weighted event count
    std::vector<double> dlambda; // d / S0 with risk scores exp(eta - shift)
    RowMatrix xbar;             // K x q
    double shift = 0.0;
};

struct Evaluation {
    double ll = 0.0;
    Eigen::VectorXd score;
    Eigen::MatrixXd info;
    std::vector<StratumEvents> strata;
};

class CoxProblem {
  public:
    CoxProblem(const SurvivalData &data, std::vector<Eigen::Index> cols)
        : data_{data}, cols_{std::move(cols)} {
        const auto n = static_cast<Eigen::Index>(data.size());
        const auto q = static_cast<Eigen::Index>(cols_.size());
        xc_.resize(n, q);
        center_.resize(q);
        for (Eigen::Index c = 0; c < q; ++c) {
            const auto col = data.x.col(cols_[static_cast<std::size_t>(c)]);
            center_(c) = n > 0 ? col.mean() : 0.0;
            xc_.col(c) = col.array() - center_(c);
        }
        strata_.resize(static_cast<std::size_t>(data.n_strata));
        for (std::size_t i = 0; i < data.size(); ++i) {
            auto &s = strata_[static_cast<std::size_t>(data.stratum[i])];
            s.by_stop.push_back(static_cast<int>(i));
        }
        for (auto &s : strata_) {
            s.by_start = s.by_stop;
            std::stable_sort(s.by_stop.begin(), s.by_stop.end(),
                             [&](int a, int b) { return data.stop[a] > data.stop[b]; });
            std::stable_sort(s.by_start.begin(), s.by_start.end(),
                             [&](int a, int b) { return data.start[a] > data.start[b]; });
            for (int i : s.by_stop) {
                if (!data.event[i]) {
                    continue;
                }
                if (s.event_times.empty() || data.stop[i] != s.event_times.back()) {
                    s.event_times.push_back(data.stop[i]);
                    s.event_offsets.push_back(s.event_rows.size());
                }
                s.event_rows.push_back(i);
            }
            s.event_offsets.push_back(s.event_rows.size());
        }
    }

    Eigen::Index q() const { return xc_.cols(); }
    const RowMatrix &xc() const { return xc_; }
    const Eigen::VectorXd &center() const { return center_; }
    const std::vector<Eigen::Index> &cols() const { return cols_; }

    Evaluation evaluate(const Eigen::VectorXd &beta, Level level) const {
        const auto q = this->q();
        Evaluation ev;
        ev.score = Eigen::VectorXd::Zero(q);
        if (level == Level::information) {
            ev.info = Eigen::MatrixXd::Zero(q, q);
        }
        const Eigen::VectorXd eta = xc_ * beta;
        for (const auto &s : strata_) {
            ev.strata.push_back(sweep(s, eta, level, ev));
        }
        if (level == Level::information) {
            // sum_k (d_k / S0_k) S2_k collapses to X' diag(r_i * dLambda over
            // the row's interval) X; the xbar outer products were subtracted
            // per event time during the sweep.
            Eigen::VectorXd v = Eigen::VectorXd::Zero(xc_.rows());
            for (std::size_t h = 0; h < strata_.size(); ++h) {
                const auto &st = ev.strata[h];
                if (st.times.empty()) {
                    continue;
                }
                std::vector<double> cum(st.times.size() + 1, 0.0);
                for (std::size_t k = 0; k < st.times.size(); ++k) {
                    cum[k + 1] = cum[k] + st.dlambda[k];
                }
                auto cum_at = [&](double t) {
                    const auto it = std::upper_bound(st.times.begin(), st.times.end(), t);
                    return cum[static_cast<std::size_t>(it - st.times.begin())];
                };
                for (int i : strata_[h].by_stop) {
                    const double mass = cum_at(data_.stop[i]) - cum_at(data_.start[i]);
                    if (mass > 0.0) {
                        v(i) = data_.weight[i] * std::exp(eta(i) - st.shift) * mass;
                    }
                }
            }
            ev.info.triangularView<Eigen::Lower>() += xc_.transpose() * v.asDiagonal() * xc_;
            ev.info = ev.info.selfadjointView<Eigen::Lower>();
        }
        return ev;
    }

  private:
    StratumEvents sweep(const StratumIndex &s, const Eigen::VectorXd &eta, Level level,
                        Evaluation &ev) const {
        const auto q = this->q();
        const bool want_score = level != Level::value;
        const bool want_info = level == Level::information;
        StratumEvents out;
        const std::size_t k_times = s.event_times.size();
        if (k_times == 0) {
            return out;
        }
        // Risk scores are scaled by exp(-shift) to keep them finite.
        double shift = -std::numeric_limits<double>::infinity();
        for (int i : s.by_stop) {
            shift = std::max(shift, eta(i));
        }
        out.shift = shift;
        out.times.resize(k_times);
        out.d.resize(k_times);
        out.dlambda.resize(k_times);
        if (want_score) {
            out.xbar.resize(static_cast<Eigen::Index>(k_times), q);
        }

        double s0 = 0.0;
        Eigen::VectorXd s1 = Eigen::VectorXd::Zero(q);
        Eigen::VectorXd xbar = Eigen::VectorXd::Zero(q);
        Eigen::VectorXd wx = Eigen::VectorXd::Zero(want_score ? q : 0);
        std::size_t n_active = 0;
        std::size_t ia = 0;
        std::size_t ir = 0;
        const auto &start = data_.start;
        const auto &stop = data_.stop;
        const auto &w = data_.weight;
        for (std::size_t k = 0; k < k_times; ++k) {
            const double t = s.event_times[k];
            while (ia < s.by_stop.size() && stop[s.by_stop[ia]] >= t) {
                const int i = s.by_stop[ia++];
                const double r = w[i] * std::exp(eta(i) - shift);
                s0 += r;
                if (want_score) {
                    s1 += r * xc_.row(i).transpose();
                }
                ++n_active;
            }
            while (ir < s.by_start.size() && start[s.by_start[ir]] >= t) {
                const int i = s.by_start[ir++];
                const double r = w[i] * std::exp(eta(i) - shift);
                s0 -= r;
                if (want_score) {
                    s1 -= r * xc_.row(i).transpose();
                }
                --n_active;
            }
            if (n_active == 0) {
                // Reset accumulated rounding once the risk set empties.
                s0 = 0.0;
                s1.setZero();
            }
            double d = 0.0;
            double weta = 0.0;
            wx.setZero();
            for (std::size_t e = s.event_offsets[k]; e < s.event_offsets[k + 1]; ++e) {
                const int i = s.event_rows[e];
                d += w[i];
                weta += w[i] * eta(i);
                if (want_score) {
                    wx += w[i] * xc_.row(i).transpose();
                }
            }
            ev.ll += weta - d * (shift + std::log(s0));
            const std::size_t pos = k_times - 1 - k;
            out.times[pos] = t;
            out.d[pos] = d;
            out.dlambda[pos] = d / s0;
            if (want_score) {
                xbar = s1 / s0;
                ev.score += wx - d * xbar;
                out.xbar.row(static_cast<Eigen::Index>(pos)) = xbar.transpose();
            }
            if (want_info) {
                ev.info.selfadjointView<Eigen::Lower>().rankUpdate(xbar, -d);
            }
        }
        return out;
    }

    const SurvivalData &data_;
    std::vector<Eigen::Index> cols_;
    RowMatrix xc_;
    Eigen::VectorXd center_;
    std::vector<StratumIndex> strata_;
};

std::vector<Eigen::Index> all_columns(const SurvivalData &data) {
    std::vector<Eigen::Index> cols(static_cast<std::size_t>(data.x.cols()));
    std::iota(cols.begin(), cols.end(), Eigen::Index{0});
    return cols;
}

/// Score residuals (one row per record) on the kept, centered columns.
RowMatrix score_residuals(const CoxProblem &problem, const SurvivalData &data,
                          const Eigen::VectorXd &beta, const Evaluation &ev) {
    const auto q = problem.q();
    const auto n = static_cast<Eigen::Index>(data.size());
    RowMatrix u = RowMatrix::Zero(n, q);
    const Eigen::VectorXd eta = problem.xc() * beta;
    // Cumulative sums of dLambda and xbar * dLambda per stratum, with a leading zero.
    std::vector<std::vector<double>> cum_a(ev.strata.size());
    std::vector<RowMatrix> cum_b(ev.strata.size());
    for (std::size_t s = 0; s < ev.strata.size(); ++s) {
        const auto &st = ev.strata[s];
        const auto k = static_cast<Eigen::Index>(st.times.size());
        cum_a[s].assign(static_cast<std::size_t>(k) + 1, 0.0);
        cum_b[s] = RowMatrix::Zero(k + 1, q);
        for (Eigen::Index j = 0; j < k; ++j) {
            const double dl = st.dlambda[static_cast<std::size_t>(j)];
            cum_a[s][static_cast<std::size_t>(j) + 1] = cum_a[s][static_cast<std::size_t>(j)] + dl;
            cum_b[s].row(j + 1) = cum_b[s].row(j) + dl * st.xbar.row(j);
        }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto si = static_cast<std::size_t>(data.stratum[static_cast<std::size_t>(i)]);
        const auto &st = ev.strata[si];
        if (st.times.empty()) {
            continue;
        }
        const auto hi = static_cast<Eigen::Index>(
            std::upper_bound(st.times.begin(), st.times.end(), data.stop[static_cast<std::size_t>(i)]) -
            st.times.begin());
        const auto lo = static_cast<Eigen::Index>(
            std::upper_bound(st.times.begin(), st.times.end(), data.start[static_cast<std::size_t>(i)]) -
            st.times.begin());
        const double risk = std::exp(eta(i) - st.shift);
        const double da = cum_a[si][static_cast<std::size_t>(hi)] - cum_a[si][static_cast<std::size_t>(lo)];
        u.row(i) = -risk * (da * problem.xc().row(i) - (cum_b[si].row(hi) - cum_b[si].row(lo)));
        if (data.event[static_cast<std::size_t>(i)]) {
            u.row(i) += problem.xc().row(i) - st.xbar.row(hi - 1);
        }
    }
    return u;
}

BaselineHazard baseline_from(const StratumEvents &st, double offset) {
    BaselineHazard h;
    h.times = st.times;
    h.increments.reserve(st.times.size());
    h.cumulative.reserve(st.times.size());
    double total = 0.0;
    for (std::size_t k = 0; k < st.times.size(); ++k) {
        const double inc = st.dlambda[k] * std::exp(offset - st.shift);
        total += inc;
        h.increments.push_back(inc);
        h.cumulative.push_back(total);
    }
    return h;
}

} // namespace

CoxFit fit_cox(const SurvivalData &data, const CoxOptions &options) {
    data.validate();
    CoxFit fit;
    fit.covariate_names = data.covariate_names;
    fit.n_records = data.size();
    fit.n_clusters = data.n_clusters;
    fit.n_events = static_cast<std::size_t>(std::count(data.event.begin(), data.event.end(), 1));
    if (fit.n_events == 0) {
        throw NumericalError("NoEvents", "the Cox model has no events");
    }
    const auto p = data.x.cols();

    // Columns without information are fixed at zero.
    fit.aliased = find_aliased_columns(data.x, true);
    std::vector<Eigen::Index> kept;
    for (Eigen::Index j = 0; j < p; ++j) {
        if (!fit.aliased[static_cast<std::size_t>(j)]) {
            kept.push_back(j);
        }
    }
    {
        const CoxProblem probe(data, kept);
        const auto ev0 = probe.evaluate(Eigen::VectorXd::Zero(probe.q()), Level::information);
        const double scale = ev0.info.size() > 0 ? ev0.info.diagonal().cwiseAbs().maxCoeff() : 0.0;
        std::vector<Eigen::Index> informative;
        for (Eigen::Index c = 0; c < probe.q(); ++c) {
            if (ev0.info(c, c) > 1e-12 * std::max(1.0, scale)) {
                informative.push_back(kept[static_cast<std::size_t>(c)]);
            } else {
                fit.aliased[static_cast<std::size_t>(kept[static_cast<std::size_t>(c)])] = true;
            }
        }
        kept = std::move(informative);
    }
    for (Eigen::Index j = 0; j < p; ++j) {
        if (fit.aliased[static_cast<std::size_t>(j)]) {
            fit.warnings.push_back(
                fmt::format("covariate '{}' carries no information; coefficient fixed at 0",
                            data.covariate_names[static_cast<std::size_t>(j)]));
        }
    }

    fit.divergent.assign(static_cast<std::size_t>(p), false);
    std::optional<CoxProblem> current;
    Eigen::VectorXd beta;
    Evaluation ev;
    bool first_pass = true;
    while (true) {
        current.emplace(data, kept);
        const CoxProblem &problem = *current;
        beta = Eigen::VectorXd::Zero(problem.q());
        ev = problem.evaluate(beta, Level::information);
        if (first_pass) {
            fit.log_partial_likelihood_null = ev.ll;
            first_pass = false;
        }
        fit.converged = false;
        fit.n_iterations = 0;
        bool diverged = false;
        for (int iter = 0; iter < options.max_iterations && problem.q() > 0; ++iter) {
            Eigen::LDLT<Eigen::MatrixXd> ldlt(ev.info);
            if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
                if (beta.cwiseAbs().maxCoeff() > 0.5 * options.monotone_bound) {
                    diverged = true;
                    break;
                }
                throw NumericalError("SingularInformation",
                                     "Cox information matrix is not positive definite");
            }
            const Eigen::VectorXd step = ldlt.solve(ev.score);
            const double max_step = step.cwiseAbs().maxCoeff();
            // The Newton decrement test covers large weighted samples where the
            // absolute gradient cannot reach the tolerance in floating point.
            const bool small_gradient =
                ev.score.norm() <= options.gradient_tolerance ||
                ev.score.dot(step) <= 1e-14 * std::max(1.0, std::abs(ev.ll));
            if (small_gradient && max_step <= 1e-3) {
                // One last full step: near the optimum it is quadratically better.
                if (ev.score.norm() > options.gradient_tolerance) {
                    const Eigen::VectorXd polished = beta + step;
                    if (problem.evaluate(polished, Level::value).ll >= ev.ll) {
                        beta = polished;
                        ev = problem.evaluate(beta, Level::information);
                    }
                }
                fit.converged = true;
                break;
            }
            double factor = 1.0;
            Eigen::VectorXd candidate = beta + step;
            double candidate_ll = problem.evaluate(candidate, Level::value).ll;
            int halvings = 0;
            while (!(candidate_ll >= ev.ll - 1e-12 * std::abs(ev.ll)) && halvings < 40) {
                factor *= 0.5;
                candidate = beta + factor * step;
                candidate_ll = problem.evaluate(candidate, Level::value).ll;
                ++halvings;
            }
            if (!(candidate_ll >= ev.ll - 1e-12 * std::abs(ev.ll))) {
                break;
            }
            beta = candidate;
            ev = problem.evaluate(beta, Level::information);
            fit.n_iterations = iter + 1;
            if (beta.cwiseAbs().maxCoeff() > options.monotone_bound) {
                diverged = true;
                break;
            }
        }
        if (!diverged) {
            break;
        }
        if (!options.drop_divergent_columns) {
            throw NumericalError(
                "MonotoneLikelihood",
                fmt::format("a coefficient exceeded {} after {} iterations; the partial "
                            "likelihood keeps increasing",
                            options.monotone_bound, fit.n_iterations));
        }
        std::vector<Eigen::Index> still_kept;
        for (Eigen::Index c = 0; c < problem.q(); ++c) {
            const auto j = kept[static_cast<std::size_t>(c)];
            if (std::abs(beta(c)) > 0.5 * options.monotone_bound) {
                fit.aliased[static_cast<std::size_t>(j)] = true;
                fit.divergent[static_cast<std::size_t>(j)] = true;
                fit.warnings.push_back(fmt::format(
                    "covariate '{}' has a monotone likelihood; dropped from the model",
                    data.covariate_names[static_cast<std::size_t>(j)]));
            } else {
                still_kept.push_back(j);
            }
        }
        kept = std::move(still_kept);
    }
    const CoxProblem &problem = *current;
    const auto q = problem.q();
    if (q == 0) {
        fit.converged = true;
    }
    fit.log_partial_likelihood = ev.ll;
    fit.gradient_norm = ev.score.norm();
    if (!fit.converged) {
        fit.warnings.push_back(fmt::format("did not converge in {} iterations (gradient norm {:.3g})",
                                           options.max_iterations, fit.gradient_norm));
    }

    fit.beta = Eigen::VectorXd::Zero(p);
    fit.naive_covariance = Eigen::MatrixXd::Zero(p, p);
    fit.robust_covariance = Eigen::MatrixXd::Zero(p, p);
    if (q > 0) {
        const Eigen::MatrixXd inverse = ev.info.ldlt().solve(Eigen::MatrixXd::Identity(q, q));
        const RowMatrix u = score_residuals(problem, data, beta, ev);
        Eigen::MatrixXd cluster_scores = Eigen::MatrixXd::Zero(data.n_clusters, q);
        for (std::size_t i = 0; i < data.size(); ++i) {
            cluster_scores.row(data.cluster[i]) +=
                data.weight[i] * u.row(static_cast<Eigen::Index>(i));
        }
        Eigen::MatrixXd meat = cluster_scores.transpose() * cluster_scores;
        if (options.small_sample_correction && data.n_clusters > 1) {
            meat *= static_cast<double>(data.n_clusters) / (data.n_clusters - 1);
        }
        const Eigen::MatrixXd robust = inverse * meat * inverse;
        for (Eigen::Index a = 0; a < q; ++a) {
            const auto ja = kept[static_cast<std::size_t>(a)];
            fit.beta(ja) = beta(a);
            for (Eigen::Index b = 0; b < q; ++b) {
                const auto jb = kept[static_cast<std::size_t>(b)];
                fit.naive_covariance(ja, jb) = inverse(a, b);
                fit.robust_covariance(ja, jb) = robust(a, b);
            }
        }
    }
    const double offset = -beta.dot(problem.center());
    for (const auto &st : ev.strata) {
        fit.baseline_hazard.push_back(baseline_from(st, offset));
    }
    return fit;
}

CoxFit fit_cox(std::span<const SurvivalRecord> records, const CoxOptions &options) {
    return fit_cox(SurvivalData::from_records(records), options);
}

double cox_log_partial_likelihood(const SurvivalData &data, const Eigen::VectorXd &beta) {
    const CoxProblem problem(data, all_columns(data));
    return problem.evaluate(beta, Level::value).ll;
}

Eigen::VectorXd cox_score(const SurvivalData &data, const Eigen::VectorXd &beta) {
    const CoxProblem problem(data, all_columns(data));
    return problem.evaluate(beta, Level::score).score;
}

Eigen::MatrixXd cox_information(const SurvivalData &data, const Eigen::VectorXd &beta) {
    const CoxProblem problem(data, all_columns(data));
    return problem.evaluate(beta, Level::information).info;
}

BaselineHazard baseline_cumhaz(const CoxFit &fit, const SurvivalData &data, int stratum) {
    if (stratum < 0 || stratum >= data.n_strata) {
        throw InputError("InvalidRecord", fmt::format("no stratum {}", stratum));
    }
    if (fit.beta.size() != data.x.cols()) {
        throw InputError("DesignMismatch", "fit and data have different covariates");
    }
    const CoxProblem problem(data, all_columns(data));
    const auto ev = problem.evaluate(fit.beta, Level::score);
    return baseline_from(ev.strata[static_cast<std::size_t>(stratum)],
                         -fit.beta.dot(problem.center()));
}

double survival_given_path(const CoxFit &fit, std::span<const PathSegment> path, int stratum) {
    if (stratum < 0 || static_cast<std::size_t>(stratum) >= fit.baseline_hazard.size()) {
        throw InputError("InvalidRecord", fmt::format("no stratum {}", stratum));
    }
    const auto &h = fit.baseline_hazard[static_cast<std::size_t>(stratum)];
    double cumulative = 0.0;
    for (std::size_t k = 0; k < path.size(); ++k) {
        const auto &seg = path[k];
        if (!(seg.t_begin < seg.t_end)) {
            throw InputError("PathGap", fmt::format("segment {} ({}, {}] is empty", k + 1,
                                                    seg.t_begin, seg.t_end));
        }
        if (k > 0 && seg.t_begin != path[k - 1].t_end) {
            throw InputError("PathGap", fmt::format("segment {} starts at {} but the previous ends at {}",
                                                    k + 1, seg.t_begin, path[k - 1].t_end));
        }
        if (static_cast<Eigen::Index>(seg.covariates.size()) != fit.beta.size()) {
            throw InputError("DesignMismatch",
                             fmt::format("segment {} has {} covariates, the fit has {}", k + 1,
                                         seg.covariates.size(), fit.beta.size()));
        }
        double lp = 0.0;
        for (std::size_t j = 0; j < seg.covariates.size(); ++j) {
            lp += fit.beta(static_cast<Eigen::Index>(j)) * seg.covariates[j];
        }
        cumulative += (h.at(seg.t_end) - h.at(seg.t_begin)) * std::exp(lp);
    }
    return std::exp(-cumulative);
}

Eigen::VectorXd robust_se(const CoxFit &fit) { return fit.robust_se(); }

HazardRatio wald_interval(double beta, double se, double z) {
    return {std::exp(beta), std::exp(beta - z * se), std::exp(beta + z * se)};
}

} // namespace txmsm
