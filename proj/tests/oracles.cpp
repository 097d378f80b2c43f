#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace oracle {

double cox_loglik(const txmsm::SurvivalData &d, const Eigen::VectorXd &beta) {
    const auto n = static_cast<Eigen::Index>(d.size());
    double ll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!d.event[static_cast<std::size_t>(i)]) {
            continue;
        }
        const double t = d.stop[static_cast<std::size_t>(i)];
        const int stratum = d.stratum[static_cast<std::size_t>(i)];
        double risk = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) {
            const auto kk = static_cast<std::size_t>(k);
            if (d.stratum[kk] == stratum && d.start[kk] < t && t <= d.stop[kk]) {
                risk += d.weight[kk] * std::exp(d.x.row(k).dot(beta));
            }
        }
        ll += d.weight[static_cast<std::size_t>(i)] * (d.x.row(i).dot(beta) - std::log(risk));
    }
    return ll;
}

double grid_argmax(const std::function<double(double)> &f, double lo, double hi, double step) {
    const auto steps = static_cast<long>(std::llround((hi - lo) / step));
    double best_x = lo;
    double best = f(lo);
    for (long k = 1; k <= steps; ++k) {
        const double x = lo + static_cast<double>(k) * step;
        const double v = f(x);
        if (v > best) {
            best = v;
            best_x = x;
        }
    }
    return best_x;
}

Eigen::VectorXd numeric_gradient(const std::function<double(const Eigen::VectorXd &)> &f,
                                 const Eigen::VectorXd &x, double h) {
    Eigen::VectorXd g(x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        Eigen::VectorXd up = x;
        Eigen::VectorXd down = x;
        up(j) += h;
        down(j) -= h;
        g(j) = (f(up) - f(down)) / (2.0 * h);
    }
    return g;
}

Eigen::VectorXd binomial_irls(const Eigen::MatrixXd &x, const std::vector<int> &y) {
    Eigen::VectorXd b = Eigen::VectorXd::Zero(x.cols());
    for (int it = 0; it < 100; ++it) {
        const Eigen::VectorXd eta = x * b;
        Eigen::VectorXd mu(eta.size());
        Eigen::VectorXd w(eta.size());
        Eigen::VectorXd z(eta.size());
        for (Eigen::Index i = 0; i < eta.size(); ++i) {
            mu(i) = 1.0 / (1.0 + std::exp(-eta(i)));
            w(i) = mu(i) * (1.0 - mu(i));
            z(i) = eta(i) + (y[static_cast<std::size_t>(i)] - mu(i)) / w(i);
        }
        // Weighted least squares by QR: avoids squaring the condition number.
        const Eigen::VectorXd root = w.cwiseSqrt();
        const Eigen::MatrixXd xw = root.asDiagonal() * x;
        const Eigen::VectorXd next = xw.colPivHouseholderQr().solve(root.cwiseProduct(z));
        const double change = (next - b).cwiseAbs().maxCoeff();
        b = next;
        if (change < 1e-13) {
            break;
        }
    }
    return b;
}

Eigen::VectorXd sandwich_se(const txmsm::SurvivalData &d, const Eigen::VectorXd &beta) {
    const auto n = d.size();
    const auto p = d.x.cols();
    Eigen::MatrixXd u = Eigen::MatrixXd::Zero(d.n_clusters, p);
    Eigen::MatrixXd info = Eigen::MatrixXd::Zero(p, p);
    for (std::size_t k = 0; k < n; ++k) {
        if (!d.event[k]) {
            continue;
        }
        const double t = d.stop[k];
        double s0 = 0.0;
        Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
        Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(p, p);
        for (std::size_t i = 0; i < n; ++i) {
            if (d.stratum[i] == d.stratum[k] && d.start[i] < t && t <= d.stop[i]) {
                const Eigen::VectorXd xi = d.x.row(static_cast<Eigen::Index>(i)).transpose();
                const double r = d.weight[i] * std::exp(xi.dot(beta));
                s0 += r;
                s1 += r * xi;
                s2 += r * xi * xi.transpose();
            }
        }
        const Eigen::VectorXd xbar = s1 / s0;
        info += d.weight[k] * (s2 / s0 - xbar * xbar.transpose());
        u.row(d.cluster[k]) +=
            d.weight[k] * (d.x.row(static_cast<Eigen::Index>(k)) - xbar.transpose());
        for (std::size_t i = 0; i < n; ++i) {
            if (d.stratum[i] == d.stratum[k] && d.start[i] < t && t <= d.stop[i]) {
                const auto ii = static_cast<Eigen::Index>(i);
                const double r = d.weight[i] * std::exp(d.x.row(ii).dot(beta));
                u.row(d.cluster[i]) -= d.weight[k] * r / s0 * (d.x.row(ii) - xbar.transpose());
            }
        }
    }
    const Eigen::MatrixXd bread = info.inverse();
    return (bread * u.transpose() * u * bread).diagonal().cwiseSqrt();
}

namespace {

txmsm::SurvivalData without_cluster(const txmsm::SurvivalData &d, int cluster) {
    txmsm::SurvivalData out;
    std::vector<Eigen::Index> keep;
    std::map<int, int> ids;
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (d.cluster[i] == cluster) {
            continue;
        }
        keep.push_back(static_cast<Eigen::Index>(i));
        out.start.push_back(d.start[i]);
        out.stop.push_back(d.stop[i]);
        out.event.push_back(d.event[i]);
        out.weight.push_back(d.weight[i]);
        out.stratum.push_back(d.stratum[i]);
        out.cluster.push_back(ids.emplace(d.cluster[i], static_cast<int>(ids.size())).first->second);
    }
    out.x.resize(static_cast<Eigen::Index>(keep.size()), d.x.cols());
    for (std::size_t k = 0; k < keep.size(); ++k) {
        out.x.row(static_cast<Eigen::Index>(k)) = d.x.row(keep[k]);
    }
    out.covariate_names = d.covariate_names;
    out.n_clusters = static_cast<int>(ids.size());
    out.n_strata = d.n_strata;
    return out;
}

} // namespace

double jackknife_se(const txmsm::SurvivalData &d, Eigen::Index j) {
    std::vector<double> est;
    for (int g = 0; g < d.n_clusters; ++g) {
        est.push_back(txmsm::fit_cox(without_cluster(d, g)).beta(j));
    }
    double mean = 0.0;
    for (double b : est) {
        mean += b;
    }
    mean /= static_cast<double>(est.size());
    double ss = 0.0;
    for (double b : est) {
        ss += (b - mean) * (b - mean);
    }
    const double g = static_cast<double>(est.size());
    return std::sqrt((g - 1.0) / g * ss);
}

txmsm::SurvivalData random_survival(std::mt19937_64 &rng, int n, int p, bool weighted) {
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::uniform_int_distribution<int> entry(0, 3);
    std::vector<txmsm::SurvivalRecord> records;
    for (int i = 0; i < n; ++i) {
        txmsm::SurvivalRecord r;
        r.pin = "S" + std::to_string(i);
        for (int j = 0; j < p; ++j) {
            r.covariates.push_back(j == 1 ? (unif(rng) < 0.5 ? 1.0 : 0.0) : normal(rng));
        }
        const double rate = std::exp(0.5 * r.covariates[0]);
        r.t_begin = entry(rng);
        r.t_end = r.t_begin + std::ceil(-std::log(unif(rng)) / rate * 4.0);
        r.event = unif(rng) < 0.7;
        r.weight = weighted ? 0.5 + 1.5 * unif(rng) : 1.0;
        records.push_back(std::move(r));
    }
    return txmsm::SurvivalData::from_records(records);
}

txmsm::RawFollowup random_followup(std::mt19937_64 &rng, const std::string &pin) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    txmsm::RawFollowup raw;
    raw.pin = pin;
    raw.arm = txmsm::all_arms[std::uniform_int_distribution<int>(0, 2)(rng)];
    raw.transfusion_year_first = std::uniform_int_distribution<int>(2005, 2015)(rng);
    raw.patient_abo_rh = unif(rng) < 0.5 ? "O+" : "A+";
    raw.hospital = unif(rng) < 0.5 ? "H1" : "H2";
    // Mix of short and long follow-up so both the daily and block segments are hit.
    raw.exit_day = unif(rng) < 0.4 ? std::uniform_int_distribution<int>(1, 40)(rng)
                                   : std::uniform_int_distribution<int>(1, 2000)(rng);
    raw.death_at_exit = unif(rng) < 0.5;
    if (unif(rng) < 0.4) {
        raw.switch_day = std::uniform_int_distribution<int>(1, raw.exit_day)(rng);
    }
    const int n_more = std::uniform_int_distribution<int>(0, 12)(rng);
    for (int k = 0; k < n_more; ++k) {
        raw.transfusion_days.push_back(std::uniform_int_distribution<int>(0, raw.exit_day + 30)(rng));
    }
    std::sort(raw.transfusion_days.begin(), raw.transfusion_days.end());
    return raw;
}

txmsm::Cohort cohort_from(const std::vector<txmsm::RawFollowup> &raws) {
    std::vector<txmsm::IntervalRow> rows;
    for (const auto &raw : raws) {
        auto r = txmsm::expand_followup(raw);
        rows.insert(rows.end(), r.begin(), r.end());
    }
    return txmsm::validate_cohort(std::move(rows));
}

} // namespace oracle
