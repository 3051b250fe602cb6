#include "disparity/effect.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "disparity/rng.hpp"

namespace disparity::effect {

namespace {

std::vector<int> resolve_columns(const data::Dataset& d, const std::vector<std::string>& names) {
    std::vector<int> out;
    for (const auto& n : names) out.push_back(d.column_index(n));
    return out;
}

double column_mean(const data::Dataset& d, int c, const std::vector<std::size_t>& rows) {
    double s = 0.0;
    for (auto r : rows) s += d.col(c)[r];
    return s / static_cast<double>(rows.size());
}

double silverman_bandwidth(const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / std::max(1.0, n - 1.0));
    const double h = 1.06 * sd * std::pow(n, -0.2);
    return h > 1e-12 ? h : 1e-12;
}

/// Chain-factorized kernel density over the rows of one exposure group:
/// continuous factors are Gaussian KDEs with Silverman bandwidths, discrete
/// factors are prefix-weighted frequency tables smoothed by adding 0.5.
struct ChainDensity {
    std::vector<std::vector<double>> cols;  // column-major training values
    std::vector<bool> discrete;
    std::vector<double> bandwidth;          // continuous columns only
    std::vector<std::vector<double>> levels;  // discrete columns only

    ChainDensity(const data::Dataset& d, const std::vector<int>& cidx,
                 const std::vector<std::size_t>& rows) {
        for (int c : cidx) {
            std::vector<double> v;
            v.reserve(rows.size());
            for (auto r : rows) v.push_back(d.col(c)[r]);
            const bool disc = d.kind(c) != data::ColumnKind::Continuous;
            discrete.push_back(disc);
            bandwidth.push_back(disc ? 0.0 : silverman_bandwidth(v));
            std::vector<double> lv = v;
            std::sort(lv.begin(), lv.end());
            lv.erase(std::unique(lv.begin(), lv.end()), lv.end());
            levels.push_back(disc ? lv : std::vector<double>{});
            cols.push_back(std::move(v));
        }
    }

    std::size_t n() const { return cols.empty() ? 0 : cols[0].size(); }
    std::size_t dims() const { return cols.size(); }

    // weight of training row i against the prefix x_0..x_{j-1}
    double prefix_weight(std::size_t i, const std::vector<double>& x, std::size_t j) const {
        double w = 1.0;
        for (std::size_t l = 0; l < j; ++l) {
            if (discrete[l]) {
                w *= (cols[l][i] == x[l]) ? 1.0 : 0.05;
            } else {
                const double u = (x[l] - cols[l][i]) / bandwidth[l];
                w *= std::exp(-0.5 * u * u);
            }
        }
        return w;
    }

    // conditional density of coordinate j at x[j] given the prefix
    double factor(const std::vector<double>& x, std::size_t j) const {
        const std::size_t m = n();
        double wsum = 0.0;
        if (discrete[j]) {
            double hit = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                const double w = prefix_weight(i, x, j);
                wsum += w;
                if (cols[j][i] == x[j]) hit += w;
            }
            const double nl = static_cast<double>(levels[j].size());
            return (hit + 0.5) / (wsum + 0.5 * nl);
        }
        const double h = bandwidth[j];
        double acc = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double w = prefix_weight(i, x, j);
            wsum += w;
            const double u = (x[j] - cols[j][i]) / h;
            acc += w * std::exp(-0.5 * u * u);
        }
        if (wsum <= 0.0) return 1e-300;
        return acc / (wsum * h * std::sqrt(2.0 * 3.141592653589793));
    }

    double density(const std::vector<double>& x) const {
        double p = 1.0;
        for (std::size_t j = 0; j < dims(); ++j) p *= factor(x, j);
        return p;
    }

    // sequential ancestral draw from the chain factorization
    std::vector<double> draw(std::mt19937_64& rng) const {
        const std::size_t m = n();
        std::vector<double> x(dims(), 0.0);
        std::vector<double> w(m, 1.0);
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (std::size_t j = 0; j < dims(); ++j) {
            if (discrete[j]) {
                // smoothed frequency table over the observed levels
                std::vector<double> mass(levels[j].size(), 0.5);
                for (std::size_t i = 0; i < m; ++i) {
                    auto it = std::lower_bound(levels[j].begin(), levels[j].end(), cols[j][i]);
                    mass[static_cast<std::size_t>(it - levels[j].begin())] += w[i];
                }
                std::discrete_distribution<std::size_t> pick(mass.begin(), mass.end());
                x[j] = levels[j][pick(rng)];
            } else {
                std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
                x[j] = cols[j][pick(rng)] + bandwidth[j] * gauss(rng);
            }
            for (std::size_t i = 0; i < m; ++i) {
                if (discrete[j]) {
                    w[i] *= (cols[j][i] == x[j]) ? 1.0 : 0.05;
                } else {
                    const double u = (x[j] - cols[j][i]) / bandwidth[j];
                    w[i] *= std::exp(-0.5 * u * u);
                }
            }
        }
        return x;
    }
};

/// Random-walk Metropolis on a chain density, used when the adjustment set is
/// too wide for ancestral sampling to stay cheap.
std::vector<std::vector<double>> mcmc_draws(const ChainDensity& cd, int n_draws, int steps,
                                            int burnin, std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> row(0, cd.n() - 1);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> cur(cd.dims());
    const std::size_t start = row(rng);
    for (std::size_t j = 0; j < cd.dims(); ++j) cur[j] = cd.cols[j][start];
    double cur_p = cd.density(cur);
    std::vector<std::vector<double>> out;
    out.reserve(static_cast<std::size_t>(n_draws));
    const int total = burnin + std::max(steps, n_draws);
    for (int t = 0; t < total; ++t) {
        std::vector<double> prop = cur;
        for (std::size_t j = 0; j < cd.dims(); ++j) {
            if (cd.discrete[j]) {
                if (unif(rng) < 0.3) {
                    std::uniform_int_distribution<std::size_t> lv(0, cd.levels[j].size() - 1);
                    prop[j] = cd.levels[j][lv(rng)];
                }
            } else {
                prop[j] += cd.bandwidth[j] * gauss(rng);
            }
        }
        const double prop_p = cd.density(prop);
        if (prop_p > 0.0 && unif(rng) < prop_p / std::max(cur_p, 1e-300)) {
            cur = std::move(prop);
            cur_p = prop_p;
        }
        if (t >= burnin && static_cast<int>(out.size()) < n_draws) out.push_back(cur);
    }
    while (static_cast<int>(out.size()) < n_draws) out.push_back(cur);
    return out;
}

}  // namespace

double OutcomeModel::predict(const std::vector<double>& x) const {
    const std::size_t p = m_cols.size() + b_cols.size();
    if (x.size() != p) throw estimation_error("feature vector has the wrong width");
    if (kind == ModelKind::Linear) {
        double y = coef[0];
        for (std::size_t j = 0; j < p; ++j) y += coef[j + 1] * x[j];
        return y;
    }
    // k nearest neighbors by Euclidean distance
    std::vector<std::pair<double, double>> dist;
    dist.reserve(train_x.size());
    for (std::size_t i = 0; i < train_x.size(); ++i) {
        double dd = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            const double u = train_x[i][j] - x[j];
            dd += u * u;
        }
        dist.emplace_back(dd, train_y[i]);
    }
    const std::size_t kk = std::min<std::size_t>(static_cast<std::size_t>(k), dist.size());
    std::partial_sort(dist.begin(), dist.begin() + static_cast<long>(kk), dist.end());
    double s = 0.0;
    for (std::size_t i = 0; i < kk; ++i) s += dist[i].second;
    return s / static_cast<double>(kk);
}

OutcomeModel fit_outcome_model(const data::Dataset& d, const std::vector<std::string>& m_cols,
                               const std::vector<std::string>& b_cols, ModelKind kind, int k) {
    OutcomeModel model;
    model.m_cols = m_cols;
    model.b_cols = b_cols;
    model.kind = kind;
    model.k = k;
    auto feats = resolve_columns(d, m_cols);
    for (int c : resolve_columns(d, b_cols)) feats.push_back(c);
    const auto rows = d.group_rows(0);
    if (rows.size() < 30) {
        throw estimation_error("outcome model needs at least 30 rows with exposure 0, got " +
                               std::to_string(rows.size()));
    }
    model.n_train = rows.size();
    const int yc = d.outcome();
    const std::size_t n = rows.size();
    const std::size_t p = feats.size();

    if (kind == ModelKind::Knn) {
        model.train_x.reserve(n);
        model.train_y.reserve(n);
        for (auto r : rows) {
            std::vector<double> x(p);
            for (std::size_t j = 0; j < p; ++j) x[j] = d.col(feats[j])[r];
            model.train_x.push_back(std::move(x));
            model.train_y.push_back(d.col(yc)[r]);
        }
    }

    Eigen::MatrixXd X(n, p + 1);
    Eigen::VectorXd y(n);
    for (std::size_t i = 0; i < n; ++i) {
        X(static_cast<long>(i), 0) = 1.0;
        for (std::size_t j = 0; j < p; ++j) {
            X(static_cast<long>(i), static_cast<long>(j + 1)) = d.col(feats[j])[rows[i]];
        }
        y(static_cast<long>(i)) = d.col(yc)[rows[i]];
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(1e-8);
    if (kind == ModelKind::Linear && qr.rank() < static_cast<long>(p + 1)) {
        std::string cols = "rank-deficient design; dependent columns:";
        const auto perm = qr.colsPermutation().indices();
        for (long i = qr.rank(); i < perm.size(); ++i) {
            const long orig = perm(i);
            cols += " ";
            cols += (orig == 0) ? "(intercept)"
                                : d.name(feats[static_cast<std::size_t>(orig - 1)]);
        }
        throw estimation_error(cols);
    }
    const Eigen::VectorXd beta = qr.solve(y);
    model.coef.assign(beta.data(), beta.data() + beta.size());

    const Eigen::VectorXd fitted =
        (kind == ModelKind::Linear) ? Eigen::VectorXd(X * beta) : [&] {
            Eigen::VectorXd f(n);
            for (std::size_t i = 0; i < n; ++i) {
                std::vector<double> x(p);
                for (std::size_t j = 0; j < p; ++j) x[j] = d.col(feats[j])[rows[i]];
                f(static_cast<long>(i)) = model.predict(x);
            }
            return f;
        }();
    const double ybar = y.mean();
    const double ss_tot = (y.array() - ybar).square().sum();
    const double ss_res = (y - fitted).squaredNorm();
    model.r_squared = ss_tot < 1e-12 ? 1.0 : 1.0 - ss_res / ss_tot;
    return model;
}

EffectEstimate estimate_adjusted(const data::Dataset& d, const OutcomeModel& model,
                                 const std::vector<std::string>& m_cols,
                                 const std::vector<std::string>& b_cols, EstimatorConfig cfg,
                                 std::uint64_t seed) {
    EffectEstimate est;
    est.mediators = m_cols;
    est.adjust = b_cols;
    est.estimator = cfg;
    const auto g0 = d.group_rows(0);
    const auto g1 = d.group_rows(1);
    if (g0.empty() || g1.empty()) throw estimation_error("both exposure groups must be nonempty");
    est.n0 = g0.size();
    est.n1 = g1.size();
    const int yc = d.outcome();
    const double mean_y0 = column_mean(d, yc, g0);
    const double mean_y1 = column_mean(d, yc, g1);
    est.total_hat = mean_y1 - mean_y0;

    const auto midx = resolve_columns(d, m_cols);
    const auto bidx = resolve_columns(d, b_cols);
    const std::size_t pm = midx.size();
    const std::size_t pb = bidx.size();

    double adjusted_mean = 0.0;
    if (cfg.mode == EstimatorMode::EmpiricalProduct) {
        if (model.kind == ModelKind::Linear) {
            // the double sum over the product measure separates exactly
            adjusted_mean = model.coef[0];
            for (std::size_t j = 0; j < pm; ++j) {
                adjusted_mean += model.coef[j + 1] * column_mean(d, midx[j], g1);
            }
            for (std::size_t j = 0; j < pb; ++j) {
                adjusted_mean += model.coef[pm + j + 1] * column_mean(d, bidx[j], g0);
            }
        } else {
            // cap the double loop by deterministic thinning of each group
            auto thin = [](std::vector<std::size_t> rows, std::size_t cap) {
                if (rows.size() <= cap) return rows;
                std::vector<std::size_t> out;
                out.reserve(cap);
                for (std::size_t i = 0; i < cap; ++i) {
                    out.push_back(rows[i * rows.size() / cap]);
                }
                return out;
            };
            const auto r0 = thin(g0, 2000);
            const auto r1 = thin(g1, 2000);
            std::vector<double> x(pm + pb);
            double s = 0.0;
            for (auto j : r1) {
                for (std::size_t q = 0; q < pm; ++q) x[q] = d.col(midx[q])[j];
                for (auto i : r0) {
                    for (std::size_t q = 0; q < pb; ++q) x[pm + q] = d.col(bidx[q])[i];
                    s += model.predict(x);
                }
            }
            adjusted_mean = s / (static_cast<double>(r0.size()) * static_cast<double>(r1.size()));
        }
    } else {
        ChainDensity dens_m(d, midx, g1);
        ChainDensity dens_b(d, bidx, g0);
        auto rng = make_rng(seed, "kde");
        std::vector<std::vector<double>> bdraws;
        if (pb > static_cast<std::size_t>(cfg.kde_mcmc_threshold)) {
            bdraws = mcmc_draws(dens_b, cfg.mc_draws, cfg.mcmc_steps, cfg.mcmc_burnin, rng);
        } else {
            bdraws.reserve(static_cast<std::size_t>(cfg.mc_draws));
            for (int t = 0; t < cfg.mc_draws; ++t) bdraws.push_back(dens_b.draw(rng));
        }
        std::vector<double> x(pm + pb);
        double s = 0.0, s2 = 0.0;
        for (int t = 0; t < cfg.mc_draws; ++t) {
            const auto m = dens_m.draw(rng);
            for (std::size_t q = 0; q < pm; ++q) x[q] = m[q];
            for (std::size_t q = 0; q < pb; ++q) x[pm + q] = bdraws[static_cast<std::size_t>(t)][q];
            const double v = model.predict(x);
            s += v;
            s2 += v * v;
        }
        const double nd = static_cast<double>(cfg.mc_draws);
        adjusted_mean = s / nd;
        est.mc_se = std::sqrt(std::max(0.0, s2 / nd - adjusted_mean * adjusted_mean) / nd);
    }

    est.delta_hat = adjusted_mean - mean_y0;
    est.zeta_hat = est.total_hat - est.delta_hat;  // identity by construction
    return est;
}

std::pair<double, double> bootstrap_ci(const data::Dataset& d,
                                       const std::function<double(const data::Dataset&)>& pipeline,
                                       int reps, double level, std::uint64_t seed) {
    if (reps < 100) throw estimation_error("bootstrap needs at least 100 replicates");
    if (level <= 0.0 || level >= 1.0) throw estimation_error("level must be in (0, 1)");
    auto rng = make_rng(seed, "bootstrap");
    const std::size_t n = d.rows();
    std::uniform_int_distribution<std::size_t> row(0, n - 1);
    const auto& expo = d.col(d.exposure());
    std::vector<double> stats;
    stats.reserve(static_cast<std::size_t>(reps));
    long attempts = 0;
    const long cap = 10L * reps;
    while (static_cast<int>(stats.size()) < reps) {
        if (++attempts > cap) {
            throw estimation_error("bootstrap kept drawing degenerate resamples");
        }
        std::vector<std::size_t> idx(n);
        bool seen0 = false, seen1 = false;
        for (auto& i : idx) {
            i = row(rng);
            (expo[i] == 0.0 ? seen0 : seen1) = true;
        }
        if (!seen0 || !seen1) continue;
        stats.push_back(pipeline(d.select_rows(idx)));
    }
    std::sort(stats.begin(), stats.end());
    auto quantile = [&](double q) {
        const double pos = q * static_cast<double>(stats.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(pos);
        const std::size_t hi = std::min(lo + 1, stats.size() - 1);
        const double frac = pos - static_cast<double>(lo);
        return stats[lo] * (1.0 - frac) + stats[hi] * frac;
    };
    const double tail = (1.0 - level) / 2.0;
    return {quantile(tail), quantile(1.0 - tail)};
}

}  // namespace disparity::effect
