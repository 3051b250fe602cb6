#include "disparity/ci.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "disparity/rng.hpp"

namespace disparity::ci {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_quantile(double p) {
    // Acklam's rational approximation, refined by one Newton step.
    if (p <= 0.0 || p >= 1.0) throw std::invalid_argument("quantile requires p in (0,1)");
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double dd[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    double x;
    if (p < plow) {
        const double q = std::sqrt(-2 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((dd[0] * q + dd[1]) * q + dd[2]) * q + dd[3]) * q + 1);
    } else if (p <= 1 - plow) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
    } else {
        const double q = std::sqrt(-2 * std::log(1 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((dd[0] * q + dd[1]) * q + dd[2]) * q + dd[3]) * q + 1);
    }
    const double e = normal_cdf(x) - p;
    const double u = e * std::sqrt(2 * M_PI) * std::exp(x * x / 2);
    return x - u / (1 + x * u / 2);
}

CiDecision fisher_z(const data::Dataset& d, int i, int j, const std::vector<int>& z, double alpha) {
    const auto n = static_cast<long>(d.rows());
    const long k = static_cast<long>(z.size());
    if (n <= k + 3) {
        throw sample_size_error("fisher_z needs n > |z| + 3 (n=" + std::to_string(n) +
                                ", |z|=" + std::to_string(k) + ")");
    }
    std::vector<int> cols{i, j};
    cols.insert(cols.end(), z.begin(), z.end());
    const long p = static_cast<long>(cols.size());

    Eigen::MatrixXd x(n, p);
    for (long c = 0; c < p; ++c) {
        const auto& v = d.col(cols[static_cast<std::size_t>(c)]);
        const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(n);
        for (long r = 0; r < n; ++r) x(r, c) = v[static_cast<std::size_t>(r)] - mean;
    }
    Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n - 1);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(cov);
    if (!lu.isInvertible()) {
        std::ostringstream os;
        os << "degenerate data: singular covariance over columns";
        for (int c : cols) os << ' ' << d.name(c);
        throw degenerate_data_error(os.str());
    }
    Eigen::MatrixXd prec = lu.inverse();
    double rho = -prec(0, 1) / std::sqrt(prec(0, 0) * prec(1, 1));
    rho = std::clamp(rho, -0.9999999, 0.9999999);
    const double stat =
        std::sqrt(static_cast<double>(n - k - 3)) * std::atanh(rho);
    const double pval = 2.0 * (1.0 - normal_cdf(std::abs(stat)));

    CiDecision out;
    out.statistic = stat;
    out.p_value = pval;
    out.independent = pval >= alpha;
    out.test_name = "fisher_z";
    for (int c : z) out.conditioning_set.push_back(d.name(c));
    return out;
}

double median_bandwidth(const std::vector<std::vector<double>>& points) {
    const std::size_t m = points.size();
    std::vector<double> dists;
    dists.reserve(m * (m - 1) / 2);
    for (std::size_t a = 0; a < m; ++a) {
        for (std::size_t b = a + 1; b < m; ++b) {
            double s = 0.0;
            for (std::size_t k = 0; k < points[a].size(); ++k) {
                const double diff = points[a][k] - points[b][k];
                s += diff * diff;
            }
            dists.push_back(std::sqrt(s));
        }
    }
    if (dists.empty()) return 1.0;
    std::nth_element(dists.begin(), dists.begin() + static_cast<long>(dists.size() / 2),
                     dists.end());
    const double med = dists[dists.size() / 2];
    return med > 1e-12 ? med : 1.0;
}

std::vector<std::vector<double>> gaussian_gram(const std::vector<std::vector<double>>& points,
                                               double bandwidth) {
    const std::size_t m = points.size();
    std::vector<std::vector<double>> gram(m, std::vector<double>(m, 1.0));
    const double denom = 2.0 * bandwidth * bandwidth;
    for (std::size_t a = 0; a < m; ++a) {
        for (std::size_t b = a + 1; b < m; ++b) {
            double s = 0.0;
            for (std::size_t k = 0; k < points[a].size(); ++k) {
                const double diff = points[a][k] - points[b][k];
                s += diff * diff;
            }
            const double v = std::exp(-s / denom);
            gram[a][b] = v;
            gram[b][a] = v;
        }
    }
    return gram;
}

namespace {

// Double-centering in place: K <- H K H.
void center_gram(std::vector<std::vector<double>>& k) {
    const std::size_t m = k.size();
    std::vector<double> row_mean(m, 0.0);
    double total = 0.0;
    for (std::size_t a = 0; a < m; ++a) {
        double s = 0.0;
        for (std::size_t b = 0; b < m; ++b) s += k[a][b];
        row_mean[a] = s / static_cast<double>(m);
        total += s;
    }
    const double grand = total / static_cast<double>(m * m);
    for (std::size_t a = 0; a < m; ++a) {
        for (std::size_t b = 0; b < m; ++b) {
            k[a][b] += grand - row_mean[a] - row_mean[b];
        }
    }
}

}  // namespace

double hsic_from_grams(const std::vector<std::vector<double>>& k_centered,
                       const std::vector<std::vector<double>>& l) {
    const std::size_t m = k_centered.size();
    double s = 0.0;
    for (std::size_t a = 0; a < m; ++a) {
        for (std::size_t b = 0; b < m; ++b) s += k_centered[a][b] * l[a][b];
    }
    return s / static_cast<double>(m * m);
}

double hsic_statistic(const std::vector<std::vector<double>>& xs,
                      const std::vector<std::vector<double>>& ys) {
    auto k = gaussian_gram(xs, median_bandwidth(xs));
    auto l = gaussian_gram(ys, median_bandwidth(ys));
    center_gram(k);
    return hsic_from_grams(k, l);
}

CiDecision hsic_test(const std::vector<double>& x, const std::vector<double>& y, double alpha,
                     int perms, std::uint64_t seed, std::size_t max_rows) {
    if (x.size() != y.size()) throw data::input_error("hsic_test: length mismatch");
    if (x.size() < 20) throw sample_size_error("hsic_test needs at least 20 samples");

    CiDecision out;
    out.test_name = "hsic";

    std::vector<std::size_t> idx;
    const std::size_t n = x.size();
    if (n > max_rows) {
        // Deterministic thinning keeps the test reproducible for large inputs.
        for (std::size_t i = 0; i < max_rows; ++i) idx.push_back(i * n / max_rows);
    } else {
        idx.resize(n);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
    }
    const std::size_t m = idx.size();

    auto is_constant = [](const std::vector<double>& v) {
        for (double t : v) {
            if (t != v.front()) return false;
        }
        return true;
    };
    if (is_constant(x) || is_constant(y)) {
        out.independent = true;
        out.degenerate_input = true;
        out.p_value = 1.0;
        return out;
    }

    std::vector<std::vector<double>> xs(m), ys(m);
    for (std::size_t i = 0; i < m; ++i) {
        xs[i] = {x[idx[i]]};
        ys[i] = {y[idx[i]]};
    }
    auto k = gaussian_gram(xs, median_bandwidth(xs));
    auto l = gaussian_gram(ys, median_bandwidth(ys));
    center_gram(k);
    const double stat = hsic_from_grams(k, l);
    out.statistic = stat;

    auto rng = make_rng(seed, "hsic-perm");
    std::vector<std::size_t> perm(m);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    int exceed = 0;
    for (int t = 0; t < perms; ++t) {
        std::shuffle(perm.begin(), perm.end(), rng);
        double s = 0.0;
        for (std::size_t a = 0; a < m; ++a) {
            for (std::size_t b = 0; b < m; ++b) s += k[a][b] * l[perm[a]][perm[b]];
        }
        if (s / static_cast<double>(m * m) >= stat) ++exceed;
    }
    out.p_value = static_cast<double>(exceed + 1) / static_cast<double>(perms + 1);
    out.independent = out.p_value >= alpha;
    return out;
}

CiDecision oracle_ci(const graph::MixedGraph& truth, const graph::SeparationQuery& q) {
    CiDecision out;
    out.test_name = "oracle";
    out.independent = graph::m_separated(truth, q);
    out.p_value = out.independent ? 1.0 : 0.0;
    out.statistic = out.independent ? 0.0 : 1.0;
    for (int v : q.z) out.conditioning_set.push_back(truth.name(v));
    return out;
}

CiDecision FisherZSource::query(const std::string& x, const std::string& y,
                                const std::vector<std::string>& z, double alpha) {
    std::vector<int> zi;
    zi.reserve(z.size());
    for (const auto& name : z) zi.push_back(data_->column_index(name));
    return fisher_z(*data_, data_->column_index(x), data_->column_index(y), zi, alpha);
}

namespace {

// Residuals of v after OLS on (1, columns of z).
std::vector<double> residualize(const data::Dataset& d, int v, const std::vector<int>& z) {
    const auto n = static_cast<long>(d.rows());
    const long p = static_cast<long>(z.size()) + 1;
    Eigen::MatrixXd design(n, p);
    Eigen::VectorXd target(n);
    const auto& vc = d.col(v);
    for (long r = 0; r < n; ++r) {
        design(r, 0) = 1.0;
        for (long c = 1; c < p; ++c) {
            design(r, c) = d.col(z[static_cast<std::size_t>(c - 1)])[static_cast<std::size_t>(r)];
        }
        target(r) = vc[static_cast<std::size_t>(r)];
    }
    Eigen::VectorXd beta = design.colPivHouseholderQr().solve(target);
    Eigen::VectorXd res = target - design * beta;
    return {res.data(), res.data() + res.size()};
}

}  // namespace

CiDecision HsicResidualSource::query(const std::string& x, const std::string& y,
                                     const std::vector<std::string>& z, double alpha) {
    std::vector<int> zi;
    for (const auto& name : z) zi.push_back(data_->column_index(name));
    const int xi = data_->column_index(x);
    const int yi = data_->column_index(y);
    std::vector<double> rx;
    std::vector<double> ry;
    if (zi.empty()) {
        rx = data_->col(xi);
        ry = data_->col(yi);
    } else {
        rx = residualize(*data_, xi, zi);
        ry = residualize(*data_, yi, zi);
    }
    std::uint64_t qseed = derive_seed(seed_, x + "|" + y);
    for (const auto& name : z) qseed = derive_seed(qseed, name);
    auto out = hsic_test(rx, ry, alpha, perms_, qseed);
    out.test_name = "hsic_residual";
    out.conditioning_set = z;
    return out;
}

CiDecision OracleCiSource::query(const std::string& x, const std::string& y,
                                 const std::vector<std::string>& z, double alpha) {
    (void)alpha;
    graph::SeparationQuery q;
    q.x = truth_.index_of(x);
    q.y = truth_.index_of(y);
    for (const auto& name : z) q.z.push_back(truth_.index_of(name));
    return oracle_ci(truth_, q);
}

}  // namespace disparity::ci
