#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "disparity/dataset.hpp"
#include "disparity/graph.hpp"

namespace disparity::ci {

struct degenerate_data_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct sample_size_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CiDecision {
    bool independent = false;
    double statistic = 0.0;
    double p_value = 1.0;
    std::string test_name;
    std::vector<std::string> conditioning_set;
    bool degenerate_input = false;
};

/// Partial-correlation test with the z-transform statistic
/// sqrt(n - |z| - 3) * atanh(rho) and a two-sided normal p-value.
CiDecision fisher_z(const data::Dataset& d, int i, int j, const std::vector<int>& z, double alpha);

/// Biased-estimator HSIC with Gaussian kernels (median-heuristic bandwidth);
/// p-value from `perms` random permutations of y. Inputs longer than
/// `max_rows` are deterministically thinned.
CiDecision hsic_test(const std::vector<double>& x, const std::vector<double>& y, double alpha,
                     int perms, std::uint64_t seed, std::size_t max_rows = 512);

/// CI decided by m-separation in a ground-truth DAG.
CiDecision oracle_ci(const graph::MixedGraph& truth, const graph::SeparationQuery& q);

/// One interface for conditional-independence decisions so the pipeline can
/// run from data or from a graph oracle.
class CiSource {
public:
    virtual ~CiSource() = default;
    virtual CiDecision query(const std::string& x, const std::string& y,
                             const std::vector<std::string>& z, double alpha) = 0;
};

class FisherZSource final : public CiSource {
public:
    explicit FisherZSource(const data::Dataset& d) : data_(&d) {}
    CiDecision query(const std::string& x, const std::string& y,
                     const std::vector<std::string>& z, double alpha) override;

private:
    const data::Dataset* data_;
};

/// Residualize x and y on z by linear regression, then HSIC on the residuals;
/// nonlinear fallback for non-Gaussian data.
class HsicResidualSource final : public CiSource {
public:
    HsicResidualSource(const data::Dataset& d, std::uint64_t seed, int perms = 200)
        : data_(&d), seed_(seed), perms_(perms) {}
    CiDecision query(const std::string& x, const std::string& y,
                     const std::vector<std::string>& z, double alpha) override;

private:
    const data::Dataset* data_;
    std::uint64_t seed_;
    int perms_;
};

/// Answers queries by d-separation in a known DAG; nodes absent from the
/// graph are impossible to query (input error).
class OracleCiSource final : public CiSource {
public:
    explicit OracleCiSource(graph::MixedGraph truth) : truth_(std::move(truth)) {}
    CiDecision query(const std::string& x, const std::string& y,
                     const std::vector<std::string>& z, double alpha) override;
    const graph::MixedGraph& truth() const { return truth_; }

private:
    graph::MixedGraph truth_;
};

// Shared numeric helpers.
double normal_cdf(double x);
double normal_quantile(double p);
/// Median of pairwise distances; 1.0 when degenerate.
double median_bandwidth(const std::vector<std::vector<double>>& points);
/// Biased HSIC statistic between row collections xs and ys (equal length).
double hsic_statistic(const std::vector<std::vector<double>>& xs,
                      const std::vector<std::vector<double>>& ys);
std::vector<std::vector<double>> gaussian_gram(const std::vector<std::vector<double>>& points,
                                               double bandwidth);
/// HSIC from a double-centered gram K and a raw gram L.
double hsic_from_grams(const std::vector<std::vector<double>>& k_centered,
                       const std::vector<std::vector<double>>& l);

}  // namespace disparity::ci
