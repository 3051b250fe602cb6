#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "disparity/dataset.hpp"
#include "disparity/graph.hpp"

namespace disparity::mechanism {

/// Dependence measure between estimated causal mechanisms across the
/// exposure-defined domains. delta(from -> to | cond) couples the fitted
/// family {P^r(from | cond)} with {P^r(to | from, cond)}; independence across
/// domains is evidence that `from -> to` is the modular causal direction.
struct DeltaResult {
    double delta = 0.0;  // normalized HSIC, >= 0
    double p_value = 1.0;
    bool independent = true;
    std::pair<std::string, std::string> direction;  // (from, to) as printed labels
    std::vector<std::string> conditioning;
    int n_domains = 2;
    bool degenerate_input = false;
    bool from_changed = false;  // did the from-mechanism shift across domains?
    bool to_changed = false;
};

struct DeltaConfig {
    std::size_t max_rows_per_domain = 300;  // deterministic thinning cap
    int grid_points = 30;                   // shared evaluation grid size
    int bootstraps = 100;                   // feature resamples per domain
    int permutations = 200;                 // HSIC null permutations
    double change_level = 0.01;             // per-test level of the shift gate
    std::size_t min_domain_rows = 30;
    // shift-attribution decision knobs (see DataMechanismSource)
    double attribution_ratio = 0.8;  // explained/actual shift ratio that counts as accounted for
    double shift_z = 4.0;            // z-threshold for a significant mean or scale shift
    double assoc_alpha = 0.01;       // level of the relevance/association CI screens
};

/// Answers mechanism-change queries either from data or from a ground-truth
/// graph, so discovery can run in both modes.
class MechanismSource {
public:
    virtual ~MechanismSource() = default;
    virtual DeltaResult delta(const std::vector<std::string>& from,
                              const std::vector<std::string>& to,
                              const std::vector<std::string>& cond, double alpha) = 0;
};

/// Data-driven Δ. The reported statistic follows the bootstrap construction:
/// per-domain mechanism features (Nadaraya-Watson conditional means on a
/// pooled grid plus residual spread), per-domain centering, and normalized
/// HSIC with a permutation p-value. The independence *decision* is taken
/// from shift attribution, because with a binary exposure only two domains
/// exist and the bootstrap HSIC is dominated by shared design fluctuations:
/// after a gate that returns independence when the from-mechanism does not
/// change across domains, the query is dependent iff some to-relevant
/// covariate W outside the conditioning set is associated with the from-side
/// yet fails to account for its shift -- either W explains less than
/// `attribution_ratio` of the from-side's conditional mean shift, or a
/// residual scale change survives conditioning on W.
class DataMechanismSource final : public MechanismSource {
public:
    DataMechanismSource(const data::Dataset& d, std::uint64_t seed, DeltaConfig cfg = {})
        : data_(&d), seed_(seed), cfg_(cfg) {}
    DeltaResult delta(const std::vector<std::string>& from, const std::vector<std::string>& to,
                      const std::vector<std::string>& cond, double alpha) override;

private:
    const data::Dataset* data_;
    std::uint64_t seed_;
    DeltaConfig cfg_;
};

/// Ground-truth Δ: idealized mechanism-independence. The fitted family
/// {P^r(T | C)} is driven by the structural equations of T's observed
/// ancestors outside C; two families change independently across domains iff
/// those mechanism sets are disjoint. Concretely, with S the conditioning
/// set, delta(from -> to | S) is independent iff the exposure reaches neither
/// side, or S avoids descendants of both sides and
///   (oAn(from) \ (S u {R}))  n  (oAn(to) \ (from u S u {R}))  =  empty,
/// where oAn is the ancestor closure restricted to non-latent nodes.
class OracleMechanismSource final : public MechanismSource {
public:
    OracleMechanismSource(graph::MixedGraph truth, std::string exposure,
                          std::set<std::string> latents = {})
        : truth_(std::move(truth)), exposure_(std::move(exposure)), latents_(std::move(latents)) {}
    DeltaResult delta(const std::vector<std::string>& from, const std::vector<std::string>& to,
                      const std::vector<std::string>& cond, double alpha) override;

private:
    graph::MixedGraph truth_;
    std::string exposure_;
    std::set<std::string> latents_;
};

/// Convenience wrapper for the single-variable directed form.
DeltaResult delta_statistic(MechanismSource& src, const std::string& vi, const std::string& vj,
                            const std::vector<std::string>& x, double alpha);

struct SmallMembership {
    bool member = false;
    std::optional<std::vector<std::string>> witness;
    std::size_t subsets_visited = 0;
    // the three test outcomes for the winning (or last) subset
    std::vector<DeltaResult> evidence;
};

/// Subset search for the small-set membership tests: find S within
/// `candidates` such that delta(oi -> block+y | S) is independent while
/// delta(block -> oi | S) and delta(block -> y | S) are dependent. Subsets
/// are visited in ascending size, lexicographic within a size; the first
/// success wins.
SmallMembership detect_small_membership(MechanismSource& src, const std::string& oi,
                                        const std::vector<std::string>& block,
                                        const std::string& y,
                                        const std::vector<std::string>& candidates, double alpha);

}  // namespace disparity::mechanism
