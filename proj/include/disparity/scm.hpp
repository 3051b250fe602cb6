#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "disparity/dataset.hpp"
#include "disparity/graph.hpp"

namespace disparity::scm {

struct spec_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Expression tree over earlier variables: +, *, constants, coefficients and
/// the univariate functions sin/exp/tanh.
struct Expr {
    enum class Op { Constant, Var, Add, Mul, Sin, Exp, Tanh };
    Op op = Op::Constant;
    double value = 0.0;    // Constant
    std::string var;       // Var
    std::vector<Expr> args;

    static Expr constant(double v);
    static Expr var_ref(std::string name);

    double eval(const std::map<std::string, double>& env) const;
    void collect_vars(std::vector<std::string>& out) const;
    /// Affine decomposition coef-per-var + intercept; nullopt if nonlinear.
    std::optional<std::pair<std::map<std::string, double>, double>> linear_form() const;
    std::string to_string() const;
};

struct NoiseSpec {
    enum class Kind { Normal, Bernoulli };
    Kind kind = Kind::Normal;
    double a = 0.0;  // mean / success probability
    double b = 1.0;  // stddev (normal only)

    double mean() const { return kind == Kind::Normal ? a : a; }
    std::string to_string() const;
};

struct ScmVariable {
    std::string name;
    Expr equation;
    NoiseSpec noise;
    bool latent = false;
};

/// Structural causal model in topological order: each equation references
/// only earlier variables, plus an additive noise term.
struct ScmSpec {
    std::vector<ScmVariable> variables;
    std::string exposure;

    void validate() const;
    const ScmVariable& variable(const std::string& name) const;
    /// Full causal DAG including latent variables.
    graph::MixedGraph to_dag() const;
    std::vector<std::string> observed_names() const;
    bool all_linear() const;

    std::string to_text() const;
    static ScmSpec parse(const std::string& text);
    static ScmSpec parse_file(const std::string& path);

    /// The synthetic benchmark from the linear five-variable family
    /// (R, X, M1, M2, Y) used throughout the tests.
    static ScmSpec benchmark();
};

struct GroundTruth {
    double delta = 0.0;
    double zeta = 0.0;
    double total = 0.0;
    std::string method;  // analytic_linear | monte_carlo
    std::optional<double> mc_se;
};

struct TrueSets {
    std::vector<std::string> b_small;
    std::vector<std::string> b_big;
    std::vector<std::string> b_tilde;
    bool identifiable = true;
};

/// n iid rows in topological order; latent columns dropped; deterministic
/// given (spec, n, seed). Exposure/outcome roles set (outcome = last
/// observed variable unless named "Y" elsewhere); contexts = observed roots.
data::Dataset sample(const ScmSpec& spec, std::size_t n, std::uint64_t seed);

/// Closed-form effects for an all-linear spec via path-coefficient
/// propagation.
GroundTruth analytic_effects(const ScmSpec& spec, const std::vector<std::string>& m_cols);

/// Monte-Carlo counterfactual oracle: the mediator block and its ancestors are
/// re-drawn in a parallel world with the exposure forced to 1 and fresh noise,
/// then spliced into the R=0 world.
GroundTruth monte_carlo_effects(const ScmSpec& spec, const std::vector<std::string>& m_cols,
                                std::size_t n_sim, std::uint64_t seed);

/// B_small/B_big/B_tilde for a mediator, computed by latent projection of the
/// true DAG onto each (O_i, M, Y) triple and pattern matching.
TrueSets true_admissible_sets(const ScmSpec& spec, const std::string& m);
/// `observed` lists the candidate covariates; `also_observed` names further
/// visible nodes (e.g. the exposure) that only matter for the latent
/// mediator-outcome confounding check.
TrueSets true_admissible_sets(const graph::MixedGraph& dag,
                              const std::vector<std::string>& observed, const std::string& m,
                              const std::string& outcome,
                              const std::vector<std::string>& also_observed = {});

/// Mediators per the four oracle dependence checks on the true DAG.
std::vector<std::string> true_mediators(const ScmSpec& spec);

}  // namespace disparity::scm
