// Command-line front end: simulate synthetic data, discover mediators and
// admissible adjustment sets, and decompose the group disparity into the
// adjusted and unadjusted effects. Exit codes: 0 success, 1 input error,
// 2 identifiability refusal.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "disparity/admissible.hpp"
#include "disparity/effect.hpp"
#include "disparity/rng.hpp"
#include "disparity/scm.hpp"

using nlohmann::json;
using namespace disparity;

namespace {

struct RunConfig {
    std::string input;
    std::string scm_path;
    std::string out = "report.json";
    std::string exposure;
    std::string outcome;
    std::vector<std::string> contexts;
    double alpha = 0.05;
    std::string ci_test = "fisher_z";  // fisher_z | hsic_residual | oracle:<graph file>
    std::string estimator = "linear";  // linear | knn
    std::string mode = "empirical";    // empirical | kde
    int bootstrap_reps = 200;
    std::uint64_t seed = 0;
    std::vector<std::string> joint;  // joint mediator blocks, "M1+M2"
    std::size_t n = 1000;            // simulate: rows
};

struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void load_config_file(RunConfig& cfg, const std::string& path) {
    std::ifstream f(path);
    if (!f) throw config_error("cannot open config file: " + path);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw config_error("config file " + path + ": " + e.what());
    }
    auto get = [&](const char* key, auto& slot) {
        if (j.contains(key)) slot = j.at(key).template get<std::decay_t<decltype(slot)>>();
    };
    get("input", cfg.input);
    get("scm", cfg.scm_path);
    get("out", cfg.out);
    get("exposure", cfg.exposure);
    get("outcome", cfg.outcome);
    get("contexts", cfg.contexts);
    get("alpha", cfg.alpha);
    get("ci_test", cfg.ci_test);
    get("estimator", cfg.estimator);
    get("mode", cfg.mode);
    get("bootstrap_reps", cfg.bootstrap_reps);
    get("seed", cfg.seed);
    get("joint", cfg.joint);
    get("n", cfg.n);
}

void validate_config(const RunConfig& cfg, bool needs_input) {
    if (needs_input && cfg.input.empty()) throw config_error("--input is required");
    if (needs_input && cfg.exposure.empty()) throw config_error("--exposure is required");
    if (needs_input && cfg.outcome.empty()) throw config_error("--outcome is required");
    if (cfg.exposure == cfg.outcome && !cfg.exposure.empty()) {
        throw config_error("exposure and outcome must differ");
    }
    for (const auto& c : cfg.contexts) {
        if (c == cfg.outcome) throw config_error("contexts must exclude the outcome");
    }
    if (!(cfg.alpha > 0.0 && cfg.alpha <= 0.5)) throw config_error("alpha must be in (0, 0.5]");
    if (cfg.mode != "empirical" && cfg.mode != "kde") {
        throw config_error("mode must be empirical or kde");
    }
    if (cfg.estimator != "linear" && cfg.estimator != "knn") {
        throw config_error("estimator must be linear or knn");
    }
}

/// Records every CI decision for the evidence section of the report.
class LoggingCiSource final : public ci::CiSource {
public:
    LoggingCiSource(std::unique_ptr<ci::CiSource> inner, json& log)
        : inner_(std::move(inner)), log_(&log) {}
    ci::CiDecision query(const std::string& x, const std::string& y,
                         const std::vector<std::string>& z, double alpha) override {
        auto dec = inner_->query(x, y, z, alpha);
        log_->push_back({{"x", x},
                         {"y", y},
                         {"given", z},
                         {"independent", dec.independent},
                         {"p_value", dec.p_value},
                         {"test", dec.test_name}});
        return dec;
    }

private:
    std::unique_ptr<ci::CiSource> inner_;
    json* log_;
};

struct Sources {
    std::unique_ptr<ci::CiSource> ci_src;
    std::unique_ptr<mechanism::MechanismSource> mech_src;
};

graph::MixedGraph read_graph_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw config_error("cannot open graph file: " + path);
    std::string line;
    std::vector<std::string> nodes;
    std::ostringstream edges;
    while (std::getline(f, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string w;
        if (!(ls >> w)) continue;
        if (nodes.empty()) {
            // first content line lists the node names
            nodes.push_back(w);
            while (ls >> w) nodes.push_back(w);
        } else {
            edges << line << "\n";
        }
    }
    if (nodes.empty()) throw config_error("graph file " + path + " has no node list");
    return graph::parse_edges(nodes, edges.str());
}

Sources make_sources(const RunConfig& cfg, const data::Dataset& d, json& ci_log) {
    Sources s;
    std::unique_ptr<ci::CiSource> base;
    if (cfg.ci_test == "fisher_z") {
        base = std::make_unique<ci::FisherZSource>(d);
        s.mech_src = std::make_unique<mechanism::DataMechanismSource>(d, derive_seed(cfg.seed, "delta"));
    } else if (cfg.ci_test == "hsic_residual") {
        base = std::make_unique<ci::HsicResidualSource>(d, derive_seed(cfg.seed, "ci"));
        s.mech_src = std::make_unique<mechanism::DataMechanismSource>(d, derive_seed(cfg.seed, "delta"));
    } else if (cfg.ci_test.rfind("oracle:", 0) == 0) {
        auto g = read_graph_file(cfg.ci_test.substr(7));
        std::set<std::string> latents;
        for (int i = 0; i < g.node_count(); ++i) {
            if (!d.has_column(g.name(i))) latents.insert(g.name(i));
        }
        base = std::make_unique<ci::OracleCiSource>(g);
        s.mech_src = std::make_unique<mechanism::OracleMechanismSource>(g, cfg.exposure, latents);
    } else {
        throw config_error("unknown ci_test: " + cfg.ci_test);
    }
    s.ci_src = std::make_unique<LoggingCiSource>(std::move(base), ci_log);
    return s;
}

std::vector<std::vector<std::string>> requested_blocks(const RunConfig& cfg,
                                                       const std::vector<std::string>& mediators) {
    std::vector<std::vector<std::string>> blocks;
    for (const auto& m : mediators) blocks.push_back({m});
    for (const auto& spec : cfg.joint) {
        std::vector<std::string> block;
        std::stringstream ss(spec);
        std::string part;
        while (std::getline(ss, part, '+')) {
            if (!part.empty()) block.push_back(part);
        }
        if (block.size() < 2) throw config_error("joint block needs two or more mediators: " + spec);
        blocks.push_back(std::move(block));
    }
    return blocks;
}

json meta_section(const RunConfig& cfg, const data::Dataset& d, const std::string& command) {
    return {{"command", command},
            {"input", cfg.input},
            {"exposure", cfg.exposure},
            {"outcome", cfg.outcome},
            {"contexts", cfg.contexts},
            {"alpha", cfg.alpha},
            {"seed", cfg.seed},
            {"ci_test", cfg.ci_test},
            {"estimator", cfg.estimator},
            {"mode", cfg.mode},
            {"n_rows", d.rows()},
            {"n0", d.group_rows(0).size()},
            {"n1", d.group_rows(1).size()}};
}

struct Discovery {
    std::vector<std::string> mediators;
    std::vector<std::vector<std::string>> blocks;
    std::vector<admissible::AdmissibleReport> reports;
    bool identifiable = true;
};

Discovery run_discovery(const RunConfig& cfg, const data::Dataset& d, Sources& src) {
    Discovery out;
    const std::set<std::string> ctx(cfg.contexts.begin(), cfg.contexts.end());
    std::vector<std::string> candidates;
    for (int c : d.covariates()) {
        if (!ctx.count(d.name(c))) candidates.push_back(d.name(c));
    }
    out.mediators = admissible::detect_mediators(*src.ci_src, candidates, cfg.exposure,
                                                 cfg.outcome, cfg.alpha);
    local_mag::Knowledge know;
    know.outcome = cfg.outcome;
    for (const auto& c : cfg.contexts) know.contexts.insert(c);
    out.blocks = requested_blocks(cfg, out.mediators);
    for (const auto& block : out.blocks) {
        auto rep = admissible::assemble_admissible(*src.ci_src, *src.mech_src, candidates, block,
                                                   cfg.outcome, cfg.contexts, cfg.alpha, know);
        if (!rep.identifiable) out.identifiable = false;
        out.reports.push_back(std::move(rep));
    }
    return out;
}

json admissible_section(const Discovery& disc) {
    json arr = json::array();
    for (const auto& rep : disc.reports) {
        json decisions = json::array();
        for (const auto& dec : rep.decisions) {
            json row = {{"candidate", dec.candidate},
                        {"status", dec.status},
                        {"justification", dec.justification}};
            if (dec.witness) row["witness"] = *dec.witness;
            decisions.push_back(std::move(row));
        }
        arr.push_back({{"block", rep.block},
                       {"b_tilde", rep.b_tilde},
                       {"b_m", rep.b_m},
                       {"identifiable", rep.identifiable},
                       {"subsets_visited", rep.subsets_visited},
                       {"decisions", std::move(decisions)}});
    }
    return arr;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream f(path);
    if (!f) throw config_error("cannot write " + path);
    f << text;
}

std::string sibling_path(const std::string& out, const std::string& suffix) {
    const auto dot = out.rfind('.');
    const auto slash = out.rfind('/');
    if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) {
        return out + suffix;
    }
    return out.substr(0, dot) + suffix;
}

int cmd_discover(const RunConfig& cfg) {
    auto d = data::read_csv_file(cfg.input);
    d.set_roles(cfg.exposure, cfg.outcome, cfg.contexts);
    d.validate();
    json ci_log = json::array();
    auto src = make_sources(cfg, d, ci_log);
    auto disc = run_discovery(cfg, d, src);
    json report = {{"meta", meta_section(cfg, d, "discover")},
                   {"mediators", disc.mediators},
                   {"admissible", admissible_section(disc)},
                   {"effects", json::array()},
                   {"evidence", {{"ci_queries", std::move(ci_log)}}}};
    write_text_file(cfg.out, report.dump(2) + "\n");
    if (!disc.identifiable) {
        std::cerr << "not identifiable: no admissible set exists for some mediator "
                     "(back-door criterion)\n";
        return 2;
    }
    return 0;
}

int cmd_decompose(const RunConfig& cfg) {
    auto d = data::read_csv_file(cfg.input);
    d.set_roles(cfg.exposure, cfg.outcome, cfg.contexts);
    d.validate();
    json ci_log = json::array();
    auto src = make_sources(cfg, d, ci_log);
    auto disc = run_discovery(cfg, d, src);

    json effects = json::array();
    std::ostringstream plot;
    plot << "mediator,delta,zeta,ci_low,ci_high\n";
    const auto kind = cfg.estimator == "knn" ? effect::ModelKind::Knn : effect::ModelKind::Linear;
    effect::EstimatorConfig ecfg;
    ecfg.mode = cfg.mode == "kde" ? effect::EstimatorMode::Kde : effect::EstimatorMode::EmpiricalProduct;
    if (disc.identifiable) {
        for (std::size_t i = 0; i < disc.blocks.size(); ++i) {
            const auto& block = disc.blocks[i];
            const auto& adjust = disc.reports[i].b_m;
            auto model = effect::fit_outcome_model(d, block, adjust, kind);
            auto est = effect::estimate_adjusted(d, model, block, adjust, ecfg,
                                                 derive_seed(cfg.seed, "mcmc"));
            auto pipeline = [&](const data::Dataset& dd) {
                auto m = effect::fit_outcome_model(dd, block, adjust, kind);
                return effect::estimate_adjusted(dd, m, block, adjust, ecfg,
                                                 derive_seed(cfg.seed, "mcmc"))
                    .delta_hat;
            };
            auto [lo, hi] = effect::bootstrap_ci(d, pipeline, cfg.bootstrap_reps, 0.95,
                                                 derive_seed(cfg.seed, "bootstrap"));
            est.ci_low = std::min(lo, est.delta_hat);
            est.ci_high = std::max(hi, est.delta_hat);
            est.has_ci = true;

            std::string label;
            for (const auto& m : block) label += (label.empty() ? "" : "+") + m;
            effects.push_back({{"mediators", block},
                               {"adjust", adjust},
                               {"delta", est.delta_hat},
                               {"zeta", est.zeta_hat},
                               {"total", est.total_hat},
                               {"ci_low", est.ci_low},
                               {"ci_high", est.ci_high},
                               {"n0", est.n0},
                               {"n1", est.n1},
                               {"mode", cfg.mode},
                               {"mc_se", est.mc_se}});
            plot << label << ',' << est.delta_hat << ',' << est.zeta_hat << ',' << est.ci_low
                 << ',' << est.ci_high << '\n';
        }
    }

    json report = {{"meta", meta_section(cfg, d, "decompose")},
                   {"mediators", disc.mediators},
                   {"admissible", admissible_section(disc)},
                   {"effects", std::move(effects)},
                   {"evidence", {{"ci_queries", std::move(ci_log)}}}};
    write_text_file(cfg.out, report.dump(2) + "\n");
    write_text_file(sibling_path(cfg.out, "_plot.csv"), plot.str());
    if (!disc.identifiable) {
        std::cerr << "not identifiable: no admissible set exists for some mediator "
                     "(back-door criterion)\n";
        return 2;
    }
    return 0;
}

int cmd_simulate(const RunConfig& cfg) {
    if (cfg.scm_path.empty()) throw config_error("--scm is required for simulate");
    auto spec = scm::ScmSpec::parse_file(cfg.scm_path);
    auto d = scm::sample(spec, cfg.n, cfg.seed);
    data::write_csv_file(d, cfg.out);

    auto mediators = scm::true_mediators(spec);
    json truths = json::array();
    auto describe = [&](const std::vector<std::string>& block) {
        scm::GroundTruth gt = spec.all_linear()
                                  ? scm::analytic_effects(spec, block)
                                  : scm::monte_carlo_effects(spec, block, 200000,
                                                             derive_seed(cfg.seed, "sim-truth"));
        json row = {{"mediators", block},
                    {"delta", gt.delta},
                    {"zeta", gt.zeta},
                    {"total", gt.total},
                    {"method", gt.method}};
        if (gt.mc_se) row["mc_se"] = *gt.mc_se;
        truths.push_back(std::move(row));
    };
    for (const auto& m : mediators) describe({m});
    if (mediators.size() > 1) describe(mediators);
    json out = {{"meta", {{"scm", cfg.scm_path}, {"n", cfg.n}, {"seed", cfg.seed}}},
                {"mediators", mediators},
                {"ground_truth", std::move(truths)}};
    write_text_file(sibling_path(cfg.out, ".truth.json"), out.dump(2) + "\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    RunConfig cfg;
    // the config file provides defaults; explicit flags override it
    for (int i = 1; i + 1 < argc; ++i) {
        if (std::string(argv[i]) == "--config") {
            try {
                load_config_file(cfg, argv[i + 1]);
            } catch (const std::exception& e) {
                std::cerr << "error: " << e.what() << "\n";
                return 1;
            }
        }
    }

    CLI::App app{"disparity decomposition via local causal discovery"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "JSON config file (flags override it)");

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--input", cfg.input, "input CSV");
        sub->add_option("--out", cfg.out, "output path");
        sub->add_option("--exposure", cfg.exposure, "binary exposure column, 1 = advantaged");
        sub->add_option("--outcome", cfg.outcome, "outcome column");
        sub->add_option("--contexts", cfg.contexts, "context columns")->delimiter(',');
        sub->add_option("--alpha", cfg.alpha, "test level in (0, 0.5]");
        sub->add_option("--seed", cfg.seed, "master seed");
        sub->add_option("--ci-test", cfg.ci_test, "fisher_z | hsic_residual | oracle:<graph>");
        sub->add_option("--estimator", cfg.estimator, "linear | knn");
        sub->add_option("--mode", cfg.mode, "empirical | kde");
        sub->add_option("--bootstrap-reps", cfg.bootstrap_reps, "bootstrap replicates");
        sub->add_option("--joint", cfg.joint, "joint mediator block, e.g. M1+M2");
        sub->add_option("--config", config_path, "JSON config file (flags override it)");
    };
    auto* discover = app.add_subcommand("discover", "mediators and admissible sets");
    add_common(discover);
    auto* decompose = app.add_subcommand("decompose", "discovery plus effect estimates");
    add_common(decompose);
    auto* simulate = app.add_subcommand("simulate", "sample a structural model to CSV");
    simulate->add_option("--scm", cfg.scm_path, "structural model file");
    simulate->add_option("--n", cfg.n, "rows to sample");
    simulate->add_option("--seed", cfg.seed, "master seed");
    simulate->add_option("--out", cfg.out, "output CSV path");
    simulate->add_option("--config", config_path, "JSON config file (flags override it)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (simulate->parsed()) return cmd_simulate(cfg);
        validate_config(cfg, true);
        if (discover->parsed()) return cmd_discover(cfg);
        return cmd_decompose(cfg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
