#include "disparity/scm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "disparity/rng.hpp"

namespace disparity::scm {

Expr Expr::constant(double v) {
    Expr e;
    e.op = Op::Constant;
    e.value = v;
    return e;
}

Expr Expr::var_ref(std::string name) {
    Expr e;
    e.op = Op::Var;
    e.var = std::move(name);
    return e;
}

double Expr::eval(const std::map<std::string, double>& env) const {
    switch (op) {
        case Op::Constant: return value;
        case Op::Var: {
            auto it = env.find(var);
            if (it == env.end()) throw spec_error("unknown variable in expression: " + var);
            return it->second;
        }
        case Op::Add: {
            double s = 0.0;
            for (const auto& a : args) s += a.eval(env);
            return s;
        }
        case Op::Mul: {
            double s = 1.0;
            for (const auto& a : args) s *= a.eval(env);
            return s;
        }
        case Op::Sin: return std::sin(args.at(0).eval(env));
        case Op::Exp: return std::exp(args.at(0).eval(env));
        case Op::Tanh: return std::tanh(args.at(0).eval(env));
    }
    throw spec_error("bad expression node");
}

void Expr::collect_vars(std::vector<std::string>& out) const {
    if (op == Op::Var) {
        if (std::find(out.begin(), out.end(), var) == out.end()) out.push_back(var);
    }
    for (const auto& a : args) a.collect_vars(out);
}

std::optional<std::pair<std::map<std::string, double>, double>> Expr::linear_form() const {
    using Form = std::pair<std::map<std::string, double>, double>;
    switch (op) {
        case Op::Constant: return Form{{}, value};
        case Op::Var: return Form{{{var, 1.0}}, 0.0};
        case Op::Add: {
            Form acc{{}, 0.0};
            for (const auto& a : args) {
                auto f = a.linear_form();
                if (!f) return std::nullopt;
                for (const auto& [v, c] : f->first) acc.first[v] += c;
                acc.second += f->second;
            }
            return acc;
        }
        case Op::Mul: {
            // Linear only if at most one factor carries variables.
            Form varying{{}, 1.0};
            double scale = 1.0;
            bool have_varying = false;
            for (const auto& a : args) {
                auto f = a.linear_form();
                if (!f) return std::nullopt;
                if (f->first.empty()) {
                    scale *= f->second;
                } else if (!have_varying) {
                    varying = *f;
                    have_varying = true;
                } else {
                    return std::nullopt;
                }
            }
            Form out{{}, varying.second * scale};
            for (const auto& [v, c] : varying.first) out.first[v] = c * scale;
            if (!have_varying) out.second = scale;
            return out;
        }
        default: return std::nullopt;
    }
}

std::string Expr::to_string() const {
    switch (op) {
        case Op::Constant: {
            std::ostringstream os;
            os << value;
            return os.str();
        }
        case Op::Var: return var;
        case Op::Add: {
            std::string s;
            int printed = 0;
            for (const auto& a : args) {
                if (a.op == Op::Constant && a.value == 0.0) continue;  // noise placeholder
                if (!s.empty()) s += " + ";
                s += a.to_string();
                ++printed;
            }
            if (printed == 0) return "0";
            if (printed == 1) return s;
            return "(" + s + ")";
        }
        case Op::Mul: {
            std::string s;
            for (std::size_t i = 0; i < args.size(); ++i) {
                if (i) s += "*";
                s += args[i].to_string();
            }
            return s;
        }
        case Op::Sin: return "sin(" + args[0].to_string() + ")";
        case Op::Exp: return "exp(" + args[0].to_string() + ")";
        case Op::Tanh: return "tanh(" + args[0].to_string() + ")";
    }
    return "?";
}

std::string NoiseSpec::to_string() const {
    std::ostringstream os;
    if (kind == Kind::Normal) {
        os << "normal(" << a << ", " << b << ")";
    } else {
        os << "bernoulli(" << a << ")";
    }
    return os.str();
}

void ScmSpec::validate() const {
    std::set<std::string> defined;
    bool saw_exposure = false;
    for (const auto& v : variables) {
        if (!defined.insert(v.name).second) throw spec_error("variable defined twice: " + v.name);
        std::vector<std::string> parents;
        v.equation.collect_vars(parents);
        for (const auto& p : parents) {
            if (defined.count(p) == 0) {
                throw spec_error("equation for " + v.name + " references " + p +
                                 " before its definition");
            }
        }
        if (v.name == exposure) {
            saw_exposure = true;
            if (!parents.empty()) throw spec_error("exposure must be a root variable");
            if (v.latent) throw spec_error("exposure cannot be latent");
        }
        if (v.noise.kind == NoiseSpec::Kind::Bernoulli && (v.noise.a < 0.0 || v.noise.a > 1.0)) {
            throw spec_error("bernoulli probability out of range for " + v.name);
        }
        if (v.noise.kind == NoiseSpec::Kind::Normal && v.noise.b < 0.0) {
            throw spec_error("negative stddev for " + v.name);
        }
    }
    if (exposure.empty()) throw spec_error("no exposure designated");
    if (!saw_exposure) throw spec_error("exposure variable not defined: " + exposure);
}

const ScmVariable& ScmSpec::variable(const std::string& name) const {
    for (const auto& v : variables) {
        if (v.name == name) return v;
    }
    throw spec_error("unknown variable: " + name);
}

graph::MixedGraph ScmSpec::to_dag() const {
    std::vector<std::string> names;
    for (const auto& v : variables) names.push_back(v.name);
    graph::MixedGraph g(names);
    for (const auto& v : variables) {
        std::vector<std::string> parents;
        v.equation.collect_vars(parents);
        for (const auto& p : parents) g.add_directed(p, v.name);
    }
    return g;
}

std::vector<std::string> ScmSpec::observed_names() const {
    std::vector<std::string> out;
    for (const auto& v : variables) {
        if (!v.latent) out.push_back(v.name);
    }
    return out;
}

bool ScmSpec::all_linear() const {
    for (const auto& v : variables) {
        if (!v.equation.linear_form()) return false;
    }
    return true;
}

std::string ScmSpec::to_text() const {
    std::ostringstream os;
    os << "exposure " << exposure << "\n";
    for (const auto& v : variables) {
        if (v.latent) os << "latent " << v.name << "\n";
    }
    for (const auto& v : variables) {
        std::vector<std::string> parents;
        v.equation.collect_vars(parents);
        os << "var " << v.name << " = ";
        if (!(v.equation.op == Expr::Op::Constant && v.equation.value == 0.0)) {
            os << v.equation.to_string() << " + ";
        }
        os << v.noise.to_string() << "\n";
    }
    return os.str();
}

namespace {

struct Parser {
    std::string text;
    std::size_t pos = 0;
    int line = 1;
    std::optional<NoiseSpec> noise;
    int mul_depth = 0;

    [[noreturn]] void fail(const std::string& msg) const {
        throw spec_error("line " + std::to_string(line) + ": " + msg);
    }
    void skip_space() {
        while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
    }
    char peek() {
        skip_space();
        return pos < text.size() ? text[pos] : '\0';
    }
    bool eat(char c) {
        if (peek() == c) {
            ++pos;
            return true;
        }
        return false;
    }
    std::string ident() {
        skip_space();
        std::size_t start = pos;
        while (pos < text.size() && (std::isalnum(static_cast<unsigned char>(text[pos])) ||
                                     text[pos] == '_')) {
            ++pos;
        }
        if (pos == start) fail("expected identifier");
        return text.substr(start, pos - start);
    }
    double number() {
        skip_space();
        char* end = nullptr;
        const double v = std::strtod(text.c_str() + pos, &end);
        if (end == text.c_str() + pos) fail("expected number");
        pos = static_cast<std::size_t>(end - text.c_str());
        return v;
    }

    Expr expression() {
        Expr sum;
        sum.op = Expr::Op::Add;
        sum.args.push_back(term());
        while (true) {
            if (eat('+')) {
                sum.args.push_back(term());
            } else if (eat('-')) {
                Expr neg;
                neg.op = Expr::Op::Mul;
                neg.args.push_back(Expr::constant(-1.0));
                neg.args.push_back(term());
                sum.args.push_back(std::move(neg));
            } else {
                break;
            }
        }
        return sum.args.size() == 1 ? sum.args[0] : sum;
    }
    Expr term() {
        Expr prod;
        prod.op = Expr::Op::Mul;
        prod.args.push_back(factor());
        while (eat('*')) {
            ++mul_depth;
            prod.args.push_back(factor());
            --mul_depth;
        }
        if (prod.args.size() > 1) return prod;
        return prod.args[0];
    }
    Expr factor() {
        const char c = peek();
        if (c == '(') {
            eat('(');
            Expr e = expression();
            if (!eat(')')) fail("expected ')'");
            return e;
        }
        if (c == '-') {
            eat('-');
            Expr neg;
            neg.op = Expr::Op::Mul;
            neg.args.push_back(Expr::constant(-1.0));
            neg.args.push_back(factor());
            return neg;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            return Expr::constant(number());
        }
        std::string name = ident();
        if (peek() == '(') {
            eat('(');
            if (name == "normal" || name == "bernoulli" || name == "bern") {
                if (mul_depth > 0) fail("noise term must be a plain additive term");
                if (noise) fail("only one noise term per equation");
                NoiseSpec ns;
                if (name == "normal") {
                    ns.kind = NoiseSpec::Kind::Normal;
                    ns.a = number();
                    if (!eat(',')) fail("normal(mu, sigma) expects two arguments");
                    ns.b = number();
                } else {
                    ns.kind = NoiseSpec::Kind::Bernoulli;
                    ns.a = number();
                }
                if (!eat(')')) fail("expected ')'");
                noise = ns;
                return Expr::constant(0.0);
            }
            Expr fn;
            if (name == "sin") {
                fn.op = Expr::Op::Sin;
            } else if (name == "exp") {
                fn.op = Expr::Op::Exp;
            } else if (name == "tanh") {
                fn.op = Expr::Op::Tanh;
            } else {
                fail("unknown function: " + name);
            }
            ++mul_depth;  // noise may not hide inside a function call
            fn.args.push_back(expression());
            --mul_depth;
            if (!eat(')')) fail("expected ')'");
            return fn;
        }
        return Expr::var_ref(name);
    }
};

}  // namespace

ScmSpec ScmSpec::parse(const std::string& text) {
    ScmSpec spec;
    std::set<std::string> latents;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string word;
        if (!(ls >> word)) continue;
        if (word == "exposure") {
            if (!(ls >> spec.exposure)) throw spec_error("line " + std::to_string(lineno) +
                                                         ": exposure needs a name");
        } else if (word == "outcome") {
            std::string ignored;  // accepted for symmetry; outcome is role metadata
            ls >> ignored;
        } else if (word == "latent") {
            std::string name;
            if (!(ls >> name)) throw spec_error("line " + std::to_string(lineno) +
                                                ": latent needs a name");
            latents.insert(name);
        } else if (word == "var") {
            std::string name;
            if (!(ls >> name)) throw spec_error("line " + std::to_string(lineno) +
                                                ": var needs a name");
            std::string rest;
            std::getline(ls, rest);
            const auto eq = rest.find('=');
            if (eq == std::string::npos) {
                throw spec_error("line " + std::to_string(lineno) + ": var needs '='");
            }
            Parser p;
            p.text = rest.substr(eq + 1);
            p.line = lineno;
            ScmVariable v;
            v.name = name;
            v.equation = p.expression();
            p.skip_space();
            if (p.pos != p.text.size()) p.fail("trailing characters in equation");
            if (!p.noise) p.fail("equation for " + name + " has no noise term");
            v.noise = *p.noise;
            spec.variables.push_back(std::move(v));
        } else {
            throw spec_error("line " + std::to_string(lineno) + ": unknown directive " + word);
        }
    }
    for (auto& v : spec.variables) v.latent = latents.count(v.name) > 0;
    spec.validate();
    return spec;
}

ScmSpec ScmSpec::parse_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw spec_error("cannot open spec file: " + path);
    std::ostringstream os;
    os << f.rdbuf();
    return parse(os.str());
}

ScmSpec ScmSpec::benchmark() {
    return parse(
        "exposure R\n"
        "var R = bernoulli(0.5)\n"
        "var X = normal(0, 1)\n"
        "var M1 = 2*R + 3*X + normal(0, 1)\n"
        "var M2 = 2*M1 + 3*R + 4*X + normal(0, 1)\n"
        "var Y = 2*M1 + 3*M2 + 4*R + 5*X + normal(0, 1)\n");
}

namespace {

double draw_noise(const NoiseSpec& ns, std::mt19937_64& rng) {
    if (ns.kind == NoiseSpec::Kind::Normal) {
        if (ns.b == 0.0) return ns.a;
        std::normal_distribution<double> d(ns.a, ns.b);
        return d(rng);
    }
    std::bernoulli_distribution d(ns.a);
    return d(rng) ? 1.0 : 0.0;
}

}  // namespace

data::Dataset sample(const ScmSpec& spec, std::size_t n, std::uint64_t seed) {
    spec.validate();
    auto rng = make_rng(seed, "sim");
    std::vector<std::vector<double>> values(spec.variables.size());
    for (auto& v : values) v.reserve(n);
    for (std::size_t row = 0; row < n; ++row) {
        std::map<std::string, double> env;
        for (std::size_t i = 0; i < spec.variables.size(); ++i) {
            const auto& v = spec.variables[i];
            const double val = v.equation.eval(env) + draw_noise(v.noise, rng);
            env[v.name] = val;
            values[i].push_back(val);
        }
    }
    data::Dataset d;
    std::string outcome;
    std::vector<std::string> observed;
    for (std::size_t i = 0; i < spec.variables.size(); ++i) {
        const auto& v = spec.variables[i];
        if (v.latent) continue;
        data::ColumnKind kind = data::ColumnKind::Continuous;
        if (v.noise.kind == NoiseSpec::Kind::Bernoulli && v.equation.linear_form() &&
            v.equation.linear_form()->first.empty()) {
            kind = data::ColumnKind::Binary;
        }
        d.add_column(v.name, kind, std::move(values[i]));
        observed.push_back(v.name);
        outcome = v.name;  // last observed variable is the outcome
    }
    if (n > 0) d.set_roles(spec.exposure, outcome, {});
    return d;
}

GroundTruth analytic_effects(const ScmSpec& spec, const std::vector<std::string>& m_cols) {
    spec.validate();
    if (!spec.all_linear()) {
        throw spec_error("analytic_effects requires an all-linear spec; use monte_carlo_effects");
    }
    const std::set<std::string> block(m_cols.begin(), m_cols.end());
    for (const auto& m : m_cols) spec.variable(m);

    // Group-mean shift of every variable under do(R=1) vs do(R=0).
    std::map<std::string, double> shift;
    for (const auto& v : spec.variables) {
        if (v.name == spec.exposure) {
            shift[v.name] = 1.0;
            continue;
        }
        auto lf = v.equation.linear_form();
        double s = 0.0;
        for (const auto& [p, c] : lf->first) s += c * shift.at(p);
        shift[v.name] = s;
    }
    const std::string outcome = spec.variables.back().name;

    // Total effect of each variable on the outcome in the graph with edges
    // into the block removed (block values are spliced, not generated).
    std::map<std::string, double> on_y;
    for (auto it = spec.variables.rbegin(); it != spec.variables.rend(); ++it) {
        const auto& v = *it;
        double t = v.name == outcome ? 1.0 : 0.0;
        for (const auto& w : spec.variables) {
            if (w.name == v.name || block.count(w.name) > 0) continue;
            auto lf = w.equation.linear_form();
            auto jt = lf->first.find(v.name);
            if (jt != lf->first.end() && on_y.count(w.name) > 0) t += jt->second * on_y.at(w.name);
        }
        on_y[v.name] = t;
    }

    GroundTruth gt;
    gt.method = "analytic_linear";
    gt.total = shift.at(outcome);
    double delta = 0.0;
    for (const auto& m : m_cols) delta += on_y.at(m) * shift.at(m);
    gt.delta = delta;
    gt.zeta = gt.total - gt.delta;
    return gt;
}

GroundTruth monte_carlo_effects(const ScmSpec& spec, const std::vector<std::string>& m_cols,
                                std::size_t n_sim, std::uint64_t seed) {
    spec.validate();
    const std::set<std::string> block(m_cols.begin(), m_cols.end());
    for (const auto& m : m_cols) spec.variable(m);
    auto rng = make_rng(seed, "mc");

    double sum_d = 0.0;
    double sumsq_d = 0.0;
    double sum_t = 0.0;
    for (std::size_t rep = 0; rep < n_sim; ++rep) {
        // Shared exogenous draw for the factual worlds.
        std::map<std::string, double> u;
        std::map<std::string, double> u_fresh;
        for (const auto& v : spec.variables) {
            u[v.name] = draw_noise(v.noise, rng);
            u_fresh[v.name] = draw_noise(v.noise, rng);
        }
        auto run = [&](double r_value, const std::map<std::string, double>& noise) {
            std::map<std::string, double> env;
            for (const auto& v : spec.variables) {
                env[v.name] = v.name == spec.exposure ? r_value
                                                      : v.equation.eval(env) + noise.at(v.name);
            }
            return env;
        };
        auto world_a = run(0.0, u);        // R = 0, factual
        auto world_c = run(1.0, u);        // R = 1, same noise (total effect)
        auto world_b = run(1.0, u_fresh);  // R = 1, fresh noise incl. block ancestors
        // Splice: block values from world B, everything else regenerated at
        // R = 0 with world A noise.
        std::map<std::string, double> env;
        for (const auto& v : spec.variables) {
            if (block.count(v.name) > 0) {
                env[v.name] = world_b.at(v.name);
            } else if (v.name == spec.exposure) {
                env[v.name] = 0.0;
            } else {
                env[v.name] = v.equation.eval(env) + u.at(v.name);
            }
        }
        const std::string& outcome = spec.variables.back().name;
        const double d = env.at(outcome) - world_a.at(outcome);
        sum_d += d;
        sumsq_d += d * d;
        sum_t += world_c.at(outcome) - world_a.at(outcome);
    }
    GroundTruth gt;
    gt.method = "monte_carlo";
    const double n = static_cast<double>(n_sim);
    gt.delta = sum_d / n;
    gt.total = sum_t / n;
    gt.zeta = gt.total - gt.delta;
    const double var = std::max(0.0, sumsq_d / n - gt.delta * gt.delta);
    gt.mc_se = std::sqrt(var / n);
    return gt;
}

TrueSets true_admissible_sets(const graph::MixedGraph& dag,
                              const std::vector<std::string>& observed, const std::string& m,
                              const std::string& outcome,
                              const std::vector<std::string>& also_observed) {
    using graph::Mark;
    TrueSets out;
    for (const auto& o : observed) {
        if (o == m || o == outcome) continue;
        auto mag = graph::latent_project(dag, {o, m, outcome});
        const int oi = 0;
        const int mi = 1;
        const int yi = 2;
        if (!mag.adjacent(mi, yi) || mag.mark_at(yi, mi) != Mark::Arrow ||
            mag.mark_at(mi, yi) != Mark::Tail) {
            continue;  // needs M -> Y
        }
        if (!mag.adjacent(oi, mi) || !mag.adjacent(oi, yi)) continue;
        if (mag.mark_at(yi, oi) != Mark::Arrow) continue;  // needs O o-> Y
        out.b_tilde.push_back(o);
        const bool o_to_m = mag.mark_at(oi, mi) == Mark::Tail;                // O -> M
        const bool m_bi_o = mag.mark_at(oi, mi) == Mark::Arrow &&
                            mag.mark_at(mi, oi) == Mark::Arrow;               // M <-> O
        const bool o_to_y = mag.mark_at(oi, yi) == Mark::Tail;                // O -> Y
        if (o_to_m && o_to_y) {
            out.b_small.push_back(o);
            out.b_big.push_back(o);
        } else if (o_to_m || (m_bi_o && o_to_y)) {
            out.b_big.push_back(o);  // types ii and iii
        }
    }
    // Identifiability fails under a latent common cause of M and Y: some
    // hidden node reaches both by directed paths whose interior is hidden too.
    std::set<std::string> obs(observed.begin(), observed.end());
    obs.insert(also_observed.begin(), also_observed.end());
    obs.insert(m);
    obs.insert(outcome);
    for (int l = 0; l < dag.node_count(); ++l) {
        if (obs.count(dag.name(l))) continue;
        // BFS forward through hidden nodes; observed nodes are terminals.
        std::set<int> seen{l};
        std::vector<int> frontier{l};
        std::set<std::string> hits;
        while (!frontier.empty()) {
            const int v = frontier.back();
            frontier.pop_back();
            for (int w : dag.neighbors(v)) {
                if (dag.mark_at(v, w) != Mark::Tail || dag.mark_at(w, v) != Mark::Arrow) continue;
                if (!seen.insert(w).second) continue;
                if (obs.count(dag.name(w))) {
                    hits.insert(dag.name(w));
                } else {
                    frontier.push_back(w);
                }
            }
        }
        if (hits.count(m) && hits.count(outcome)) {
            out.identifiable = false;
            break;
        }
    }
    return out;
}

TrueSets true_admissible_sets(const ScmSpec& spec, const std::string& m) {
    auto dag = spec.to_dag();
    auto observed = spec.observed_names();
    const std::string outcome = spec.variables.back().latent
                                    ? spec.observed_names().back()
                                    : spec.variables.back().name;
    std::vector<std::string> candidates;
    for (const auto& name : observed) {
        if (name != spec.exposure) candidates.push_back(name);
    }
    return true_admissible_sets(dag, candidates, m, outcome, {spec.exposure});
}

std::vector<std::string> true_mediators(const ScmSpec& spec) {
    auto dag = spec.to_dag();
    auto observed = spec.observed_names();
    const std::string outcome = observed.back();
    const int r = dag.index_of(spec.exposure);
    const int y = dag.index_of(outcome);
    std::vector<std::string> out;
    for (const auto& name : observed) {
        if (name == spec.exposure || name == outcome) continue;
        const int o = dag.index_of(name);
        const bool dep_r = !graph::m_separated(dag, o, r, {});
        const bool dep_r_y = !graph::m_separated(dag, o, r, {y});
        const bool dep_y = !graph::m_separated(dag, o, y, {});
        const bool dep_y_r = !graph::m_separated(dag, o, y, {r});
        if (dep_r && dep_r_y && dep_y && dep_y_r) out.push_back(name);
    }
    return out;
}

}  // namespace disparity::scm
