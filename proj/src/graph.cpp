#include "disparity/graph.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <map>
#include <sstream>

namespace disparity::graph {

MixedGraph::MixedGraph(std::vector<std::string> node_names) : names_(std::move(node_names)) {
    for (int i = 0; i < static_cast<int>(names_.size()); ++i) {
        if (!index_.emplace(names_[static_cast<std::size_t>(i)], i).second) {
            throw input_error("duplicate node name: " + names_[static_cast<std::size_t>(i)]);
        }
    }
}

int MixedGraph::index_of(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw input_error("unknown node: " + name);
    return it->second;
}

std::uint64_t MixedGraph::key(int a, int b) const {
    const auto lo = static_cast<std::uint64_t>(std::min(a, b));
    const auto hi = static_cast<std::uint64_t>(std::max(a, b));
    return lo * static_cast<std::uint64_t>(names_.size()) + hi;
}

void MixedGraph::check_node(int v) const {
    if (v < 0 || v >= node_count()) throw input_error("node index out of range");
}

void MixedGraph::add_edge(int a, int b, Mark at_a, Mark at_b) {
    check_node(a);
    check_node(b);
    if (a == b) throw input_error("self-loop on node " + name(a));
    if (a > b) {
        std::swap(a, b);
        std::swap(at_a, at_b);
    }
    edges_[key(a, b)] = {at_a, at_b};
}

void MixedGraph::add_edge(const std::string& a, const std::string& b, Mark at_a, Mark at_b) {
    add_edge(index_of(a), index_of(b), at_a, at_b);
}

void MixedGraph::remove_edge(int a, int b) {
    check_node(a);
    check_node(b);
    edges_.erase(key(a, b));
}

bool MixedGraph::adjacent(int a, int b) const {
    check_node(a);
    check_node(b);
    if (a == b) return false;
    return edges_.count(key(a, b)) > 0;
}

Mark MixedGraph::mark_at(int at, int other) const {
    check_node(at);
    check_node(other);
    auto it = edges_.find(key(at, other));
    if (it == edges_.end()) throw input_error("no edge between " + name(at) + " and " + name(other));
    return at < other ? it->second.first : it->second.second;
}

std::vector<int> MixedGraph::neighbors(int v) const {
    check_node(v);
    std::vector<int> out;
    for (int u = 0; u < node_count(); ++u) {
        if (u != v && adjacent(v, u)) out.push_back(u);
    }
    return out;
}

std::vector<std::tuple<int, int, Mark, Mark>> MixedGraph::edges() const {
    std::vector<std::tuple<int, int, Mark, Mark>> out;
    out.reserve(edges_.size());
    for (int a = 0; a < node_count(); ++a) {
        for (int b = a + 1; b < node_count(); ++b) {
            auto it = edges_.find(key(a, b));
            if (it != edges_.end()) out.emplace_back(a, b, it->second.first, it->second.second);
        }
    }
    return out;
}

bool MixedGraph::has_circle() const {
    for (const auto& [k, marks] : edges_) {
        (void)k;
        if (marks.first == Mark::Circle || marks.second == Mark::Circle) return true;
    }
    return false;
}

bool MixedGraph::is_dag() const {
    for (const auto& [a, b, ma, mb] : edges()) {
        const bool fwd = ma == Mark::Tail && mb == Mark::Arrow;
        const bool bwd = ma == Mark::Arrow && mb == Mark::Tail;
        if (!fwd && !bwd) return false;
        (void)a;
        (void)b;
    }
    // Acyclic: every node's ancestor set excludes its proper descendants.
    for (int v = 0; v < node_count(); ++v) {
        auto anc = ancestors(*this, v);
        for (int u : anc) {
            if (u != v && ancestors(*this, u).count(v) > 0) return false;
        }
    }
    return true;
}

bool MixedGraph::is_ancestral() const {
    if (has_circle()) return false;
    std::vector<std::set<int>> anc(static_cast<std::size_t>(node_count()));
    for (int v = 0; v < node_count(); ++v) anc[static_cast<std::size_t>(v)] = ancestors(*this, v);
    for (const auto& [a, b, ma, mb] : edges()) {
        if (ma == Mark::Tail && mb == Mark::Arrow) {
            // a -> b: a directed cycle would make b an ancestor of a.
            if (anc[static_cast<std::size_t>(a)].count(b) > 0) return false;
        } else if (ma == Mark::Arrow && mb == Mark::Tail) {
            if (anc[static_cast<std::size_t>(b)].count(a) > 0) return false;
        } else if (ma == Mark::Arrow && mb == Mark::Arrow) {
            if (anc[static_cast<std::size_t>(a)].count(b) > 0 ||
                anc[static_cast<std::size_t>(b)].count(a) > 0) {
                return false;
            }
        } else {
            return false;  // tail-tail edges have no MAG meaning
        }
    }
    return true;
}

bool MixedGraph::is_maximal() const {
    const int n = node_count();
    for (int a = 0; a < n; ++a) {
        for (int b = a + 1; b < n; ++b) {
            if (adjacent(a, b)) continue;
            std::vector<int> rest;
            for (int v = 0; v < n; ++v) {
                if (v != a && v != b) rest.push_back(v);
            }
            bool separated = false;
            const std::size_t m = rest.size();
            for (std::uint32_t bits = 0; bits < (1u << m) && !separated; ++bits) {
                std::vector<int> z;
                for (std::size_t i = 0; i < m; ++i) {
                    if (bits & (1u << i)) z.push_back(rest[i]);
                }
                separated = m_separated(*this, a, b, z);
            }
            if (!separated) return false;
        }
    }
    return true;
}

bool MixedGraph::same_skeleton(const MixedGraph& other) const {
    if (names_ != other.names_) return false;
    for (int a = 0; a < node_count(); ++a) {
        for (int b = a + 1; b < node_count(); ++b) {
            if (adjacent(a, b) != other.adjacent(a, b)) return false;
        }
    }
    return true;
}

bool MixedGraph::operator==(const MixedGraph& other) const {
    return names_ == other.names_ && edges_ == other.edges_;
}

bool m_separated(const MixedGraph& g, int x, int y, const std::vector<int>& z) {
    return m_separated(g, SeparationQuery{x, y, z});
}

bool m_separated(const MixedGraph& g, const SeparationQuery& q) {
    const int n = g.node_count();
    if (q.x < 0 || q.x >= n || q.y < 0 || q.y >= n) throw input_error("unknown node in query");
    if (q.x == q.y) throw input_error("x and y must differ");
    std::vector<bool> in_z(static_cast<std::size_t>(n), false);
    for (int v : q.z) {
        if (v < 0 || v >= n) throw input_error("unknown node in conditioning set");
        if (v == q.x || v == q.y) throw input_error("conditioning set overlaps query pair");
        in_z[static_cast<std::size_t>(v)] = true;
    }
    const auto anc_z = ancestors_of_set(g, q.z);

    // Reachability over half-edge states (node, incoming mark at node).
    // A collider on a path has arrowheads at it from both path edges.
    std::vector<std::array<bool, 2>> seen(static_cast<std::size_t>(n), {false, false});
    std::deque<std::pair<int, bool>> queue;  // (node, arrived-with-arrowhead-at-node)
    auto push = [&](int v, bool in_arrow) {
        auto& s = seen[static_cast<std::size_t>(v)][in_arrow ? 1 : 0];
        if (!s) {
            s = true;
            queue.emplace_back(v, in_arrow);
        }
    };
    for (int w : g.neighbors(q.x)) {
        if (w == q.y) return false;  // direct edge is never blocked
        push(w, g.mark_at(w, q.x) == Mark::Arrow);
    }
    while (!queue.empty()) {
        auto [v, in_arrow] = queue.front();
        queue.pop_front();
        for (int w : g.neighbors(v)) {
            const bool out_arrow = g.mark_at(v, w) == Mark::Arrow;
            const bool collider = in_arrow && out_arrow;
            const bool passable =
                collider ? anc_z.count(v) > 0 : !in_z[static_cast<std::size_t>(v)];
            if (!passable) continue;
            if (w == q.y) return false;
            push(w, g.mark_at(w, v) == Mark::Arrow);
        }
    }
    return true;
}

bool m_separated_sets(const MixedGraph& g, const std::vector<int>& xs,
                      const std::vector<int>& ys, const std::vector<int>& z) {
    for (int x : xs) {
        for (int y : ys) {
            if (x == y) return false;
            if (!m_separated(g, x, y, z)) return false;
        }
    }
    return true;
}

std::set<int> ancestors(const MixedGraph& g, int v) {
    if (v < 0 || v >= g.node_count()) throw input_error("unknown node");
    std::set<int> anc{v};
    std::deque<int> queue{v};
    while (!queue.empty()) {
        const int cur = queue.front();
        queue.pop_front();
        for (int u : g.neighbors(cur)) {
            // u -> cur: tail at u, arrow at cur
            if (g.mark_at(u, cur) == Mark::Tail && g.mark_at(cur, u) == Mark::Arrow) {
                if (anc.insert(u).second) queue.push_back(u);
            }
        }
    }
    return anc;
}

std::set<int> ancestors_of_set(const MixedGraph& g, const std::vector<int>& vs) {
    std::set<int> out;
    for (int v : vs) {
        auto a = ancestors(g, v);
        out.insert(a.begin(), a.end());
    }
    return out;
}

std::set<int> descendants(const MixedGraph& g, int v) {
    if (v < 0 || v >= g.node_count()) throw input_error("unknown node");
    std::set<int> out;
    for (int u = 0; u < g.node_count(); ++u) {
        if (ancestors(g, u).count(v) > 0) out.insert(u);
    }
    return out;
}

MixedGraph manipulate(const MixedGraph& g, const std::vector<int>& remove_into,
                      const std::vector<int>& remove_out_of) {
    std::set<int> into(remove_into.begin(), remove_into.end());
    std::set<int> out_of(remove_out_of.begin(), remove_out_of.end());
    for (int v : into) {
        if (v < 0 || v >= g.node_count()) throw input_error("unknown node");
    }
    for (int v : out_of) {
        if (v < 0 || v >= g.node_count()) throw input_error("unknown node");
    }
    MixedGraph result(g.node_names());
    for (const auto& [a, b, ma, mb] : g.edges()) {
        const bool drop = (mb == Mark::Arrow && into.count(b) > 0) ||
                          (ma == Mark::Arrow && into.count(a) > 0) ||
                          (ma == Mark::Tail && out_of.count(a) > 0) ||
                          (mb == Mark::Tail && out_of.count(b) > 0);
        if (!drop) result.add_edge(a, b, ma, mb);
    }
    return result;
}

std::vector<std::array<int, 3>> unshielded_colliders(const MixedGraph& g) {
    std::vector<std::array<int, 3>> out;
    const int n = g.node_count();
    for (int b = 0; b < n; ++b) {
        for (int a = 0; a < n; ++a) {
            if (a == b || !g.adjacent(a, b)) continue;
            for (int c = a + 1; c < n; ++c) {
                if (c == b || !g.adjacent(c, b)) continue;
                if (g.adjacent(a, c)) continue;
                if (g.mark_at(b, a) == Mark::Arrow && g.mark_at(b, c) == Mark::Arrow) {
                    out.push_back({a, b, c});
                }
            }
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

namespace {

bool collider_on_path(const MixedGraph& g, int prev, int node, int next) {
    return g.mark_at(node, prev) == Mark::Arrow && g.mark_at(node, next) == Mark::Arrow;
}

bool parent_of(const MixedGraph& g, int p, int c) {
    return g.adjacent(p, c) && g.mark_at(p, c) == Mark::Tail && g.mark_at(c, p) == Mark::Arrow;
}

}  // namespace

std::vector<std::vector<int>> discriminating_paths(const MixedGraph& g, int v) {
    if (v < 0 || v >= g.node_count()) throw input_error("unknown node");
    std::vector<std::vector<int>> out;
    // Build paths right-to-left: path holds [leftmost, ..., v, y]. Every node
    // strictly between the leftmost and v already satisfies the W conditions.
    std::function<void(std::vector<int>&)> extend = [&](std::vector<int>& path) {
        const int leftmost = path.front();
        const int y = path.back();
        for (int t = 0; t < g.node_count(); ++t) {
            if (!g.adjacent(t, leftmost)) continue;
            if (std::find(path.begin(), path.end(), t) != path.end()) continue;
            if (static_cast<int>(path.size()) > 2) {
                // The current leftmost becomes a W: collider on path, parent of y.
                if (!parent_of(g, leftmost, y)) continue;
                if (!collider_on_path(g, t, leftmost, path[1])) continue;
            }
            if (!g.adjacent(t, y)) {
                if (static_cast<int>(path.size()) > 2) {  // at least one W
                    std::vector<int> full;
                    full.push_back(t);
                    full.insert(full.end(), path.begin(), path.end());
                    out.push_back(std::move(full));
                }
                continue;
            }
            path.insert(path.begin(), t);
            extend(path);
            path.erase(path.begin());
        }
    };
    for (int y : g.neighbors(v)) {
        std::vector<int> path{v, y};
        extend(path);
    }
    std::sort(out.begin(), out.end());
    return out;
}

bool markov_equivalent(const MixedGraph& g1, const MixedGraph& g2) {
    if (g1.node_names() != g2.node_names()) throw input_error("node sets differ");
    if (!g1.same_skeleton(g2)) return false;
    if (unshielded_colliders(g1) != unshielded_colliders(g2)) return false;

    auto is_discriminating = [](const MixedGraph& g, const std::vector<int>& p) {
        const int len = static_cast<int>(p.size());
        const int y = p[static_cast<std::size_t>(len - 1)];
        if (g.adjacent(p[0], y)) return false;
        for (int i = 1; i + 2 < len; ++i) {
            const int w = p[static_cast<std::size_t>(i)];
            if (!parent_of(g, w, y)) return false;
            if (!collider_on_path(g, p[static_cast<std::size_t>(i - 1)], w,
                                  p[static_cast<std::size_t>(i + 1)])) {
                return false;
            }
        }
        for (int i = 0; i + 1 < len; ++i) {
            if (!g.adjacent(p[static_cast<std::size_t>(i)], p[static_cast<std::size_t>(i + 1)]))
                return false;
        }
        return true;
    };
    auto check = [&](const MixedGraph& a, const MixedGraph& b) {
        for (int v = 0; v < a.node_count(); ++v) {
            for (const auto& p : discriminating_paths(a, v)) {
                if (!is_discriminating(b, p)) continue;
                const int len = static_cast<int>(p.size());
                const int prev = p[static_cast<std::size_t>(len - 3)];
                const int y = p[static_cast<std::size_t>(len - 1)];
                if (collider_on_path(a, prev, v, y) != collider_on_path(b, prev, v, y)) {
                    return false;
                }
            }
        }
        return true;
    };
    return check(g1, g2) && check(g2, g1);
}

MixedGraph latent_project(const MixedGraph& dag, const std::vector<std::string>& observed) {
    std::vector<int> obs;
    obs.reserve(observed.size());
    for (const auto& name : observed) obs.push_back(dag.index_of(name));

    MixedGraph mag(observed);
    if (observed.size() < 2) return mag;

    std::vector<std::set<int>> anc(static_cast<std::size_t>(dag.node_count()));
    for (int v = 0; v < dag.node_count(); ++v) anc[static_cast<std::size_t>(v)] = ancestors(dag, v);

    const std::size_t k = observed.size();
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i + 1; j < k; ++j) {
            const int a = obs[i];
            const int b = obs[j];
            // Adjacent iff no subset of the remaining observed nodes separates them.
            bool separable = false;
            std::vector<int> rest;
            for (std::size_t t = 0; t < k; ++t) {
                if (t != i && t != j) rest.push_back(obs[t]);
            }
            for (std::uint32_t bits = 0; bits < (1u << rest.size()) && !separable; ++bits) {
                std::vector<int> z;
                for (std::size_t t = 0; t < rest.size(); ++t) {
                    if (bits & (1u << t)) z.push_back(rest[t]);
                }
                separable = m_separated(dag, a, b, z);
            }
            if (separable) continue;
            const Mark at_a =
                anc[static_cast<std::size_t>(b)].count(a) > 0 ? Mark::Tail : Mark::Arrow;
            const Mark at_b =
                anc[static_cast<std::size_t>(a)].count(b) > 0 ? Mark::Tail : Mark::Arrow;
            mag.add_edge(static_cast<int>(i), static_cast<int>(j), at_a, at_b);
        }
    }
    return mag;
}

std::vector<MixedGraph> enumerate_mags(const std::vector<std::string>& node_names) {
    const int n = static_cast<int>(node_names.size());
    if (n > 5) throw input_error("enumerate_mags supports at most 5 nodes");
    std::vector<std::pair<int, int>> pairs;
    for (int a = 0; a < n; ++a) {
        for (int b = a + 1; b < n; ++b) pairs.emplace_back(a, b);
    }
    std::vector<MixedGraph> out;
    const std::size_t npairs = pairs.size();
    std::uint64_t total = 1;
    for (std::size_t i = 0; i < npairs; ++i) total *= 4;
    for (std::uint64_t code = 0; code < total; ++code) {
        MixedGraph g(node_names);
        std::uint64_t c = code;
        for (const auto& [a, b] : pairs) {
            switch (c % 4) {
                case 0: break;  // no edge
                case 1: g.add_edge(a, b, Mark::Tail, Mark::Arrow); break;
                case 2: g.add_edge(a, b, Mark::Arrow, Mark::Tail); break;
                case 3: g.add_edge(a, b, Mark::Arrow, Mark::Arrow); break;
            }
            c /= 4;
        }
        if (g.is_ancestral() && g.is_maximal()) out.push_back(std::move(g));
    }
    return out;
}

namespace {

std::string mark_left(Mark m) {
    switch (m) {
        case Mark::Tail: return "-";
        case Mark::Arrow: return "<";
        case Mark::Circle: return "o";
    }
    return "?";
}

std::string mark_right(Mark m) {
    switch (m) {
        case Mark::Tail: return "-";
        case Mark::Arrow: return ">";
        case Mark::Circle: return "o";
    }
    return "?";
}

}  // namespace

std::string format_edges(const MixedGraph& g) {
    std::ostringstream os;
    for (const auto& [a, b, ma, mb] : g.edges()) {
        os << g.name(a) << ' ' << mark_left(ma) << mark_right(mb) << ' ' << g.name(b) << '\n';
    }
    return os.str();
}

MixedGraph parse_edges(const std::vector<std::string>& node_names, const std::string& text) {
    MixedGraph g(node_names);
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        std::istringstream ls(line);
        std::string a, marks, b;
        if (!(ls >> a >> marks >> b)) {
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            throw input_error("malformed edge line: " + line);
        }
        if (marks.size() != 2 && marks.size() != 3) throw input_error("bad marks: " + marks);
        // Accept "<->" by collapsing the middle dash.
        if (marks.size() == 3) {
            if (marks[1] != '-') throw input_error("bad marks: " + marks);
            marks = std::string{marks[0], marks[2]};
        }
        auto left = [&](char c) -> Mark {
            if (c == '-') return Mark::Tail;
            if (c == '<') return Mark::Arrow;
            if (c == 'o') return Mark::Circle;
            throw input_error(std::string("bad mark char: ") + c);
        };
        auto right = [&](char c) -> Mark {
            if (c == '-') return Mark::Tail;
            if (c == '>') return Mark::Arrow;
            if (c == 'o') return Mark::Circle;
            throw input_error(std::string("bad mark char: ") + c);
        };
        g.add_edge(a, b, left(marks[0]), right(marks[1]));
    }
    return g;
}

}  // namespace disparity::graph
