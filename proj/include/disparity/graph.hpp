#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace disparity::graph {

/// Endpoint mark of a mixed-graph edge.
enum class Mark : std::uint8_t { Tail, Arrow, Circle };

struct input_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Mixed graph over named nodes: at most one edge per unordered pair, with a
/// mark at each endpoint. Covers DAGs (all tail->arrow) and MAGs
/// (tail/arrow only, ancestral, maximal).
class MixedGraph {
public:
    MixedGraph() = default;
    explicit MixedGraph(std::vector<std::string> node_names);

    int node_count() const { return static_cast<int>(names_.size()); }
    const std::vector<std::string>& node_names() const { return names_; }
    const std::string& name(int v) const { return names_.at(static_cast<std::size_t>(v)); }
    int index_of(const std::string& name) const;
    bool has_node(const std::string& name) const { return index_.count(name) > 0; }

    /// Adds the edge a-b with mark `at_a` at a and `at_b` at b.
    void add_edge(int a, int b, Mark at_a, Mark at_b);
    void add_edge(const std::string& a, const std::string& b, Mark at_a, Mark at_b);
    /// Convenience for directed edges a -> b.
    void add_directed(const std::string& a, const std::string& b) {
        add_edge(a, b, Mark::Tail, Mark::Arrow);
    }
    void remove_edge(int a, int b);

    bool adjacent(int a, int b) const;
    /// Mark at endpoint `at` of the edge between `at` and `other`; throws if absent.
    Mark mark_at(int at, int other) const;
    std::vector<int> neighbors(int v) const;
    int edge_count() const { return static_cast<int>(edges_.size()); }
    /// All edges as (a, b, mark_at_a, mark_at_b) with a < b.
    std::vector<std::tuple<int, int, Mark, Mark>> edges() const;

    bool is_dag() const;
    bool is_ancestral() const;
    bool is_maximal() const;
    bool is_mag() const { return is_ancestral() && is_maximal() && !has_circle(); }
    bool has_circle() const;

    /// Same node set and identical adjacencies (ignoring marks).
    bool same_skeleton(const MixedGraph& other) const;

    bool operator==(const MixedGraph& other) const;

private:
    std::uint64_t key(int a, int b) const;
    void check_node(int v) const;

    std::vector<std::string> names_;
    std::unordered_map<std::string, int> index_;
    // key = min*N+max -> (mark at min-node, mark at max-node)
    std::unordered_map<std::uint64_t, std::pair<Mark, Mark>> edges_;
};

struct SeparationQuery {
    int x = -1;
    int y = -1;
    std::vector<int> z;
};

/// True iff every path between x and y is blocked by z (collider = arrowheads
/// at the node from both path edges; an open collider must be an ancestor of z).
bool m_separated(const MixedGraph& g, const SeparationQuery& q);
bool m_separated(const MixedGraph& g, int x, int y, const std::vector<int>& z);
/// Set form: every pair (x in xs, y in ys) separated by z.
bool m_separated_sets(const MixedGraph& g, const std::vector<int>& xs,
                      const std::vector<int>& ys, const std::vector<int>& z);

/// Reflexive-transitive closure along tail->arrow edges; v is its own ancestor.
std::set<int> ancestors(const MixedGraph& g, int v);
std::set<int> ancestors_of_set(const MixedGraph& g, const std::vector<int>& vs);
std::set<int> descendants(const MixedGraph& g, int v);

/// G with edges whose arrowhead lands in `remove_into` deleted, and edges
/// whose tail sits in `remove_out_of` deleted. DAG input.
MixedGraph manipulate(const MixedGraph& g, const std::vector<int>& remove_into,
                      const std::vector<int>& remove_out_of);

/// Triples (a, b, c), a < c, with arrowheads at b from both sides and a, c
/// non-adjacent.
std::vector<std::array<int, 3>> unshielded_colliders(const MixedGraph& g);

/// All discriminating paths <X, W_1..W_K, V, Y> for node v: X, Y non-adjacent,
/// v adjacent to Y, every W_k a collider on the path and a parent of Y, K >= 1.
std::vector<std::vector<int>> discriminating_paths(const MixedGraph& g, int v);

/// Markov equivalence of two MAGs over the same node set (same skeleton, same
/// unshielded colliders, matching collider status on shared discriminating paths).
bool markov_equivalent(const MixedGraph& g1, const MixedGraph& g2);

/// MAG of the DAG g over `observed`: a, b adjacent iff no subset of the other
/// observed nodes separates them in g; mark tail at a iff a is an ancestor of b.
MixedGraph latent_project(const MixedGraph& dag, const std::vector<std::string>& observed);

/// All MAGs on the node set (<= 5 nodes).
std::vector<MixedGraph> enumerate_mags(const std::vector<std::string>& node_names);

/// Line-oriented text form, e.g. "X -> Y", "M <-> O", "M o-o O".
std::string format_edges(const MixedGraph& g);
MixedGraph parse_edges(const std::vector<std::string>& node_names,
                       const std::string& text);

}  // namespace disparity::graph
