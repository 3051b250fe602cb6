#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "disparity/ci.hpp"
#include "disparity/graph.hpp"

namespace disparity::local_mag {

struct inconsistency_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Role constraints that prune impossible class members: the outcome is a
/// sink (every mark at it is an arrowhead) and context variables are roots
/// (tail at the context, arrowhead at the other end, on every incident edge).
struct Knowledge {
    std::optional<std::string> outcome;
    std::set<std::string> contexts;

    bool admits(const graph::MixedGraph& g) const;
};

/// The Markov equivalence class of the MAG over `vars` (3 or 4 nodes),
/// represented by explicit members: every MAG whose m-separation relation
/// matches the CI decisions for all pairs given all subsets of the rest.
/// Throws inconsistency_error (listing the conflicting queries) when no MAG
/// matches.
std::vector<graph::MixedGraph> learn_local_class(ci::CiSource& src,
                                                 const std::vector<std::string>& vars,
                                                 double alpha, const Knowledge& know = {});

/// Triple taxonomy for (o, m, y), each type tacitly including an m -> y edge:
///   i: M<-O->Y   ii: M<-O<->Y   iii: M<->O->Y
///  iv: M->O->Y    v: M->O<->Y    vi: M<->O<->Y
enum class TripleType { i, ii, iii, iv, v, vi };

struct TripleClass {
    std::set<TripleType> possible_types;
    bool my_edge_present = false;  // every member has m *-> y
    bool o_bridges = false;        // every member has o adjacent to m and o *-> y
    bool my_arrow_at_m = false;    // every member has an arrowhead at m on the m-y edge
};

TripleClass classify_triple(const std::vector<graph::MixedGraph>& cls, const std::string& o,
                            const std::string& m, const std::string& y);

struct LemmaLargeResult {
    bool big_member = false;
    std::string justification;
    std::optional<std::string> context;  // the witness context, when one fired
};

/// Context-variable shortcut for big-set membership:
/// condition 1 — some context c has class over (c, m, o) with c -> o, o - m
/// unshielded, and no arrowhead at o from m in any member (rules out types
/// iii-vi);
/// condition 2 — some context c has class over (c, m, o) with c -> m, m - o
/// unshielded, and an arrowhead at m from o in every member (rules out iv, v),
/// plus a context c' adjacent to m and non-adjacent to y in the 4-node class
/// over (c', m, o, y) where o is a non-collider on the discriminating path
/// <c', m, o, y> in every member (rules out vi).
LemmaLargeResult check_lemma_large(ci::CiSource& src, const std::string& o, const std::string& m,
                                   const std::string& y, const std::vector<std::string>& contexts,
                                   double alpha, const Knowledge& know = {});

}  // namespace disparity::local_mag
