#pragma once

// Independent reference implementations used to cross-check the library.
// Everything here is deliberately naive: exhaustive path enumeration instead
// of reachability, repeated scans instead of closures.

#include <algorithm>
#include <set>
#include <vector>

#include "disparity/graph.hpp"

namespace oracle {

using disparity::graph::Mark;
using disparity::graph::MixedGraph;

inline std::set<int> ancestor_closure(const MixedGraph& g, const std::set<int>& seeds) {
    std::set<int> anc = seeds;
    bool grew = true;
    while (grew) {
        grew = false;
        for (const auto& [a, b, ma, mb] : g.edges()) {
            // tail at a, arrow at b means a -> b
            if (ma == Mark::Tail && mb == Mark::Arrow && anc.count(b) && !anc.count(a)) {
                anc.insert(a);
                grew = true;
            }
            if (mb == Mark::Tail && ma == Mark::Arrow && anc.count(a) && !anc.count(b)) {
                anc.insert(b);
                grew = true;
            }
        }
    }
    return anc;
}

inline void all_simple_paths(const MixedGraph& g, int cur, int target, std::vector<int>& path,
                             std::vector<bool>& used, std::vector<std::vector<int>>& out) {
    if (cur == target) {
        out.push_back(path);
        return;
    }
    for (int nb : g.neighbors(cur)) {
        if (used[static_cast<std::size_t>(nb)]) continue;
        used[static_cast<std::size_t>(nb)] = true;
        path.push_back(nb);
        all_simple_paths(g, nb, target, path, used, out);
        path.pop_back();
        used[static_cast<std::size_t>(nb)] = false;
    }
}

/// m-separation by enumerating every simple path and testing it for blocking.
inline bool m_separated_bruteforce(const MixedGraph& g, int x, int y,
                                   const std::vector<int>& z) {
    if (x == y) return false;
    std::set<int> zs(z.begin(), z.end());
    if (zs.count(x) || zs.count(y)) {
        throw disparity::graph::input_error("endpoints cannot be conditioned on");
    }
    std::set<int> anc_z = ancestor_closure(g, zs);
    std::vector<std::vector<int>> paths;
    std::vector<int> path{x};
    std::vector<bool> used(static_cast<std::size_t>(g.node_count()), false);
    used[static_cast<std::size_t>(x)] = true;
    all_simple_paths(g, x, y, path, used, paths);
    for (const auto& p : paths) {
        bool blocked = false;
        for (std::size_t i = 1; i + 1 < p.size(); ++i) {
            const int v = p[i];
            const bool collider = g.mark_at(v, p[i - 1]) == Mark::Arrow &&
                                  g.mark_at(v, p[i + 1]) == Mark::Arrow;
            if (collider) {
                if (!anc_z.count(v)) {
                    blocked = true;
                    break;
                }
            } else if (zs.count(v)) {
                blocked = true;
                break;
            }
        }
        if (!blocked) return false;
    }
    return true;
}

/// All subsets of `pool` (pool small).
inline std::vector<std::vector<int>> all_subsets(const std::vector<int>& pool) {
    std::vector<std::vector<int>> out;
    const std::size_t n = pool.size();
    for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
        std::vector<int> s;
        for (std::size_t i = 0; i < n; ++i) {
            if (mask & (std::size_t{1} << i)) s.push_back(pool[i]);
        }
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace oracle
