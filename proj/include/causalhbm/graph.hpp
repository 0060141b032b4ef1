#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <utility>
#include <vector>

#include "causalhbm/errors.hpp"

namespace causalhbm {

enum class NodeRole { Intervention, Covariate, Target };

using AdjacencyMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

// Node subsets are 64-bit masks; graphs are capped at 64 nodes.
using NodeMask = std::uint64_t;

inline NodeMask node_bit(int u) { return NodeMask{1} << u; }

inline NodeMask mask_of(std::initializer_list<int> nodes) {
    NodeMask m = 0;
    for (int u : nodes) m |= node_bit(u);
    return m;
}

// Directed acyclic graph over K feature nodes plus the target Y.
//
// Node K (the last index) is the target. edges(u, v) == true means u -> v.
struct Dag {
    int n_nodes = 0;
    AdjacencyMatrix edges;
    std::vector<NodeRole> roles;
};

Dag make_dag(int n_nodes, const std::vector<std::pair<int, int>>& edge_list,
             std::vector<NodeRole> roles);

// Convenience for test graphs: roles default to covariates + trailing target.
Dag make_dag(int n_nodes, const std::vector<std::pair<int, int>>& edge_list);

int target_index(const Dag& g);
std::vector<int> intervention_indices(const Dag& g);

// Checks every structural invariant; throws InvalidDagError / CyclicGraphError.
void validate(const Dag& g);
bool is_valid(const Dag& g) noexcept;

// Nodes ordered so every edge goes from an earlier to a later position.
// Ties are broken by ascending index. Throws CyclicGraphError on a cycle.
std::vector<int> topological_order(const Dag& g);

// All v != u reachable from u along directed edges, as a mask / sorted list.
NodeMask descendant_mask(const Dag& g, int u);
std::vector<int> descendants(const Dag& g, int u);

NodeMask ancestor_mask(const Dag& g, int u);

// d-separation of x and y given the conditioning set z.
bool d_separated(const Dag& g, int x, int y, NodeMask z);

// Structural Hamming distance: number of ordered node pairs whose directed
// edge indicator differs (a reversal therefore costs 2).
int shd(const Dag& g1, const Dag& g2);

// Adjustment criterion for the effect of i on j in g:
//  (a) z contains no node on a directed path from i to j (i excluded) nor any
//      descendant of such a node, and
//  (b) z d-separates i and j in the graph with the first edge of every
//      directed i->...->j path removed.
bool valid_adjustment(const Dag& g, int i, int j, NodeMask z);

// Structural intervention distance: ordered pairs (i, j) for which the
// parents of i in g_other are not a valid adjustment set in g_true. When
// j is itself a parent of i in g_other the pair counts iff j is a
// descendant of i in g_true.
int sid(const Dag& g_true, const Dag& g_other);

}  // namespace causalhbm
