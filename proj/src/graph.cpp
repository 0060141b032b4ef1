#include "causalhbm/graph.hpp"

#include <algorithm>
#include <deque>

namespace causalhbm {

namespace {

constexpr int kMaxNodes = 64;

void check_node(const Dag& g, int u, const char* what) {
    if (u < 0 || u >= g.n_nodes) {
        throw InvalidDagError(std::string(what) + " index out of range: " + std::to_string(u));
    }
}

}  // namespace

Dag make_dag(int n_nodes, const std::vector<std::pair<int, int>>& edge_list,
             std::vector<NodeRole> roles) {
    if (n_nodes < 1 || n_nodes > kMaxNodes) {
        throw InvalidDagError("n_nodes must be in [1, 64], got " + std::to_string(n_nodes));
    }
    Dag g;
    g.n_nodes = n_nodes;
    g.edges = AdjacencyMatrix::Constant(n_nodes, n_nodes, false);
    g.roles = std::move(roles);
    if (static_cast<int>(g.roles.size()) != n_nodes) {
        throw InvalidDagError("roles length does not match n_nodes");
    }
    for (const auto& [u, v] : edge_list) {
        check_node(g, u, "edge source");
        check_node(g, v, "edge target");
        if (u == v) throw InvalidDagError("self-loop at node " + std::to_string(u));
        g.edges(u, v) = true;
    }
    return g;
}

Dag make_dag(int n_nodes, const std::vector<std::pair<int, int>>& edge_list) {
    std::vector<NodeRole> roles(static_cast<std::size_t>(n_nodes), NodeRole::Covariate);
    roles.back() = NodeRole::Target;
    return make_dag(n_nodes, edge_list, std::move(roles));
}

int target_index(const Dag& g) { return g.n_nodes - 1; }

std::vector<int> intervention_indices(const Dag& g) {
    std::vector<int> out;
    for (int u = 0; u < g.n_nodes; ++u) {
        if (g.roles[u] == NodeRole::Intervention) out.push_back(u);
    }
    return out;
}

std::vector<int> topological_order(const Dag& g) {
    std::vector<int> indegree(g.n_nodes, 0);
    for (int u = 0; u < g.n_nodes; ++u) {
        for (int v = 0; v < g.n_nodes; ++v) {
            if (g.edges(u, v)) ++indegree[v];
        }
    }
    std::vector<int> order;
    order.reserve(g.n_nodes);
    std::vector<bool> placed(g.n_nodes, false);
    for (int step = 0; step < g.n_nodes; ++step) {
        int next = -1;
        for (int v = 0; v < g.n_nodes; ++v) {
            if (!placed[v] && indegree[v] == 0) {
                next = v;
                break;
            }
        }
        if (next < 0) throw CyclicGraphError("graph contains a directed cycle");
        placed[next] = true;
        order.push_back(next);
        for (int v = 0; v < g.n_nodes; ++v) {
            if (g.edges(next, v)) --indegree[v];
        }
    }
    return order;
}

void validate(const Dag& g) {
    if (g.n_nodes < 1 || g.n_nodes > kMaxNodes) throw InvalidDagError("n_nodes out of range");
    if (g.edges.rows() != g.n_nodes || g.edges.cols() != g.n_nodes) {
        throw InvalidDagError("adjacency matrix shape mismatch");
    }
    if (static_cast<int>(g.roles.size()) != g.n_nodes) throw InvalidDagError("roles length mismatch");

    topological_order(g);  // throws CyclicGraphError on a cycle

    const int y = target_index(g);
    int n_targets = 0;
    for (int u = 0; u < g.n_nodes; ++u) {
        if (g.roles[u] == NodeRole::Target) ++n_targets;
    }
    if (n_targets != 1 || g.roles[y] != NodeRole::Target) {
        throw InvalidDagError("exactly one target required, at the last index");
    }
    for (int v = 0; v < g.n_nodes; ++v) {
        if (g.edges(y, v)) throw InvalidDagError("target node has an outgoing edge");
    }
    for (int u = 0; u < g.n_nodes; ++u) {
        if (g.roles[u] != NodeRole::Intervention) continue;
        for (int p = 0; p < g.n_nodes; ++p) {
            if (g.edges(p, u)) throw InvalidDagError("intervention node has a parent");
        }
        if (!(descendant_mask(g, u) & node_bit(y))) {
            throw InvalidDagError("intervention node has no directed path to the target");
        }
    }
}

bool is_valid(const Dag& g) noexcept {
    try {
        validate(g);
        return true;
    } catch (const Error&) {
        return false;
    }
}

NodeMask descendant_mask(const Dag& g, int u) {
    NodeMask seen = 0;
    std::deque<int> queue{u};
    while (!queue.empty()) {
        const int a = queue.front();
        queue.pop_front();
        for (int v = 0; v < g.n_nodes; ++v) {
            if (g.edges(a, v) && !(seen & node_bit(v))) {
                seen |= node_bit(v);
                queue.push_back(v);
            }
        }
    }
    return seen & ~node_bit(u);
}

std::vector<int> descendants(const Dag& g, int u) {
    check_node(g, u, "node");
    const NodeMask m = descendant_mask(g, u);
    std::vector<int> out;
    for (int v = 0; v < g.n_nodes; ++v) {
        if (m & node_bit(v)) out.push_back(v);
    }
    return out;
}

NodeMask ancestor_mask(const Dag& g, int u) {
    NodeMask seen = 0;
    std::deque<int> queue{u};
    while (!queue.empty()) {
        const int a = queue.front();
        queue.pop_front();
        for (int p = 0; p < g.n_nodes; ++p) {
            if (g.edges(p, a) && !(seen & node_bit(p))) {
                seen |= node_bit(p);
                queue.push_back(p);
            }
        }
    }
    return seen & ~node_bit(u);
}

bool d_separated(const Dag& g, int x, int y, NodeMask z) {
    // Reachability over (node, entry direction) states; a collider or one of
    // its descendants must be in z for the trail to pass through it.
    NodeMask z_or_ancestors = z;
    for (int u = 0; u < g.n_nodes; ++u) {
        if (z & node_bit(u)) z_or_ancestors |= ancestor_mask(g, u);
    }

    NodeMask visited_up = 0;    // entered from a child (trail moving upward)
    NodeMask visited_down = 0;  // entered from a parent (trail moving downward)
    std::deque<std::pair<int, bool>> queue;  // (node, entered_upward)
    queue.emplace_back(x, true);

    while (!queue.empty()) {
        const auto [v, up] = queue.front();
        queue.pop_front();
        NodeMask& visited = up ? visited_up : visited_down;
        if (visited & node_bit(v)) continue;
        visited |= node_bit(v);

        const bool in_z = (z & node_bit(v)) != 0;
        if (v == y && !in_z) return false;  // active trail reaches y

        if (up) {
            if (!in_z) {
                for (int p = 0; p < g.n_nodes; ++p) {
                    if (g.edges(p, v)) queue.emplace_back(p, true);
                }
                for (int c = 0; c < g.n_nodes; ++c) {
                    if (g.edges(v, c)) queue.emplace_back(c, false);
                }
            }
        } else {
            if (!in_z) {
                for (int c = 0; c < g.n_nodes; ++c) {
                    if (g.edges(v, c)) queue.emplace_back(c, false);
                }
            }
            if (z_or_ancestors & node_bit(v)) {
                for (int p = 0; p < g.n_nodes; ++p) {
                    if (g.edges(p, v)) queue.emplace_back(p, true);
                }
            }
        }
    }
    return true;
}

int shd(const Dag& g1, const Dag& g2) {
    if (g1.n_nodes != g2.n_nodes) throw ShapeMismatchError("shd: node counts differ");
    int count = 0;
    for (int u = 0; u < g1.n_nodes; ++u) {
        for (int v = 0; v < g1.n_nodes; ++v) {
            if (u != v && g1.edges(u, v) != g2.edges(u, v)) ++count;
        }
    }
    return count;
}

bool valid_adjustment(const Dag& g, int i, int j, NodeMask z) {
    // Nodes (other than i) lying on a directed path from i to j.
    const NodeMask desc_i = descendant_mask(g, i);
    NodeMask on_causal_path = 0;
    for (int w = 0; w < g.n_nodes; ++w) {
        if (w == i || !(desc_i & node_bit(w))) continue;
        if (w == j || (descendant_mask(g, w) & node_bit(j))) on_causal_path |= node_bit(w);
    }

    NodeMask forbidden = on_causal_path;
    for (int w = 0; w < g.n_nodes; ++w) {
        if (on_causal_path & node_bit(w)) forbidden |= descendant_mask(g, w);
    }
    if (z & forbidden) return false;

    // Remove the first edge of every directed i->...->j path, then require
    // z to block everything that remains between i and j.
    Dag pruned = g;
    for (int w = 0; w < g.n_nodes; ++w) {
        if (pruned.edges(i, w) && (on_causal_path & node_bit(w))) pruned.edges(i, w) = false;
    }
    return d_separated(pruned, i, j, z);
}

int sid(const Dag& g_true, const Dag& g_other) {
    if (g_true.n_nodes != g_other.n_nodes) throw ShapeMismatchError("sid: node counts differ");
    const int n = g_true.n_nodes;
    int count = 0;
    for (int i = 0; i < n; ++i) {
        NodeMask parents_other = 0;
        for (int p = 0; p < n; ++p) {
            if (g_other.edges(p, i)) parents_other |= node_bit(p);
        }
        const NodeMask desc_true = descendant_mask(g_true, i);
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            if (parents_other & node_bit(j)) {
                // Adjusting for j itself yields the observational marginal,
                // which is the intervention distribution iff j is not
                // affected by i.
                if (desc_true & node_bit(j)) ++count;
            } else if (!valid_adjustment(g_true, i, j, parents_other)) {
                ++count;
            }
        }
    }
    return count;
}

}  // namespace causalhbm
