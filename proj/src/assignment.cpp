#include "causalhbm/assignment.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "causalhbm/errors.hpp"

namespace causalhbm {

double solve_assignment(const Eigen::MatrixXd& cost, std::vector<int>* row_to_col) {
    const int n = static_cast<int>(cost.rows());
    if (cost.cols() != n) throw ShapeMismatchError("assignment cost matrix must be square");
    if (n == 0) return 0.0;

    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), min_slack(n + 1, 0.0);
    std::vector<int> col_row(n + 1, 0), path(n + 1, 0);

    for (int i = 1; i <= n; ++i) {
        col_row[0] = i;
        int j0 = 0;
        std::fill(min_slack.begin(), min_slack.end(), inf);
        std::vector<bool> used(n + 1, false);
        do {
            used[j0] = true;
            const int i0 = col_row[j0];
            int j1 = -1;
            double delta = inf;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double slack = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (slack < min_slack[j]) {
                    min_slack[j] = slack;
                    path[j] = j0;
                }
                if (min_slack[j] < delta) {
                    delta = min_slack[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[col_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_slack[j] -= delta;
                }
            }
            j0 = j1;
        } while (col_row[j0] != 0);
        do {
            const int j1 = path[j0];
            col_row[j0] = col_row[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    if (row_to_col) {
        row_to_col->assign(n, -1);
        for (int j = 1; j <= n; ++j) (*row_to_col)[col_row[j] - 1] = j - 1;
    }
    double total = 0.0;
    for (int j = 1; j <= n; ++j) total += cost(col_row[j] - 1, j - 1);
    return total;
}

double solve_transport(const Eigen::MatrixXd& cost, const std::vector<long long>& supply,
                       const std::vector<long long>& demand) {
    const int m = static_cast<int>(cost.rows());
    const int k = static_cast<int>(cost.cols());
    if (static_cast<int>(supply.size()) != m || static_cast<int>(demand.size()) != k) {
        throw ShapeMismatchError("transport: supply/demand sizes mismatch cost matrix");
    }
    const long long total_supply = std::accumulate(supply.begin(), supply.end(), 0LL);
    const long long total_demand = std::accumulate(demand.begin(), demand.end(), 0LL);
    if (total_supply != total_demand) throw ShapeMismatchError("transport: unbalanced problem");

    const double inf = std::numeric_limits<double>::infinity();
    const int n_nodes = m + k;  // sources then sinks
    Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic> flow =
        Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic>::Zero(m, k);
    std::vector<long long> rs(supply), rd(demand);
    std::vector<double> pot(n_nodes, 0.0);
    long long remaining = total_supply;

    std::vector<double> dist(n_nodes);
    std::vector<int> parent(n_nodes);
    std::vector<bool> done(n_nodes);

    while (remaining > 0) {
        std::fill(dist.begin(), dist.end(), inf);
        std::fill(parent.begin(), parent.end(), -1);
        std::fill(done.begin(), done.end(), false);
        for (int i = 0; i < m; ++i) {
            if (rs[i] > 0) dist[i] = 0.0;
        }

        for (int it = 0; it < n_nodes; ++it) {
            int a = -1;
            double best = inf;
            for (int v = 0; v < n_nodes; ++v) {
                if (!done[v] && dist[v] < best) {
                    best = dist[v];
                    a = v;
                }
            }
            if (a < 0) break;
            done[a] = true;
            if (a < m) {
                for (int j = 0; j < k; ++j) {
                    if (done[m + j]) continue;
                    const double w = std::max(0.0, cost(a, j) + pot[a] - pot[m + j]);
                    if (dist[a] + w < dist[m + j]) {
                        dist[m + j] = dist[a] + w;
                        parent[m + j] = a;
                    }
                }
            } else {
                const int j = a - m;
                for (int i = 0; i < m; ++i) {
                    if (done[i] || flow(i, j) <= 0) continue;
                    const double w = std::max(0.0, -cost(i, j) + pot[m + j] - pot[i]);
                    if (dist[a] + w < dist[i]) {
                        dist[i] = dist[a] + w;
                        parent[i] = a;
                    }
                }
            }
        }

        int target = -1;
        double best = inf;
        for (int j = 0; j < k; ++j) {
            if (rd[j] > 0 && dist[m + j] < best) {
                best = dist[m + j];
                target = m + j;
            }
        }
        if (target < 0) throw Error("transport: no augmenting path (infeasible)");

        // Bottleneck along the path.
        long long push = rd[target - m];
        for (int v = target; parent[v] >= 0; v = parent[v]) {
            const int p = parent[v];
            if (p >= m) push = std::min(push, flow(v, p - m));  // reverse arc sink->source
        }
        {
            int v = target;
            while (parent[v] >= 0) v = parent[v];
            push = std::min(push, rs[v]);
        }

        for (int v = target; parent[v] >= 0; v = parent[v]) {
            const int p = parent[v];
            if (p < m) {
                flow(p, v - m) += push;  // forward arc source->sink
            } else {
                flow(v, p - m) -= push;  // reverse arc sink->source
            }
        }
        {
            int v = target;
            while (parent[v] >= 0) v = parent[v];
            rs[v] -= push;
        }
        rd[target - m] -= push;
        remaining -= push;

        const double reached_cap = dist[target];
        for (int v = 0; v < n_nodes; ++v) {
            pot[v] += std::min(dist[v], reached_cap);
        }
    }

    double total = 0.0;
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < k; ++j) {
            if (flow(i, j) > 0) total += static_cast<double>(flow(i, j)) * cost(i, j);
        }
    }
    return total;
}

}  // namespace causalhbm
