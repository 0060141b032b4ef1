#include "causalhbm/transport.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "causalhbm/assignment.hpp"

namespace causalhbm {

void validate(const DistanceMatrix& m) {
    if (m.d.rows() != m.n || m.d.cols() != m.n) throw ShapeMismatchError("distance matrix shape");
    for (int i = 0; i < m.n; ++i) {
        if (m.d(i, i) != 0.0) throw ShapeMismatchError("distance matrix diagonal must be zero");
        for (int j = 0; j < m.n; ++j) {
            if (!std::isfinite(m.d(i, j)) || m.d(i, j) < 0.0) {
                throw ShapeMismatchError("distance entries must be finite and nonnegative");
            }
            if (m.d(i, j) != m.d(j, i)) throw ShapeMismatchError("distance matrix must be symmetric");
        }
    }
}

std::string to_string(DistanceKind k) {
    switch (k) {
        case DistanceKind::TOD: return "TOD";
        case DistanceKind::TID: return "TID";
        case DistanceKind::OP: return "OP";
        case DistanceKind::IP: return "IP";
    }
    return "TOD";
}

DistanceKind distance_kind_from_string(const std::string& s) {
    if (s == "TOD") return DistanceKind::TOD;
    if (s == "TID") return DistanceKind::TID;
    if (s == "OP") return DistanceKind::OP;
    if (s == "IP") return DistanceKind::IP;
    throw SchemaError("unknown distance kind: " + s);
}

void validate(const DistanceSpec& spec) {
    if (spec.alpha1 < 0.0 || spec.alpha2 < 0.0) throw SchemaError("alpha weights must be >= 0");
    if ((spec.kind == DistanceKind::TOD || spec.kind == DistanceKind::TID) && spec.alpha1 == 0.0 &&
        spec.alpha2 == 0.0) {
        throw SchemaError("alpha1 and alpha2 must not both be zero");
    }
    if (spec.mc_samples < 1) throw SchemaError("mc_samples must be >= 1");
    if (spec.intervention_values.empty()) throw SchemaError("intervention value grid is empty");
}

double wasserstein(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    const int m = static_cast<int>(a.rows());
    const int k = static_cast<int>(b.rows());
    if (m == 0 || k == 0) throw EmptySampleError("wasserstein: empty sample set");
    if (a.cols() != b.cols()) throw ShapeMismatchError("wasserstein: dimension mismatch");

    Eigen::MatrixXd cost(m, k);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < k; ++j) cost(i, j) = (a.row(i) - b.row(j)).norm();
    }

    if (m == k) return solve_assignment(cost) / static_cast<double>(m);

    const long long scale = std::lcm(static_cast<long long>(m), static_cast<long long>(k));
    const std::vector<long long> supply(m, scale / m);
    const std::vector<long long> demand(k, scale / k);
    return solve_transport(cost, supply, demand) / static_cast<double>(scale);
}

namespace {

Eigen::MatrixXd sample_rows(const Scm& scm, int m, std::optional<Intervention> iv,
                            std::uint64_t seed) {
    Rng rng(seed);
    const SampleBatch batch = sample(scm, m, iv, rng, /*sigmoid_y=*/true);
    Eigen::MatrixXd rows(m, batch.x.cols() + 1);
    rows.leftCols(batch.x.cols()) = batch.x;
    rows.col(batch.x.cols()) = batch.y;
    return rows;
}

}  // namespace

double od(const Scm& scm_i, const Scm& scm_j, int m, std::uint64_t seed) {
    if (scm_i.graph.n_nodes != scm_j.graph.n_nodes) {
        throw ShapeMismatchError("od: node counts differ");
    }
    // Identical streams per side so identical models are at distance zero.
    return wasserstein(sample_rows(scm_i, m, {}, seed), sample_rows(scm_j, m, {}, seed));
}

double id(const Scm& scm_i, const Scm& scm_j, int m, std::uint64_t seed,
          const std::vector<double>& values) {
    if (scm_i.graph.roles != scm_j.graph.roles) throw ShapeMismatchError("id: role mismatch");
    const std::vector<int> targets = intervention_indices(scm_i.graph);
    if (targets.empty()) throw NoInterventionVariablesError("id: no intervention variables");
    if (values.empty()) throw SchemaError("id: empty intervention value grid");

    double acc = 0.0;
    for (std::size_t t = 0; t < targets.size(); ++t) {
        double per_variable = 0.0;
        for (std::size_t v = 0; v < values.size(); ++v) {
            const std::uint64_t s = Rng(seed).child(t, v).seed();
            const Intervention iv{targets[t], values[v]};
            per_variable += wasserstein(sample_rows(scm_i, m, iv, s), sample_rows(scm_j, m, iv, s));
        }
        acc += per_variable / static_cast<double>(values.size());
    }
    return acc / static_cast<double>(targets.size());
}

double tod(const Scm& scm_i, const Scm& scm_j, const DistanceSpec& spec, std::uint64_t pair_seed) {
    double value = 0.0;
    if (spec.alpha1 != 0.0) value += spec.alpha1 * od(scm_i, scm_j, spec.mc_samples, pair_seed);
    if (spec.alpha2 != 0.0) value += spec.alpha2 * shd(scm_i.graph, scm_j.graph);
    return value;
}

double tid(const Scm& scm_i, const Scm& scm_j, const DistanceSpec& spec, std::uint64_t pair_seed) {
    double value = 0.0;
    if (spec.alpha1 != 0.0) {
        value += spec.alpha1 *
                 id(scm_i, scm_j, spec.mc_samples, pair_seed, spec.intervention_values);
    }
    if (spec.alpha2 != 0.0) value += spec.alpha2 * sid(scm_i.graph, scm_j.graph);
    return value;
}

double op_proxy(const Task& a, const Task& b) {
    return wasserstein(distance_rows(a), distance_rows(b));
}

int nearest_in_parameter_space(int task, const std::vector<int>& candidates,
                               const TaskEmbeddings& embeddings) {
    if (candidates.empty()) throw Error("nearest_in_parameter_space: no candidates");
    int best = -1;
    double best_d = 0.0;
    for (const int c : candidates) {
        const double d2 = (embeddings.mu.row(task) - embeddings.mu.row(c)).squaredNorm() +
                          (embeddings.sigma.row(task) - embeddings.sigma.row(c)).squaredNorm();
        const double d = std::sqrt(d2);
        if (best < 0 || d < best_d || (d == best_d && c < best)) {
            best = c;
            best_d = d;
        }
    }
    return best;
}

std::vector<int> intervention_strata(const Dataset& data) {
    std::vector<int> strata;
    auto note = [&strata](int tag) {
        if (tag >= 0 && std::find(strata.begin(), strata.end(), tag) == strata.end()) {
            strata.push_back(tag);
        }
    };
    for (const auto& t : data.tasks) {
        for (int r = 0; r < t.support_tag.size(); ++r) note(t.support_tag(r));
        for (int r = 0; r < t.query_tag.size(); ++r) note(t.query_tag(r));
    }
    std::sort(strata.begin(), strata.end());
    return strata;
}

namespace {

// Training tasks holding at least one row in the stratum, sorted by index.
std::vector<int> stratum_pool(const Dataset& data, int tag) {
    std::vector<int> pool;
    for (int i = 0; i < static_cast<int>(data.tasks.size()); ++i) {
        if (data.tasks[i].split != Split::Train) continue;
        if (distance_rows_tagged(data.tasks[i], tag).rows() > 0) pool.push_back(i);
    }
    return pool;
}

}  // namespace

double ip_proxy(const Task& a, const Task& b, const Dataset& data, const std::vector<int>& strata,
                const TaskEmbeddings* embeddings, KappaPolicy policy) {
    if (strata.empty()) throw NoInterventionDataError("ip_proxy: no intervention strata");

    double acc = 0.0;
    double norm = 0.0;
    for (const int tag : strata) {
        Eigen::MatrixXd rows_a = distance_rows_tagged(a, tag);
        Eigen::MatrixXd rows_b = distance_rows_tagged(b, tag);
        int n_substituted = 0;

        auto substitute = [&](const Task& t, Eigen::MatrixXd& rows) -> bool {
            std::vector<int> pool = stratum_pool(data, tag);
            // A task never substitutes for itself.
            pool.erase(std::remove(pool.begin(), pool.end(), t.id), pool.end());
            if (pool.empty()) return false;
            if (!embeddings) {
                throw MissingEmbeddingsError("ip_proxy: substitution requires local embeddings");
            }
            const int k = nearest_in_parameter_space(t.id, pool, *embeddings);
            rows = distance_rows_tagged(data.tasks[k], tag);
            ++n_substituted;
            return true;
        };

        if (rows_a.rows() == 0 && !substitute(a, rows_a)) continue;
        if (rows_b.rows() == 0 && !substitute(b, rows_b)) continue;

        double kappa = 1.0;
        if (policy == KappaPolicy::SubstituteWithPenalty) {
            if (n_substituted == 1) kappa = 0.5;
            if (n_substituted == 2) kappa = 0.25;
        } else if (policy == KappaPolicy::DropSubstituted) {
            if (n_substituted > 0) continue;
        }

        acc += kappa * wasserstein(rows_a, rows_b);
        norm += kappa;
    }
    if (norm == 0.0) throw NoInterventionDataError("ip_proxy: no usable intervention stratum");
    return acc / norm;
}

namespace {

std::uint64_t pair_seed(const DistanceSpec& spec, int i, int j) {
    const int lo = std::min(i, j);
    const int hi = std::max(i, j);
    return Rng(spec.seed)
        .child(stream::kDistance, static_cast<std::uint64_t>(lo), static_cast<std::uint64_t>(hi))
        .seed();
}

}  // namespace

double pair_distance(const Dataset& data, int i, int j, const DistanceSpec& spec,
                     const std::vector<Scm>* task_scms, const TaskEmbeddings* embeddings) {
    if (i == j) return 0.0;
    switch (spec.kind) {
        case DistanceKind::TOD:
        case DistanceKind::TID: {
            if (!task_scms) throw MissingGroundTruthError("TOD/TID require task SCMs");
            // Computed once per unordered pair: orient by ascending index.
            const Scm& first = (*task_scms)[std::min(i, j)];
            const Scm& second = (*task_scms)[std::max(i, j)];
            return spec.kind == DistanceKind::TOD ? tod(first, second, spec, pair_seed(spec, i, j))
                                                  : tid(first, second, spec, pair_seed(spec, i, j));
        }
        case DistanceKind::OP:
            return op_proxy(data.tasks[i], data.tasks[j]);
        case DistanceKind::IP:
            return ip_proxy(data.tasks[i], data.tasks[j], data, intervention_strata(data),
                            embeddings, spec.kappa);
    }
    throw SchemaError("unknown distance kind");
}

DistanceMatrix distance_matrix(const Dataset& data, const DistanceSpec& spec,
                               const std::vector<Scm>* task_scms,
                               const TaskEmbeddings* embeddings) {
    validate(spec);
    const int n = static_cast<int>(data.tasks.size());
    DistanceMatrix out;
    out.n = n;
    out.d = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double v = pair_distance(data, i, j, spec, task_scms, embeddings);
            out.d(i, j) = v;
            out.d(j, i) = v;
        }
    }
    validate(out);
    return out;
}

Eigen::VectorXd distances_to_tasks(const Dataset& data, int task, const std::vector<int>& others,
                                   const DistanceSpec& spec, const std::vector<Scm>* task_scms,
                                   const TaskEmbeddings* embeddings) {
    Eigen::VectorXd out(static_cast<int>(others.size()));
    for (int k = 0; k < out.size(); ++k) {
        out(k) = pair_distance(data, task, others[k], spec, task_scms, embeddings);
    }
    return out;
}

}  // namespace causalhbm
