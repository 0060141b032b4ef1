#include "causalhbm/scm.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace causalhbm {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

void validate(const Scm& scm) {
    validate(scm.graph);
    const int n = scm.graph.n_nodes;
    if (scm.weights.rows() != n || scm.weights.cols() != n) {
        throw ShapeMismatchError("scm weights shape mismatch");
    }
    if (scm.noise_std.size() != n) throw ShapeMismatchError("scm noise_std length mismatch");
    for (int v = 0; v < n; ++v) {
        if (!(scm.noise_std(v) > 0.0)) throw InvalidDagError("noise_std must be positive");
        for (int u = 0; u < n; ++u) {
            if (scm.weights(v, u) != 0.0 && !scm.graph.edges(u, v)) {
                throw InvalidDagError("nonzero weight on a missing edge");
            }
        }
    }
}

Dag default_reference_dag() {
    // Nodes: I0, I1, C2..C6, Y.
    std::vector<NodeRole> roles = {NodeRole::Intervention, NodeRole::Intervention,
                                   NodeRole::Covariate,    NodeRole::Covariate,
                                   NodeRole::Covariate,    NodeRole::Covariate,
                                   NodeRole::Covariate,    NodeRole::Target};
    return make_dag(8,
                    {{0, 2}, {1, 3}, {2, 4}, {3, 4}, {2, 7}, {4, 7}, {5, 7}, {6, 5}},
                    std::move(roles));
}

Dag perturb_dag(const Dag& base, double eta, Rng& rng, int max_attempts) {
    if (eta < 0.0 || eta > 1.0) throw InvalidDagError("eta must be in [0, 1]");
    if (eta == 0.0) return base;

    const int n = base.n_nodes;
    const int y = target_index(base);

    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        // One flip probability per candidate graph; rejected candidates redraw
        // it, otherwise large p values could make rejection non-terminating.
        const double p = rng.uniform(0.0, eta);
        Dag out = base;
        for (int u = 0; u < n; ++u) {
            for (int v = 0; v < n; ++v) {
                if (u == v) continue;
                if (u == y) continue;                                  // target stays a sink
                if (base.roles[v] == NodeRole::Intervention) continue; // interventions stay roots
                if (rng.uniform() < p) out.edges(u, v) = !out.edges(u, v);
            }
        }
        if (is_valid(out)) return out;
    }
    throw RejectionExhaustedError("perturb_dag: no valid DAG within " +
                                  std::to_string(max_attempts) + " attempts");
}

Scm perturb_params(const Scm& base, const Dag& new_graph, double sigma, Rng& rng) {
    if (sigma < 0.0) throw InvalidDagError("sigma must be nonnegative");
    const int n = new_graph.n_nodes;
    Scm out;
    out.graph = new_graph;
    out.weights = Eigen::MatrixXd::Zero(n, n);
    out.noise_std = base.noise_std;
    for (int u = 0; u < n; ++u) {
        for (int v = 0; v < n; ++v) {
            if (!new_graph.edges(u, v)) continue;
            const double mean = base.graph.edges(u, v) ? base.weights(v, u) : 0.0;
            out.weights(v, u) = sigma == 0.0 ? mean : rng.normal(mean, sigma);
        }
    }
    return out;
}

Eigen::MatrixXd sample_nodes(const Scm& scm, int m, std::optional<Intervention> intervention,
                             Rng& rng) {
    const int n = scm.graph.n_nodes;
    if (intervention && scm.graph.roles[intervention->node] != NodeRole::Intervention) {
        throw NoInterventionVariablesError("node is not an intervention variable");
    }
    const std::vector<int> order = topological_order(scm.graph);
    Eigen::MatrixXd out(m, n);
    for (int r = 0; r < m; ++r) {
        for (int v : order) {
            if (intervention && v == intervention->node) {
                out(r, v) = intervention->value;
                continue;
            }
            double value = rng.normal(0.0, scm.noise_std(v));
            for (int u = 0; u < n; ++u) {
                if (scm.graph.edges(u, v)) value += scm.weights(v, u) * out(r, u);
            }
            out(r, v) = value;
        }
    }
    return out;
}

SampleBatch sample(const Scm& scm, int m, std::optional<Intervention> intervention, Rng& rng,
                   bool sigmoid_y) {
    const int n = scm.graph.n_nodes;
    const int k = n - 1;
    const Eigen::MatrixXd nodes = sample_nodes(scm, m, intervention, rng);
    SampleBatch batch;
    batch.x = nodes.leftCols(k);
    batch.y = nodes.col(k);
    if (sigmoid_y) {
        for (int r = 0; r < m; ++r) batch.y(r) = sigmoid(batch.y(r));
    }
    batch.tag = Eigen::VectorXi::Constant(m, intervention ? intervention->node : -1);
    return batch;
}

GaussianJoint analytic_gaussian_joint(const Scm& scm, std::optional<Intervention> intervention) {
    const int n = scm.graph.n_nodes;
    Eigen::MatrixXd coeffs = scm.weights;  // coeffs(v, u): u's weight in v's equation
    Eigen::VectorXd shift = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd noise_var = scm.noise_std.array().square();
    if (intervention) {
        coeffs.row(intervention->node).setZero();
        shift(intervention->node) = intervention->value;
        noise_var(intervention->node) = 0.0;
    }
    const Eigen::MatrixXd system = Eigen::MatrixXd::Identity(n, n) - coeffs;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(system);
    if (!lu.isInvertible()) throw SingularSystemError("(I - B) is singular");
    const Eigen::MatrixXd inv = lu.inverse();
    GaussianJoint joint;
    joint.mean = inv * shift;
    joint.cov = inv * noise_var.asDiagonal() * inv.transpose();
    return joint;
}

void validate(const ToyModelConfig& cfg) {
    if (cfg.n_train < 1 || cfg.n_val < 0 || cfg.n_test < 0) {
        throw SchemaError("task counts must be positive");
    }
    if (cfg.m_support < 1 || cfg.m_query < 1) throw SchemaError("sample counts must be positive");
    if (cfg.n_groups < 1) throw SchemaError("n_groups must be >= 1");
    if (cfg.eta_group < 0 || cfg.eta_group > 1 || cfg.eta_task < 0 || cfg.eta_task > 1) {
        throw SchemaError("eta values must be in [0, 1]");
    }
    if (cfg.sigma_ref < 0 || cfg.sigma_group < 0 || cfg.sigma_task < 0) {
        throw SchemaError("sigma values must be nonnegative");
    }
    if (!(cfg.noise_std > 0)) throw SchemaError("noise_std must be positive");
}

namespace {

// Round-robin group labels within one split segment, shuffled in place so
// every group stays nonempty per split whenever the split has >= C tasks.
void assign_groups(std::vector<int>& labels, int offset, int count, int n_groups, Rng rng) {
    std::vector<int> seg(count);
    for (int i = 0; i < count; ++i) seg[i] = i % n_groups;
    rng.shuffle(seg);
    for (int i = 0; i < count; ++i) labels[offset + i] = seg[i];
}

}  // namespace

GeneratedDataset generate_toy_dataset(const ToyModelConfig& cfg) {
    validate(cfg);
    const Rng root(cfg.seed);
    const Dag ref_dag = cfg.reference_dag ? *cfg.reference_dag : default_reference_dag();
    validate(ref_dag);
    const int n = ref_dag.n_nodes;
    const int k = n - 1;
    const int n_tasks = cfg.n_train + cfg.n_val + cfg.n_test;
    const int m_total = cfg.m_support + cfg.m_query;

    GeneratedDataset out;

    // Reference SCM.
    {
        Rng rng = root.child(stream::kGenerate, 0);
        out.reference_scm.graph = ref_dag;
        out.reference_scm.weights = Eigen::MatrixXd::Zero(n, n);
        out.reference_scm.noise_std = Eigen::VectorXd::Constant(n, cfg.noise_std);
        for (int u = 0; u < n; ++u) {
            for (int v = 0; v < n; ++v) {
                if (ref_dag.edges(u, v)) {
                    out.reference_scm.weights(v, u) =
                        cfg.sigma_ref == 0.0 ? 0.0 : rng.normal(0.0, cfg.sigma_ref);
                }
            }
        }
    }

    // Group SCMs.
    out.group_scms.reserve(cfg.n_groups);
    for (int c = 0; c < cfg.n_groups; ++c) {
        Rng rng = root.child(stream::kGenerate, 1, static_cast<std::uint64_t>(c));
        const Dag g = perturb_dag(ref_dag, cfg.eta_group, rng, cfg.max_rejection_attempts);
        out.group_scms.push_back(perturb_params(out.reference_scm, g, cfg.sigma_group, rng));
    }

    // Group labels: round-robin within each split, shuffled by seed.
    out.group_labels.assign(n_tasks, 0);
    assign_groups(out.group_labels, 0, cfg.n_train, cfg.n_groups, root.child(stream::kGenerate, 2, 0));
    assign_groups(out.group_labels, cfg.n_train, cfg.n_val, cfg.n_groups,
                  root.child(stream::kGenerate, 2, 1));
    assign_groups(out.group_labels, cfg.n_train + cfg.n_val, cfg.n_test, cfg.n_groups,
                  root.child(stream::kGenerate, 2, 2));

    const std::vector<int> interventions = intervention_indices(ref_dag);
    const int n_choices = static_cast<int>(interventions.size()) + 1;

    out.data.n_features = k;
    out.data.tasks.reserve(n_tasks);
    out.task_scms.reserve(n_tasks);

    for (int i = 0; i < n_tasks; ++i) {
        Rng rng = root.child(stream::kTask, static_cast<std::uint64_t>(i));
        const Scm& group = out.group_scms[out.group_labels[i]];
        const Dag task_dag = perturb_dag(group.graph, cfg.eta_task, rng, cfg.max_rejection_attempts);
        const Scm task_scm = perturb_params(group, task_dag, cfg.sigma_task, rng);
        out.task_scms.push_back(task_scm);

        Eigen::MatrixXd xs(m_total, k);
        Eigen::VectorXd ys(m_total);
        Eigen::VectorXi tags(m_total);
        for (int s = 0; s < m_total; ++s) {
            const int choice = static_cast<int>(rng.uniform_int(n_choices));
            std::optional<Intervention> iv;
            if (choice > 0) iv = Intervention{interventions[choice - 1], cfg.intervention_value};
            const SampleBatch row = sample(task_scm, 1, iv, rng, /*sigmoid_y=*/true);
            xs.row(s) = row.x.row(0);
            ys(s) = row.y(0);
            tags(s) = row.tag(0);
        }

        Task task;
        task.id = i;
        task.split = i < cfg.n_train            ? Split::Train
                     : i < cfg.n_train + cfg.n_val ? Split::Val
                                                   : Split::Test;
        task.support_x = xs.topRows(cfg.m_support);
        task.support_y = ys.head(cfg.m_support);
        task.support_tag = tags.head(cfg.m_support);
        task.query_x = xs.bottomRows(cfg.m_query);
        task.set_query_y(ys.tail(cfg.m_query));
        task.query_tag = tags.tail(cfg.m_query);
        out.data.tasks.push_back(std::move(task));
    }
    return out;
}

}  // namespace causalhbm
