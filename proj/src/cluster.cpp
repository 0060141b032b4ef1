#include "causalhbm/cluster.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "causalhbm/assignment.hpp"
#include "causalhbm/rng.hpp"

namespace causalhbm {

void validate(const GroupAssignment& a) {
    if (a.C < 1) throw SchemaError("group count must be >= 1");
    for (const int l : a.labels) {
        if (l < 0 || l >= a.C) throw SchemaError("group label out of range");
    }
}

Eigen::MatrixXd affinity(const DistanceMatrix& dm, double eps) {
    validate(dm);
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(dm.n, dm.n);
    for (int i = 0; i < dm.n; ++i) {
        for (int j = 0; j < dm.n; ++j) {
            if (i != j) a(i, j) = 1.0 / (dm.d(i, j) + eps);
        }
    }
    return a;
}

namespace {

struct KMeansResult {
    std::vector<int> labels;
    double inertia = std::numeric_limits<double>::infinity();
};

int nearest_center(const Eigen::MatrixXd& centers, const Eigen::RowVectorXd& x) {
    int best = 0;
    double best_d = (centers.row(0) - x).squaredNorm();
    for (int c = 1; c < centers.rows(); ++c) {
        const double d = (centers.row(c) - x).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return best;
}

Eigen::MatrixXd kmeanspp_init(const Eigen::MatrixXd& x, int k, Rng& rng) {
    const int n = static_cast<int>(x.rows());
    Eigen::MatrixXd centers(k, x.cols());
    centers.row(0) = x.row(static_cast<int>(rng.uniform_int(n)));
    Eigen::VectorXd d2(n);
    for (int c = 1; c < k; ++c) {
        for (int i = 0; i < n; ++i) {
            double best = (x.row(i) - centers.row(0)).squaredNorm();
            for (int p = 1; p < c; ++p) {
                best = std::min(best, (x.row(i) - centers.row(p)).squaredNorm());
            }
            d2(i) = best;
        }
        const double total = d2.sum();
        int pick;
        if (total <= 0.0) {
            pick = static_cast<int>(rng.uniform_int(n));
        } else {
            const double target = rng.uniform() * total;
            double acc = 0.0;
            pick = n - 1;
            for (int i = 0; i < n; ++i) {
                acc += d2(i);
                if (acc >= target) {
                    pick = i;
                    break;
                }
            }
        }
        centers.row(c) = x.row(pick);
    }
    return centers;
}

KMeansResult kmeans_once(const Eigen::MatrixXd& x, int k, Rng rng, int max_iter, double tol) {
    const int n = static_cast<int>(x.rows());
    Eigen::MatrixXd centers = kmeanspp_init(x, k, rng);
    std::vector<int> labels(n, 0);

    double prev_inertia = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < max_iter; ++iter) {
        for (int i = 0; i < n; ++i) labels[i] = nearest_center(centers, x.row(i));

        // Refill empty clusters with the point farthest from its center.
        std::vector<int> counts(k, 0);
        for (const int l : labels) ++counts[l];
        for (int c = 0; c < k; ++c) {
            if (counts[c] > 0) continue;
            int worst = -1;
            double worst_d = -1.0;
            for (int i = 0; i < n; ++i) {
                if (counts[labels[i]] <= 1) continue;
                const double d = (x.row(i) - centers.row(labels[i])).squaredNorm();
                if (d > worst_d) {
                    worst_d = d;
                    worst = i;
                }
            }
            if (worst >= 0) {
                --counts[labels[worst]];
                labels[worst] = c;
                ++counts[c];
                centers.row(c) = x.row(worst);
            }
        }

        Eigen::MatrixXd next = Eigen::MatrixXd::Zero(k, x.cols());
        std::fill(counts.begin(), counts.end(), 0);
        for (int i = 0; i < n; ++i) {
            next.row(labels[i]) += x.row(i);
            ++counts[labels[i]];
        }
        for (int c = 0; c < k; ++c) {
            if (counts[c] > 0) {
                next.row(c) /= static_cast<double>(counts[c]);
            } else {
                next.row(c) = centers.row(c);
            }
        }

        double inertia = 0.0;
        for (int i = 0; i < n; ++i) inertia += (x.row(i) - next.row(labels[i])).squaredNorm();
        const double shift = (next - centers).rowwise().norm().maxCoeff();
        centers = next;
        if (shift < tol || std::abs(prev_inertia - inertia) < tol) {
            prev_inertia = inertia;
            break;
        }
        prev_inertia = inertia;
    }

    KMeansResult result;
    result.labels = labels;
    result.inertia = 0.0;
    for (int i = 0; i < n; ++i) result.inertia += (x.row(i) - centers.row(labels[i])).squaredNorm();
    return result;
}

}  // namespace

GroupAssignment spectral_cluster(const Eigen::MatrixXd& a, int C, std::uint64_t seed) {
    const int n = static_cast<int>(a.rows());
    if (a.cols() != n) throw ShapeMismatchError("affinity must be square");
    if (C < 1 || C > n) throw SchemaError("C must be in [1, n]");

    GroupAssignment out;
    out.C = C;
    out.labels.assign(n, 0);
    if (C == 1) return out;

    Eigen::VectorXd degree = a.rowwise().sum();
    for (int i = 0; i < n; ++i) {
        if (!(degree(i) > 0.0)) throw DegenerateAffinityError("zero-degree row in affinity");
    }
    const Eigen::VectorXd inv_sqrt = degree.array().rsqrt();
    Eigen::MatrixXd lap = Eigen::MatrixXd::Identity(n, n) -
                          inv_sqrt.asDiagonal() * a * inv_sqrt.asDiagonal();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(lap);
    if (solver.info() != Eigen::Success) throw SingularSystemError("eigendecomposition failed");
    Eigen::MatrixXd embedding = solver.eigenvectors().leftCols(C);
    for (int i = 0; i < n; ++i) {
        const double norm = embedding.row(i).norm();
        if (norm > 0.0) embedding.row(i) /= norm;
    }

    const Rng root(seed);
    KMeansResult best;
    for (int restart = 0; restart < 20; ++restart) {
        KMeansResult r = kmeans_once(embedding, C, root.child(stream::kCluster, restart), 300, 1e-8);
        if (r.inertia < best.inertia) best = r;
    }
    out.labels = best.labels;
    validate(out);
    return out;
}

int assign_new_task(const Eigen::VectorXd& distances_to_train, const GroupAssignment& trained) {
    if (distances_to_train.size() != static_cast<int>(trained.labels.size())) {
        throw ShapeMismatchError("assign_new_task: distance/label size mismatch");
    }
    if (distances_to_train.size() == 0) throw EmptyGroupError("assign_new_task: no training tasks");
    int best = 0;
    for (int i = 1; i < distances_to_train.size(); ++i) {
        if (distances_to_train(i) < distances_to_train(best)) best = i;
    }
    return trained.labels[best];
}

namespace {

// Contingency-table matching shared by both F1 variants: matched[t] is the
// predicted label assigned to true group t (or -1).
std::vector<int> match_labels(const std::vector<int>& predicted, const std::vector<int>& truth,
                              int* n_pred_out, int* n_true_out,
                              Eigen::MatrixXd* contingency_out) {
    if (predicted.size() != truth.size()) throw LengthMismatchError("f1: length mismatch");
    const int n = static_cast<int>(predicted.size());
    int n_pred = 0, n_true = 0;
    for (int i = 0; i < n; ++i) {
        n_pred = std::max(n_pred, predicted[i] + 1);
        n_true = std::max(n_true, truth[i] + 1);
    }
    const int dim = std::max(n_pred, n_true);
    Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(dim, dim);
    for (int i = 0; i < n; ++i) counts(predicted[i], truth[i]) += 1.0;

    // Maximize total agreement; break ties between agreement-optimal
    // matchings toward the higher per-pair F1 sum so the score is invariant
    // to relabelings of the predicted groups.
    Eigen::MatrixXd objective = counts * static_cast<double>(dim + 1);
    for (int p = 0; p < dim; ++p) {
        for (int t = 0; t < dim; ++t) {
            const double tp = counts(p, t);
            if (tp <= 0.0) continue;
            const double fp = counts.row(p).sum() - tp;
            const double fn = counts.col(t).sum() - tp;
            objective(p, t) += 2.0 * tp / (2.0 * tp + fp + fn);
        }
    }
    std::vector<int> pred_to_true;
    solve_assignment(-objective, &pred_to_true);

    std::vector<int> matched(n_true, -1);
    for (int p = 0; p < dim; ++p) {
        const int t = pred_to_true[p];
        if (p < n_pred && t < n_true) matched[t] = p;
    }
    *n_pred_out = n_pred;
    *n_true_out = n_true;
    *contingency_out = counts;
    return matched;
}

}  // namespace

double group_recovery_f1(const std::vector<int>& predicted, const std::vector<int>& truth) {
    int n_pred = 0, n_true = 0;
    Eigen::MatrixXd counts;
    const std::vector<int> matched = match_labels(predicted, truth, &n_pred, &n_true, &counts);

    double f1_sum = 0.0;
    for (int t = 0; t < n_true; ++t) {
        const int p = matched[t];
        if (p < 0) continue;
        const double tp = counts(p, t);
        const double fp = counts.row(p).sum() - tp;
        const double fn = counts.col(t).sum() - tp;
        if (tp > 0.0) f1_sum += 2.0 * tp / (2.0 * tp + fp + fn);
    }
    return f1_sum / static_cast<double>(n_true);
}

double group_recovery_f1_micro(const std::vector<int>& predicted, const std::vector<int>& truth) {
    int n_pred = 0, n_true = 0;
    Eigen::MatrixXd counts;
    const std::vector<int> matched = match_labels(predicted, truth, &n_pred, &n_true, &counts);
    double agree = 0.0;
    for (int t = 0; t < n_true; ++t) {
        if (matched[t] >= 0) agree += counts(matched[t], t);
    }
    return agree / static_cast<double>(predicted.size());
}

}  // namespace causalhbm
