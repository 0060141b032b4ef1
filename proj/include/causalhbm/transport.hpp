#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <vector>

#include "causalhbm/dataset.hpp"
#include "causalhbm/scm.hpp"

namespace causalhbm {

struct DistanceMatrix {
    int n = 0;
    Eigen::MatrixXd d;
};

void validate(const DistanceMatrix& m);

enum class DistanceKind { TOD, TID, OP, IP };

std::string to_string(DistanceKind k);
DistanceKind distance_kind_from_string(const std::string& s);

// Handling of intervention strata that need a substituted task (Appendix-style
// ablation variants): penalty weights, dropped terms, or no penalty.
enum class KappaPolicy { SubstituteWithPenalty, DropSubstituted, SubstituteNoPenalty };

struct DistanceSpec {
    DistanceKind kind = DistanceKind::TOD;
    double alpha1 = 1.0;
    double alpha2 = 0.0;
    int mc_samples = 500;  // per-side sample count for OD/ID
    std::vector<double> intervention_values = {1.0};
    std::uint64_t seed = 0;
    KappaPolicy kappa = KappaPolicy::SubstituteWithPenalty;
};

void validate(const DistanceSpec& spec);

// Exact 1-Wasserstein distance between uniform empirical distributions with
// Euclidean ground cost. Equal-size inputs reduce to a perfect assignment;
// otherwise an exact min-cost flow with uniform weights is solved.
double wasserstein(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

// Observational distance: Wasserstein between fresh (post-sigmoid) samples.
// Both sides draw from identically seeded streams, so od(s, s) == 0.
double od(const Scm& scm_i, const Scm& scm_j, int m, std::uint64_t seed);

// Interventional distance: mean over intervention variables (and the value
// grid) of the Wasserstein distance between interventional samples.
double id(const Scm& scm_i, const Scm& scm_j, int m, std::uint64_t seed,
          const std::vector<double>& values = {1.0});

// Total observational / interventional distances over known models.
double tod(const Scm& scm_i, const Scm& scm_j, const DistanceSpec& spec, std::uint64_t pair_seed);
double tid(const Scm& scm_i, const Scm& scm_j, const DistanceSpec& spec, std::uint64_t pair_seed);

// Observational proxy: Wasserstein over the tasks' available labelled rows.
double op_proxy(const Task& a, const Task& b);

// Per-task diagonal Gaussian posteriors in the local parameter space, used to
// substitute missing intervention strata.
struct TaskEmbeddings {
    Eigen::MatrixXd mu;     // n_tasks x P
    Eigen::MatrixXd sigma;  // n_tasks x P
};

// Closed-form 2-Wasserstein nearest neighbour among candidates; ties break
// toward the lowest task index.
int nearest_in_parameter_space(int task, const std::vector<int>& candidates,
                               const TaskEmbeddings& embeddings);

// Interventional proxy: kappa-weighted mean over intervention strata of the
// observational proxy on stratum-restricted rows, substituting the nearest
// training task for strata a side lacks.
double ip_proxy(const Task& a, const Task& b, const Dataset& data,
                const std::vector<int>& strata, const TaskEmbeddings* embeddings,
                KappaPolicy policy = KappaPolicy::SubstituteWithPenalty);

// Intervention strata present anywhere in the dataset (sorted tag values).
std::vector<int> intervention_strata(const Dataset& data);

// Distance between two tasks under the given spec. TOD/TID require SCMs.
double pair_distance(const Dataset& data, int i, int j, const DistanceSpec& spec,
                     const std::vector<Scm>* task_scms, const TaskEmbeddings* embeddings);

// Symmetric pairwise matrix; entries computed once per unordered pair.
DistanceMatrix distance_matrix(const Dataset& data, const DistanceSpec& spec,
                               const std::vector<Scm>* task_scms = nullptr,
                               const TaskEmbeddings* embeddings = nullptr);

// Distances from one held-out task to each of the given tasks (typically the
// training tasks), under the same conventions as distance_matrix.
Eigen::VectorXd distances_to_tasks(const Dataset& data, int task, const std::vector<int>& others,
                                   const DistanceSpec& spec, const std::vector<Scm>* task_scms,
                                   const TaskEmbeddings* embeddings);

}  // namespace causalhbm
