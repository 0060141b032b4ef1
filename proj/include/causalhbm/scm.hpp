#pragma once

#include <Eigen/Core>
#include <optional>
#include <vector>

#include "causalhbm/dataset.hpp"
#include "causalhbm/graph.hpp"
#include "causalhbm/rng.hpp"

namespace causalhbm {

// Linear-Gaussian structural causal model. weights(v, u) is the coefficient
// of parent u in the structural equation for v; zero where no edge exists.
struct Scm {
    Dag graph;
    Eigen::MatrixXd weights;
    Eigen::VectorXd noise_std;
};

void validate(const Scm& scm);

struct Intervention {
    int node = 0;
    double value = 1.0;
};

// The fixed 8-node reference topology: 2 intervention variables, 5
// covariates, one target.
Dag default_reference_dag();

// Flips eligible edge slots of base with probability p ~ Unif(0, eta), drawn
// once per call, rejecting results that violate the Dag invariants. Slots
// that would give the target an outgoing edge or an intervention node a
// parent are never flipped.
Dag perturb_dag(const Dag& base, double eta, Rng& rng, int max_attempts = 1000);

// Redraws weights for the edges of new_graph around the base weights
// (absent-in-base edges are centered at zero). Noise scales are copied.
Scm perturb_params(const Scm& base, const Dag& new_graph, double sigma, Rng& rng);

// Raw ancestral samples of every node (pre-sigmoid), one row per draw.
Eigen::MatrixXd sample_nodes(const Scm& scm, int m, std::optional<Intervention> intervention,
                             Rng& rng);

struct SampleBatch {
    Eigen::MatrixXd x;    // m x K
    Eigen::VectorXd y;    // target column
    Eigen::VectorXi tag;  // intervened node index, -1 if none
};

// m labelled rows from the SCM; the target column passes through the
// logistic sigmoid unless sigmoid_y is false.
SampleBatch sample(const Scm& scm, int m, std::optional<Intervention> intervention, Rng& rng,
                   bool sigmoid_y = true);

struct GaussianJoint {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

// Closed-form joint of all nodes before the sigmoid rescaling. Under an
// intervention the node's incoming weights are zeroed and its value fixed.
GaussianJoint analytic_gaussian_joint(const Scm& scm,
                                      std::optional<Intervention> intervention = {});

struct ToyModelConfig {
    int n_train = 200;
    int n_val = 30;
    int n_test = 30;
    int m_support = 10;
    int m_query = 10;
    int n_groups = 1;  // C
    std::optional<Dag> reference_dag;
    double sigma_ref = 1.0;
    double sigma_group = 0.1;
    double sigma_task = 1e-4;
    double eta_group = 0.6;
    double eta_task = 0.05;
    double noise_std = 0.1;
    double intervention_value = 1.0;
    std::uint64_t seed = 0;
    int max_rejection_attempts = 1000;
};

void validate(const ToyModelConfig& cfg);

struct GeneratedDataset {
    Dataset data;
    std::vector<int> group_labels;  // ground-truth group per task
    std::vector<Scm> task_scms;
    std::vector<Scm> group_scms;
    Scm reference_scm;
};

// Hierarchical toy-model generator: reference SCM -> C group SCMs -> task
// SCMs -> per-task samples with uniformly sampled hard interventions.
GeneratedDataset generate_toy_dataset(const ToyModelConfig& cfg);

}  // namespace causalhbm
