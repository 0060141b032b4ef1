#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <vector>

#include "causalhbm/cluster.hpp"
#include "causalhbm/dataset.hpp"
#include "causalhbm/vi.hpp"

namespace causalhbm {

// Variational parameters of the three-level hierarchy: one global level and
// C causal-group levels. Per-task parameters are materialized transiently
// during adaptation.
struct HierarchicalParams {
    GaussianParams psi;
    std::vector<GaussianParams> psi_c;
};

enum class MetaGradientMode { FirstOrder, Unrolled };

std::string to_string(MetaGradientMode m);
MetaGradientMode meta_mode_from_string(const std::string& s);

struct TrainerConfig {
    int C = 1;
    int inner_steps = 2;  // G
    double beta1 = 1e-3;  // local adaptation rate
    double beta2 = 1e-3;  // group rate
    double beta3 = 1e-3;  // global rate
    double lambda = 0.01;  // cold-posterior weight on KL terms
    int epochs = 50;
    int patience = 5;
    int warm_start_epochs = 5;
    double warm_start_beta2 = 1e-2;
    double warm_start_beta3 = 1e-2;
    int n_mc_train = 1;
    int n_mc_eval = 16;
    int predictive_samples = 100;  // S
    double obs_sigma = 0.1;
    ScaleMixturePrior prior;
    MetaGradientMode mode = MetaGradientMode::FirstOrder;
    std::uint64_t seed = 0;
    double init_mu_std = 0.1;
    double init_rho = -3.0;
    int baseline_epochs = 200;  // per-task steps for the local baseline
    double baseline_lr = 1e-3;
};

void validate(const TrainerConfig& cfg);

struct EpochLog {
    int epoch = 0;
    double train_loss = 0.0;
    double val_rmse = 0.0;
    double kl_global = 0.0;
    double kl_group_mean = 0.0;
    double kl_task_mean = 0.0;
    int skipped_tasks = 0;
};

struct TrainResult {
    HierarchicalParams params;
    std::vector<EpochLog> log;
    int best_epoch = -1;
    double best_val_rmse = 0.0;
};

// Fresh random initialization: mu ~ N(0, init_mu_std^2), rho = init_rho.
GaussianParams default_init(const NetworkShape& shape, const TrainerConfig& cfg, Rng rng);

// Short flat meta-learning phase whose global parameters seed psi and every
// psi_c. With warm_start_epochs == 0 this is the default initialization.
GaussianParams warm_start(const Dataset& data, const TrainerConfig& cfg);

// G gradient-descent steps on the support task loss starting from init.
GaussianParams inner_adapt(const GaussianParams& init, const Eigen::VectorXd& prior_mu,
                           const Eigen::VectorXd& prior_sigma, const NetworkShape& shape,
                           const Eigen::MatrixXd& xs, const Eigen::VectorXd& ys,
                           const TrainerConfig& cfg, Rng rng);

// Hierarchical training loop. groups must label every task (training labels
// from clustering, held-out labels from nearest-task assignment).
TrainResult train(const Dataset& data, const GroupAssignment& groups, const TrainerConfig& cfg);

struct Prediction {
    Eigen::VectorXd mean;     // per query point
    Eigen::MatrixXd samples;  // S x n_query individual draws
};

// Adaptation from the group prior on the support set followed by S-sample
// posterior predictive averaging.
Prediction predict_new_task(const HierarchicalParams& params, int group,
                            const Eigen::MatrixXd& support_x, const Eigen::VectorXd& support_y,
                            const Eigen::MatrixXd& query_x, const NetworkShape& shape,
                            const TrainerConfig& cfg, Rng rng);

// Baselines. The flat meta baseline is the C = 1 degenerate trainer (same
// code path); global pools every training sample into one variational fit;
// local fits an independent BNN per task on its support set.
TrainResult train_meta(const Dataset& data, TrainerConfig cfg);

struct BaselineResult {
    GaussianParams params;
    std::vector<EpochLog> log;
    int best_epoch = -1;
};

BaselineResult train_global(const Dataset& data, const TrainerConfig& cfg);
std::vector<GaussianParams> train_local(const Dataset& data, const TrainerConfig& cfg);

// Predictive mean from S weight draws without adaptation.
Eigen::VectorXd predict_direct(const GaussianParams& q, const NetworkShape& shape,
                               const Eigen::MatrixXd& query_x, int n_samples, Rng rng);

// Per-task query RMSE of the hierarchical model on one split.
Eigen::VectorXd evaluate_rmse(const HierarchicalParams& params, const Dataset& data,
                              const GroupAssignment& groups, const TrainerConfig& cfg,
                              Split split);

}  // namespace causalhbm
