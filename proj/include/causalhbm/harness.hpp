#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "causalhbm/hbm.hpp"
#include "causalhbm/io.hpp"

namespace causalhbm {

// Per-task root-mean-squared error; the experiment metric is the unweighted
// mean over tasks.
double rmse(const Eigen::VectorXd& y_true, const Eigen::VectorXd& y_pred);

Dataset load_dataset(const std::string& path);

// Fits per-column mean/std (features and target) on training-task samples
// only and applies the transform to every split.
void standardize(Dataset& data);

// Local diagonal-Gaussian posteriors from a short flat meta-learning run:
// each task's support-adapted parameters, flattened to (mu, sigma) rows.
TaskEmbeddings local_embeddings(const Dataset& data, const TrainerConfig& cfg);

// Spectral clustering on the training block plus nearest-task assignment for
// held-out tasks; labels cover every task.
GroupAssignment assign_all_tasks(const Dataset& data, const DistanceMatrix& matrix, int C,
                                 std::uint64_t seed);

// Summary helpers shared by recipes and the acceptance suite.
double mean_pairwise_distance(const DistanceMatrix& m);
// (within-group mean, between-group mean) over task pairs.
std::pair<double, double> within_between_means(const DistanceMatrix& m,
                                               const std::vector<int>& labels);
// Pearson correlation over the strict upper triangles of two matrices.
double pearson_upper(const DistanceMatrix& a, const DistanceMatrix& b);

struct ExperimentSpec {
    std::optional<ToyModelConfig> generate;
    std::string dataset_file;
    std::string truth_file;
    bool standardize_data = false;
    std::vector<std::string> methods = {"ours", "meta", "global"};
    std::vector<DistanceSpec> distances;
    std::vector<int> c_grid = {2, 4};
    std::vector<std::uint64_t> seeds = {0, 1, 2};
    TrainerConfig trainer;
    TrainerConfig embedding_trainer;
};

ExperimentSpec experiment_spec_from_json(const Json& j);
Json experiment_spec_to_json(const ExperimentSpec& spec);

struct CellResult {
    std::string method;
    std::string distance;  // empty for baselines
    int C = 0;             // 0 when not applicable
    std::uint64_t seed = 0;
    double test_rmse = 0.0;
    double f1_train = -1.0;  // negative when unavailable
    double f1_eval = -1.0;
    double f1_train_micro = -1.0;
    double f1_eval_micro = -1.0;
    double seconds = 0.0;
    std::string error;
};

struct ResultReport {
    std::vector<CellResult> cells;
};

Json report_to_json(const ResultReport& report);
std::string report_to_csv(const ResultReport& report);
// Plot-ready rows (x = C, series = method/distance): x,series,mean,sd.
std::string report_to_plot_csv(const ResultReport& report);

ResultReport run_experiment(const ExperimentSpec& spec);

// Appendix-style validation of the toy model: mean pairwise distances vs C,
// distance correlations at a fixed C, and within/between-group gaps.
struct DistanceValidationConfig {
    ToyModelConfig base;
    std::vector<std::uint64_t> seeds = {0, 1, 2};
    std::vector<std::string> kinds = {"SHD", "SID", "OD", "ID"};
    std::vector<int> c_grid = {1, 2, 3, 4, 5, 6, 7, 8};
    std::vector<int> gap_cs = {2, 4, 6, 8};
    int correlation_c = 4;
    int mc_samples = 100;
};

DistanceValidationConfig distance_validation_config_from_json(const Json& j);

struct DistanceValidationRow {
    std::string kind;
    int C = 0;
    std::uint64_t seed = 0;
    double mean_pairwise = 0.0;
    double within_mean = 0.0;   // NaN when not computed
    double between_mean = 0.0;  // NaN when not computed
};

struct DistanceValidationReport {
    std::vector<DistanceValidationRow> rows;
    // kind_a, kind_b, seed, correlation at correlation_c
    std::vector<std::tuple<std::string, std::string, std::uint64_t, double>> correlations;
};

DistanceValidationReport recipe_distance_validation(const DistanceValidationConfig& cfg);
Json distance_validation_to_json(const DistanceValidationReport& report);

// Proxy ablation: IP with substitution penalties, without substituted terms,
// and without the penalty, on data with induced missing intervention strata.
struct AblationConfig {
    ToyModelConfig base;
    std::vector<std::uint64_t> seeds = {0, 1, 2};
    int C = 2;
    double drop_fraction = 0.5;
    TrainerConfig trainer;
    TrainerConfig embedding_trainer;
};

AblationConfig ablation_config_from_json(const Json& j);

// Removes every sample of one randomly chosen stratum from the selected
// fraction of tasks (skipping tasks where that would empty a fold).
void induce_missing_strata(Dataset& data, double fraction, Rng rng);

struct AblationCell {
    std::string variant;  // IP1 / IP2 / IP3
    std::uint64_t seed = 0;
    double test_rmse = 0.0;
    double f1_train = -1.0;
};

struct AblationReport {
    std::vector<AblationCell> cells;
};

AblationReport recipe_ablation_ip(const AblationConfig& cfg);
Json ablation_to_json(const AblationReport& report);

// Named spec for a distance family used in reports: SHD/SID/OD/ID map onto
// degenerate TOD/TID weightings.
DistanceSpec named_distance_spec(const std::string& name, std::uint64_t seed, int mc_samples);

}  // namespace causalhbm
