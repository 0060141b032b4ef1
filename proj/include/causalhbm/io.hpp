#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "causalhbm/cluster.hpp"
#include "causalhbm/dataset.hpp"
#include "causalhbm/hbm.hpp"
#include "causalhbm/scm.hpp"
#include "causalhbm/transport.hpp"

namespace causalhbm {

using Json = nlohmann::json;

// DAG schema: {"n_nodes": int, "edges": [[u, v], ...], "roles": [...]}.
Json dag_to_json(const Dag& g);
Dag dag_from_json(const Json& j);

Json scm_to_json(const Scm& s);
Scm scm_from_json(const Json& j);

Json params_to_json(const GaussianParams& q);
GaussianParams params_from_json(const Json& j);

Json toy_config_to_json(const ToyModelConfig& cfg);
ToyModelConfig toy_config_from_json(const Json& j);

Json distance_spec_to_json(const DistanceSpec& spec);
DistanceSpec distance_spec_from_json(const Json& j);

Json matrix_to_json(const DistanceMatrix& m, const std::string& kind);
DistanceMatrix matrix_from_json(const Json& j);

Json groups_to_json(const GroupAssignment& a);
GroupAssignment groups_from_json(const Json& j);

Json trainer_config_to_json(const TrainerConfig& cfg);
TrainerConfig trainer_config_from_json(const Json& j);

// Ground-truth sidecar for generated datasets.
struct GroundTruth {
    std::vector<int> group_labels;
    std::vector<Scm> task_scms;
    std::vector<Scm> group_scms;
    Scm reference_scm;
};

Json truth_to_json(const GroundTruth& t);
GroundTruth truth_from_json(const Json& j);

// Dataset JSONL: one record per sample,
// {"task_id", "split", "fold", "x", "intervention", "y"}.
void write_dataset_jsonl(const Dataset& data, const std::string& path);
Dataset read_dataset_jsonl(const std::string& path);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);
Json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const Json& j);

// Checkpoint directory layout: params.json (+ groups and config echo) and
// log.csv.
struct Checkpoint {
    NetworkShape shape;
    HierarchicalParams params;
    GroupAssignment groups;
    TrainerConfig config;
};

void write_checkpoint(const std::string& dir, const Checkpoint& ckpt,
                      const std::vector<EpochLog>& log);
Checkpoint read_checkpoint(const std::string& dir);

std::string log_to_csv(const std::vector<EpochLog>& log);

GeneratedDataset dataset_with_truth(Dataset data, GroundTruth truth);

}  // namespace causalhbm
