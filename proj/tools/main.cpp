// Command-line front end: generate / distances / cluster / train / evaluate /
// experiment / recipe. All outputs are deterministic given the same inputs
// and seeds; wall-clock timings go to a separate run_meta.json.

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "causalhbm/harness.hpp"

namespace chbm = causalhbm;
namespace fs = std::filesystem;

namespace {

bool verbose() {
    const char* v = std::getenv("CAUSALHBM_VERBOSE");
    return v != nullptr && std::string(v) != "0";
}

void note(const std::string& message) {
    if (verbose()) std::cerr << message << "\n";
}

void write_run_meta(const std::string& dir, double seconds) {
    chbm::write_json_file(dir + "/run_meta.json", chbm::Json{{"seconds", seconds}});
}

chbm::Json load_json_or(const std::string& path, chbm::Json fallback) {
    if (path.empty()) return fallback;
    return chbm::read_json_file(path);
}

chbm::TaskEmbeddings embeddings_from_json(const chbm::Json& j) {
    chbm::TaskEmbeddings emb;
    const auto& mu = j.at("mu");
    const auto& sigma = j.at("sigma");
    const int n = static_cast<int>(mu.size());
    if (n == 0) throw chbm::SchemaError("embeddings are empty");
    const int p = static_cast<int>(mu.at(0).size());
    emb.mu.resize(n, p);
    emb.sigma.resize(n, p);
    for (int i = 0; i < n; ++i) {
        for (int d = 0; d < p; ++d) {
            emb.mu(i, d) = mu.at(i).at(d).get<double>();
            emb.sigma(i, d) = sigma.at(i).at(d).get<double>();
        }
    }
    return emb;
}

chbm::Json embeddings_to_json(const chbm::TaskEmbeddings& emb) {
    chbm::Json mu = chbm::Json::array();
    chbm::Json sigma = chbm::Json::array();
    for (int i = 0; i < emb.mu.rows(); ++i) {
        chbm::Json mr = chbm::Json::array();
        chbm::Json sr = chbm::Json::array();
        for (int d = 0; d < emb.mu.cols(); ++d) {
            mr.push_back(emb.mu(i, d));
            sr.push_back(emb.sigma(i, d));
        }
        mu.push_back(mr);
        sigma.push_back(sr);
    }
    return chbm::Json{{"mu", mu}, {"sigma", sigma}};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Causal similarity-based hierarchical Bayesian models"};
    app.require_subcommand(1);

    // generate
    std::string gen_config, gen_out;
    auto* gen = app.add_subcommand("generate", "Generate a synthetic multi-task dataset");
    gen->add_option("--config", gen_config, "Toy model config JSON")->required();
    gen->add_option("--out", gen_out, "Output directory")->required();

    // distances
    std::string dist_dataset, dist_spec, dist_scms, dist_embeddings, dist_trainer, dist_out;
    std::string dist_save_embeddings;
    auto* dist = app.add_subcommand("distances", "Compute the pairwise distance matrix");
    dist->add_option("--dataset", dist_dataset, "Dataset JSONL")->required();
    dist->add_option("--spec", dist_spec, "Distance spec JSON")->required();
    dist->add_option("--scms", dist_scms, "Ground-truth sidecar JSON (TOD/TID)");
    dist->add_option("--embeddings", dist_embeddings, "Local embeddings JSON (IP)");
    dist->add_option("--trainer", dist_trainer, "Trainer config for computing IP embeddings");
    dist->add_option("--save-embeddings", dist_save_embeddings, "Write computed embeddings here");
    dist->add_option("--out", dist_out, "Output matrix JSON")->required();

    // cluster
    std::string cl_matrix, cl_dataset, cl_out;
    int cl_c = 2;
    std::uint64_t cl_seed = 0;
    auto* cl = app.add_subcommand("cluster", "Spectral clustering into causal groups");
    cl->add_option("--matrix", cl_matrix, "Distance matrix JSON")->required();
    cl->add_option("--dataset", cl_dataset, "Dataset JSONL (for split information)")->required();
    cl->add_option("--C", cl_c, "Number of groups")->required();
    cl->add_option("--seed", cl_seed, "Clustering seed");
    cl->add_option("--out", cl_out, "Output groups JSON")->required();

    // train
    std::string tr_dataset, tr_groups, tr_config, tr_out;
    auto* tr = app.add_subcommand("train", "Train the hierarchical model");
    tr->add_option("--dataset", tr_dataset, "Dataset JSONL")->required();
    tr->add_option("--groups", tr_groups, "Groups JSON")->required();
    tr->add_option("--config", tr_config, "Trainer config JSON");
    tr->add_option("--out", tr_out, "Checkpoint directory")->required();

    // evaluate
    std::string ev_dataset, ev_ckpt, ev_out;
    auto* ev = app.add_subcommand("evaluate", "Evaluate a checkpoint");
    ev->add_option("--dataset", ev_dataset, "Dataset JSONL")->required();
    ev->add_option("--ckpt", ev_ckpt, "Checkpoint directory")->required();
    ev->add_option("--out", ev_out, "Output report JSON")->required();

    // experiment
    std::string ex_spec, ex_out;
    auto* ex = app.add_subcommand("experiment", "Run a full experiment grid");
    ex->add_option("--spec", ex_spec, "Experiment spec JSON")->required();
    ex->add_option("--out", ex_out, "Output directory")->required();

    // recipe
    std::string rc_name, rc_config, rc_out;
    auto* rc = app.add_subcommand("recipe", "Run a named experiment recipe");
    rc->add_option("name", rc_name, "distance_validation | ablation_ip")->required();
    rc->add_option("--config", rc_config, "Recipe config JSON");
    rc->add_option("--out", rc_out, "Output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        const auto started = std::chrono::steady_clock::now();
        const auto elapsed = [&] {
            return std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
                .count();
        };

        if (*gen) {
            const chbm::ToyModelConfig cfg =
                chbm::toy_config_from_json(chbm::read_json_file(gen_config));
            fs::create_directories(gen_out);
            note("generating dataset");
            chbm::GeneratedDataset data = chbm::generate_toy_dataset(cfg);
            chbm::write_dataset_jsonl(data.data, gen_out + "/dataset.jsonl");
            chbm::GroundTruth truth;
            truth.group_labels = data.group_labels;
            truth.task_scms = data.task_scms;
            truth.group_scms = data.group_scms;
            truth.reference_scm = data.reference_scm;
            chbm::write_json_file(gen_out + "/truth.json", chbm::truth_to_json(truth));
            chbm::write_json_file(gen_out + "/config.json", chbm::toy_config_to_json(cfg));
            write_run_meta(gen_out, elapsed());
        } else if (*dist) {
            const chbm::Dataset data = chbm::load_dataset(dist_dataset);
            const chbm::DistanceSpec spec =
                chbm::distance_spec_from_json(chbm::read_json_file(dist_spec));
            std::optional<chbm::GroundTruth> truth;
            if (!dist_scms.empty()) {
                truth = chbm::truth_from_json(chbm::read_json_file(dist_scms));
            }
            std::optional<chbm::TaskEmbeddings> embeddings;
            if (!dist_embeddings.empty()) {
                embeddings = embeddings_from_json(chbm::read_json_file(dist_embeddings));
            } else if (spec.kind == chbm::DistanceKind::IP) {
                note("computing local embeddings for the interventional proxy");
                chbm::TrainerConfig ecfg = chbm::trainer_config_from_json(
                    load_json_or(dist_trainer, chbm::Json::object()));
                ecfg.seed = spec.seed;
                embeddings = chbm::local_embeddings(data, ecfg);
                if (!dist_save_embeddings.empty()) {
                    chbm::write_json_file(dist_save_embeddings, embeddings_to_json(*embeddings));
                }
            }
            note("computing distance matrix");
            const chbm::DistanceMatrix matrix =
                chbm::distance_matrix(data, spec, truth ? &truth->task_scms : nullptr,
                                      embeddings ? &*embeddings : nullptr);
            chbm::write_json_file(dist_out, chbm::matrix_to_json(matrix, to_string(spec.kind)));
        } else if (*cl) {
            const chbm::Dataset data = chbm::load_dataset(cl_dataset);
            const chbm::DistanceMatrix matrix =
                chbm::matrix_from_json(chbm::read_json_file(cl_matrix));
            const chbm::GroupAssignment groups =
                chbm::assign_all_tasks(data, matrix, cl_c, cl_seed);
            chbm::write_json_file(cl_out, chbm::groups_to_json(groups));
        } else if (*tr) {
            const chbm::Dataset data = chbm::load_dataset(tr_dataset);
            const chbm::GroupAssignment groups =
                chbm::groups_from_json(chbm::read_json_file(tr_groups));
            chbm::TrainerConfig cfg =
                chbm::trainer_config_from_json(load_json_or(tr_config, chbm::Json::object()));
            cfg.C = groups.C;
            note("training");
            const chbm::TrainResult result = chbm::train(data, groups, cfg);
            chbm::Checkpoint ckpt;
            ckpt.shape = chbm::NetworkShape{data.n_features};
            ckpt.params = result.params;
            ckpt.groups = groups;
            ckpt.config = cfg;
            chbm::write_checkpoint(tr_out, ckpt, result.log);
            write_run_meta(tr_out, elapsed());
        } else if (*ev) {
            const chbm::Dataset data = chbm::load_dataset(ev_dataset);
            const chbm::Checkpoint ckpt = chbm::read_checkpoint(ev_ckpt);
            chbm::Json per_task = chbm::Json::array();
            double val_sum = 0, test_sum = 0;
            int val_n = 0, test_n = 0;
            for (const chbm::Split split : {chbm::Split::Val, chbm::Split::Test}) {
                const auto tasks = data.task_indices(split);
                const Eigen::VectorXd rmses =
                    chbm::evaluate_rmse(ckpt.params, data, ckpt.groups, ckpt.config, split);
                for (int i = 0; i < rmses.size(); ++i) {
                    per_task.push_back(chbm::Json{{"task", tasks[i]},
                                                  {"split", to_string(split)},
                                                  {"rmse", rmses(i)}});
                    if (split == chbm::Split::Val) {
                        val_sum += rmses(i);
                        ++val_n;
                    } else {
                        test_sum += rmses(i);
                        ++test_n;
                    }
                }
            }
            chbm::Json report{{"per_task", per_task}};
            if (val_n > 0) report["val_rmse_mean"] = val_sum / val_n;
            if (test_n > 0) report["test_rmse_mean"] = test_sum / test_n;
            chbm::write_json_file(ev_out, report);
        } else if (*ex) {
            const chbm::ExperimentSpec spec =
                chbm::experiment_spec_from_json(chbm::read_json_file(ex_spec));
            fs::create_directories(ex_out);
            note("running experiment grid");
            const chbm::ResultReport report = chbm::run_experiment(spec);
            chbm::write_json_file(ex_out + "/report.json", chbm::report_to_json(report));
            chbm::write_text_file(ex_out + "/cells.csv", chbm::report_to_csv(report));
            chbm::write_text_file(ex_out + "/plot.csv", chbm::report_to_plot_csv(report));
            write_run_meta(ex_out, elapsed());
        } else if (*rc) {
            fs::create_directories(rc_out);
            const chbm::Json cfg = load_json_or(rc_config, chbm::Json::object());
            if (rc_name == "distance_validation") {
                const auto report =
                    chbm::recipe_distance_validation(chbm::distance_validation_config_from_json(cfg));
                chbm::write_json_file(rc_out + "/report.json",
                                      chbm::distance_validation_to_json(report));
            } else if (rc_name == "ablation_ip") {
                const auto report = chbm::recipe_ablation_ip(chbm::ablation_config_from_json(cfg));
                chbm::write_json_file(rc_out + "/report.json", chbm::ablation_to_json(report));
            } else {
                std::cerr << "unknown recipe: " << rc_name << "\n";
                return 2;
            }
            write_run_meta(rc_out, elapsed());
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
