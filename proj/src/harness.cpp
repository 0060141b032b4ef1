#include "causalhbm/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace causalhbm {

double rmse(const Eigen::VectorXd& y_true, const Eigen::VectorXd& y_pred) {
    if (y_true.size() != y_pred.size()) throw LengthMismatchError("rmse: length mismatch");
    if (y_true.size() == 0) throw LengthMismatchError("rmse: empty vectors");
    return std::sqrt((y_true - y_pred).array().square().mean());
}

Dataset load_dataset(const std::string& path) { return read_dataset_jsonl(path); }

void standardize(Dataset& data) {
    const int k = data.n_features;
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(k + 1);
    Eigen::VectorXd m2 = Eigen::VectorXd::Zero(k + 1);
    long n = 0;

    auto accumulate_rows = [&](const Eigen::MatrixXd& xs, const Eigen::VectorXd& ys) {
        for (int r = 0; r < xs.rows(); ++r) {
            ++n;
            for (int c = 0; c < k; ++c) mean(c) += xs(r, c);
            mean(k) += ys(r);
        }
    };
    for (const auto& t : data.tasks) {
        if (t.split != Split::Train) continue;
        accumulate_rows(t.support_x, t.support_y);
        accumulate_rows(t.query_x, t.query_y());
    }
    if (n < 2) throw SchemaError("standardize: not enough training samples");
    mean /= static_cast<double>(n);
    for (const auto& t : data.tasks) {
        if (t.split != Split::Train) continue;
        auto add_sq = [&](const Eigen::MatrixXd& xs, const Eigen::VectorXd& ys) {
            for (int r = 0; r < xs.rows(); ++r) {
                for (int c = 0; c < k; ++c) m2(c) += (xs(r, c) - mean(c)) * (xs(r, c) - mean(c));
                m2(k) += (ys(r) - mean(k)) * (ys(r) - mean(k));
            }
        };
        add_sq(t.support_x, t.support_y);
        add_sq(t.query_x, t.query_y());
    }
    Eigen::VectorXd std_dev = (m2 / static_cast<double>(n)).array().sqrt();
    for (int c = 0; c <= k; ++c) {
        if (!(std_dev(c) > 0.0)) std_dev(c) = 1.0;  // constant column: center only
    }

    for (auto& t : data.tasks) {
        for (int c = 0; c < k; ++c) {
            t.support_x.col(c) = (t.support_x.col(c).array() - mean(c)) / std_dev(c);
            t.query_x.col(c) = (t.query_x.col(c).array() - mean(c)) / std_dev(c);
        }
        t.support_y = (t.support_y.array() - mean(k)) / std_dev(k);
        Eigen::VectorXd qy = t.query_y();
        t.set_query_y((qy.array() - mean(k)) / std_dev(k));
    }
}

TaskEmbeddings local_embeddings(const Dataset& data, const TrainerConfig& cfg) {
    TrainerConfig flat = cfg;
    flat.seed = Rng(cfg.seed).child(stream::kEmbedding).seed();
    const TrainResult meta = train_meta(data, flat);
    const NetworkShape shape{data.n_features};
    const int p = param_count(shape);

    TaskEmbeddings emb;
    emb.mu.resize(static_cast<int>(data.tasks.size()), p);
    emb.sigma.resize(static_cast<int>(data.tasks.size()), p);
    const GaussianParams& init = meta.params.psi_c[0];
    const Eigen::VectorXd prior_mu = init.mu;
    const Eigen::VectorXd prior_sigma = sigma_of(init);
    const Rng root = Rng(flat.seed).child(stream::kEmbedding, 1);
    for (int t = 0; t < static_cast<int>(data.tasks.size()); ++t) {
        const Task& task = data.tasks[t];
        const GaussianParams gamma =
            inner_adapt(init, prior_mu, prior_sigma, shape, task.support_x, task.support_y, flat,
                        root.child(static_cast<std::uint64_t>(t)));
        emb.mu.row(t) = gamma.mu.transpose();
        emb.sigma.row(t) = sigma_of(gamma).transpose();
    }
    return emb;
}

GroupAssignment assign_all_tasks(const Dataset& data, const DistanceMatrix& matrix, int C,
                                 std::uint64_t seed) {
    const std::vector<int> train = data.task_indices(Split::Train);
    const int n_train = static_cast<int>(train.size());
    if (matrix.n != static_cast<int>(data.tasks.size())) {
        throw ShapeMismatchError("assign_all_tasks: matrix size mismatch");
    }

    DistanceMatrix train_block;
    train_block.n = n_train;
    train_block.d.resize(n_train, n_train);
    for (int a = 0; a < n_train; ++a) {
        for (int b = 0; b < n_train; ++b) train_block.d(a, b) = matrix.d(train[a], train[b]);
    }

    const GroupAssignment trained = spectral_cluster(affinity(train_block), C, seed);

    GroupAssignment all;
    all.C = C;
    all.labels.assign(data.tasks.size(), 0);
    for (int a = 0; a < n_train; ++a) all.labels[train[a]] = trained.labels[a];
    for (int t = 0; t < static_cast<int>(data.tasks.size()); ++t) {
        if (data.tasks[t].split == Split::Train) continue;
        Eigen::VectorXd dist(n_train);
        for (int a = 0; a < n_train; ++a) dist(a) = matrix.d(t, train[a]);
        all.labels[t] = assign_new_task(dist, trained);
    }
    return all;
}

double mean_pairwise_distance(const DistanceMatrix& m) {
    if (m.n < 2) return 0.0;
    double acc = 0.0;
    long count = 0;
    for (int i = 0; i < m.n; ++i) {
        for (int j = i + 1; j < m.n; ++j) {
            acc += m.d(i, j);
            ++count;
        }
    }
    return acc / static_cast<double>(count);
}

std::pair<double, double> within_between_means(const DistanceMatrix& m,
                                               const std::vector<int>& labels) {
    double within = 0.0, between = 0.0;
    long n_within = 0, n_between = 0;
    for (int i = 0; i < m.n; ++i) {
        for (int j = i + 1; j < m.n; ++j) {
            if (labels[i] == labels[j]) {
                within += m.d(i, j);
                ++n_within;
            } else {
                between += m.d(i, j);
                ++n_between;
            }
        }
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return {n_within > 0 ? within / n_within : nan, n_between > 0 ? between / n_between : nan};
}

double pearson_upper(const DistanceMatrix& a, const DistanceMatrix& b) {
    if (a.n != b.n) throw ShapeMismatchError("pearson: matrix size mismatch");
    std::vector<double> xs, ys;
    for (int i = 0; i < a.n; ++i) {
        for (int j = i + 1; j < a.n; ++j) {
            xs.push_back(a.d(i, j));
            ys.push_back(b.d(i, j));
        }
    }
    const double n = static_cast<double>(xs.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (sxx <= 0.0 || syy <= 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

DistanceSpec named_distance_spec(const std::string& name, std::uint64_t seed, int mc_samples) {
    DistanceSpec spec;
    spec.seed = seed;
    spec.mc_samples = mc_samples;
    if (name == "SHD") {
        spec.kind = DistanceKind::TOD;
        spec.alpha1 = 0.0;
        spec.alpha2 = 1.0;
    } else if (name == "SID") {
        spec.kind = DistanceKind::TID;
        spec.alpha1 = 0.0;
        spec.alpha2 = 1.0;
    } else if (name == "OD") {
        spec.kind = DistanceKind::TOD;
        spec.alpha1 = 1.0;
        spec.alpha2 = 0.0;
    } else if (name == "ID") {
        spec.kind = DistanceKind::TID;
        spec.alpha1 = 1.0;
        spec.alpha2 = 0.0;
    } else if (name == "OP") {
        spec.kind = DistanceKind::OP;
    } else if (name == "IP") {
        spec.kind = DistanceKind::IP;
    } else {
        throw SchemaError("unknown distance name: " + name);
    }
    return spec;
}

ExperimentSpec experiment_spec_from_json(const Json& j) {
    ExperimentSpec spec;
    if (j.contains("generate")) spec.generate = toy_config_from_json(j.at("generate"));
    spec.dataset_file = j.value("dataset_file", std::string());
    spec.truth_file = j.value("truth_file", std::string());
    spec.standardize_data = j.value("standardize", !spec.dataset_file.empty());
    if (j.contains("methods")) spec.methods = j.at("methods").get<std::vector<std::string>>();
    if (j.contains("distances")) {
        spec.distances.clear();
        for (const auto& d : j.at("distances")) {
            if (d.is_string()) {
                spec.distances.push_back(named_distance_spec(d.get<std::string>(), 0, 100));
            } else {
                spec.distances.push_back(distance_spec_from_json(d));
            }
        }
    }
    if (j.contains("C_grid")) spec.c_grid = j.at("C_grid").get<std::vector<int>>();
    if (j.contains("seeds")) spec.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("trainer")) spec.trainer = trainer_config_from_json(j.at("trainer"));
    spec.embedding_trainer = spec.trainer;
    spec.embedding_trainer.epochs = 5;
    spec.embedding_trainer.warm_start_epochs = 0;
    if (j.contains("embedding_trainer")) {
        spec.embedding_trainer = trainer_config_from_json(j.at("embedding_trainer"));
    }
    if (spec.methods.empty()) throw SchemaError("experiment needs at least one method");
    if (spec.seeds.empty()) throw SchemaError("experiment needs at least one seed");
    return spec;
}

Json experiment_spec_to_json(const ExperimentSpec& spec) {
    Json j;
    if (spec.generate) j["generate"] = toy_config_to_json(*spec.generate);
    if (!spec.dataset_file.empty()) j["dataset_file"] = spec.dataset_file;
    if (!spec.truth_file.empty()) j["truth_file"] = spec.truth_file;
    j["standardize"] = spec.standardize_data;
    j["methods"] = spec.methods;
    Json distances = Json::array();
    for (const auto& d : spec.distances) distances.push_back(distance_spec_to_json(d));
    j["distances"] = distances;
    j["C_grid"] = spec.c_grid;
    j["seeds"] = spec.seeds;
    j["trainer"] = trainer_config_to_json(spec.trainer);
    j["embedding_trainer"] = trainer_config_to_json(spec.embedding_trainer);
    return j;
}

namespace {

struct PreparedData {
    Dataset data;
    std::optional<GroundTruth> truth;
};

PreparedData prepare_dataset(const ExperimentSpec& spec, std::uint64_t seed) {
    PreparedData out;
    if (spec.generate) {
        ToyModelConfig cfg = *spec.generate;
        cfg.seed = seed;
        GeneratedDataset gen = generate_toy_dataset(cfg);
        out.data = std::move(gen.data);
        GroundTruth truth;
        truth.group_labels = std::move(gen.group_labels);
        truth.task_scms = std::move(gen.task_scms);
        truth.group_scms = std::move(gen.group_scms);
        truth.reference_scm = std::move(gen.reference_scm);
        out.truth = std::move(truth);
    } else if (!spec.dataset_file.empty()) {
        out.data = load_dataset(spec.dataset_file);
        if (!spec.truth_file.empty()) {
            out.truth = truth_from_json(read_json_file(spec.truth_file));
        }
        if (spec.standardize_data) standardize(out.data);
    } else {
        throw SchemaError("experiment spec needs either generate or dataset_file");
    }
    return out;
}

std::vector<int> labels_for(const std::vector<int>& all, const Dataset& data, Split split) {
    std::vector<int> out;
    for (const int t : data.task_indices(split)) out.push_back(all[t]);
    return out;
}

double mean_rmse(const Eigen::VectorXd& per_task) {
    return per_task.size() > 0 ? per_task.mean() : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

ResultReport run_experiment(const ExperimentSpec& spec) {
    ResultReport report;
    for (const std::uint64_t seed : spec.seeds) {
        PreparedData prepared = prepare_dataset(spec, seed);
        const Dataset& data = prepared.data;
        const std::vector<Scm>* scms =
            prepared.truth ? &prepared.truth->task_scms : nullptr;

        TrainerConfig trainer = spec.trainer;
        trainer.seed = seed;

        // Baselines.
        for (const std::string& method : spec.methods) {
            if (method == "ours") continue;
            CellResult cell;
            cell.method = method;
            cell.seed = seed;
            const auto start = std::chrono::steady_clock::now();
            try {
                if (method == "meta") {
                    TrainerConfig cfg = trainer;
                    const TrainResult r = train_meta(data, cfg);
                    cfg.C = 1;
                    const GroupAssignment zeros{1, std::vector<int>(data.tasks.size(), 0)};
                    cell.test_rmse = mean_rmse(evaluate_rmse(r.params, data, zeros, cfg, Split::Test));
                } else if (method == "global") {
                    const BaselineResult r = train_global(data, trainer);
                    const NetworkShape shape{data.n_features};
                    double acc = 0.0;
                    const std::vector<int> tests = data.task_indices(Split::Test);
                    const Rng root = Rng(trainer.seed).child(stream::kPredict, 77);
                    for (const int t : tests) {
                        const Task& task = data.tasks[t];
                        const Eigen::VectorXd pred =
                            predict_direct(r.params, shape, task.query_x,
                                           trainer.predictive_samples, root.child(t));
                        acc += rmse(task.query_y(), pred);
                    }
                    cell.test_rmse = acc / std::max<std::size_t>(1, tests.size());
                } else if (method == "local") {
                    const std::vector<GaussianParams> locals = train_local(data, trainer);
                    const NetworkShape shape{data.n_features};
                    double acc = 0.0;
                    const std::vector<int> tests = data.task_indices(Split::Test);
                    const Rng root = Rng(trainer.seed).child(stream::kPredict, 78);
                    for (const int t : tests) {
                        const Task& task = data.tasks[t];
                        const Eigen::VectorXd pred = predict_direct(
                            locals[t], shape, task.query_x, trainer.predictive_samples,
                            root.child(t));
                        acc += rmse(task.query_y(), pred);
                    }
                    cell.test_rmse = acc / std::max<std::size_t>(1, tests.size());
                } else {
                    throw SchemaError("unknown method: " + method);
                }
            } catch (const std::exception& e) {
                cell.error = e.what();
            }
            cell.seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            report.cells.push_back(cell);
        }

        if (std::find(spec.methods.begin(), spec.methods.end(), "ours") == spec.methods.end()) {
            continue;
        }

        // Embeddings are shared across C values for proxy distances.
        std::optional<TaskEmbeddings> embeddings;
        for (const DistanceSpec& base_spec : spec.distances) {
            DistanceSpec dspec = base_spec;
            dspec.seed = seed;
            std::string dist_name = to_string(dspec.kind);
            if (dspec.kind == DistanceKind::TOD || dspec.kind == DistanceKind::TID) {
                if (dspec.alpha1 == 0.0) {
                    dist_name = dspec.kind == DistanceKind::TOD ? "SHD" : "SID";
                } else if (dspec.alpha2 == 0.0) {
                    dist_name = dspec.kind == DistanceKind::TOD ? "OD" : "ID";
                }
            }

            DistanceMatrix matrix;
            std::string matrix_error;
            try {
                const TaskEmbeddings* emb = nullptr;
                if (dspec.kind == DistanceKind::IP) {
                    if (!embeddings) {
                        TrainerConfig ecfg = spec.embedding_trainer;
                        ecfg.seed = seed;
                        embeddings = local_embeddings(data, ecfg);
                    }
                    emb = &*embeddings;
                }
                matrix = distance_matrix(data, dspec, scms, emb);
            } catch (const std::exception& e) {
                matrix_error = e.what();
            }

            for (const int C : spec.c_grid) {
                CellResult cell;
                cell.method = "ours";
                cell.distance = dist_name;
                cell.C = C;
                cell.seed = seed;
                const auto start = std::chrono::steady_clock::now();
                try {
                    if (!matrix_error.empty()) throw Error(matrix_error);
                    const GroupAssignment groups = assign_all_tasks(data, matrix, C, seed);
                    if (prepared.truth) {
                        const auto truth_train =
                            labels_for(prepared.truth->group_labels, data, Split::Train);
                        const auto pred_train = labels_for(groups.labels, data, Split::Train);
                        cell.f1_train = group_recovery_f1(pred_train, truth_train);
                        cell.f1_train_micro = group_recovery_f1_micro(pred_train, truth_train);
                        std::vector<int> truth_eval, pred_eval;
                        for (const Split s : {Split::Val, Split::Test}) {
                            for (const int t : data.task_indices(s)) {
                                truth_eval.push_back(prepared.truth->group_labels[t]);
                                pred_eval.push_back(groups.labels[t]);
                            }
                        }
                        if (!truth_eval.empty()) {
                            cell.f1_eval = group_recovery_f1(pred_eval, truth_eval);
                            cell.f1_eval_micro = group_recovery_f1_micro(pred_eval, truth_eval);
                        }
                    }
                    TrainerConfig cfg = trainer;
                    cfg.C = C;
                    const TrainResult r = train(data, groups, cfg);
                    cell.test_rmse = mean_rmse(evaluate_rmse(r.params, data, groups, cfg, Split::Test));
                } catch (const std::exception& e) {
                    cell.error = e.what();
                }
                cell.seconds =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                        .count();
                report.cells.push_back(cell);
            }
        }
    }
    return report;
}

namespace {

Json cell_to_json(const CellResult& c) {
    Json j{{"method", c.method}, {"distance", c.distance}, {"C", c.C},
           {"seed", c.seed},     {"seconds", c.seconds}};
    if (c.error.empty()) {
        j["test_rmse"] = c.test_rmse;
        if (c.f1_train >= 0) {
            j["f1_train"] = c.f1_train;
            j["f1_train_micro"] = c.f1_train_micro;
        }
        if (c.f1_eval >= 0) {
            j["f1_eval"] = c.f1_eval;
            j["f1_eval_micro"] = c.f1_eval_micro;
        }
    } else {
        j["error"] = c.error;
    }
    return j;
}

struct Moments {
    double mean = 0.0;
    double sd = 0.0;
};

Moments moments_of(const std::vector<double>& v) {
    Moments m;
    if (v.empty()) return m;
    for (const double x : v) m.mean += x;
    m.mean /= static_cast<double>(v.size());
    double acc = 0.0;
    for (const double x : v) acc += (x - m.mean) * (x - m.mean);
    m.sd = v.size() > 1 ? std::sqrt(acc / static_cast<double>(v.size() - 1)) : 0.0;
    return m;
}

}  // namespace

Json report_to_json(const ResultReport& report) {
    Json cells = Json::array();
    for (const auto& c : report.cells) cells.push_back(cell_to_json(c));

    // Aggregate across seeds per (method, distance, C).
    std::map<std::string, std::vector<double>> rmses, f1s;
    for (const auto& c : report.cells) {
        if (!c.error.empty()) continue;
        const std::string key = c.method + "/" + c.distance + "/C" + std::to_string(c.C);
        rmses[key].push_back(c.test_rmse);
        if (c.f1_eval >= 0) f1s[key].push_back(c.f1_eval);
    }
    Json aggregates = Json::array();
    for (const auto& [key, values] : rmses) {
        const Moments m = moments_of(values);
        Json row{{"cell", key}, {"rmse_mean", m.mean}, {"rmse_sd", m.sd}, {"n", values.size()}};
        if (auto it = f1s.find(key); it != f1s.end()) {
            const Moments f = moments_of(it->second);
            row["f1_eval_mean"] = f.mean;
            row["f1_eval_sd"] = f.sd;
        }
        aggregates.push_back(row);
    }
    return Json{{"cells", cells}, {"aggregates", aggregates}};
}

std::string report_to_csv(const ResultReport& report) {
    std::ostringstream out;
    out.precision(17);
    out << "method,distance,C,seed,test_rmse,f1_train,f1_eval,seconds,error\n";
    for (const auto& c : report.cells) {
        out << c.method << "," << c.distance << "," << c.C << "," << c.seed << ",";
        if (c.error.empty()) out << c.test_rmse;
        out << "," << (c.f1_train >= 0 ? std::to_string(c.f1_train) : "") << ","
            << (c.f1_eval >= 0 ? std::to_string(c.f1_eval) : "") << "," << c.seconds << ","
            << (c.error.empty() ? "" : "\"" + c.error + "\"") << "\n";
    }
    return out.str();
}

std::string report_to_plot_csv(const ResultReport& report) {
    std::map<std::pair<std::string, int>, std::vector<double>> series;
    for (const auto& c : report.cells) {
        if (!c.error.empty()) continue;
        std::string name = c.method;
        if (!c.distance.empty()) name += "(" + c.distance + ")";
        series[{name, c.C}].push_back(c.test_rmse);
    }
    std::ostringstream out;
    out.precision(17);
    out << "x,series,mean,sd\n";
    for (const auto& [key, values] : series) {
        const Moments m = moments_of(values);
        out << key.second << "," << key.first << "," << m.mean << "," << m.sd << "\n";
    }
    return out.str();
}

DistanceValidationConfig distance_validation_config_from_json(const Json& j) {
    DistanceValidationConfig cfg;
    if (j.contains("base")) cfg.base = toy_config_from_json(j.at("base"));
    if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("kinds")) cfg.kinds = j.at("kinds").get<std::vector<std::string>>();
    if (j.contains("c_grid")) cfg.c_grid = j.at("c_grid").get<std::vector<int>>();
    if (j.contains("gap_cs")) cfg.gap_cs = j.at("gap_cs").get<std::vector<int>>();
    cfg.correlation_c = j.value("correlation_c", cfg.correlation_c);
    cfg.mc_samples = j.value("mc_samples", cfg.mc_samples);
    return cfg;
}

DistanceValidationReport recipe_distance_validation(const DistanceValidationConfig& cfg) {
    DistanceValidationReport report;
    for (const std::uint64_t seed : cfg.seeds) {
        std::map<int, GeneratedDataset> datasets;
        auto dataset_for = [&](int C) -> GeneratedDataset& {
            auto it = datasets.find(C);
            if (it == datasets.end()) {
                ToyModelConfig tc = cfg.base;
                tc.n_groups = C;
                tc.seed = Rng(seed).child(stream::kGenerate, C).seed();
                it = datasets.emplace(C, generate_toy_dataset(tc)).first;
            }
            return it->second;
        };

        std::set<int> all_cs(cfg.c_grid.begin(), cfg.c_grid.end());
        for (const int c : cfg.gap_cs) all_cs.insert(c);
        all_cs.insert(cfg.correlation_c);

        std::map<std::pair<std::string, int>, DistanceMatrix> matrices;
        for (const int C : all_cs) {
            GeneratedDataset& gen = dataset_for(C);
            for (const std::string& kind : cfg.kinds) {
                DistanceSpec dspec = named_distance_spec(kind, seed, cfg.mc_samples);
                matrices[{kind, C}] = distance_matrix(gen.data, dspec, &gen.task_scms, nullptr);
            }
        }

        for (const std::string& kind : cfg.kinds) {
            for (const int C : all_cs) {
                const DistanceMatrix& m = matrices[{kind, C}];
                DistanceValidationRow row;
                row.kind = kind;
                row.C = C;
                row.seed = seed;
                row.mean_pairwise = mean_pairwise_distance(m);
                row.within_mean = row.between_mean = std::numeric_limits<double>::quiet_NaN();
                if (std::find(cfg.gap_cs.begin(), cfg.gap_cs.end(), C) != cfg.gap_cs.end()) {
                    const auto [within, between] =
                        within_between_means(m, dataset_for(C).group_labels);
                    row.within_mean = within;
                    row.between_mean = between;
                }
                report.rows.push_back(row);
            }
        }

        for (std::size_t a = 0; a < cfg.kinds.size(); ++a) {
            for (std::size_t b = a + 1; b < cfg.kinds.size(); ++b) {
                const double corr = pearson_upper(matrices[{cfg.kinds[a], cfg.correlation_c}],
                                                  matrices[{cfg.kinds[b], cfg.correlation_c}]);
                report.correlations.emplace_back(cfg.kinds[a], cfg.kinds[b], seed, corr);
            }
        }
    }
    return report;
}

Json distance_validation_to_json(const DistanceValidationReport& report) {
    Json rows = Json::array();
    for (const auto& r : report.rows) {
        Json row{{"kind", r.kind}, {"C", r.C}, {"seed", r.seed}, {"mean_pairwise", r.mean_pairwise}};
        if (std::isfinite(r.within_mean)) {
            row["within_mean"] = r.within_mean;
            row["between_mean"] = r.between_mean;
        }
        rows.push_back(row);
    }
    Json corrs = Json::array();
    for (const auto& [a, b, seed, value] : report.correlations) {
        corrs.push_back(Json{{"kind_a", a}, {"kind_b", b}, {"seed", seed}, {"pearson", value}});
    }
    return Json{{"rows", rows}, {"correlations", corrs}};
}

AblationConfig ablation_config_from_json(const Json& j) {
    AblationConfig cfg;
    if (j.contains("base")) cfg.base = toy_config_from_json(j.at("base"));
    if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    cfg.C = j.value("C", cfg.C);
    cfg.drop_fraction = j.value("drop_fraction", cfg.drop_fraction);
    if (j.contains("trainer")) cfg.trainer = trainer_config_from_json(j.at("trainer"));
    cfg.embedding_trainer = cfg.trainer;
    cfg.embedding_trainer.epochs = 5;
    cfg.embedding_trainer.warm_start_epochs = 0;
    if (j.contains("embedding_trainer")) {
        cfg.embedding_trainer = trainer_config_from_json(j.at("embedding_trainer"));
    }
    return cfg;
}

namespace {

void drop_tagged_rows(Task& task, int tag) {
    auto filter = [tag](const Eigen::MatrixXd& xs, const Eigen::VectorXd& ys,
                        const Eigen::VectorXi& tags, Eigen::MatrixXd& oxs, Eigen::VectorXd& oys,
                        Eigen::VectorXi& otags) {
        std::vector<int> keep;
        for (int r = 0; r < tags.size(); ++r) {
            if (tags(r) != tag) keep.push_back(r);
        }
        oxs.resize(static_cast<int>(keep.size()), xs.cols());
        oys.resize(static_cast<int>(keep.size()));
        otags.resize(static_cast<int>(keep.size()));
        for (int r = 0; r < oxs.rows(); ++r) {
            oxs.row(r) = xs.row(keep[r]);
            oys(r) = ys(keep[r]);
            otags(r) = tags(keep[r]);
        }
    };
    Eigen::MatrixXd sx, qx;
    Eigen::VectorXd sy, qy;
    Eigen::VectorXi st, qt;
    filter(task.support_x, task.support_y, task.support_tag, sx, sy, st);
    filter(task.query_x, task.query_y(), task.query_tag, qx, qy, qt);
    if (sx.rows() == 0 || qx.rows() == 0) return;  // keep the task intact
    task.support_x = std::move(sx);
    task.support_y = std::move(sy);
    task.support_tag = std::move(st);
    task.query_x = std::move(qx);
    task.set_query_y(std::move(qy));
    task.query_tag = std::move(qt);
}

}  // namespace

void induce_missing_strata(Dataset& data, double fraction, Rng rng) {
    const std::vector<int> strata = intervention_strata(data);
    if (strata.empty()) return;
    for (auto& task : data.tasks) {
        if (rng.uniform() >= fraction) continue;
        const int tag = strata[rng.uniform_int(strata.size())];
        drop_tagged_rows(task, tag);
    }
}

AblationReport recipe_ablation_ip(const AblationConfig& cfg) {
    AblationReport report;
    const std::vector<std::pair<std::string, KappaPolicy>> variants = {
        {"IP1", KappaPolicy::SubstituteWithPenalty},
        {"IP2", KappaPolicy::DropSubstituted},
        {"IP3", KappaPolicy::SubstituteNoPenalty}};

    for (const std::uint64_t seed : cfg.seeds) {
        ToyModelConfig tc = cfg.base;
        tc.n_groups = cfg.C;
        tc.seed = seed;
        GeneratedDataset gen = generate_toy_dataset(tc);
        induce_missing_strata(gen.data, cfg.drop_fraction, Rng(seed).child(stream::kGenerate, 99));

        TrainerConfig ecfg = cfg.embedding_trainer;
        ecfg.seed = seed;
        const TaskEmbeddings embeddings = local_embeddings(gen.data, ecfg);

        for (const auto& [name, policy] : variants) {
            DistanceSpec dspec;
            dspec.kind = DistanceKind::IP;
            dspec.seed = seed;
            dspec.kappa = policy;

            AblationCell cell;
            cell.variant = name;
            cell.seed = seed;
            const DistanceMatrix matrix = distance_matrix(gen.data, dspec, nullptr, &embeddings);
            const GroupAssignment groups = assign_all_tasks(gen.data, matrix, cfg.C, seed);
            const auto truth_train = labels_for(gen.group_labels, gen.data, Split::Train);
            const auto pred_train = labels_for(groups.labels, gen.data, Split::Train);
            cell.f1_train = group_recovery_f1(pred_train, truth_train);

            TrainerConfig trainer = cfg.trainer;
            trainer.seed = seed;
            trainer.C = cfg.C;
            const TrainResult r = train(gen.data, groups, trainer);
            cell.test_rmse =
                mean_rmse(evaluate_rmse(r.params, gen.data, groups, trainer, Split::Test));
            report.cells.push_back(cell);
        }
    }
    return report;
}

Json ablation_to_json(const AblationReport& report) {
    Json cells = Json::array();
    std::map<std::string, std::vector<double>> by_variant;
    for (const auto& c : report.cells) {
        cells.push_back(Json{{"variant", c.variant},
                             {"seed", c.seed},
                             {"test_rmse", c.test_rmse},
                             {"f1_train", c.f1_train}});
        by_variant[c.variant].push_back(c.test_rmse);
    }
    Json aggregates = Json::array();
    for (const auto& [variant, values] : by_variant) {
        const Moments m = moments_of(values);
        aggregates.push_back(Json{{"variant", variant}, {"rmse_mean", m.mean}, {"rmse_sd", m.sd}});
    }
    return Json{{"cells", cells}, {"aggregates", aggregates}};
}

}  // namespace causalhbm
