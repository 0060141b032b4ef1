#include "causalhbm/io.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

namespace causalhbm {

namespace {

std::string role_name(NodeRole r) {
    switch (r) {
        case NodeRole::Intervention: return "intervention";
        case NodeRole::Covariate: return "covariate";
        case NodeRole::Target: return "target";
    }
    return "covariate";
}

NodeRole role_from_name(const std::string& s) {
    if (s == "intervention") return NodeRole::Intervention;
    if (s == "covariate") return NodeRole::Covariate;
    if (s == "target") return NodeRole::Target;
    throw SchemaError("unknown node role: " + s);
}

Eigen::VectorXd vector_from_json(const Json& j) {
    Eigen::VectorXd v(static_cast<int>(j.size()));
    for (int i = 0; i < v.size(); ++i) v(i) = j.at(i).get<double>();
    return v;
}

Json vector_to_json(const Eigen::VectorXd& v) {
    Json j = Json::array();
    for (int i = 0; i < v.size(); ++i) j.push_back(v(i));
    return j;
}

}  // namespace

Json dag_to_json(const Dag& g) {
    Json edges = Json::array();
    for (int u = 0; u < g.n_nodes; ++u) {
        for (int v = 0; v < g.n_nodes; ++v) {
            if (g.edges(u, v)) edges.push_back(Json::array({u, v}));
        }
    }
    Json roles = Json::array();
    for (const auto r : g.roles) roles.push_back(role_name(r));
    return Json{{"n_nodes", g.n_nodes}, {"edges", edges}, {"roles", roles}};
}

Dag dag_from_json(const Json& j) {
    const int n = j.at("n_nodes").get<int>();
    std::vector<std::pair<int, int>> edges;
    for (const auto& e : j.at("edges")) {
        edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
    }
    std::vector<NodeRole> roles;
    for (const auto& r : j.at("roles")) roles.push_back(role_from_name(r.get<std::string>()));
    return make_dag(n, edges, std::move(roles));
}

Json scm_to_json(const Scm& s) {
    Json weights = Json::array();
    for (int v = 0; v < s.graph.n_nodes; ++v) {
        Json row = Json::array();
        for (int u = 0; u < s.graph.n_nodes; ++u) row.push_back(s.weights(v, u));
        weights.push_back(row);
    }
    return Json{{"dag", dag_to_json(s.graph)},
                {"weights", weights},
                {"noise_std", vector_to_json(s.noise_std)}};
}

Scm scm_from_json(const Json& j) {
    Scm s;
    s.graph = dag_from_json(j.at("dag"));
    const int n = s.graph.n_nodes;
    s.weights = Eigen::MatrixXd::Zero(n, n);
    const auto& w = j.at("weights");
    for (int v = 0; v < n; ++v) {
        for (int u = 0; u < n; ++u) s.weights(v, u) = w.at(v).at(u).get<double>();
    }
    s.noise_std = vector_from_json(j.at("noise_std"));
    validate(s);
    return s;
}

Json params_to_json(const GaussianParams& q) {
    return Json{{"mu", vector_to_json(q.mu)}, {"rho", vector_to_json(q.rho)}};
}

GaussianParams params_from_json(const Json& j) {
    GaussianParams q;
    q.mu = vector_from_json(j.at("mu"));
    q.rho = vector_from_json(j.at("rho"));
    if (q.mu.size() != q.rho.size()) throw SchemaError("params: mu/rho length mismatch");
    return q;
}

Json toy_config_to_json(const ToyModelConfig& cfg) {
    Json j{{"n_train", cfg.n_train},
           {"n_val", cfg.n_val},
           {"n_test", cfg.n_test},
           {"m_support", cfg.m_support},
           {"m_query", cfg.m_query},
           {"n_groups", cfg.n_groups},
           {"sigma_ref", cfg.sigma_ref},
           {"sigma_group", cfg.sigma_group},
           {"sigma_task", cfg.sigma_task},
           {"eta_group", cfg.eta_group},
           {"eta_task", cfg.eta_task},
           {"noise_std", cfg.noise_std},
           {"intervention_value", cfg.intervention_value},
           {"seed", cfg.seed},
           {"max_rejection_attempts", cfg.max_rejection_attempts}};
    if (cfg.reference_dag) j["reference_dag"] = dag_to_json(*cfg.reference_dag);
    return j;
}

ToyModelConfig toy_config_from_json(const Json& j) {
    ToyModelConfig cfg;
    cfg.n_train = j.value("n_train", cfg.n_train);
    cfg.n_val = j.value("n_val", cfg.n_val);
    cfg.n_test = j.value("n_test", cfg.n_test);
    cfg.m_support = j.value("m_support", cfg.m_support);
    cfg.m_query = j.value("m_query", cfg.m_query);
    cfg.n_groups = j.value("n_groups", cfg.n_groups);
    cfg.sigma_ref = j.value("sigma_ref", cfg.sigma_ref);
    cfg.sigma_group = j.value("sigma_group", cfg.sigma_group);
    cfg.sigma_task = j.value("sigma_task", cfg.sigma_task);
    cfg.eta_group = j.value("eta_group", cfg.eta_group);
    cfg.eta_task = j.value("eta_task", cfg.eta_task);
    cfg.noise_std = j.value("noise_std", cfg.noise_std);
    cfg.intervention_value = j.value("intervention_value", cfg.intervention_value);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.max_rejection_attempts = j.value("max_rejection_attempts", cfg.max_rejection_attempts);
    if (j.contains("reference_dag")) cfg.reference_dag = dag_from_json(j.at("reference_dag"));
    return cfg;
}

namespace {

std::string kappa_name(KappaPolicy p) {
    switch (p) {
        case KappaPolicy::SubstituteWithPenalty: return "penalty";
        case KappaPolicy::DropSubstituted: return "drop";
        case KappaPolicy::SubstituteNoPenalty: return "no_penalty";
    }
    return "penalty";
}

KappaPolicy kappa_from_name(const std::string& s) {
    if (s == "penalty") return KappaPolicy::SubstituteWithPenalty;
    if (s == "drop") return KappaPolicy::DropSubstituted;
    if (s == "no_penalty") return KappaPolicy::SubstituteNoPenalty;
    throw SchemaError("unknown kappa policy: " + s);
}

}  // namespace

Json distance_spec_to_json(const DistanceSpec& spec) {
    return Json{{"kind", to_string(spec.kind)},
                {"alpha1", spec.alpha1},
                {"alpha2", spec.alpha2},
                {"mc_samples", spec.mc_samples},
                {"intervention_values", spec.intervention_values},
                {"seed", spec.seed},
                {"kappa", kappa_name(spec.kappa)}};
}

DistanceSpec distance_spec_from_json(const Json& j) {
    DistanceSpec spec;
    spec.kind = distance_kind_from_string(j.value("kind", std::string("TOD")));
    spec.alpha1 = j.value("alpha1", spec.alpha1);
    spec.alpha2 = j.value("alpha2", spec.alpha2);
    spec.mc_samples = j.value("mc_samples", spec.mc_samples);
    if (j.contains("intervention_values")) {
        spec.intervention_values = j.at("intervention_values").get<std::vector<double>>();
    }
    spec.seed = j.value("seed", spec.seed);
    spec.kappa = kappa_from_name(j.value("kappa", std::string("penalty")));
    validate(spec);
    return spec;
}

Json matrix_to_json(const DistanceMatrix& m, const std::string& kind) {
    Json entries = Json::array();
    for (int i = 0; i < m.n; ++i) {
        for (int j = 0; j < m.n; ++j) entries.push_back(m.d(i, j));
    }
    return Json{{"n", m.n}, {"kind", kind}, {"entries", entries}};
}

DistanceMatrix matrix_from_json(const Json& j) {
    DistanceMatrix m;
    m.n = j.at("n").get<int>();
    const auto& entries = j.at("entries");
    if (static_cast<int>(entries.size()) != m.n * m.n) {
        throw SchemaError("matrix entries must be n*n row-major values");
    }
    m.d.resize(m.n, m.n);
    for (int i = 0; i < m.n; ++i) {
        for (int k = 0; k < m.n; ++k) m.d(i, k) = entries.at(i * m.n + k).get<double>();
    }
    validate(m);
    return m;
}

Json groups_to_json(const GroupAssignment& a) {
    return Json{{"C", a.C}, {"labels", a.labels}};
}

GroupAssignment groups_from_json(const Json& j) {
    GroupAssignment a;
    a.C = j.at("C").get<int>();
    a.labels = j.at("labels").get<std::vector<int>>();
    validate(a);
    return a;
}

Json trainer_config_to_json(const TrainerConfig& cfg) {
    return Json{{"C", cfg.C},
                {"inner_steps", cfg.inner_steps},
                {"beta1", cfg.beta1},
                {"beta2", cfg.beta2},
                {"beta3", cfg.beta3},
                {"lambda", cfg.lambda},
                {"epochs", cfg.epochs},
                {"patience", cfg.patience},
                {"warm_start_epochs", cfg.warm_start_epochs},
                {"warm_start_beta2", cfg.warm_start_beta2},
                {"warm_start_beta3", cfg.warm_start_beta3},
                {"n_mc_train", cfg.n_mc_train},
                {"n_mc_eval", cfg.n_mc_eval},
                {"predictive_samples", cfg.predictive_samples},
                {"obs_sigma", cfg.obs_sigma},
                {"prior_pi", cfg.prior.pi},
                {"prior_sigma1", cfg.prior.sigma1},
                {"prior_sigma2", cfg.prior.sigma2},
                {"meta_gradient_mode", to_string(cfg.mode)},
                {"seed", cfg.seed},
                {"init_mu_std", cfg.init_mu_std},
                {"init_rho", cfg.init_rho},
                {"baseline_epochs", cfg.baseline_epochs},
                {"baseline_lr", cfg.baseline_lr}};
}

TrainerConfig trainer_config_from_json(const Json& j) {
    TrainerConfig cfg;
    cfg.C = j.value("C", cfg.C);
    cfg.inner_steps = j.value("inner_steps", cfg.inner_steps);
    cfg.beta1 = j.value("beta1", cfg.beta1);
    cfg.beta2 = j.value("beta2", cfg.beta2);
    cfg.beta3 = j.value("beta3", cfg.beta3);
    cfg.lambda = j.value("lambda", cfg.lambda);
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.patience = j.value("patience", cfg.patience);
    cfg.warm_start_epochs = j.value("warm_start_epochs", cfg.warm_start_epochs);
    cfg.warm_start_beta2 = j.value("warm_start_beta2", cfg.warm_start_beta2);
    cfg.warm_start_beta3 = j.value("warm_start_beta3", cfg.warm_start_beta3);
    cfg.n_mc_train = j.value("n_mc_train", cfg.n_mc_train);
    cfg.n_mc_eval = j.value("n_mc_eval", cfg.n_mc_eval);
    cfg.predictive_samples = j.value("predictive_samples", cfg.predictive_samples);
    cfg.obs_sigma = j.value("obs_sigma", cfg.obs_sigma);
    cfg.prior.pi = j.value("prior_pi", cfg.prior.pi);
    cfg.prior.sigma1 = j.value("prior_sigma1", cfg.prior.sigma1);
    cfg.prior.sigma2 = j.value("prior_sigma2", cfg.prior.sigma2);
    cfg.mode = meta_mode_from_string(j.value("meta_gradient_mode", std::string("first_order")));
    cfg.seed = j.value("seed", cfg.seed);
    cfg.init_mu_std = j.value("init_mu_std", cfg.init_mu_std);
    cfg.init_rho = j.value("init_rho", cfg.init_rho);
    cfg.baseline_epochs = j.value("baseline_epochs", cfg.baseline_epochs);
    cfg.baseline_lr = j.value("baseline_lr", cfg.baseline_lr);
    validate(cfg);
    return cfg;
}

Json truth_to_json(const GroundTruth& t) {
    Json tasks = Json::array();
    for (const auto& s : t.task_scms) tasks.push_back(scm_to_json(s));
    Json groups = Json::array();
    for (const auto& s : t.group_scms) groups.push_back(scm_to_json(s));
    return Json{{"group_labels", t.group_labels},
                {"tasks", tasks},
                {"groups", groups},
                {"reference", scm_to_json(t.reference_scm)}};
}

GroundTruth truth_from_json(const Json& j) {
    GroundTruth t;
    t.group_labels = j.at("group_labels").get<std::vector<int>>();
    for (const auto& s : j.at("tasks")) t.task_scms.push_back(scm_from_json(s));
    for (const auto& s : j.at("groups")) t.group_scms.push_back(scm_from_json(s));
    t.reference_scm = scm_from_json(j.at("reference"));
    return t;
}

void write_dataset_jsonl(const Dataset& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw SchemaError("cannot open for writing: " + path);
    for (const auto& task : data.tasks) {
        auto write_row = [&](const std::string& fold, const Eigen::MatrixXd& xs,
                             const Eigen::VectorXd& ys, const Eigen::VectorXi& tags, int r) {
            Json row{{"task_id", task.id},
                     {"split", to_string(task.split)},
                     {"fold", fold},
                     {"x", vector_to_json(xs.row(r).transpose())},
                     {"intervention", tags(r)},
                     {"y", ys(r)}};
            out << row.dump() << "\n";
        };
        for (int r = 0; r < task.support_x.rows(); ++r) {
            write_row("support", task.support_x, task.support_y, task.support_tag, r);
        }
        const Eigen::VectorXd& qy = task.query_y();
        for (int r = 0; r < task.query_x.rows(); ++r) {
            write_row("query", task.query_x, qy, task.query_tag, r);
        }
    }
}

Dataset read_dataset_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open dataset: " + path);

    struct Rows {
        std::vector<std::vector<double>> x;
        std::vector<double> y;
        std::vector<int> tag;
    };
    struct TaskRows {
        Split split = Split::Train;
        Rows support, query;
    };
    std::map<int, TaskRows> by_task;
    int k = -1;

    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        Json j;
        try {
            j = Json::parse(line);
        } catch (const Json::exception& e) {
            throw SchemaError("line " + std::to_string(line_no) + ": " + e.what());
        }
        try {
            const int task_id = j.at("task_id").get<int>();
            auto& entry = by_task[task_id];
            entry.split = split_from_string(j.at("split").get<std::string>());
            const std::string fold = j.at("fold").get<std::string>();
            std::vector<double> x = j.at("x").get<std::vector<double>>();
            if (k < 0) k = static_cast<int>(x.size());
            if (static_cast<int>(x.size()) != k) {
                throw SchemaError("inconsistent feature dimension");
            }
            Rows& rows = fold == "support" ? entry.support : entry.query;
            if (fold != "support" && fold != "query") throw SchemaError("unknown fold: " + fold);
            rows.x.push_back(std::move(x));
            rows.y.push_back(j.at("y").get<double>());
            rows.tag.push_back(j.at("intervention").get<int>());
        } catch (const Json::exception& e) {
            throw SchemaError("line " + std::to_string(line_no) + ": " + e.what());
        } catch (const SchemaError& e) {
            throw SchemaError("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (by_task.empty()) throw SchemaError("dataset is empty: " + path);

    Dataset data;
    data.n_features = k;
    int expected_id = 0;
    for (auto& [task_id, rows] : by_task) {
        if (task_id != expected_id) {
            throw SchemaError("task ids must be contiguous from 0; missing " +
                              std::to_string(expected_id));
        }
        ++expected_id;
        auto pack = [&](const Rows& r, Eigen::MatrixXd& xs, Eigen::VectorXd& ys,
                        Eigen::VectorXi& tags) {
            xs.resize(static_cast<int>(r.x.size()), k);
            ys.resize(static_cast<int>(r.y.size()));
            tags.resize(static_cast<int>(r.tag.size()));
            for (int i = 0; i < xs.rows(); ++i) {
                for (int c = 0; c < k; ++c) xs(i, c) = r.x[i][c];
                ys(i) = r.y[i];
                tags(i) = r.tag[i];
            }
        };
        Task task;
        task.id = task_id;
        task.split = rows.split;
        pack(rows.support, task.support_x, task.support_y, task.support_tag);
        Eigen::MatrixXd qx;
        Eigen::VectorXd qy;
        Eigen::VectorXi qt;
        pack(rows.query, qx, qy, qt);
        task.query_x = std::move(qx);
        task.set_query_y(std::move(qy));
        task.query_tag = std::move(qt);
        if (task.support_x.rows() == 0) {
            throw SchemaError("task " + std::to_string(task_id) + " has no support samples");
        }
        data.tasks.push_back(std::move(task));
    }
    return data;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw SchemaError("cannot open for writing: " + path);
    out << content;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open: " + path);
    Json j;
    try {
        in >> j;
    } catch (const Json::exception& e) {
        throw SchemaError(path + ": " + e.what());
    }
    return j;
}

void write_json_file(const std::string& path, const Json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

std::string log_to_csv(const std::vector<EpochLog>& log) {
    std::ostringstream out;
    out << "epoch,train_loss,val_rmse,kl_global,kl_group_mean,kl_task_mean,skipped_tasks\n";
    out.precision(17);
    for (const auto& row : log) {
        out << row.epoch << "," << row.train_loss << "," << row.val_rmse << "," << row.kl_global
            << "," << row.kl_group_mean << "," << row.kl_task_mean << "," << row.skipped_tasks
            << "\n";
    }
    return out.str();
}

void write_checkpoint(const std::string& dir, const Checkpoint& ckpt,
                      const std::vector<EpochLog>& log) {
    std::filesystem::create_directories(dir);
    Json psi_c = Json::array();
    for (const auto& q : ckpt.params.psi_c) psi_c.push_back(params_to_json(q));
    const Json j{{"shape", Json{{"input_dim", ckpt.shape.input_dim}, {"hidden", ckpt.shape.hidden}}},
                 {"psi", params_to_json(ckpt.params.psi)},
                 {"psi_c", psi_c},
                 {"groups", groups_to_json(ckpt.groups)},
                 {"trainer_config", trainer_config_to_json(ckpt.config)}};
    write_json_file(dir + "/params.json", j);
    write_text_file(dir + "/log.csv", log_to_csv(log));
}

Checkpoint read_checkpoint(const std::string& dir) {
    const Json j = read_json_file(dir + "/params.json");
    Checkpoint ckpt;
    ckpt.shape.input_dim = j.at("shape").at("input_dim").get<int>();
    ckpt.shape.hidden = j.at("shape").at("hidden").get<int>();
    ckpt.params.psi = params_from_json(j.at("psi"));
    for (const auto& q : j.at("psi_c")) ckpt.params.psi_c.push_back(params_from_json(q));
    ckpt.groups = groups_from_json(j.at("groups"));
    ckpt.config = trainer_config_from_json(j.at("trainer_config"));
    return ckpt;
}

GeneratedDataset dataset_with_truth(Dataset data, GroundTruth truth) {
    GeneratedDataset g;
    g.data = std::move(data);
    g.group_labels = std::move(truth.group_labels);
    g.task_scms = std::move(truth.task_scms);
    g.group_scms = std::move(truth.group_scms);
    g.reference_scm = std::move(truth.reference_scm);
    return g;
}

}  // namespace causalhbm
