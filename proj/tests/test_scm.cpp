#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "causalhbm/scm.hpp"
#include "oracles.hpp"

using namespace causalhbm;

namespace {

Scm single_node_scm() {
    Scm s;
    s.graph = make_dag(1, {});
    s.weights = Eigen::MatrixXd::Zero(1, 1);
    s.noise_std = Eigen::VectorXd::Ones(1);
    return s;
}

Scm chain2_scm(double beta, double noise_y) {
    Scm s;
    s.graph = make_dag(2, {{0, 1}});
    s.weights = Eigen::MatrixXd::Zero(2, 2);
    s.weights(1, 0) = beta;
    s.noise_std = Eigen::VectorXd::Ones(2);
    s.noise_std(1) = noise_y;
    return s;
}

}  // namespace

TEST_CASE("default reference dag shape") {
    const Dag g = default_reference_dag();
    CHECK(g.n_nodes == 8);
    CHECK_NOTHROW(validate(g));
    CHECK(intervention_indices(g) == std::vector<int>{0, 1});
    int n_cov = 0;
    for (const auto r : g.roles) n_cov += r == NodeRole::Covariate ? 1 : 0;
    CHECK(n_cov == 5);
    for (const int iv : intervention_indices(g)) {
        CHECK((descendant_mask(g, iv) & node_bit(target_index(g))) != 0);
    }
}

TEST_CASE("perturb_dag") {
    const Dag base = default_reference_dag();
    Rng rng(1);
    const Dag same = perturb_dag(base, 0.0, rng);
    CHECK(same.edges == base.edges);

    for (int trial = 0; trial < 50; ++trial) {
        Rng r(trial);
        const Dag out = perturb_dag(base, 1.0, r);
        CHECK(is_valid(out));
        // Eligibility: the target stays a sink and interventions stay roots.
        for (int v = 0; v < out.n_nodes; ++v) CHECK_FALSE(out.edges(target_index(out), v));
        for (const int iv : intervention_indices(out)) {
            for (int p = 0; p < out.n_nodes; ++p) CHECK_FALSE(out.edges(p, iv));
        }
    }

    Rng r1(42), r2(42);
    CHECK(perturb_dag(base, 1.0, r1).edges == perturb_dag(base, 1.0, r2).edges);
}

TEST_CASE("perturb_params") {
    Rng rng(3);
    Scm ref;
    ref.graph = default_reference_dag();
    ref.weights = Eigen::MatrixXd::Zero(8, 8);
    for (int u = 0; u < 8; ++u) {
        for (int v = 0; v < 8; ++v) {
            if (ref.graph.edges(u, v)) ref.weights(v, u) = rng.normal();
        }
    }
    ref.noise_std = Eigen::VectorXd::Constant(8, 0.1);

    const Scm same = perturb_params(ref, ref.graph, 0.0, rng);
    CHECK(same.weights == ref.weights);
    CHECK(same.noise_std == ref.noise_std);

    // A new edge absent from the base is centred at zero: across many draws
    // the sample mean shrinks toward 0.
    Dag extended = ref.graph;
    extended.edges(6, 7) = true;
    double acc = 0.0;
    const int n_draws = 4000;
    for (int i = 0; i < n_draws; ++i) {
        Rng r(1000 + i);
        const Scm out = perturb_params(ref, extended, 0.5, r);
        CHECK_NOTHROW(validate(out));
        acc += out.weights(7, 6);
    }
    CHECK(std::abs(acc / n_draws) < 3.0 * 0.5 / std::sqrt(double(n_draws)));
}

TEST_CASE("sampling") {
    // Raw ancestral sampling of an isolated standard-normal node.
    const Scm s = single_node_scm();
    Rng rng(9);
    const Eigen::MatrixXd draws = sample_nodes(s, 100000, {}, rng);
    CHECK(std::abs(draws.col(0).mean()) < 0.02);

    // Hard interventions pin the column.
    Scm two = chain2_scm(2.0, 1.0);
    two.graph.roles[0] = NodeRole::Intervention;
    Rng rng2(10);
    const SampleBatch batch = sample(two, 50, Intervention{0, 1.0}, rng2);
    CHECK((batch.x.col(0).array() == 1.0).all());
    CHECK((batch.tag.array() == 0).all());

    // Deterministic propagation through the sigmoid.
    const Scm det = chain2_scm(2.0, 1e-300);
    Rng rng3(11);
    const SampleBatch out = sample(det, 20, {}, rng3);
    for (int r = 0; r < 20; ++r) {
        CHECK(out.y(r) ==
              doctest::Approx(1.0 / (1.0 + std::exp(-2.0 * out.x(r, 0)))).epsilon(1e-12));
    }
}

TEST_CASE("analytic gaussian joint") {
    // Edgeless: diagonal covariance.
    Scm iso;
    iso.graph = make_dag(3, {});
    iso.weights = Eigen::MatrixXd::Zero(3, 3);
    iso.noise_std = Eigen::VectorXd::Constant(3, 0.7);
    const GaussianJoint j0 = analytic_gaussian_joint(iso);
    CHECK(j0.mean.isZero(1e-14));
    CHECK(j0.cov.isApprox(0.49 * Eigen::MatrixXd::Identity(3, 3), 1e-12));

    // Chain with beta = 2 and unit noises; frozen values confirmed by the
    // Monte Carlo oracle below.
    const Scm chain = chain2_scm(2.0, 1.0);
    const GaussianJoint j1 = analytic_gaussian_joint(chain);
    CHECK(j1.cov(1, 1) == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(j1.cov(0, 1) == doctest::Approx(2.0).epsilon(1e-12));

    {
        Rng mc(21);
        const Eigen::MatrixXd draws = sample_nodes(chain, 1000000, {}, mc);
        const Eigen::VectorXd mean = draws.colwise().mean();
        const double var1 = (draws.col(1).array() - mean(1)).square().sum() / (draws.rows() - 1);
        const double cov01 =
            ((draws.col(0).array() - mean(0)) * (draws.col(1).array() - mean(1))).sum() /
            (draws.rows() - 1);
        CHECK(var1 == doctest::Approx(5.0).epsilon(0.01));
        CHECK(cov01 == doctest::Approx(2.0).epsilon(0.01));
    }

    // Interventions fix the node and cut its noise.
    Scm chain_iv = chain2_scm(2.0, 1.0);
    chain_iv.graph.roles[0] = NodeRole::Intervention;
    const double c = 1.7;
    const GaussianJoint j2 = analytic_gaussian_joint(chain_iv, Intervention{0, c});
    CHECK(j2.mean(1) == doctest::Approx(2.0 * c).epsilon(1e-12));
    CHECK(j2.cov(1, 1) == doctest::Approx(1.0).epsilon(1e-12));
    {
        Rng mc(22);
        const Eigen::MatrixXd draws = sample_nodes(chain_iv, 1000000, Intervention{0, c}, mc);
        CHECK(draws.col(1).mean() == doctest::Approx(2.0 * c).epsilon(0.01));
    }
}

TEST_CASE("sampling agrees with the analytic joint under interventions") {
    Rng rng(33);
    const Dag g = default_reference_dag();
    const Scm scm = oracles::random_scm_on(g, rng, -1.0, 1.0);
    for (const auto iv :
         {std::optional<Intervention>{}, std::optional<Intervention>{Intervention{0, 1.0}}}) {
        const GaussianJoint joint = analytic_gaussian_joint(scm, iv);
        Rng srng(34);
        const int m = 100000;
        const Eigen::MatrixXd draws = sample_nodes(scm, m, iv, srng);
        for (int v = 0; v < g.n_nodes; ++v) {
            const double se = std::sqrt(joint.cov(v, v) / m) + 1e-12;
            CHECK(std::abs(draws.col(v).mean() - joint.mean(v)) < 3.0 * se + 1e-9);
        }
    }
}

TEST_CASE("toy dataset generation") {
    ToyModelConfig cfg;
    cfg.n_train = 20;
    cfg.n_val = 4;
    cfg.n_test = 4;
    cfg.m_support = 5;
    cfg.m_query = 5;
    cfg.n_groups = 2;
    cfg.seed = 7;
    const GeneratedDataset gen = generate_toy_dataset(cfg);

    CHECK(gen.data.tasks.size() == 28);
    CHECK(gen.task_scms.size() == 28);
    CHECK(gen.group_scms.size() == 2);
    CHECK(gen.data.n_features == 7);
    for (const auto& task : gen.data.tasks) {
        CHECK(task.support_x.rows() == 5);
        CHECK(task.query_x.rows() == 5);
        for (int r = 0; r < 5; ++r) {
            CHECK(task.support_y(r) > 0.0);
            CHECK(task.support_y(r) < 1.0);
            CHECK(task.query_y()(r) > 0.0);
            CHECK(task.query_y()(r) < 1.0);
        }
    }
    // Round-robin per split: both groups appear in every split.
    for (const Split split : {Split::Train, Split::Val, Split::Test}) {
        std::set<int> seen;
        for (const int t : gen.data.task_indices(split)) seen.insert(gen.group_labels[t]);
        CHECK(seen.size() == 2);
    }

    // Zero perturbation collapses every task onto the reference model.
    ToyModelConfig flat = cfg;
    flat.eta_group = flat.eta_task = 0.0;
    flat.sigma_group = flat.sigma_task = 0.0;
    const GeneratedDataset same = generate_toy_dataset(flat);
    for (const auto& scm : same.task_scms) {
        CHECK(scm.weights == same.reference_scm.weights);
        CHECK(scm.graph.edges == same.reference_scm.graph.edges);
    }

    // Bit-identical regeneration.
    const GeneratedDataset again = generate_toy_dataset(cfg);
    CHECK(again.group_labels == gen.group_labels);
    for (std::size_t t = 0; t < gen.data.tasks.size(); ++t) {
        CHECK(again.data.tasks[t].support_x == gen.data.tasks[t].support_x);
        CHECK(again.data.tasks[t].support_y == gen.data.tasks[t].support_y);
        CHECK(again.data.tasks[t].query_x == gen.data.tasks[t].query_x);
        CHECK(again.data.tasks[t].query_y() == gen.data.tasks[t].query_y());
        CHECK(again.task_scms[t].weights == gen.task_scms[t].weights);
    }
}

TEST_CASE("hierarchical locality of the toy model") {
    // Group-level variation dominates task-level variation, so structural
    // distances within a group stay well below distances across groups.
    ToyModelConfig cfg;
    cfg.n_train = 24;
    cfg.n_val = 0;
    cfg.n_test = 0;
    cfg.m_support = 2;
    cfg.m_query = 2;
    cfg.eta_task = 0.05;
    cfg.sigma_task = 1e-4;
    cfg.eta_group = 0.6;
    cfg.sigma_group = 0.1;
    for (const int C : {2, 4}) {
        cfg.n_groups = C;
        cfg.seed = 100 + C;
        const GeneratedDataset gen = generate_toy_dataset(cfg);
        double within = 0, between = 0;
        int n_within = 0, n_between = 0;
        for (std::size_t i = 0; i < gen.task_scms.size(); ++i) {
            for (std::size_t j = i + 1; j < gen.task_scms.size(); ++j) {
                const int d = shd(gen.task_scms[i].graph, gen.task_scms[j].graph);
                if (gen.group_labels[i] == gen.group_labels[j]) {
                    within += d;
                    ++n_within;
                } else {
                    between += d;
                    ++n_between;
                }
            }
        }
        CHECK(within / n_within < between / n_between);
    }
}

TEST_CASE("rejection exhaustion is reported") {
    // A 2-node intervention->target graph: most flips break the required
    // path, so a budget of one attempt fails for some seeds.
    std::vector<NodeRole> roles{NodeRole::Intervention, NodeRole::Target};
    const Dag g = make_dag(2, {{0, 1}}, roles);
    int failures = 0;
    for (int trial = 0; trial < 40; ++trial) {
        Rng rng(trial);
        try {
            perturb_dag(g, 1.0, rng, 1);
        } catch (const RejectionExhaustedError&) {
            ++failures;
        }
    }
    CHECK(failures > 0);
}
