#include "causalhbm/hbm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace causalhbm {

std::string to_string(MetaGradientMode m) {
    return m == MetaGradientMode::FirstOrder ? "first_order" : "unrolled";
}

MetaGradientMode meta_mode_from_string(const std::string& s) {
    if (s == "first_order") return MetaGradientMode::FirstOrder;
    if (s == "unrolled") return MetaGradientMode::Unrolled;
    throw SchemaError("unknown meta gradient mode: " + s);
}

void validate(const TrainerConfig& cfg) {
    if (cfg.C < 1) throw SchemaError("C must be >= 1");
    if (cfg.inner_steps < 1) throw SchemaError("inner_steps must be >= 1");
    if (cfg.beta1 < 0 || cfg.beta2 < 0 || cfg.beta3 < 0) {
        throw SchemaError("learning rates must be nonnegative");
    }
    if (!(cfg.lambda > 0)) throw SchemaError("lambda must be positive");
    if (cfg.epochs < 0) throw SchemaError("epochs must be >= 0");
    if (cfg.n_mc_train < 1 || cfg.n_mc_eval < 1) throw SchemaError("n_mc must be >= 1");
    if (cfg.predictive_samples < 1) throw SchemaError("predictive samples must be >= 1");
    if (!(cfg.obs_sigma > 0)) throw SchemaError("obs_sigma must be positive");
    validate(cfg.prior);
}

GaussianParams default_init(const NetworkShape& shape, const TrainerConfig& cfg, Rng rng) {
    const int p = param_count(shape);
    GaussianParams q = make_params(p, 0.0, cfg.init_rho);
    for (int d = 0; d < p; ++d) q.mu(d) = rng.normal(0.0, cfg.init_mu_std);
    return q;
}

namespace {

void apply_step(GaussianParams& q, const ParamGrad& g, double rate) {
    if (rate == 0.0) return;  // exact no-op, regardless of gradient content
    q.mu -= rate * g.mu;
    q.rho -= rate * g.rho;
}

void accumulate(ParamGrad& acc, const ParamGrad& g, double scale = 1.0) {
    acc.mu += scale * g.mu;
    acc.rho += scale * g.rho;
}

bool finite(const ParamGrad& g) { return g.mu.allFinite() && g.rho.allFinite(); }

struct InnerTrajectory {
    std::vector<GaussianParams> states;  // G + 1 entries
    std::vector<Rng> step_rngs;          // rng used at each step, pre-consumption
};

InnerTrajectory inner_adapt_traj(const GaussianParams& init, const Eigen::VectorXd& prior_mu,
                                 const Eigen::VectorXd& prior_sigma, const NetworkShape& shape,
                                 const Eigen::MatrixXd& xs, const Eigen::VectorXd& ys,
                                 const TrainerConfig& cfg, Rng rng) {
    InnerTrajectory traj;
    traj.states.push_back(init);
    for (int g = 0; g < cfg.inner_steps; ++g) {
        const Rng step_rng = rng.child(static_cast<std::uint64_t>(g));
        traj.step_rngs.push_back(step_rng);
        ParamGrad grad;
        const double loss =
            task_loss_grad(traj.states.back(), prior_mu, prior_sigma, shape, xs, ys,
                           cfg.obs_sigma, cfg.n_mc_train, cfg.lambda, step_rng, &grad);
        if (!std::isfinite(loss) || !finite(grad)) {
            throw NonFiniteLossError("inner adaptation diverged");
        }
        GaussianParams next = traj.states.back();
        apply_step(next, grad, cfg.beta1);
        traj.states.push_back(std::move(next));
    }
    return traj;
}

double rmse_of(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth) {
    return std::sqrt((pred - truth).array().square().mean());
}

// Validation protocol: adapt from the group prior on support, predict the
// query set, average task RMSEs.
double validation_rmse(const Dataset& data, const std::vector<int>& val_tasks,
                       const HierarchicalParams& params, const GroupAssignment& groups,
                       const NetworkShape& shape, const TrainerConfig& cfg, Rng rng) {
    if (val_tasks.empty()) return std::numeric_limits<double>::quiet_NaN();
    double acc = 0.0;
    for (const int t : val_tasks) {
        const Task& task = data.tasks[t];
        const Prediction pred =
            predict_new_task(params, groups.labels[t], task.support_x, task.support_y,
                             task.query_x, shape, cfg, rng.child(static_cast<std::uint64_t>(t)));
        acc += rmse_of(pred.mean, task.query_y());
    }
    return acc / static_cast<double>(val_tasks.size());
}

}  // namespace

GaussianParams inner_adapt(const GaussianParams& init, const Eigen::VectorXd& prior_mu,
                           const Eigen::VectorXd& prior_sigma, const NetworkShape& shape,
                           const Eigen::MatrixXd& xs, const Eigen::VectorXd& ys,
                           const TrainerConfig& cfg, Rng rng) {
    return inner_adapt_traj(init, prior_mu, prior_sigma, shape, xs, ys, cfg, rng).states.back();
}

GaussianParams warm_start(const Dataset& data, const TrainerConfig& cfg) {
    const NetworkShape shape{data.n_features};
    const Rng root = Rng(cfg.seed).child(stream::kWarmStart);
    if (cfg.warm_start_epochs <= 0) {
        return default_init(shape, cfg, root.child(stream::kInit));
    }
    TrainerConfig flat = cfg;
    flat.C = 1;
    flat.epochs = cfg.warm_start_epochs;
    flat.warm_start_epochs = 0;
    flat.beta2 = cfg.warm_start_beta2;
    flat.beta3 = cfg.warm_start_beta3;
    flat.seed = root.seed();
    GroupAssignment all_zero{1, std::vector<int>(data.tasks.size(), 0)};
    return train(data, all_zero, flat).params.psi;
}

TrainResult train(const Dataset& data, const GroupAssignment& groups, const TrainerConfig& cfg) {
    validate(cfg);
    validate(groups);
    if (groups.labels.size() != data.tasks.size()) {
        throw ShapeMismatchError("groups must label every task");
    }
    const NetworkShape shape{data.n_features};
    const std::vector<int> train_tasks = data.task_indices(Split::Train);
    const std::vector<int> val_tasks = data.task_indices(Split::Val);
    if (train_tasks.empty()) throw EmptyGroupError("no training tasks");

    // Group sizes over the training split.
    std::vector<int> group_size(cfg.C, 0);
    for (const int t : train_tasks) {
        if (groups.labels[t] >= cfg.C) throw SchemaError("group label exceeds C");
        ++group_size[groups.labels[t]];
    }
    for (int c = 0; c < cfg.C; ++c) {
        if (group_size[c] == 0) {
            throw EmptyGroupError("group " + std::to_string(c) + " has no training tasks");
        }
    }

    const Rng root(cfg.seed);
    const GaussianParams start = warm_start(data, cfg);

    TrainResult result;
    result.params.psi = start;
    result.params.psi_c.assign(cfg.C, start);

    HierarchicalParams& params = result.params;
    HierarchicalParams best = params;
    double best_val = std::numeric_limits<double>::infinity();
    int best_epoch = -1;
    int bad_epochs = 0;
    int consecutive_failures = 0;
    const int n_train = static_cast<int>(train_tasks.size());

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<int> order = train_tasks;
        {
            Rng shuffle_rng = root.child(stream::kEpoch, epoch);
            shuffle_rng.shuffle(order);
        }

        double loss_sum = 0.0;
        double task_kl_sum = 0.0;
        int n_evaluated = 0;
        int skipped = 0;

        for (const int t : order) {
            const Task& task = data.tasks[t];
            const int c = groups.labels[t];
            const Rng task_rng = root.child(stream::kTask, epoch, t);

            const Eigen::VectorXd group_mu = params.psi_c[c].mu;
            const Eigen::VectorXd group_sigma = sigma_of(params.psi_c[c]);

            InnerTrajectory traj;
            ParamGrad query_grad;
            double query_loss = 0.0;
            bool ok = true;
            try {
                traj = inner_adapt_traj(params.psi_c[c], group_mu, group_sigma, shape,
                                        task.support_x, task.support_y, cfg, task_rng.child(0));
                query_loss = task_loss_grad(traj.states.back(), group_mu, group_sigma, shape,
                                            task.query_x, task.query_y(), cfg.obs_sigma,
                                            cfg.n_mc_train, cfg.lambda, task_rng.child(1),
                                            &query_grad);
                if (!std::isfinite(query_loss) || !finite(query_grad)) ok = false;
            } catch (const NonFiniteLossError&) {
                ok = false;
            }
            if (!ok) {
                ++skipped;
                if (++consecutive_failures >= 3) {
                    throw NonFiniteLossError("three consecutive non-finite task losses");
                }
                continue;
            }
            consecutive_failures = 0;

            loss_sum += query_loss;
            task_kl_sum += kl_gaussian(traj.states.back(), group_mu, group_sigma);
            ++n_evaluated;

            // Group update: query-loss gradient into the prior slot (plus the
            // unrolled path when enabled) and the scaled group-level KL.
            ParamGrad d_group = kl_gaussian_grad_p(traj.states.back(), params.psi_c[c]);
            d_group.mu *= cfg.lambda;
            d_group.rho *= cfg.lambda;

            if (cfg.mode == MetaGradientMode::Unrolled) {
                ParamGrad v = query_grad;
                for (int g = cfg.inner_steps - 1; g >= 0; --g) {
                    accumulate(d_group,
                               task_loss_mixed_prior(traj.states[g], params.psi_c[c], cfg.lambda, v),
                               -cfg.beta1);
                    ParamGrad hv;
                    task_loss_hvp(traj.states[g], group_mu, group_sigma, shape, task.support_x,
                                  task.support_y, cfg.obs_sigma, cfg.n_mc_train, cfg.lambda,
                                  traj.step_rngs[g], v, &hv);
                    accumulate(v, hv, -cfg.beta1);
                }
                accumulate(d_group, v);  // initialization path: gamma^0 = psi_c
            }

            const Eigen::VectorXd global_mu = params.psi.mu;
            const Eigen::VectorXd global_sigma = sigma_of(params.psi);
            const double inv_group = 1.0 / static_cast<double>(group_size[c]);
            accumulate(d_group, kl_gaussian_grad_q(params.psi_c[c], global_mu, global_sigma),
                       inv_group);

            // Global update: the group KL's prior side plus the mixture KL.
            ParamGrad d_global = kl_gaussian_grad_p(params.psi_c[c], params.psi);
            d_global.mu *= inv_group;
            d_global.rho *= inv_group;
            ParamGrad mix_grad;
            kl_scale_mixture_mc_grad(params.psi, cfg.prior, cfg.n_mc_train, task_rng.child(2),
                                     &mix_grad);
            accumulate(d_global, mix_grad, 1.0 / static_cast<double>(n_train));

            if (!finite(d_group) || !finite(d_global)) {
                ++skipped;
                if (++consecutive_failures >= 3) {
                    throw NonFiniteLossError("three consecutive non-finite task losses");
                }
                continue;
            }

            apply_step(params.psi_c[c], d_group, cfg.beta2);
            apply_step(params.psi, d_global, cfg.beta3);
        }

        EpochLog row;
        row.epoch = epoch;
        row.train_loss = n_evaluated > 0 ? loss_sum / n_evaluated : 0.0;
        row.kl_task_mean = n_evaluated > 0 ? task_kl_sum / n_evaluated : 0.0;
        row.skipped_tasks = skipped;
        row.kl_global = kl_scale_mixture_mc(params.psi, cfg.prior, cfg.n_mc_eval,
                                            root.child(stream::kGlobalKl, epoch));
        {
            const Eigen::VectorXd gm = params.psi.mu;
            const Eigen::VectorXd gs = sigma_of(params.psi);
            double acc = 0.0;
            for (const auto& pc : params.psi_c) acc += kl_gaussian(pc, gm, gs);
            row.kl_group_mean = acc / static_cast<double>(cfg.C);
        }
        row.val_rmse = validation_rmse(data, val_tasks, params, groups, shape, cfg,
                                       root.child(stream::kValidation, epoch));
        result.log.push_back(row);

        if (!val_tasks.empty()) {
            if (row.val_rmse < best_val) {
                best_val = row.val_rmse;
                best = params;
                best_epoch = epoch;
                bad_epochs = 0;
            } else {
                if (++bad_epochs > cfg.patience) break;
            }
        }
    }

    if (best_epoch >= 0) {
        result.params = best;
        result.best_epoch = best_epoch;
        result.best_val_rmse = best_val;
    } else {
        result.best_epoch = cfg.epochs > 0 ? cfg.epochs - 1 : -1;
        result.best_val_rmse = std::numeric_limits<double>::quiet_NaN();
    }
    return result;
}

Prediction predict_new_task(const HierarchicalParams& params, int group,
                            const Eigen::MatrixXd& support_x, const Eigen::VectorXd& support_y,
                            const Eigen::MatrixXd& query_x, const NetworkShape& shape,
                            const TrainerConfig& cfg, Rng rng) {
    if (group < 0 || group >= static_cast<int>(params.psi_c.size())) {
        throw SchemaError("group id out of range");
    }
    if (support_x.rows() == 0) throw EmptySampleError("predict: empty support set");
    const GaussianParams& init = params.psi_c[group];
    const GaussianParams gamma =
        inner_adapt(init, init.mu, sigma_of(init), shape, support_x, support_y, cfg,
                    rng.child(0));

    Prediction out;
    out.samples.resize(cfg.predictive_samples, query_x.rows());
    Rng draw_rng = rng.child(1);
    for (int s = 0; s < cfg.predictive_samples; ++s) {
        const Eigen::VectorXd w = sample_weights(gamma, draw_rng);
        out.samples.row(s) = forward_batch(shape, w, query_x).transpose();
    }
    out.mean = out.samples.colwise().mean().transpose();
    return out;
}

TrainResult train_meta(const Dataset& data, TrainerConfig cfg) {
    cfg.C = 1;
    const GroupAssignment all_zero{1, std::vector<int>(data.tasks.size(), 0)};
    return train(data, all_zero, cfg);
}

BaselineResult train_global(const Dataset& data, const TrainerConfig& cfg) {
    validate(cfg);
    const NetworkShape shape{data.n_features};
    const std::vector<int> train_tasks = data.task_indices(Split::Train);
    const std::vector<int> val_tasks = data.task_indices(Split::Val);
    if (train_tasks.empty()) throw EmptyGroupError("no training tasks");

    // Pool support and query samples of every training task.
    long rows = 0;
    for (const int t : train_tasks) {
        rows += data.tasks[t].support_x.rows() + data.tasks[t].query_x.rows();
    }
    Eigen::MatrixXd xs(rows, data.n_features);
    Eigen::VectorXd ys(rows);
    long at = 0;
    for (const int t : train_tasks) {
        const Task& task = data.tasks[t];
        xs.middleRows(at, task.support_x.rows()) = task.support_x;
        ys.segment(at, task.support_y.size()) = task.support_y;
        at += task.support_x.rows();
        xs.middleRows(at, task.query_x.rows()) = task.query_x;
        ys.segment(at, task.query_x.rows()) = task.query_y();
        at += task.query_x.rows();
    }

    const Rng root = Rng(cfg.seed).child(stream::kInit, 100);
    BaselineResult result;
    result.params = default_init(shape, cfg, root.child(0));

    GaussianParams best = result.params;
    double best_val = std::numeric_limits<double>::infinity();
    int bad_epochs = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const Rng erng = root.child(stream::kEpoch, epoch);
        ParamGrad grad;
        kl_scale_mixture_mc_grad(result.params, cfg.prior, cfg.n_mc_train, erng.child(0), &grad);
        grad.mu *= cfg.lambda;
        grad.rho *= cfg.lambda;
        ParamGrad nll_grad;
        expected_nll_grad(result.params, shape, xs, ys, cfg.obs_sigma, cfg.n_mc_train,
                          erng.child(1), &nll_grad);
        accumulate(grad, nll_grad);
        if (finite(grad)) apply_step(result.params, grad, cfg.baseline_lr);

        double val = std::numeric_limits<double>::quiet_NaN();
        if (!val_tasks.empty()) {
            double acc = 0.0;
            for (const int t : val_tasks) {
                const Task& task = data.tasks[t];
                const Eigen::VectorXd pred =
                    predict_direct(result.params, shape, task.query_x, cfg.predictive_samples,
                                   root.child(stream::kValidation, epoch, t));
                acc += rmse_of(pred, task.query_y());
            }
            val = acc / static_cast<double>(val_tasks.size());
        }
        EpochLog row;
        row.epoch = epoch;
        row.train_loss = 0.0;
        row.val_rmse = val;
        result.log.push_back(row);

        if (!val_tasks.empty()) {
            if (val < best_val) {
                best_val = val;
                best = result.params;
                result.best_epoch = epoch;
                bad_epochs = 0;
            } else if (++bad_epochs > cfg.patience) {
                break;
            }
        }
    }
    if (result.best_epoch >= 0) result.params = best;
    return result;
}

std::vector<GaussianParams> train_local(const Dataset& data, const TrainerConfig& cfg) {
    validate(cfg);
    const NetworkShape shape{data.n_features};
    const Rng root = Rng(cfg.seed).child(stream::kInit, 200);
    std::vector<GaussianParams> out;
    out.reserve(data.tasks.size());
    for (int t = 0; t < static_cast<int>(data.tasks.size()); ++t) {
        const Task& task = data.tasks[t];
        const Rng trng = root.child(static_cast<std::uint64_t>(t));
        GaussianParams q = default_init(shape, cfg, trng.child(0));
        for (int step = 0; step < cfg.baseline_epochs; ++step) {
            ParamGrad grad;
            kl_scale_mixture_mc_grad(q, cfg.prior, cfg.n_mc_train, trng.child(1, step), &grad);
            grad.mu *= cfg.lambda;
            grad.rho *= cfg.lambda;
            ParamGrad nll_grad;
            expected_nll_grad(q, shape, task.support_x, task.support_y, cfg.obs_sigma,
                              cfg.n_mc_train, trng.child(2, step), &nll_grad);
            accumulate(grad, nll_grad);
            if (finite(grad)) apply_step(q, grad, cfg.baseline_lr);
        }
        out.push_back(std::move(q));
    }
    return out;
}

Eigen::VectorXd predict_direct(const GaussianParams& q, const NetworkShape& shape,
                               const Eigen::MatrixXd& query_x, int n_samples, Rng rng) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(query_x.rows());
    for (int s = 0; s < n_samples; ++s) {
        const Eigen::VectorXd w = sample_weights(q, rng);
        mean += forward_batch(shape, w, query_x);
    }
    return mean / static_cast<double>(n_samples);
}

Eigen::VectorXd evaluate_rmse(const HierarchicalParams& params, const Dataset& data,
                              const GroupAssignment& groups, const TrainerConfig& cfg,
                              Split split) {
    const NetworkShape shape{data.n_features};
    const std::vector<int> tasks = data.task_indices(split);
    Eigen::VectorXd out(static_cast<int>(tasks.size()));
    const Rng root = Rng(cfg.seed).child(stream::kPredict);
    for (int k = 0; k < out.size(); ++k) {
        const Task& task = data.tasks[tasks[k]];
        const Prediction pred =
            predict_new_task(params, groups.labels[tasks[k]], task.support_x, task.support_y,
                             task.query_x, shape, cfg, root.child(tasks[k]));
        out(k) = std::sqrt((pred.mean - task.query_y()).array().square().mean());
    }
    return out;
}

}  // namespace causalhbm
