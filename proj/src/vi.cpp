#include "causalhbm/vi.hpp"

#include <cmath>
#include <vector>

namespace causalhbm {

GaussianParams make_params(int size, double mu_fill, double rho_fill) {
    GaussianParams q;
    q.mu = Eigen::VectorXd::Constant(size, mu_fill);
    q.rho = Eigen::VectorXd::Constant(size, rho_fill);
    return q;
}

Eigen::VectorXd sigma_of(const GaussianParams& q) {
    Eigen::VectorXd s(q.rho.size());
    for (int d = 0; d < s.size(); ++d) s(d) = detail::softplus(q.rho(d));
    return s;
}

void validate(const ScaleMixturePrior& p) {
    if (!(p.pi >= 0.0 && p.pi <= 1.0)) throw SchemaError("mixture weight must be in [0, 1]");
    if (!(p.sigma1 > 0.0) || !(p.sigma2 > 0.0)) throw SchemaError("prior scales must be positive");
}

ParamGrad zero_grad(int size) {
    return {Eigen::VectorXd::Zero(size), Eigen::VectorXd::Zero(size)};
}

Eigen::VectorXd sample_weights(const GaussianParams& q, Rng& rng, Eigen::VectorXd* eps_out) {
    const int p = static_cast<int>(q.mu.size());
    Eigen::VectorXd w(p);
    Eigen::VectorXd eps(p);
    for (int d = 0; d < p; ++d) {
        eps(d) = rng.normal();
        w(d) = q.mu(d) + detail::softplus(q.rho(d)) * eps(d);
    }
    if (eps_out) *eps_out = eps;
    return w;
}

double forward(const NetworkShape& shape, const Eigen::VectorXd& w, const Eigen::VectorXd& x) {
    if (w.size() != param_count(shape)) throw ShapeMismatchError("forward: weight size mismatch");
    if (x.size() != shape.input_dim) throw ShapeMismatchError("forward: input size mismatch");
    std::vector<double> h1, h2;
    return detail::mlp_forward_one(shape, w.data(), x.data(), h1, h2);
}

Eigen::VectorXd forward_batch(const NetworkShape& shape, const Eigen::VectorXd& w,
                              const Eigen::MatrixXd& xs) {
    Eigen::VectorXd out(xs.rows());
    std::vector<double> h1, h2;
    std::vector<double> row(static_cast<std::size_t>(xs.cols()));
    for (int r = 0; r < xs.rows(); ++r) {
        for (int c = 0; c < xs.cols(); ++c) row[c] = xs(r, c);
        out(r) = detail::mlp_forward_one(shape, w.data(), row.data(), h1, h2);
    }
    return out;
}

double nll(const NetworkShape& shape, const Eigen::VectorXd& w, const Eigen::MatrixXd& xs,
           const Eigen::VectorXd& ys, double obs_sigma) {
    if (!(obs_sigma > 0.0)) throw SchemaError("obs_sigma must be positive");
    if (xs.rows() != ys.size()) throw LengthMismatchError("nll: batch size mismatch");
    return detail::mlp_nll_grad<double>(shape, w.data(), xs, ys, obs_sigma, nullptr);
}

double kl_gaussian(const GaussianParams& q, const Eigen::VectorXd& p_mu,
                   const Eigen::VectorXd& p_sigma) {
    double acc = 0.0;
    for (int d = 0; d < q.mu.size(); ++d) {
        const double qs = detail::softplus(q.rho(d));
        const double diff = q.mu(d) - p_mu(d);
        const double pv = p_sigma(d) * p_sigma(d);
        acc += std::log(p_sigma(d)) - std::log(qs) + (qs * qs + diff * diff) / (2.0 * pv) - 0.5;
    }
    return acc;
}

ParamGrad kl_gaussian_grad_q(const GaussianParams& q, const Eigen::VectorXd& p_mu,
                             const Eigen::VectorXd& p_sigma) {
    ParamGrad g = zero_grad(static_cast<int>(q.mu.size()));
    for (int d = 0; d < q.mu.size(); ++d) {
        const double qs = detail::softplus(q.rho(d));
        const double pv = p_sigma(d) * p_sigma(d);
        g.mu(d) = (q.mu(d) - p_mu(d)) / pv;
        g.rho(d) = (qs / pv - 1.0 / qs) * detail::logistic(q.rho(d));
    }
    return g;
}

ParamGrad kl_gaussian_grad_p(const GaussianParams& q, const GaussianParams& p) {
    ParamGrad g = zero_grad(static_cast<int>(q.mu.size()));
    for (int d = 0; d < q.mu.size(); ++d) {
        const double qs = detail::softplus(q.rho(d));
        const double ps = detail::softplus(p.rho(d));
        const double diff = q.mu(d) - p.mu(d);
        g.mu(d) = -diff / (ps * ps);
        const double d_sigma = 1.0 / ps - (qs * qs + diff * diff) / (ps * ps * ps);
        g.rho(d) = d_sigma * detail::logistic(p.rho(d));
    }
    return g;
}

namespace {

// log density of the scale mixture and its derivative w.r.t. w, per
// dimension. pi == 1 or 0 collapses to a single component.
void mixture_logpdf(double w, const ScaleMixturePrior& prior, double* logp, double* dlogp) {
    const auto log_normal = [](double x, double sigma) {
        return -0.5 * std::log(2.0 * M_PI * sigma * sigma) - 0.5 * x * x / (sigma * sigma);
    };
    if (prior.pi >= 1.0) {
        *logp = log_normal(w, prior.sigma1);
        *dlogp = -w / (prior.sigma1 * prior.sigma1);
        return;
    }
    if (prior.pi <= 0.0) {
        *logp = log_normal(w, prior.sigma2);
        *dlogp = -w / (prior.sigma2 * prior.sigma2);
        return;
    }
    const double a = std::log(prior.pi) + log_normal(w, prior.sigma1);
    const double b = std::log(1.0 - prior.pi) + log_normal(w, prior.sigma2);
    const double hi = std::max(a, b);
    const double lse = hi + std::log(std::exp(a - hi) + std::exp(b - hi));
    const double r1 = std::exp(a - lse);
    const double r2 = std::exp(b - lse);
    *logp = lse;
    *dlogp = -w * (r1 / (prior.sigma1 * prior.sigma1) + r2 / (prior.sigma2 * prior.sigma2));
}

}  // namespace

double kl_scale_mixture_mc_grad(const GaussianParams& q, const ScaleMixturePrior& prior, int n_mc,
                                Rng rng, ParamGrad* grad) {
    validate(prior);
    if (n_mc < 1) throw SchemaError("n_mc must be >= 1");
    const int p = static_cast<int>(q.mu.size());
    if (grad) *grad = zero_grad(p);

    double acc = 0.0;
    for (int s = 0; s < n_mc; ++s) {
        for (int d = 0; d < p; ++d) {
            const double eps = rng.normal();
            const double sigma = detail::softplus(q.rho(d));
            const double gate = detail::logistic(q.rho(d));
            const double w = q.mu(d) + sigma * eps;
            // log q at the draw: the (w - mu)/sigma ratio is eps by
            // construction, so only the log-scale term varies with q.
            const double log_q = -0.5 * std::log(2.0 * M_PI) - std::log(sigma) - 0.5 * eps * eps;
            double log_p = 0.0, dlog_p = 0.0;
            mixture_logpdf(w, prior, &log_p, &dlog_p);
            acc += log_q - log_p;
            if (grad) {
                grad->mu(d) += -dlog_p;
                grad->rho(d) += (-1.0 / sigma - dlog_p * eps) * gate;
            }
        }
    }
    const double inv = 1.0 / static_cast<double>(n_mc);
    if (grad) {
        grad->mu *= inv;
        grad->rho *= inv;
    }
    return acc * inv;
}

double kl_scale_mixture_mc(const GaussianParams& q, const ScaleMixturePrior& prior, int n_mc,
                           Rng rng) {
    return kl_scale_mixture_mc_grad(q, prior, n_mc, rng, nullptr);
}

namespace {

Eigen::VectorXd draw_eps(int n_mc, int p, Rng& rng) {
    Eigen::VectorXd eps(static_cast<long>(n_mc) * p);
    for (int i = 0; i < eps.size(); ++i) eps(i) = rng.normal();
    return eps;
}

}  // namespace

double expected_nll_grad(const GaussianParams& q, const NetworkShape& shape,
                         const Eigen::MatrixXd& xs, const Eigen::VectorXd& ys, double obs_sigma,
                         int n_mc, Rng rng, ParamGrad* grad) {
    const int p = param_count(shape);
    if (q.mu.size() != p) throw ShapeMismatchError("expected_nll: parameter size mismatch");
    const Eigen::VectorXd eps = draw_eps(n_mc, p, rng);

    std::vector<double> gmu, grho;
    double* gm = nullptr;
    double* gr = nullptr;
    if (grad) {
        gmu.assign(p, 0.0);
        grho.assign(p, 0.0);
        gm = gmu.data();
        gr = grho.data();
    }
    // Reuse the shared core with lambda = 0 so the KL term vanishes.
    const Eigen::VectorXd unit = Eigen::VectorXd::Ones(p);
    const double value = detail::task_loss_core<double>(shape, q.mu.data(), q.rho.data(),
                                                        unit.data(), unit.data(), xs, ys,
                                                        obs_sigma, n_mc, 0.0, eps.data(), gm, gr);
    if (grad) {
        grad->mu = Eigen::Map<Eigen::VectorXd>(gmu.data(), p);
        grad->rho = Eigen::Map<Eigen::VectorXd>(grho.data(), p);
    }
    return value;
}

double expected_nll(const GaussianParams& q, const NetworkShape& shape, const Eigen::MatrixXd& xs,
                    const Eigen::VectorXd& ys, double obs_sigma, int n_mc, Rng rng) {
    return expected_nll_grad(q, shape, xs, ys, obs_sigma, n_mc, rng, nullptr);
}

double task_loss_grad(const GaussianParams& gamma, const Eigen::VectorXd& p_mu,
                      const Eigen::VectorXd& p_sigma, const NetworkShape& shape,
                      const Eigen::MatrixXd& xs, const Eigen::VectorXd& ys, double obs_sigma,
                      int n_mc, double lambda, Rng rng, ParamGrad* grad) {
    const int p = param_count(shape);
    if (gamma.mu.size() != p) throw ShapeMismatchError("task_loss: parameter size mismatch");
    if (!(obs_sigma > 0.0)) throw SchemaError("obs_sigma must be positive");
    const Eigen::VectorXd eps = draw_eps(n_mc, p, rng);

    std::vector<double> gmu, grho;
    double* gm = nullptr;
    double* gr = nullptr;
    if (grad) {
        gmu.assign(p, 0.0);
        grho.assign(p, 0.0);
        gm = gmu.data();
        gr = grho.data();
    }
    const double value = detail::task_loss_core<double>(shape, gamma.mu.data(), gamma.rho.data(),
                                                        p_mu.data(), p_sigma.data(), xs, ys,
                                                        obs_sigma, n_mc, lambda, eps.data(), gm,
                                                        gr);
    if (grad) {
        grad->mu = Eigen::Map<Eigen::VectorXd>(gmu.data(), p);
        grad->rho = Eigen::Map<Eigen::VectorXd>(grho.data(), p);
    }
    return value;
}

double task_loss(const GaussianParams& gamma, const Eigen::VectorXd& p_mu,
                 const Eigen::VectorXd& p_sigma, const NetworkShape& shape,
                 const Eigen::MatrixXd& xs, const Eigen::VectorXd& ys, double obs_sigma, int n_mc,
                 double lambda, Rng rng) {
    return task_loss_grad(gamma, p_mu, p_sigma, shape, xs, ys, obs_sigma, n_mc, lambda, rng,
                          nullptr);
}

void task_loss_hvp(const GaussianParams& gamma, const Eigen::VectorXd& p_mu,
                   const Eigen::VectorXd& p_sigma, const NetworkShape& shape,
                   const Eigen::MatrixXd& xs, const Eigen::VectorXd& ys, double obs_sigma,
                   int n_mc, double lambda, Rng rng, const ParamGrad& v, ParamGrad* hv) {
    const int p = param_count(shape);
    const Eigen::VectorXd eps = draw_eps(n_mc, p, rng);

    std::vector<Dual> mu(p), rho(p), gmu(p, Dual(0.0)), grho(p, Dual(0.0));
    for (int d = 0; d < p; ++d) {
        mu[d] = Dual(gamma.mu(d), v.mu(d));
        rho[d] = Dual(gamma.rho(d), v.rho(d));
    }
    detail::task_loss_core<Dual>(shape, mu.data(), rho.data(), p_mu.data(), p_sigma.data(), xs, ys,
                                 obs_sigma, n_mc, lambda, eps.data(), gmu.data(), grho.data());
    *hv = zero_grad(p);
    for (int d = 0; d < p; ++d) {
        hv->mu(d) = gmu[d].t;
        hv->rho(d) = grho[d].t;
    }
}

ParamGrad task_loss_mixed_prior(const GaussianParams& gamma, const GaussianParams& prior,
                                double lambda, const ParamGrad& v) {
    const int p = static_cast<int>(gamma.mu.size());
    ParamGrad out = zero_grad(p);
    for (int d = 0; d < p; ++d) {
        const double ps = detail::softplus(prior.rho(d));
        const double qs = detail::softplus(gamma.rho(d));
        const double diff = gamma.mu(d) - prior.mu(d);
        const double gate_q = detail::logistic(gamma.rho(d));
        const double gate_p = detail::logistic(prior.rho(d));
        const double ps3 = ps * ps * ps;
        out.mu(d) = lambda * (-v.mu(d) / (ps * ps));
        const double d_psigma =
            lambda * (-2.0 * v.mu(d) * diff / ps3 - 2.0 * v.rho(d) * gate_q * qs / ps3);
        out.rho(d) = d_psigma * gate_p;
    }
    return out;
}

}  // namespace causalhbm
