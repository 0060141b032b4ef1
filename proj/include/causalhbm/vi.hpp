#pragma once

#include <Eigen/Core>
#include <cstdint>

#include "causalhbm/errors.hpp"
#include "causalhbm/mlp.hpp"
#include "causalhbm/rng.hpp"

namespace causalhbm {

// Diagonal Gaussian variational parameters over the flat weight vector;
// sigma = softplus(rho) keeps the scale positive without constraints.
struct GaussianParams {
    Eigen::VectorXd mu;
    Eigen::VectorXd rho;
};

GaussianParams make_params(int size, double mu_fill = 0.0, double rho_fill = -3.0);
Eigen::VectorXd sigma_of(const GaussianParams& q);

struct ScaleMixturePrior {
    double pi = 1.0;
    double sigma1 = 0.1;
    double sigma2 = 0.4;
};

void validate(const ScaleMixturePrior& p);

struct ParamGrad {
    Eigen::VectorXd mu;
    Eigen::VectorXd rho;
};

ParamGrad zero_grad(int size);

// w = mu + softplus(rho) * eps with eps ~ N(0, I); eps is retained so
// gradients can flow through the reparameterization.
Eigen::VectorXd sample_weights(const GaussianParams& q, Rng& rng,
                               Eigen::VectorXd* eps_out = nullptr);

double forward(const NetworkShape& shape, const Eigen::VectorXd& w, const Eigen::VectorXd& x);
Eigen::VectorXd forward_batch(const NetworkShape& shape, const Eigen::VectorXd& w,
                              const Eigen::MatrixXd& xs);

// Gaussian negative log-likelihood of the batch under predictions f(x).
double nll(const NetworkShape& shape, const Eigen::VectorXd& w, const Eigen::MatrixXd& xs,
           const Eigen::VectorXd& ys, double obs_sigma);

// Closed-form KL between diagonal Gaussians, summed over dimensions.
double kl_gaussian(const GaussianParams& q, const Eigen::VectorXd& p_mu,
                   const Eigen::VectorXd& p_sigma);
ParamGrad kl_gaussian_grad_q(const GaussianParams& q, const Eigen::VectorXd& p_mu,
                             const Eigen::VectorXd& p_sigma);
// Gradient with respect to the prior's own (mu, rho) parameterization.
ParamGrad kl_gaussian_grad_p(const GaussianParams& q, const GaussianParams& p);

// Monte Carlo estimate of KL(q || scale mixture) from reparameterized draws;
// differentiable through the samples (draws held fixed).
double kl_scale_mixture_mc(const GaussianParams& q, const ScaleMixturePrior& prior, int n_mc,
                           Rng rng);
double kl_scale_mixture_mc_grad(const GaussianParams& q, const ScaleMixturePrior& prior, int n_mc,
                                Rng rng, ParamGrad* grad);

// Mean over n_mc reparameterized draws of the batch NLL (no KL term).
double expected_nll(const GaussianParams& q, const NetworkShape& shape, const Eigen::MatrixXd& xs,
                    const Eigen::VectorXd& ys, double obs_sigma, int n_mc, Rng rng);
double expected_nll_grad(const GaussianParams& q, const NetworkShape& shape,
                         const Eigen::MatrixXd& xs, const Eigen::VectorXd& ys, double obs_sigma,
                         int n_mc, Rng rng, ParamGrad* grad);

// Per-task loss: lambda-weighted KL to the (Gaussian) prior plus the
// expected NLL estimate. Draws are derived from the rng value, so a call with
// an equal-seed rng is a deterministic function of the parameters.
double task_loss(const GaussianParams& gamma, const Eigen::VectorXd& p_mu,
                 const Eigen::VectorXd& p_sigma, const NetworkShape& shape,
                 const Eigen::MatrixXd& xs, const Eigen::VectorXd& ys, double obs_sigma, int n_mc,
                 double lambda, Rng rng);
double task_loss_grad(const GaussianParams& gamma, const Eigen::VectorXd& p_mu,
                      const Eigen::VectorXd& p_sigma, const NetworkShape& shape,
                      const Eigen::MatrixXd& xs, const Eigen::VectorXd& ys, double obs_sigma,
                      int n_mc, double lambda, Rng rng, ParamGrad* grad);

// Hessian-vector product of task_loss with respect to (mu, rho), holding the
// same draws fixed (forward-over-gradient with dual numbers).
void task_loss_hvp(const GaussianParams& gamma, const Eigen::VectorXd& p_mu,
                   const Eigen::VectorXd& p_sigma, const NetworkShape& shape,
                   const Eigen::MatrixXd& xs, const Eigen::VectorXd& ys, double obs_sigma,
                   int n_mc, double lambda, Rng rng, const ParamGrad& v, ParamGrad* hv);

// d/d(prior mu, rho) of <v, grad_gamma task_loss>: the mixed second
// derivative needed to backpropagate through inner gradient steps. Only the
// KL term couples the task parameters to the prior, so this is closed form.
ParamGrad task_loss_mixed_prior(const GaussianParams& gamma, const GaussianParams& prior,
                                double lambda, const ParamGrad& v);

}  // namespace causalhbm
