// Finite-difference validation of task-loss gradients, shared by the unit
// tests and the acceptance suite.
#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "causalhbm/vi.hpp"

namespace fd_check {

using causalhbm::GaussianParams;
using causalhbm::NetworkShape;
using causalhbm::ParamGrad;
using causalhbm::Rng;

struct Problem {
    NetworkShape shape{3, 20};
    GaussianParams gamma;
    Eigen::VectorXd prior_mu, prior_sigma;
    Eigen::MatrixXd xs;
    Eigen::VectorXd ys;
    double obs_sigma = 0.1;
    int n_mc = 2;
    double lambda = 0.01;
    std::uint64_t seed = 0;
};

inline Problem random_problem(std::uint64_t seed) {
    Problem prob;
    Rng rng(seed);
    const int p = param_count(prob.shape);
    prob.gamma = causalhbm::make_params(p);
    for (int d = 0; d < p; ++d) {
        prob.gamma.mu(d) = rng.normal(0.0, 0.3);
        prob.gamma.rho(d) = rng.uniform(-3.0, -1.0);
    }
    prob.prior_mu = Eigen::VectorXd::Zero(p);
    prob.prior_sigma = Eigen::VectorXd::Constant(p, 0.2);
    for (int d = 0; d < p; ++d) prob.prior_mu(d) = rng.normal(0.0, 0.1);
    prob.xs.resize(4, 3);
    prob.ys.resize(4);
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 3; ++c) prob.xs(r, c) = rng.normal();
        prob.ys(r) = rng.normal(0.0, 0.5);
    }
    prob.seed = rng.bits();
    return prob;
}

inline double loss_at(const Problem& prob, const GaussianParams& gamma) {
    return task_loss(gamma, prob.prior_mu, prob.prior_sigma, prob.shape, prob.xs, prob.ys,
                     prob.obs_sigma, prob.n_mc, prob.lambda, Rng(prob.seed));
}

struct FdResult {
    double rel_error = 0.0;  // ||fd - grad||_2 / max(1, ||fd||_2)
    bool smooth = true;      // false when the stencil straddles a rectifier kink
};

// Central differences at step h, cross-checked at h/2: at differentiable
// points the two estimates agree to O(h^2); a rectifier kink inside the
// stencil makes them disagree at O(1), and such instances are not valid
// gradient-check points.
inline FdResult check_instance(const Problem& prob, double h = 1e-4) {
    const int p = param_count(prob.shape);
    ParamGrad grad;
    task_loss_grad(prob.gamma, prob.prior_mu, prob.prior_sigma, prob.shape, prob.xs, prob.ys,
                   prob.obs_sigma, prob.n_mc, prob.lambda, Rng(prob.seed), &grad);

    FdResult result;
    double diff2 = 0.0, norm2 = 0.0;
    auto probe = [&](bool is_mu, int d) {
        auto fd_at = [&](double step) {
            GaussianParams hi = prob.gamma, lo = prob.gamma;
            (is_mu ? hi.mu(d) : hi.rho(d)) += step;
            (is_mu ? lo.mu(d) : lo.rho(d)) -= step;
            return (loss_at(prob, hi) - loss_at(prob, lo)) / (2 * step);
        };
        const double fd_full = fd_at(h);
        const double fd_half = fd_at(h / 2);
        if (std::abs(fd_full - fd_half) > 1e-3 * std::max(1.0, std::abs(fd_full))) {
            result.smooth = false;
        }
        const double g = is_mu ? grad.mu(d) : grad.rho(d);
        diff2 += (fd_full - g) * (fd_full - g);
        norm2 += fd_full * fd_full;
    };
    for (int d = 0; d < p; ++d) {
        probe(true, d);
        probe(false, d);
    }
    result.rel_error = std::sqrt(diff2) / std::max(1.0, std::sqrt(norm2));
    return result;
}

// Max relative error over n differentiable instances; seeds advance until
// enough smooth instances are found.
inline double max_rel_error_over(int n_instances, std::uint64_t first_seed = 1) {
    double worst = 0.0;
    int found = 0;
    std::uint64_t seed = first_seed;
    while (found < n_instances) {
        const FdResult r = check_instance(random_problem(seed++));
        if (!r.smooth) continue;
        worst = std::max(worst, r.rel_error);
        ++found;
    }
    return worst;
}

}  // namespace fd_check
