#pragma once

#include <Eigen/Core>
#include <cmath>
#include <vector>

#include "causalhbm/dual.hpp"

namespace causalhbm {

// The fixed regression architecture: two rectified hidden layers of `hidden`
// units and a linear scalar head. Flat parameter order is layer-major,
// weights then biases: W1, b1, W2, b2, W3, b3.
struct NetworkShape {
    int input_dim = 1;
    int hidden = 20;
};

inline int param_count(const NetworkShape& s) {
    return s.hidden * s.input_dim + s.hidden + s.hidden * s.hidden + s.hidden + s.hidden + 1;
}

namespace detail {

template <typename S>
S softplus(const S& x) {
    using std::exp;
    using std::log1p;
    if (value_of(x) > 30.0) return x;
    return log1p(exp(x));
}

template <typename S>
S logistic(const S& x) {
    using std::exp;
    if (value_of(x) >= 0.0) {
        return 1.0 / (1.0 + exp(-x));
    }
    const S e = exp(x);
    return e / (1.0 + e);
}

template <typename S>
S relu(const S& x) {
    return value_of(x) > 0.0 ? x : S(0.0);
}

// Forward pass for one input row; hidden activations are stored for the
// backward pass.
template <typename S>
S mlp_forward_one(const NetworkShape& shape, const S* w, const double* x, std::vector<S>& h1,
                  std::vector<S>& h2) {
    const int k = shape.input_dim;
    const int h = shape.hidden;
    const S* w1 = w;
    const S* b1 = w1 + h * k;
    const S* w2 = b1 + h;
    const S* b2 = w2 + h * h;
    const S* w3 = b2 + h;
    const S* b3 = w3 + h;

    h1.resize(h);
    h2.resize(h);
    for (int i = 0; i < h; ++i) {
        S acc = b1[i];
        for (int j = 0; j < k; ++j) acc += w1[i * k + j] * x[j];
        h1[i] = relu(acc);
    }
    for (int i = 0; i < h; ++i) {
        S acc = b2[i];
        for (int j = 0; j < h; ++j) acc += w2[i * h + j] * h1[j];
        h2[i] = relu(acc);
    }
    S out = b3[0];
    for (int j = 0; j < h; ++j) out += w3[j] * h2[j];
    return out;
}

// Accumulates d(out)/d(w) scaled by dout into grad. h1/h2 are the stored
// post-activation values from the forward pass.
template <typename S>
void mlp_backward_one(const NetworkShape& shape, const S* w, const double* x,
                      const std::vector<S>& h1, const std::vector<S>& h2, const S& dout, S* grad) {
    const int k = shape.input_dim;
    const int h = shape.hidden;
    const S* w2 = w + h * k + h;
    const S* w3 = w2 + h * h + h;

    S* g1 = grad;
    S* gb1 = g1 + h * k;
    S* g2 = gb1 + h;
    S* gb2 = g2 + h * h;
    S* g3 = gb2 + h;
    S* gb3 = g3 + h;

    std::vector<S> d2(h), d1(h, S(0.0));
    for (int i = 0; i < h; ++i) {
        d2[i] = value_of(h2[i]) > 0.0 ? dout * w3[i] : S(0.0);
        g3[i] += dout * h2[i];
    }
    gb3[0] += dout;
    for (int i = 0; i < h; ++i) {
        if (value_of(h2[i]) <= 0.0) continue;
        for (int j = 0; j < h; ++j) {
            g2[i * h + j] += d2[i] * h1[j];
            if (value_of(h1[j]) > 0.0) d1[j] += d2[i] * w2[i * h + j];
        }
        gb2[i] += d2[i];
    }
    for (int j = 0; j < h; ++j) {
        if (value_of(h1[j]) <= 0.0) continue;
        for (int c = 0; c < k; ++c) g1[j * k + c] += d1[j] * x[c];
        gb1[j] += d1[j];
    }
}

// Gaussian negative log-likelihood of the batch, summed over rows; the
// gradient with respect to the flat weights is accumulated when grad != null.
template <typename S>
S mlp_nll_grad(const NetworkShape& shape, const S* w, const Eigen::MatrixXd& X,
               const Eigen::VectorXd& y, double obs_sigma, S* grad) {
    const int m = static_cast<int>(X.rows());
    const double inv_var = 1.0 / (obs_sigma * obs_sigma);
    const double log_norm = 0.5 * std::log(2.0 * M_PI * obs_sigma * obs_sigma);

    std::vector<S> h1, h2;
    std::vector<double> row(static_cast<std::size_t>(X.cols()));
    S loss(0.0);
    for (int r = 0; r < m; ++r) {
        for (int c = 0; c < X.cols(); ++c) row[c] = X(r, c);
        const S out = mlp_forward_one(shape, w, row.data(), h1, h2);
        const S resid = out - y(r);
        loss += 0.5 * inv_var * resid * resid + log_norm;
        if (grad) {
            const S dout = inv_var * resid;
            mlp_backward_one(shape, w, row.data(), h1, h2, dout, grad);
        }
    }
    return loss;
}

// Task loss: lambda * KL(q || N(p_mu, p_sigma^2)) plus the average over n_mc
// reparameterized draws of the batch NLL. eps holds the n_mc * P fixed
// standard-normal draws; gradients w.r.t. (mu, rho) accumulate when
// grad_mu/grad_rho are non-null. Instantiated with S = Dual this yields exact
// Hessian-vector products of the loss in the tangent direction.
template <typename S>
S task_loss_core(const NetworkShape& shape, const S* mu, const S* rho, const double* p_mu,
                 const double* p_sigma, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                 double obs_sigma, int n_mc, double lambda, const double* eps, S* grad_mu,
                 S* grad_rho) {
    const int p = param_count(shape);
    std::vector<S> sigma(p), gate(p);
    for (int d = 0; d < p; ++d) {
        sigma[d] = softplus(rho[d]);
        gate[d] = logistic(rho[d]);
    }

    using std::log;
    S loss(0.0);
    for (int d = 0; d < p; ++d) {
        const double pv = p_sigma[d] * p_sigma[d];
        const S diff = mu[d] - p_mu[d];
        loss += lambda * (log(S(p_sigma[d])) - log(sigma[d]) +
                          (sigma[d] * sigma[d] + diff * diff) / (2.0 * pv) - 0.5);
        if (grad_mu) {
            grad_mu[d] += lambda * diff / pv;
            grad_rho[d] += lambda * (sigma[d] / pv - 1.0 / sigma[d]) * gate[d];
        }
    }

    std::vector<S> w(p), wgrad;
    for (int s = 0; s < n_mc; ++s) {
        const double* e = eps + static_cast<std::ptrdiff_t>(s) * p;
        for (int d = 0; d < p; ++d) w[d] = mu[d] + sigma[d] * e[d];
        S* wg = nullptr;
        if (grad_mu) {
            wgrad.assign(p, S(0.0));
            wg = wgrad.data();
        }
        loss += mlp_nll_grad(shape, w.data(), X, y, obs_sigma, wg) / static_cast<double>(n_mc);
        if (grad_mu) {
            for (int d = 0; d < p; ++d) {
                grad_mu[d] += wgrad[d] / static_cast<double>(n_mc);
                grad_rho[d] += wgrad[d] * e[d] * gate[d] / static_cast<double>(n_mc);
            }
        }
    }
    return loss;
}

}  // namespace detail

}  // namespace causalhbm
