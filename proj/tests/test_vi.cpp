#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "causalhbm/vi.hpp"
#include "fd_check.hpp"

using namespace causalhbm;

namespace {

GaussianParams random_params(int p, Rng& rng, double rho_lo = -3.0, double rho_hi = -1.0) {
    GaussianParams q = make_params(p);
    for (int d = 0; d < p; ++d) {
        q.mu(d) = rng.normal(0.0, 0.3);
        q.rho(d) = rng.uniform(rho_lo, rho_hi);
    }
    return q;
}

using fd_check::Problem;
using FdProblem = fd_check::Problem;
const auto& random_problem = fd_check::random_problem;
const auto& loss_at = fd_check::loss_at;

double rel_error(const ParamGrad& a, const ParamGrad& b) {
    const double diff = std::sqrt((a.mu - b.mu).squaredNorm() + (a.rho - b.rho).squaredNorm());
    const double norm = std::sqrt(b.mu.squaredNorm() + b.rho.squaredNorm());
    return diff / std::max(1.0, norm);
}

}  // namespace

TEST_CASE("sample_weights reparameterization") {
    const int p = 6;
    GaussianParams q = make_params(p, 0.0, -40.0);
    for (int d = 0; d < p; ++d) q.mu(d) = 0.1 * d;
    Rng rng(1);
    const Eigen::VectorXd w = sample_weights(q, rng);
    CHECK((w - q.mu).lpNorm<Eigen::Infinity>() < 1e-15);

    // Mean of draws concentrates on mu.
    q = make_params(p, 0.5, 0.0);  // sigma = softplus(0) ~ 0.693
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(p);
    Rng rng2(2);
    const int n = 100000;
    for (int i = 0; i < n; ++i) acc += sample_weights(q, rng2);
    acc /= n;
    const double se = std::log1p(1.0) / std::sqrt(double(n));
    for (int d = 0; d < p; ++d) CHECK(std::abs(acc(d) - 0.5) < 3 * se + 1e-12);

    // Same seed, same draw; eps is returned.
    Rng a(3), b(3);
    Eigen::VectorXd eps_a, eps_b;
    CHECK(sample_weights(q, a, &eps_a) == sample_weights(q, b, &eps_b));
    CHECK(eps_a == eps_b);
}

TEST_CASE("forward pass") {
    const NetworkShape shape{2, 20};
    const int p = param_count(shape);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd x(2);
    x << 0.3, -0.8;
    CHECK(forward(shape, w, x) == 0.0);

    w(p - 1) = 1.25;  // output bias only
    CHECK(forward(shape, w, x) == doctest::Approx(1.25));

    Rng rng(5);
    for (int d = 0; d < p; ++d) w(d) = rng.normal();
    CHECK(std::isfinite(forward(shape, w, x)));
    CHECK_THROWS_AS(forward(shape, Eigen::VectorXd::Zero(3), x), ShapeMismatchError);
}

TEST_CASE("forward is lipschitz with the spectral-norm bound") {
    const NetworkShape shape{3, 20};
    Rng rng(6);
    Eigen::VectorXd w(param_count(shape));
    for (int d = 0; d < w.size(); ++d) w(d) = rng.normal(0.0, 0.4);

    const int h = shape.hidden;
    Eigen::MatrixXd w1(h, 3), w2(h, h);
    Eigen::RowVectorXd w3(h);
    int at = 0;
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < 3; ++j) w1(i, j) = w(at++);
    at += h;
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < h; ++j) w2(i, j) = w(at++);
    at += h;
    for (int j = 0; j < h; ++j) w3(j) = w(at++);

    const double lip = Eigen::JacobiSVD<Eigen::MatrixXd>(w1).singularValues()(0) *
                       Eigen::JacobiSVD<Eigen::MatrixXd>(w2).singularValues()(0) *
                       w3.norm();
    for (int trial = 0; trial < 200; ++trial) {
        Eigen::VectorXd xa(3), xb(3);
        for (int c = 0; c < 3; ++c) {
            xa(c) = rng.normal();
            xb(c) = rng.normal();
        }
        const double gap = std::abs(forward(shape, w, xa) - forward(shape, w, xb));
        CHECK(gap <= lip * (xa - xb).norm() + 1e-12);
    }
}

TEST_CASE("gaussian nll") {
    const NetworkShape shape{2, 20};
    const int p = param_count(shape);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd xs = Eigen::MatrixXd::Random(5, 2);
    Eigen::VectorXd ys = Eigen::VectorXd::Zero(5);

    // Perfect predictions at sigma = 1: batch-size times the log-normalizer.
    CHECK(nll(shape, w, xs, ys, 1.0) == doctest::Approx(5 * 0.5 * std::log(2 * M_PI)));

    // A constant residual c adds m c^2 / 2.
    Eigen::VectorXd shifted = Eigen::VectorXd::Constant(5, 0.7);
    CHECK(nll(shape, w, xs, shifted, 1.0) ==
          doctest::Approx(5 * 0.5 * std::log(2 * M_PI) + 5 * 0.7 * 0.7 / 2));

    // Unimodal in sigma with the minimum at |residual|.
    const double r = 0.42;
    Eigen::VectorXd resid = Eigen::VectorXd::Constant(5, r);
    auto nll_at = [&](double sigma) { return nll(shape, w, xs, resid, sigma); };
    double best_sigma = 0.0, best_value = 1e300;
    for (double sigma = 0.05; sigma < 2.0; sigma += 0.005) {
        const double v = nll_at(sigma);
        if (v < best_value) {
            best_value = v;
            best_sigma = sigma;
        }
    }
    CHECK(best_sigma == doctest::Approx(r).epsilon(0.02));
    CHECK(nll_at(0.1) > nll_at(r));
    CHECK(nll_at(1.5) > nll_at(r));
}

TEST_CASE("gaussian kl closed form") {
    GaussianParams q = make_params(1, 1.0, 0.0);
    // softplus(rho) = 1 at rho = log(e - 1)
    q.rho(0) = std::log(std::exp(1.0) - 1.0);
    Eigen::VectorXd pm = Eigen::VectorXd::Zero(1);
    Eigen::VectorXd ps = Eigen::VectorXd::Ones(1);
    CHECK(kl_gaussian(q, pm, ps) == doctest::Approx(0.5).epsilon(1e-12));

    // q == p gives zero, and the q-side gradient vanishes at the minimum.
    GaussianParams q2 = make_params(4, 0.3, -1.0);
    const Eigen::VectorXd sigma = sigma_of(q2);
    CHECK(kl_gaussian(q2, q2.mu, sigma) == doctest::Approx(0.0).epsilon(1e-14));
    const ParamGrad g = kl_gaussian_grad_q(q2, q2.mu, sigma);
    CHECK(g.mu.lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK(g.rho.lpNorm<Eigen::Infinity>() < 1e-12);

    // Nonnegativity property over random instances.
    Rng rng(8);
    for (int trial = 0; trial < 200; ++trial) {
        GaussianParams qa = random_params(5, rng, -2.0, 1.0);
        GaussianParams qb = random_params(5, rng, -2.0, 1.0);
        const double kl = kl_gaussian(qa, qb.mu, sigma_of(qb));
        CHECK(kl >= -1e-13);
    }

    // Monte Carlo agreement on a random 5-D instance.
    Rng rng2(9);
    GaussianParams qa = random_params(5, rng2, -1.0, 0.5);
    GaussianParams qb = random_params(5, rng2, -1.0, 0.5);
    const Eigen::VectorXd pb_sigma = sigma_of(qb);
    const double exact = kl_gaussian(qa, qb.mu, pb_sigma);
    const Eigen::VectorXd qa_sigma = sigma_of(qa);
    double acc = 0.0, acc2 = 0.0;
    const int n = 1000000;
    Rng mc(10);
    for (int s = 0; s < n; ++s) {
        double term = 0.0;
        for (int d = 0; d < 5; ++d) {
            const double eps = mc.normal();
            const double w = qa.mu(d) + qa_sigma(d) * eps;
            const double zq = eps;
            const double zp = (w - qb.mu(d)) / pb_sigma(d);
            term += -std::log(qa_sigma(d)) - 0.5 * zq * zq + std::log(pb_sigma(d)) +
                    0.5 * zp * zp;
        }
        acc += term;
        acc2 += term * term;
    }
    const double mean = acc / n;
    const double se = std::sqrt((acc2 / n - mean * mean) / n);
    CHECK(std::abs(mean - exact) < 3 * se + 1e-9);
}

TEST_CASE("scale mixture kl estimate") {
    Rng rng(11);
    const GaussianParams q = random_params(6, rng, -2.0, 0.0);
    ScaleMixturePrior prior;  // pi = 1 collapses to N(0, 0.1^2)

    const Eigen::VectorXd pm = Eigen::VectorXd::Zero(6);
    const Eigen::VectorXd ps = Eigen::VectorXd::Constant(6, prior.sigma1);
    const double exact = kl_gaussian(q, pm, ps);

    // Spread of single-draw estimates around the analytic value.
    const int n = 20000;
    double acc = 0.0, acc2 = 0.0;
    for (int s = 0; s < n; ++s) {
        const double v = kl_scale_mixture_mc(q, prior, 1, Rng(1000 + s));
        acc += v;
        acc2 += v * v;
    }
    const double mean = acc / n;
    const double se = std::sqrt((acc2 / n - mean * mean) / n);
    CHECK(std::abs(mean - exact) < 3 * se);

    // KL of the prior against itself is zero in expectation.
    GaussianParams at_prior = make_params(6, 0.0, 0.0);
    for (int d = 0; d < 6; ++d) {
        at_prior.rho(d) = std::log(std::expm1(prior.sigma1));
    }
    double acc_p = 0.0, acc_p2 = 0.0;
    for (int s = 0; s < n; ++s) {
        const double v = kl_scale_mixture_mc(at_prior, prior, 1, Rng(5000 + s));
        acc_p += v;
        acc_p2 += v * v;
    }
    const double mean_p = acc_p / n;
    const double se_p = std::sqrt((acc_p2 / n - mean_p * mean_p) / n);
    CHECK(std::abs(mean_p) < 3 * se_p + 1e-9);

    // Estimator variance shrinks like 1/n_mc.
    auto variance_at = [&](int n_mc) {
        double a = 0.0, a2 = 0.0;
        const int reps = 3000;
        for (int s = 0; s < reps; ++s) {
            const double v = kl_scale_mixture_mc(q, prior, n_mc, Rng(9000 + s));
            a += v;
            a2 += v * v;
        }
        const double m = a / reps;
        return a2 / reps - m * m;
    };
    const double v1 = variance_at(1);
    const double v4 = variance_at(4);
    const double v16 = variance_at(16);
    CHECK(v4 == doctest::Approx(v1 / 4.0).epsilon(0.35));
    CHECK(v16 == doctest::Approx(v1 / 16.0).epsilon(0.35));

    // Two-component path: mixture density between the two pure components.
    ScaleMixturePrior mixed{0.5, 0.1, 0.4};
    const double at_mix = kl_scale_mixture_mc(q, mixed, 64, Rng(31));
    CHECK(std::isfinite(at_mix));
}

TEST_CASE("pathwise gradient is unbiased on a closed-form case") {
    Rng rng(13);
    const GaussianParams q = random_params(4, rng, -2.0, 0.0);
    ScaleMixturePrior prior;  // single component
    const Eigen::VectorXd pm = Eigen::VectorXd::Zero(4);
    const Eigen::VectorXd ps = Eigen::VectorXd::Constant(4, prior.sigma1);
    const ParamGrad exact = kl_gaussian_grad_q(q, pm, ps);

    const int n = 10000;
    ParamGrad mean = zero_grad(4);
    Eigen::VectorXd mu2 = Eigen::VectorXd::Zero(4), rho2 = Eigen::VectorXd::Zero(4);
    for (int s = 0; s < n; ++s) {
        ParamGrad g;
        kl_scale_mixture_mc_grad(q, prior, 1, Rng(777 + s), &g);
        mean.mu += g.mu;
        mean.rho += g.rho;
        mu2 += g.mu.array().square().matrix();
        rho2 += g.rho.array().square().matrix();
    }
    mean.mu /= n;
    mean.rho /= n;
    for (int d = 0; d < 4; ++d) {
        const double se_mu = std::sqrt((mu2(d) / n - mean.mu(d) * mean.mu(d)) / n);
        const double se_rho = std::sqrt((rho2(d) / n - mean.rho(d) * mean.rho(d)) / n);
        CHECK(std::abs(mean.mu(d) - exact.mu(d)) < 3 * se_mu + 1e-9);
        CHECK(std::abs(mean.rho(d) - exact.rho(d)) < 3 * se_rho + 1e-9);
    }
}

TEST_CASE("task loss structure") {
    const FdProblem prob = random_problem(0);
    const double kl = kl_gaussian(prob.gamma, prob.prior_mu, prob.prior_sigma);

    // Lambda scales only the KL term when draws are held fixed.
    const double at1 = loss_at(prob, prob.gamma);
    FdProblem prob2 = prob;
    prob2.lambda = 0.02;
    const double at2 = loss_at(prob2, prob.gamma);
    CHECK(at2 - at1 == doctest::Approx((prob2.lambda - prob.lambda) * kl).epsilon(1e-9));

    // gamma at the prior with zero-residual data: the loss is the pure
    // likelihood average (KL = 0 exactly).
    FdProblem flat = prob;
    flat.gamma.mu = prob.prior_mu;
    for (int d = 0; d < flat.gamma.rho.size(); ++d) {
        flat.gamma.rho(d) = std::log(std::expm1(prob.prior_sigma(d)));
    }
    const double pure = expected_nll(flat.gamma, flat.shape, flat.xs, flat.ys, flat.obs_sigma,
                                     flat.n_mc, Rng(flat.seed));
    CHECK(loss_at(flat, flat.gamma) == doctest::Approx(pure).epsilon(1e-10));
}

TEST_CASE("task loss gradient matches central finite differences") {
    CHECK(fd_check::max_rel_error_over(20) <= 1e-4);
}

TEST_CASE("softplus saturation freezes rho gradients") {
    FdProblem prob = random_problem(3);
    for (int d = 0; d < prob.gamma.rho.size(); ++d) prob.gamma.rho(d) = -40.0;
    ParamGrad grad;
    task_loss_grad(prob.gamma, prob.prior_mu, prob.prior_sigma, prob.shape, prob.xs, prob.ys,
                   prob.obs_sigma, prob.n_mc, prob.lambda, Rng(prob.seed), &grad);
    // KL keeps a -1/sigma * gate term alive, but the likelihood path dies:
    // gate = sigmoid(-40) ~ 4e-18 and (sigma/p^2) * gate ~ 0, while the
    // -gate/sigma ratio tends to -sigmoid/softplus -> -1. Frozen bound:
    CHECK(grad.rho.lpNorm<Eigen::Infinity>() < prob.lambda * 1.5);
}

TEST_CASE("hessian-vector products match differentiated gradients") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const FdProblem prob = random_problem(100 + seed);
        const int p = param_count(prob.shape);
        Rng vr(seed);
        ParamGrad v = zero_grad(p);
        for (int d = 0; d < p; ++d) {
            v.mu(d) = vr.normal();
            v.rho(d) = vr.normal();
        }
        ParamGrad hv;
        task_loss_hvp(prob.gamma, prob.prior_mu, prob.prior_sigma, prob.shape, prob.xs, prob.ys,
                      prob.obs_sigma, prob.n_mc, prob.lambda, Rng(prob.seed), v, &hv);

        // Directional finite difference of the gradient.
        const double h = 1e-6;
        GaussianParams hi = prob.gamma, lo = prob.gamma;
        hi.mu += h * v.mu;
        hi.rho += h * v.rho;
        lo.mu -= h * v.mu;
        lo.rho -= h * v.rho;
        ParamGrad ghi, glo;
        task_loss_grad(hi, prob.prior_mu, prob.prior_sigma, prob.shape, prob.xs, prob.ys,
                       prob.obs_sigma, prob.n_mc, prob.lambda, Rng(prob.seed), &ghi);
        task_loss_grad(lo, prob.prior_mu, prob.prior_sigma, prob.shape, prob.xs, prob.ys,
                       prob.obs_sigma, prob.n_mc, prob.lambda, Rng(prob.seed), &glo);
        ParamGrad fd = zero_grad(p);
        fd.mu = (ghi.mu - glo.mu) / (2 * h);
        fd.rho = (ghi.rho - glo.rho) / (2 * h);
        CHECK(rel_error(hv, fd) < 1e-4);
    }
}

TEST_CASE("mixed prior derivative matches finite differences") {
    const FdProblem prob = random_problem(55);
    const int p = param_count(prob.shape);
    GaussianParams prior = make_params(p);
    prior.mu = prob.prior_mu;
    for (int d = 0; d < p; ++d) prior.rho(d) = std::log(std::expm1(prob.prior_sigma(d)));

    Rng vr(4);
    ParamGrad v = zero_grad(p);
    for (int d = 0; d < p; ++d) {
        v.mu(d) = vr.normal();
        v.rho(d) = vr.normal();
    }
    const ParamGrad mixed = task_loss_mixed_prior(prob.gamma, prior, prob.lambda, v);

    // <v, grad_gamma loss> as a function of the prior parameters.
    auto inner = [&](const GaussianParams& pr) {
        ParamGrad g;
        task_loss_grad(prob.gamma, pr.mu, sigma_of(pr), prob.shape, prob.xs, prob.ys,
                       prob.obs_sigma, prob.n_mc, prob.lambda, Rng(prob.seed), &g);
        return v.mu.dot(g.mu) + v.rho.dot(g.rho);
    };
    const double h = 1e-5;
    ParamGrad fd = zero_grad(p);
    for (int d = 0; d < p; d += 37) {  // spot-check a subset of coordinates
        GaussianParams hi = prior, lo = prior;
        hi.mu(d) += h;
        lo.mu(d) -= h;
        fd.mu(d) = (inner(hi) - inner(lo)) / (2 * h);
        hi = lo = prior;
        hi.rho(d) += h;
        lo.rho(d) -= h;
        fd.rho(d) = (inner(hi) - inner(lo)) / (2 * h);
        CHECK(mixed.mu(d) == doctest::Approx(fd.mu(d)).epsilon(1e-5));
        CHECK(mixed.rho(d) == doctest::Approx(fd.rho(d)).epsilon(1e-5));
    }
}
