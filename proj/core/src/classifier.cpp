#include "wsdiff/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "wsdiff/errors.hpp"
#include "wsdiff/linalg.hpp"

namespace wsdiff {

namespace {

// Brent root finder on [a, b] with g(a) g(b) <= 0.
double brent(const std::function<double(double)>& g, double a, double b, double tol_x) {
    double fa = g(a), fb = g(b);
    if (fa == 0.0) return a;
    if (fb == 0.0) return b;
    if (fa * fb > 0.0) throw numerical_error("brent: root not bracketed");
    double c = a, fc = fa, d = b - a, e = d;
    for (int iter = 0; iter < 200; ++iter) {
        if (std::fabs(fc) < std::fabs(fb)) {
            a = b; b = c; c = a;
            fa = fb; fb = fc; fc = fa;
        }
        const double tol = 2.0 * std::numeric_limits<double>::epsilon() * std::fabs(b) + 0.5 * tol_x;
        const double xm = 0.5 * (c - b);
        if (std::fabs(xm) <= tol || fb == 0.0) return b;
        if (std::fabs(e) >= tol && std::fabs(fa) > std::fabs(fb)) {
            double p, q, r;
            const double s = fb / fa;
            if (a == c) {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                q = fa / fc;
                r = fb / fc;
                p = s * (2.0 * xm * q * (q - r) - (b - a) * (r - 1.0));
                q = (q - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if (p > 0.0) q = -q;
            p = std::fabs(p);
            if (2.0 * p < std::min(3.0 * xm * q - std::fabs(tol * q), std::fabs(e * q))) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += (std::fabs(d) > tol) ? d : (xm > 0.0 ? tol : -tol);
        fb = g(b);
        if ((fb > 0.0) == (fc > 0.0)) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
    }
    throw numerical_error("brent: no convergence");
}

} // namespace

TimestepPlan TimestepPlan::unrestricted(int draws, bool reuse) {
    TimestepPlan p;
    p.l = 0.0;
    p.r = std::numeric_limits<double>::infinity();
    p.draws = draws;
    p.reuse_noise = reuse;
    p.truncated = false;
    return p;
}

TimestepPlan plan_subinterval(const Schedule& s, double delta, int draws, bool reuse_noise) {
    if (!(delta >= 0.0)) throw std::invalid_argument("plan_subinterval: delta must be >= 0");
    if (draws < 1) throw std::invalid_argument("plan_subinterval: draws must be >= 1");
    const TimestepLaw law = timestep_law(s);

    TimestepPlan plan;
    plan.draws = draws;
    plan.reuse_noise = reuse_noise;

    if (delta == 0.0) {
        plan.l = plan.r = law.median();
        plan.residual = 0.0;
        return plan;
    }
    if (!law.lognormal) {
        if (delta > 1.0) throw std::invalid_argument("plan_subinterval: delta exceeds uniform support");
        plan.l = 0.5 * (1.0 - delta);
        plan.r = plan.l + delta;
        plan.residual = std::fabs(law.cdf(plan.l) + law.cdf(plan.r) - 1.0);
        return plan;
    }

    const auto g = [&](double l) { return law.cdf(l) + law.cdf(l + delta) - 1.0; };
    const double med = law.median();
    // g < 0 as l -> 0+ (F(delta) < 1), g >= 0 at the median.
    double lo = std::min(med, 1e-12);
    while (g(lo) > 0.0) lo *= 0.5;
    const double root = brent(g, lo, med, 0.0);
    plan.l = root;
    plan.r = root + delta;
    plan.residual = std::fabs(g(root));
    return plan;
}

double elbo_weight(const Schedule& s, double tau) {
    const auto [alpha, sigma] = alpha_sigma(s, tau);
    (void)alpha;
    return edm_loss_weight(sigma, s.sigma_data) * timestep_law(s).pdf(tau);
}

DrawSet make_plan_draws(const TimestepPlan& plan, const Schedule& s, int dim, Rng& rng) {
    const TimestepLaw law = timestep_law(s);
    DrawSet ds;
    ds.dim = dim;
    ds.tau.resize(plan.draws);
    ds.eps.resize(static_cast<size_t>(plan.draws) * dim);
    std::normal_distribution<double> gauss(0.0, 1.0);
    if (plan.truncated && plan.l == plan.r) {
        for (auto& t : ds.tau) t = plan.l;
    } else {
        const double ul = plan.truncated ? law.cdf(plan.l) : 0.0;
        const double ur = plan.truncated ? law.cdf(plan.r) : 1.0;
        std::uniform_real_distribution<double> uni(ul, ur);
        for (auto& t : ds.tau) {
            double u = uni(rng);
            u = std::clamp(u, std::numeric_limits<double>::min(), 1.0 - 1e-16);
            t = law.quantile(u);
        }
    }
    for (auto& e : ds.eps) e = gauss(rng);
    return ds;
}

namespace {

// One reconstruction term: || h(alpha x_ref + sigma eps, y, tau) - x_ref ||^2.
double recon_sq_error(const ScoreField& field, std::span<const double> x_ref, int y, double tau,
                      std::span<const double> eps, const Schedule& s, std::vector<double>& x_buf,
                      std::vector<double>& s_buf) {
    const auto [alpha, sigma] = alpha_sigma(s, tau);
    const int d = static_cast<int>(x_ref.size());
    x_buf.resize(d);
    s_buf.resize(d);
    for (int i = 0; i < d; ++i) x_buf[i] = alpha * x_ref[i] + sigma * eps[i];
    field.score(x_buf, y, tau, s_buf);
    double err = 0.0;
    for (int i = 0; i < d; ++i) {
        const double h = x_buf[i] / alpha + (sigma * sigma / alpha) * s_buf[i];
        const double diff = h - x_ref[i];
        err += diff * diff;
    }
    return err;
}

} // namespace

double elbo_logit(const ScoreField& field, std::span<const double> x, int y, const Schedule& s,
                  const TimestepPlan& plan, const DrawSet& draws, bool estimate_start,
                  double input_t) {
    if (y < 0 || y >= field.num_classes()) throw std::invalid_argument("elbo_logit: class out of range");
    const int d = field.dim();
    if (static_cast<int>(x.size()) != d) throw std::invalid_argument("elbo_logit: dimension mismatch");
    if (draws.tau.empty()) throw std::invalid_argument("elbo_logit: empty draw set");

    std::vector<double> ref(x.begin(), x.end());
    std::vector<double> x_buf, s_buf;
    if (input_t > 0.0) {
        // noised input: the reference is the class-hypothesis denoised estimate
        const auto [a0, s0] = alpha_sigma(s, input_t);
        s_buf.resize(d);
        field.score(x, y, input_t, s_buf);
        for (int i = 0; i < d; ++i) ref[i] = x[i] / a0 + (s0 * s0 / a0) * s_buf[i];
    } else if (estimate_start) {
        // one-step denoised estimate at the smallest usable noise level
        const double sigma0 = s.sigma_min;
        s_buf.resize(d);
        field.score(x, y, sigma0, s_buf);
        for (int i = 0; i < d; ++i) ref[i] = x[i] + sigma0 * sigma0 * s_buf[i];
    }

    double logit = 0.0;
    for (int j = 0; j < static_cast<int>(draws.tau.size()); ++j) {
        const double tau = draws.tau[j];
        const std::span<const double> eps(draws.eps.data() + static_cast<size_t>(j) * d,
                                          static_cast<size_t>(d));
        logit -= elbo_weight(s, tau) * recon_sq_error(field, ref, y, tau, eps, s, x_buf, s_buf);
    }
    if (!std::isfinite(logit)) throw numerical_error("elbo_logit: non-finite logit");
    return logit;
}

double elbo_logit(const ScoreField& field, std::span<const double> x, int y, const Schedule& s,
                  const TimestepPlan& plan, Rng& rng, bool estimate_start, double input_t) {
    const DrawSet ds = make_plan_draws(plan, s, field.dim(), rng);
    return elbo_logit(field, x, y, s, plan, ds, estimate_start, input_t);
}

std::vector<double> classifier_logits(const ScoreField& field, std::span<const double> x,
                                      const Schedule& s, const TimestepPlan& plan, Rng& rng,
                                      bool estimate_start, double input_t) {
    const int c = field.num_classes();
    std::vector<double> logits(c);
    if (plan.reuse_noise) {
        const DrawSet ds = make_plan_draws(plan, s, field.dim(), rng);
        for (int y = 0; y < c; ++y)
            logits[y] = elbo_logit(field, x, y, s, plan, ds, estimate_start, input_t);
    } else {
        for (int y = 0; y < c; ++y)
            logits[y] = elbo_logit(field, x, y, s, plan, rng, estimate_start, input_t);
    }
    return logits;
}

std::vector<double> posterior_from_logits(std::span<const double> logits,
                                          std::span<const double> prior) {
    if (logits.size() != prior.size())
        throw std::invalid_argument("posterior_from_logits: size mismatch");
    std::vector<double> shifted(logits.size());
    for (size_t y = 0; y < logits.size(); ++y) {
        if (!(prior[y] >= 0.0)) throw std::invalid_argument("posterior_from_logits: negative prior");
        shifted[y] = (prior[y] > 0.0) ? logits[y] + std::log(prior[y])
                                      : -std::numeric_limits<double>::infinity();
    }
    const double lse = logsumexp(shifted);
    std::vector<double> post(logits.size());
    for (size_t y = 0; y < logits.size(); ++y) post[y] = std::exp(shifted[y] - lse);
    return post;
}

std::vector<double> posterior(const ScoreField& field, std::span<const double> x,
                              const Schedule& s, const TimestepPlan& plan,
                              std::span<const double> prior, Rng& rng, bool estimate_start) {
    const auto logits = classifier_logits(field, x, s, plan, rng, estimate_start);
    return posterior_from_logits(logits, prior);
}

double err_diagnostic_from_hbar(const std::function<double(double)>& hbar, const TimestepLaw& law,
                                double l, double r, int quad_points) {
    if (!(r > l)) throw std::invalid_argument("err_diagnostic: need r > l");
    if (quad_points < 3) throw std::invalid_argument("err_diagnostic: need at least 3 nodes");
    const double h = (r - l) / (quad_points - 1);
    // Integrate hbar - midpoint so a constant integrand cancels exactly.
    const double mid = 0.5 * (hbar(l) + hbar(r));
    double num = 0.0, den = 0.0;
    for (int i = 0; i < quad_points; ++i) {
        const double tau = l + h * i;
        const double coeff = (i == 0 || i == quad_points - 1) ? 0.5 : 1.0;
        const double p = law.pdf(tau);
        num += coeff * p * (hbar(tau) - mid);
        den += coeff * p;
    }
    if (!(den > 0.0)) throw numerical_error("err_diagnostic: interval carries no mass");
    return num / den;
}

double err_diagnostic(const ScoreField& field, std::span<const double> x, int y, const Schedule& s,
                      const TimestepPlan& plan, int quad_points, Rng& rng) {
    const int d = field.dim();
    if (static_cast<int>(x.size()) != d) throw std::invalid_argument("err_diagnostic: dimension mismatch");
    // One eps set shared across all nodes keeps the MC estimate smooth in tau.
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> eps(static_cast<size_t>(plan.draws) * d);
    for (auto& e : eps) e = gauss(rng);

    std::vector<double> x_buf, s_buf;
    const auto hbar = [&](double tau) {
        double acc = 0.0;
        for (int j = 0; j < plan.draws; ++j) {
            const std::span<const double> ej(eps.data() + static_cast<size_t>(j) * d,
                                             static_cast<size_t>(d));
            acc += recon_sq_error(field, x, y, tau, ej, s, x_buf, s_buf);
        }
        return elbo_weight(s, tau) * acc / plan.draws;
    };
    return err_diagnostic_from_hbar(hbar, timestep_law(s), plan.l, plan.r, quad_points);
}

std::vector<double> estimate_prior_pl(const Dataset& d,
                                      const std::function<std::vector<double>(std::span<const double>)>& predict,
                                      double momentum, int epochs) {
    if (!(momentum >= 0.0 && momentum < 1.0))
        throw std::invalid_argument("estimate_prior_pl: momentum must lie in [0,1)");
    if (epochs < 1) throw std::invalid_argument("estimate_prior_pl: epochs must be >= 1");
    const int c = d.num_classes;
    std::vector<double> counts(c, 0.0);
    int n = 0;
    for (int i = 0; i < d.size(); ++i) {
        if (d.z[i].kind != Supervision::Kind::candidate) continue;
        const auto probs = predict(d.point(i));
        if (static_cast<int>(probs.size()) != c)
            throw std::invalid_argument("estimate_prior_pl: predictor size mismatch");
        int best = -1;
        double best_p = -std::numeric_limits<double>::infinity();
        for (int y = 0; y < c; ++y) {
            if (!d.z[i].in_set(y)) continue;
            if (probs[y] > best_p) {
                best_p = probs[y];
                best = y;
            }
        }
        counts[best] += 1.0;
        ++n;
    }
    if (n == 0) throw std::invalid_argument("estimate_prior_pl: no candidate-labeled samples");
    for (auto& v : counts) v /= n;

    // The predictor is fixed here, so the per-epoch target is constant and
    // only the moving average iterates.
    std::vector<double> r(c, 1.0 / c);
    for (int e = 0; e < epochs; ++e)
        for (int y = 0; y < c; ++y) r[y] = momentum * r[y] + (1.0 - momentum) * counts[y];
    return r;
}

std::vector<double> estimate_prior_su(const Dataset& d) {
    std::vector<double> counts(d.num_classes, 0.0);
    int n = 0;
    for (int i = 0; i < d.size(); ++i) {
        if (d.z[i].kind != Supervision::Kind::exact) continue;
        counts[d.z[i].label] += 1.0;
        ++n;
    }
    if (n == 0) throw std::invalid_argument("estimate_prior_su: no labeled samples");
    for (auto& v : counts) v /= n;
    return counts;
}

std::vector<double> solve_prior_nl(std::span<const double> noisy_label_freq,
                                   const TransitionMatrix& t, bool* clipped) {
    t.validate();
    const int c = t.c;
    if (static_cast<int>(noisy_label_freq.size()) != c)
        throw std::invalid_argument("solve_prior_nl: frequency size mismatch");
    double total = 0.0;
    for (double v : noisy_label_freq) {
        if (!(v >= 0.0)) throw std::invalid_argument("solve_prior_nl: negative frequency");
        total += v;
    }
    if (!(total > 0.0)) throw std::invalid_argument("solve_prior_nl: empty frequencies");

    Matrix tt(c, c);
    for (int i = 0; i < c; ++i)
        for (int j = 0; j < c; ++j) tt.at(i, j) = t.at(j, i);
    const double cond = condition_number(tt);
    if (cond > 1e8)
        throw numerical_error("solve_prior_nl: transition matrix ill-conditioned (cond ~ " +
                              std::to_string(cond) + ")");

    std::vector<double> rhs(noisy_label_freq.begin(), noisy_label_freq.end());
    for (auto& v : rhs) v /= total;
    auto pi = solve_linear(tt, std::move(rhs));

    bool any_clip = false;
    double sum = 0.0;
    for (auto& v : pi) {
        if (v < -1e-9 || v > 1.0 + 1e-9) any_clip = true;
        v = std::clamp(v, 0.0, 1.0);
        sum += v;
    }
    if (!(sum > 0.0)) throw numerical_error("solve_prior_nl: degenerate solution");
    for (auto& v : pi) v /= sum;
    if (clipped) *clipped = any_clip;
    return pi;
}

} // namespace wsdiff
