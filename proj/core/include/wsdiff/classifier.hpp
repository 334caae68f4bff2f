#pragma once

#include <functional>
#include <span>
#include <vector>

#include "wsdiff/data.hpp"
#include "wsdiff/schedule.hpp"
#include "wsdiff/score_field.hpp"

namespace wsdiff {

// Timestep subinterval used by the likelihood estimate: [l, r] with equal
// tail mass on both sides, i.e. F(l) + F(r) = 1 where F is the timestep CDF.
struct TimestepPlan {
    double l = 0.0;
    double r = 0.0;
    double residual = 0.0; // |F(l) + F(r) - 1| reported by the solver
    int draws = 16;
    bool reuse_noise = true;
    bool truncated = true; // false: draw from the full timestep law

    static TimestepPlan unrestricted(int draws, bool reuse = true);
};

// Solves F(l) + F(l + delta) = 1 for l (Brent); r = l + delta. The interval
// always brackets the median of the law. delta = 0 collapses to the median.
TimestepPlan plan_subinterval(const Schedule& s, double delta, int draws = 16,
                              bool reuse_noise = true);

// Per-timestep weight of the likelihood estimate:
// lambda(sigma_tau) * p(tau) under the schedule's training law.
double elbo_weight(const Schedule& s, double tau);

// Shared (tau, eps) draws for one classification, reused across classes.
struct DrawSet {
    int dim = 0;
    std::vector<double> tau;
    std::vector<double> eps; // draws x dim
};

DrawSet make_plan_draws(const TimestepPlan& plan, const Schedule& s, int dim, Rng& rng);

// Monte Carlo log-likelihood proxy: minus the weighted reconstruction error
// summed over the draw set. estimate_start replaces the reference point by
// the one-step denoised estimate at sigma_min before noising. input_t > 0
// declares x to be a noised point at that level; the reference then becomes
// the class-hypothesis denoised estimate h(x, y, input_t), which flattens
// the posterior toward the prior as input_t grows.
double elbo_logit(const ScoreField& field, std::span<const double> x, int y, const Schedule& s,
                  const TimestepPlan& plan, const DrawSet& draws, bool estimate_start = false,
                  double input_t = 0.0);

// Convenience: draws internally from rng (no reuse across calls).
double elbo_logit(const ScoreField& field, std::span<const double> x, int y, const Schedule& s,
                  const TimestepPlan& plan, Rng& rng, bool estimate_start = false,
                  double input_t = 0.0);

std::vector<double> classifier_logits(const ScoreField& field, std::span<const double> x,
                                      const Schedule& s, const TimestepPlan& plan, Rng& rng,
                                      bool estimate_start = false, double input_t = 0.0);

// softmax(logits + ln prior)
std::vector<double> posterior_from_logits(std::span<const double> logits,
                                          std::span<const double> prior);

std::vector<double> posterior(const ScoreField& field, std::span<const double> x,
                              const Schedule& s, const TimestepPlan& plan,
                              std::span<const double> prior, Rng& rng,
                              bool estimate_start = false);

// Interval diagnostic: E_{tau ~ p(tau | [l,r])}[hbar(tau)] - (hbar(l)+hbar(r))/2,
// zero at an optimal subinterval. Quadrature: composite trapezoid with
// density weights over quad_points uniform nodes.
double err_diagnostic_from_hbar(const std::function<double(double)>& hbar, const TimestepLaw& law,
                                double l, double r, int quad_points = 33);

// hbar estimated by Monte Carlo with one eps set shared across nodes, so the
// estimate is smooth in tau and endpoint differences are meaningful.
double err_diagnostic(const ScoreField& field, std::span<const double> x, int y, const Schedule& s,
                      const TimestepPlan& plan, int quad_points, Rng& rng);

// Class-prior estimators.
// Candidate labels: per-epoch moving average of candidate-restricted argmax
// frequencies, starting from uniform.
std::vector<double> estimate_prior_pl(const Dataset& d,
                                      const std::function<std::vector<double>(std::span<const double>)>& predict,
                                      double momentum, int epochs);

// Exact/unlabeled mix: counting over the labeled part.
std::vector<double> estimate_prior_su(const Dataset& d);

// Noisy labels: solve T^T pi = pi_tilde. Throws numerical_error when T is
// ill-conditioned; infeasible solutions are clipped to the simplex and
// flagged through *clipped.
std::vector<double> solve_prior_nl(std::span<const double> noisy_label_freq,
                                   const TransitionMatrix& t, bool* clipped = nullptr);

} // namespace wsdiff
