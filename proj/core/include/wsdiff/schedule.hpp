#pragma once

#include <span>
#include <vector>

#include "wsdiff/rng.hpp"

namespace wsdiff {

// Forward-process law: q(x_t | x_0) = N(alpha_t x_0, sigma_t^2 I).
// Four parameterizations, all reduced to the same (alpha, sigma) pair so
// downstream code never branches on the kind.
enum class ScheduleKind { edm, ddpm_discrete, ve, vp };

struct Schedule {
    ScheduleKind kind = ScheduleKind::edm;
    double sigma_data = 0.5;

    // edm / ve
    double sigma_min = 0.002;
    double sigma_max = 80.0;
    // edm training-time noise law: ln sigma ~ N(p_mean, p_std^2)
    double p_mean = -1.2;
    double p_std = 1.2;

    // ddpm_discrete: betas[i] is beta_{i+1}; t ranges over {0,..,T}
    std::vector<double> betas;

    // vp: linear beta(t) on [0,1]
    double beta_min = 0.1;
    double beta_max = 20.0;

    static Schedule edm(double sigma_min = 0.002, double sigma_max = 80.0, double p_mean = -1.2,
                        double p_std = 1.2, double sigma_data = 0.5);
    static Schedule ddpm(std::vector<double> betas, double sigma_data = 0.5);
    static Schedule ddpm_linear(int steps, double beta_start = 1e-4, double beta_end = 0.02,
                                double sigma_data = 0.5);
    static Schedule ve(double sigma_min, double sigma_max, double sigma_data = 0.5);
    static Schedule vp(double beta_min = 0.1, double beta_max = 20.0, double sigma_data = 0.5);

    int num_steps() const; // T for ddpm_discrete; throws otherwise
};

struct AlphaSigma {
    double alpha;
    double sigma;
};

// Validates t against the schedule support: edm t in (0, inf); ddpm_discrete
// integer t in [0, T]; ve/vp t in [0, 1]. Throws std::domain_error outside.
AlphaSigma alpha_sigma(const Schedule& s, double t);

// alpha_t^2 / sigma_t^2. Strictly decreasing in t; requires sigma_t > 0.
double snr(const Schedule& s, double t);

enum class PredictionKind { score, x0, epsilon, v };

// Converts a model prediction between the four equivalent parameterizations
// at a fixed (x_t, t). Throws std::domain_error when sigma_t = 0 makes the
// requested conversion degenerate.
std::vector<double> convert_prediction(std::span<const double> x_t, double t,
                                       std::span<const double> value, PredictionKind from,
                                       PredictionKind to, const Schedule& s);

// Per-step weight of the ancestral (reverse KL) objective for discrete
// schedules. Requires t >= 2 so that sigma_{t-1} > 0.
double ancestral_weight(const Schedule& s, int t);

// lambda(sigma) of the continuous denoising objective.
double edm_loss_weight(double sigma, double sigma_data);

// Training-time timestep draw: edm -> lognormal(p_mean, p_std^2);
// ddpm_discrete -> uniform over {1,..,T}.
double sample_train_timestep(const Schedule& s, Rng& rng);

// Normalized timestep law used by the classifier planner. For edm this is
// the lognormal above; for ddpm_discrete the uniform law on (0,1).
struct TimestepLaw {
    bool lognormal = true;
    double p_mean = -1.2;
    double p_std = 1.2;

    double cdf(double t) const;
    double pdf(double t) const;
    double quantile(double u) const; // u in (0,1)
    double median() const;
};

TimestepLaw timestep_law(const Schedule& s);

} // namespace wsdiff
