#pragma once

#include <span>
#include <vector>

#include "wsdiff/data.hpp"
#include "wsdiff/oracle.hpp"
#include "wsdiff/score_field.hpp"

namespace wsdiff {

// One ancestral reverse step x_t -> x_{t-1} for a discrete schedule. The
// field supplies the score of the noised marginal at (x_t, t). At t = 1 the
// reverse variance vanishes and the step is deterministic.
std::vector<double> reverse_step_ancestral(const ScoreField& field, std::span<const double> x_t,
                                           int y, int t, const Schedule& s, Rng& rng);

// Runs the full ancestral chain from pure noise at t = T.
std::vector<double> sample_ancestral(const ScoreField& field, int y, const Schedule& s, Rng& rng);

// Geometric rho-warped sigma ladder from sigma_max down to sigma_min.
std::vector<double> edm_sigma_grid(const Schedule& s, int steps, double rho = 7.0);

struct SampleBatch {
    int y = 0;
    int dim = 0;
    std::vector<double> x; // n x dim

    int size() const { return dim ? static_cast<int>(x.size()) / dim : 0; }
    std::span<const double> point(int i) const {
        return {x.data() + static_cast<size_t>(i) * dim, static_cast<size_t>(dim)};
    }
};

// Deterministic probability-flow sampler (Heun) in sigma-time. Each chain
// draws its own substream derived from rng by counter, so results do not
// depend on evaluation order.
SampleBatch sample_edm(const ScoreField& field, int y, int n, int steps, const Schedule& s,
                       Rng& rng, double rho = 7.0);

struct GenMetrics {
    std::vector<double> mean_err; // per class, L2 distance of sample mean
    std::vector<double> cov_err;  // per class, Frobenius distance of sample covariance
    std::vector<double> purity;   // per class, Bayes-classifier agreement
    double mean_mean_err = 0.0;
    double mean_cov_err = 0.0;
    double mean_purity = 0.0;
};

std::vector<double> class_mean(const MixtureSpec& spec, int y);
Matrix class_cov(const MixtureSpec& spec, int y);

GenMetrics evaluate_generation(std::span<const SampleBatch> batches, const MixtureSpec& spec);

// Density-weighted grid MSE between a score field and the oracle
// clean-conditional score, averaged over the quartiles of the training
// noise law and over classes (prior-weighted).
double score_grid_mse(const ScoreField& field, const MixtureSpec& spec, const Schedule& s,
                      int grid_per_dim = 21);

// Distills the generator into ipc points per class and classifies by
// nearest centroid.
struct CondenseResult {
    std::vector<std::vector<double>> centroids; // per class
    double accuracy = 0.0;
};

CondenseResult condense(const ScoreField& field, const Schedule& s, int ipc, int steps,
                        const Dataset& eval_set, Rng& rng);

double centroid_accuracy(const std::vector<std::vector<double>>& centroids,
                         const Dataset& eval_set);

// Baseline for condensation: centroids of ipc real points per class chosen
// by their observed (possibly corrupted) label.
std::vector<std::vector<double>> centroids_from_observed_labels(const Dataset& train, int ipc,
                                                                Rng& rng);

} // namespace wsdiff
