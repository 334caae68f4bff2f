#pragma once

#include <optional>
#include <span>
#include <vector>

#include "wsdiff/data.hpp"
#include "wsdiff/schedule.hpp"

namespace wsdiff {

// One Gaussian of a noised mixture: N(alpha_t mu, alpha_t^2 Sigma + sigma_t^2 I),
// with the Cholesky factor cached for density/score evaluation.
struct NoisedComponent {
    double log_weight;
    std::vector<double> mean;
    Matrix chol;
    double log_norm; // -(d/2) log(2 pi) - (1/2) log det
};

struct NoisedMixture {
    int dim = 0;
    std::vector<NoisedComponent> components;

    double log_density(std::span<const double> x) const;
    std::vector<double> score(std::span<const double> x) const;
    void log_density_and_score(std::span<const double> x, double* log_density,
                               std::span<double> score) const;
};

// Noised class-conditional mixture q_t(x | y).
NoisedMixture noised_class_mixture(const MixtureSpec& spec, const Schedule& s, int y, double t);

// Closed-form conditional score of the clean-label process at time t.
std::vector<double> clean_conditional_score(const MixtureSpec& spec, const Schedule& s,
                                            std::span<const double> x, int y, double t);

double log_class_density(const MixtureSpec& spec, const Schedule& s, std::span<const double> x,
                         int y, double t);

// p(y | x_t) under the generating process, for a given class prior.
std::vector<double> oracle_posterior(const MixtureSpec& spec, const Schedule& s,
                                     std::span<const double> x, double t,
                                     std::span<const double> prior);

// Bayes posterior / classifier at t -> 0 (clean inputs).
std::vector<double> bayes_posterior(const MixtureSpec& spec, std::span<const double> x,
                                    std::span<const double> prior);
int bayes_classify(const MixtureSpec& spec, std::span<const double> x,
                   std::span<const double> prior);

// Class-conditional supervision channel: p(y | z) over true labels, assuming
// z is generated from y independently of x. The transition matrix backs
// noisy labels; the inclusion matrix backs candidate sets.
struct SupervisionModel {
    std::vector<double> prior;
    std::optional<TransitionMatrix> transition;
    std::optional<Matrix> inclusion;

    std::vector<double> label_posterior(const Supervision& z) const;
};

// Score of the imprecise-conditional process q_t(x | z): the p(y|z)-weighted
// pooled mixture, evaluated directly (single pooled mixture, one pass).
std::vector<double> imprecise_conditional_score(const MixtureSpec& spec, const Schedule& s,
                                                std::span<const double> x, const Supervision& z,
                                                const SupervisionModel& model, double t);

// p(y | x_t, z): posterior over true labels given the noisy point and the
// supervision record.
std::vector<double> oracle_label_posterior(const MixtureSpec& spec, const Schedule& s,
                                           std::span<const double> x, const Supervision& z,
                                           const SupervisionModel& model, double t);

} // namespace wsdiff
