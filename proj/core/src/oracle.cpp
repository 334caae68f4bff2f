#include "wsdiff/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace wsdiff {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

NoisedComponent make_noised(const Component& comp, double log_weight, double alpha, double sigma) {
    const int d = static_cast<int>(comp.mean.size());
    NoisedComponent out;
    out.log_weight = log_weight;
    out.mean.resize(d);
    for (int i = 0; i < d; ++i) out.mean[i] = alpha * comp.mean[i];
    Matrix cov(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            cov.at(i, j) = alpha * alpha * comp.cov.at(i, j);
            if (i == j) cov.at(i, j) += sigma * sigma;
        }
    out.chol = cholesky(cov);
    out.log_norm = -0.5 * (d * kLog2Pi + cholesky_log_det(out.chol));
    return out;
}

} // namespace

void NoisedMixture::log_density_and_score(std::span<const double> x, double* log_density,
                                          std::span<double> score_out) const {
    if (static_cast<int>(x.size()) != dim)
        throw std::invalid_argument("NoisedMixture: point dimension mismatch");
    const size_t k = components.size();
    std::vector<double> log_terms(k);
    std::vector<std::vector<double>> pulls; // -Sigma_k^{-1} (x - m_k)
    if (!score_out.empty()) pulls.resize(k);

    std::vector<double> diff(dim);
    for (size_t i = 0; i < k; ++i) {
        const auto& c = components[i];
        for (int j = 0; j < dim; ++j) diff[j] = x[j] - c.mean[j];
        auto solved = cholesky_solve(c.chol, diff);
        double quad = 0.0;
        for (int j = 0; j < dim; ++j) quad += diff[j] * solved[j];
        log_terms[i] = c.log_weight + c.log_norm - 0.5 * quad;
        if (!score_out.empty()) {
            for (double& v : solved) v = -v;
            pulls[i] = std::move(solved);
        }
    }
    const double lse = logsumexp(log_terms);
    if (log_density) *log_density = lse;
    if (!score_out.empty()) {
        for (int j = 0; j < dim; ++j) score_out[j] = 0.0;
        for (size_t i = 0; i < k; ++i) {
            const double w = std::exp(log_terms[i] - lse);
            for (int j = 0; j < dim; ++j) score_out[j] += w * pulls[i][j];
        }
    }
}

double NoisedMixture::log_density(std::span<const double> x) const {
    double ld;
    log_density_and_score(x, &ld, {});
    return ld;
}

std::vector<double> NoisedMixture::score(std::span<const double> x) const {
    std::vector<double> s(dim);
    log_density_and_score(x, nullptr, s);
    return s;
}

NoisedMixture noised_class_mixture(const MixtureSpec& spec, const Schedule& s, int y, double t) {
    if (y < 0 || y >= spec.num_classes())
        throw std::invalid_argument("noised_class_mixture: class out of range");
    const auto [alpha, sigma] = alpha_sigma(s, t);
    NoisedMixture out;
    out.dim = spec.dim;
    const auto& cls = spec.classes[y];
    for (size_t k = 0; k < cls.components.size(); ++k) {
        if (cls.weights[k] <= 0.0) continue;
        out.components.push_back(
            make_noised(cls.components[k], std::log(cls.weights[k]), alpha, sigma));
    }
    return out;
}

std::vector<double> clean_conditional_score(const MixtureSpec& spec, const Schedule& s,
                                            std::span<const double> x, int y, double t) {
    return noised_class_mixture(spec, s, y, t).score(x);
}

double log_class_density(const MixtureSpec& spec, const Schedule& s, std::span<const double> x,
                         int y, double t) {
    return noised_class_mixture(spec, s, y, t).log_density(x);
}

std::vector<double> oracle_posterior(const MixtureSpec& spec, const Schedule& s,
                                     std::span<const double> x, double t,
                                     std::span<const double> prior) {
    const int c = spec.num_classes();
    if (static_cast<int>(prior.size()) != c)
        throw std::invalid_argument("oracle_posterior: prior size mismatch");
    std::vector<double> log_post(c, -std::numeric_limits<double>::infinity());
    for (int y = 0; y < c; ++y) {
        if (prior[y] <= 0.0) continue;
        log_post[y] = std::log(prior[y]) + log_class_density(spec, s, x, y, t);
    }
    const double lse = logsumexp(log_post);
    std::vector<double> post(c);
    for (int y = 0; y < c; ++y) post[y] = std::exp(log_post[y] - lse);
    return post;
}

namespace {

// Clean-data posterior shares the noised machinery at alpha=1, sigma=0; the
// component covariances are already SPD so no ridge is needed.
NoisedMixture clean_class_mixture(const MixtureSpec& spec, int y) {
    NoisedMixture out;
    out.dim = spec.dim;
    const auto& cls = spec.classes[y];
    for (size_t k = 0; k < cls.components.size(); ++k) {
        if (cls.weights[k] <= 0.0) continue;
        out.components.push_back(make_noised(cls.components[k], std::log(cls.weights[k]), 1.0, 0.0));
    }
    return out;
}

} // namespace

std::vector<double> bayes_posterior(const MixtureSpec& spec, std::span<const double> x,
                                    std::span<const double> prior) {
    const int c = spec.num_classes();
    if (static_cast<int>(prior.size()) != c)
        throw std::invalid_argument("bayes_posterior: prior size mismatch");
    std::vector<double> log_post(c, -std::numeric_limits<double>::infinity());
    for (int y = 0; y < c; ++y) {
        if (prior[y] <= 0.0) continue;
        log_post[y] = std::log(prior[y]) + clean_class_mixture(spec, y).log_density(x);
    }
    const double lse = logsumexp(log_post);
    std::vector<double> post(c);
    for (int y = 0; y < c; ++y) post[y] = std::exp(log_post[y] - lse);
    return post;
}

int bayes_classify(const MixtureSpec& spec, std::span<const double> x,
                   std::span<const double> prior) {
    const auto post = bayes_posterior(spec, x, prior);
    return static_cast<int>(std::max_element(post.begin(), post.end()) - post.begin());
}

std::vector<double> SupervisionModel::label_posterior(const Supervision& z) const {
    const int c = static_cast<int>(prior.size());
    if (c == 0) throw std::invalid_argument("SupervisionModel: empty prior");
    std::vector<double> post(c, 0.0);
    switch (z.kind) {
    case Supervision::Kind::exact:
        if (z.label < 0 || z.label >= c)
            throw std::invalid_argument("SupervisionModel: exact label out of range");
        post[z.label] = 1.0;
        return post;
    case Supervision::Kind::unlabeled:
        return prior;
    case Supervision::Kind::noisy: {
        if (z.label < 0 || z.label >= c)
            throw std::invalid_argument("SupervisionModel: noisy label out of range");
        if (!transition)
            throw std::invalid_argument("SupervisionModel: noisy supervision needs a transition matrix");
        double sum = 0.0;
        for (int y = 0; y < c; ++y) {
            post[y] = prior[y] * transition->at(y, z.label);
            sum += post[y];
        }
        if (!(sum > 0.0))
            throw std::runtime_error("SupervisionModel: observed label has zero probability");
        for (double& v : post) v /= sum;
        return post;
    }
    case Supervision::Kind::candidate: {
        if (z.cset == 0) throw std::invalid_argument("SupervisionModel: empty candidate set");
        double sum = 0.0;
        for (int y = 0; y < c; ++y) {
            if (!z.in_set(y)) continue;
            double like = 1.0;
            if (inclusion) {
                for (int j = 0; j < c; ++j) {
                    if (j == y) continue;
                    like *= z.in_set(j) ? inclusion->at(y, j) : 1.0 - inclusion->at(y, j);
                }
            }
            post[y] = prior[y] * like;
            sum += post[y];
        }
        if (!(sum > 0.0))
            throw std::runtime_error("SupervisionModel: candidate set has zero probability");
        for (double& v : post) v /= sum;
        return post;
    }
    }
    throw std::logic_error("SupervisionModel: unknown supervision kind");
}

std::vector<double> imprecise_conditional_score(const MixtureSpec& spec, const Schedule& s,
                                                std::span<const double> x, const Supervision& z,
                                                const SupervisionModel& model, double t) {
    const auto pyz = model.label_posterior(z);
    double mass = 0.0;
    for (double p : pyz) {
        if (p < 0.0) throw std::invalid_argument("imprecise_conditional_score: negative p(y|z)");
        mass += p;
    }
    if (std::abs(mass - 1.0) > 1e-9)
        throw std::invalid_argument("imprecise_conditional_score: p(y|z) does not sum to 1");
    const auto [alpha, sigma] = alpha_sigma(s, t);
    // Pool all class components into one mixture weighted by p(y|z).
    NoisedMixture pooled;
    pooled.dim = spec.dim;
    for (int y = 0; y < spec.num_classes(); ++y) {
        if (pyz[y] <= 0.0) continue;
        const auto& cls = spec.classes[y];
        for (size_t k = 0; k < cls.components.size(); ++k) {
            if (cls.weights[k] <= 0.0) continue;
            pooled.components.push_back(make_noised(
                cls.components[k], std::log(pyz[y]) + std::log(cls.weights[k]), alpha, sigma));
        }
    }
    if (pooled.components.empty())
        throw std::runtime_error("imprecise_conditional_score: no support under p(y|z)");
    return pooled.score(x);
}

std::vector<double> oracle_label_posterior(const MixtureSpec& spec, const Schedule& s,
                                           std::span<const double> x, const Supervision& z,
                                           const SupervisionModel& model, double t) {
    const auto pyz = model.label_posterior(z);
    const int c = spec.num_classes();
    std::vector<double> log_post(c, -std::numeric_limits<double>::infinity());
    for (int y = 0; y < c; ++y) {
        if (pyz[y] <= 0.0) continue;
        log_post[y] = std::log(pyz[y]) + log_class_density(spec, s, x, y, t);
    }
    const double lse = logsumexp(log_post);
    std::vector<double> post(c);
    for (int y = 0; y < c; ++y) post[y] = std::exp(log_post[y] - lse);
    return post;
}

} // namespace wsdiff
