#include "wsdiff/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "wsdiff/errors.hpp"

namespace wsdiff {

std::vector<double> reverse_step_ancestral(const ScoreField& field, std::span<const double> x_t,
                                           int y, int t, const Schedule& s, Rng& rng) {
    if (s.kind != ScheduleKind::ddpm_discrete)
        throw std::invalid_argument("reverse_step_ancestral: discrete schedule required");
    if (t < 1 || t > s.num_steps())
        throw std::out_of_range("reverse_step_ancestral: t outside {1,..,T}");
    const auto cur = alpha_sigma(s, t);
    const auto prev = alpha_sigma(s, t - 1);
    const int d = static_cast<int>(x_t.size());

    std::vector<double> score(d);
    field.score(x_t, y, static_cast<double>(t), score);

    const double s2 = cur.sigma * cur.sigma;
    const double sp2 = prev.sigma * prev.sigma;
    const double ratio2 = (cur.alpha * cur.alpha) / (prev.alpha * prev.alpha);
    const double gap = s2 - ratio2 * sp2;           // sigma_t^2 - (alpha_t/alpha_{t-1})^2 sigma_{t-1}^2
    const double var_q = gap * sp2 / s2;            // reverse-step variance
    const double scale = prev.alpha / cur.alpha;

    std::vector<double> out(d);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double sd = std::sqrt(std::max(0.0, var_q));
    for (int i = 0; i < d; ++i) {
        const double mean = scale * (x_t[i] + gap * score[i]);
        out[i] = mean + (sd > 0.0 ? sd * gauss(rng) : 0.0);
    }
    return out;
}

std::vector<double> sample_ancestral(const ScoreField& field, int y, const Schedule& s, Rng& rng) {
    const int T = s.num_steps();
    const auto top = alpha_sigma(s, T);
    const int d = field.dim();
    std::vector<double> x(d);
    std::normal_distribution<double> gauss(0.0, 1.0);
    // init from the noised marginal at T with the data term dropped
    for (auto& v : x) v = top.sigma * gauss(rng);
    for (int t = T; t >= 1; --t) x = reverse_step_ancestral(field, x, y, t, s, rng);
    return x;
}

std::vector<double> edm_sigma_grid(const Schedule& s, int steps, double rho) {
    if (s.kind != ScheduleKind::edm) throw std::invalid_argument("edm_sigma_grid: edm schedule required");
    if (steps < 2) throw std::invalid_argument("edm_sigma_grid: need at least 2 steps");
    if (!(rho > 0.0)) throw std::invalid_argument("edm_sigma_grid: rho must be positive");
    std::vector<double> grid(steps);
    const double a = std::pow(s.sigma_max, 1.0 / rho);
    const double b = std::pow(s.sigma_min, 1.0 / rho);
    for (int i = 0; i < steps; ++i) {
        const double f = static_cast<double>(i) / (steps - 1);
        grid[i] = std::pow(a + f * (b - a), rho);
    }
    return grid;
}

SampleBatch sample_edm(const ScoreField& field, int y, int n, int steps, const Schedule& s,
                       Rng& rng, double rho) {
    if (n < 1) throw std::invalid_argument("sample_edm: n must be >= 1");
    if (y < 0 || y >= field.num_classes()) throw std::invalid_argument("sample_edm: class out of range");
    const int d = field.dim();
    const auto grid = edm_sigma_grid(s, steps, rho);

    SampleBatch batch;
    batch.y = y;
    batch.dim = d;
    batch.x.resize(static_cast<size_t>(n) * d);

    // Chains are independent of evaluation order: one substream per chain.
    const std::uint64_t base = rng();
    std::vector<double> x(d), k1(d), k2(d), x_mid(d);
    for (int chain = 0; chain < n; ++chain) {
        Rng crng = substream(base, "edm-chain", static_cast<std::uint64_t>(chain));
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (auto& v : x) v = grid[0] * gauss(crng);
        for (size_t i = 0; i + 1 < grid.size(); ++i) {
            const double sig = grid[i];
            const double sig_next = grid[i + 1];
            const double h = sig_next - sig;
            field.score(x, y, sig, k1);
            // dx/dsigma = -sigma * score
            for (int j = 0; j < d; ++j) x_mid[j] = x[j] - h * sig * k1[j];
            field.score(x_mid, y, sig_next, k2);
            for (int j = 0; j < d; ++j)
                x[j] -= 0.5 * h * (sig * k1[j] + sig_next * k2[j]);
        }
        for (int j = 0; j < d; ++j) {
            if (!std::isfinite(x[j])) throw numerical_error("sample_edm: chain diverged");
            batch.x[static_cast<size_t>(chain) * d + j] = x[j];
        }
    }
    return batch;
}

std::vector<double> class_mean(const MixtureSpec& spec, int y) {
    const auto& cls = spec.classes.at(y);
    std::vector<double> m(spec.dim, 0.0);
    for (size_t k = 0; k < cls.components.size(); ++k)
        for (int j = 0; j < spec.dim; ++j) m[j] += cls.weights[k] * cls.components[k].mean[j];
    return m;
}

Matrix class_cov(const MixtureSpec& spec, int y) {
    const auto& cls = spec.classes.at(y);
    const auto mean = class_mean(spec, y);
    Matrix cov(spec.dim, spec.dim);
    for (size_t k = 0; k < cls.components.size(); ++k) {
        const double w = cls.weights[k];
        const auto& comp = cls.components[k];
        for (int i = 0; i < spec.dim; ++i)
            for (int j = 0; j < spec.dim; ++j) {
                const double centered = (comp.mean[i] - mean[i]) * (comp.mean[j] - mean[j]);
                cov.at(i, j) += w * (comp.cov.at(i, j) + centered);
            }
    }
    return cov;
}

GenMetrics evaluate_generation(std::span<const SampleBatch> batches, const MixtureSpec& spec) {
    spec.validate();
    const int c = spec.num_classes();
    const int d = spec.dim;
    GenMetrics m;
    m.mean_err.assign(c, 0.0);
    m.cov_err.assign(c, 0.0);
    m.purity.assign(c, 0.0);
    std::vector<bool> seen(c, false);

    for (const auto& batch : batches) {
        if (batch.y < 0 || batch.y >= c)
            throw std::invalid_argument("evaluate_generation: class out of range");
        if (batch.dim != d) throw std::invalid_argument("evaluate_generation: dimension mismatch");
        const int n = batch.size();
        if (n < 2) throw std::invalid_argument("evaluate_generation: need at least 2 samples per class");
        seen[batch.y] = true;

        std::vector<double> mean(d, 0.0);
        for (int i = 0; i < n; ++i) {
            const auto p = batch.point(i);
            for (int j = 0; j < d; ++j) mean[j] += p[j];
        }
        for (auto& v : mean) v /= n;

        Matrix cov(d, d);
        int agree = 0;
        for (int i = 0; i < n; ++i) {
            const auto p = batch.point(i);
            for (int a = 0; a < d; ++a)
                for (int b = 0; b < d; ++b) cov.at(a, b) += (p[a] - mean[a]) * (p[b] - mean[b]);
            if (bayes_classify(spec, p, spec.prior) == batch.y) ++agree;
        }
        for (auto& v : cov.a) v /= (n - 1);

        const auto true_mean = class_mean(spec, batch.y);
        const auto true_cov = class_cov(spec, batch.y);
        double me = 0.0, ce = 0.0;
        for (int j = 0; j < d; ++j) me += (mean[j] - true_mean[j]) * (mean[j] - true_mean[j]);
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) {
                const double diff = cov.at(a, b) - true_cov.at(a, b);
                ce += diff * diff;
            }
        m.mean_err[batch.y] = std::sqrt(me);
        m.cov_err[batch.y] = std::sqrt(ce);
        m.purity[batch.y] = static_cast<double>(agree) / n;
    }

    int covered = 0;
    for (int y = 0; y < c; ++y) {
        if (!seen[y]) continue;
        m.mean_mean_err += m.mean_err[y];
        m.mean_cov_err += m.cov_err[y];
        m.mean_purity += m.purity[y];
        ++covered;
    }
    if (covered == 0) throw std::invalid_argument("evaluate_generation: no sample batches");
    m.mean_mean_err /= covered;
    m.mean_cov_err /= covered;
    m.mean_purity /= covered;
    return m;
}

double score_grid_mse(const ScoreField& field, const MixtureSpec& spec, const Schedule& s,
                      int grid_per_dim) {
    spec.validate();
    if (grid_per_dim < 2) throw std::invalid_argument("score_grid_mse: grid too small");
    const int d = spec.dim;
    const int c = spec.num_classes();
    const TimestepLaw law = timestep_law(s);
    const double sigmas[3] = {law.quantile(0.25), law.quantile(0.5), law.quantile(0.75)};

    double total = 0.0;
    for (int y = 0; y < c; ++y) {
        double class_mse = 0.0;
        for (const double sig : sigmas) {
            const auto mix = noised_class_mixture(spec, s, y, sig);
            // bounding box: mean +/- 4 std per component, per dimension
            std::vector<double> lo(d, std::numeric_limits<double>::infinity());
            std::vector<double> hi(d, -std::numeric_limits<double>::infinity());
            for (const auto& comp : mix.components) {
                for (int j = 0; j < d; ++j) {
                    // reconstruct the covariance diagonal from the factor
                    double var = 0.0;
                    for (int k = 0; k <= j; ++k) var += comp.chol.at(j, k) * comp.chol.at(j, k);
                    const double sd = std::sqrt(var);
                    lo[j] = std::min(lo[j], comp.mean[j] - 4.0 * sd);
                    hi[j] = std::max(hi[j], comp.mean[j] + 4.0 * sd);
                }
            }
            const long npts = static_cast<long>(std::pow(grid_per_dim, d));
            std::vector<double> x(d), sf(d);
            double wsum = 0.0, msum = 0.0;
            for (long g = 0; g < npts; ++g) {
                long rem = g;
                for (int j = 0; j < d; ++j) {
                    const int gi = static_cast<int>(rem % grid_per_dim);
                    rem /= grid_per_dim;
                    x[j] = lo[j] + (hi[j] - lo[j]) * gi / (grid_per_dim - 1);
                }
                const double w = std::exp(mix.log_density(x));
                const auto oracle = mix.score(x);
                field.score(x, y, sig, sf);
                double err = 0.0;
                for (int j = 0; j < d; ++j) err += (sf[j] - oracle[j]) * (sf[j] - oracle[j]);
                wsum += w;
                msum += w * err;
            }
            class_mse += msum / wsum;
        }
        total += spec.prior[y] * class_mse / 3.0;
    }
    return total;
}

double centroid_accuracy(const std::vector<std::vector<double>>& centroids,
                         const Dataset& eval_set) {
    if (centroids.size() != static_cast<size_t>(eval_set.num_classes))
        throw std::invalid_argument("centroid_accuracy: centroid count mismatch");
    int correct = 0;
    for (int i = 0; i < eval_set.size(); ++i) {
        const auto p = eval_set.point(i);
        int best = -1;
        double best_d = std::numeric_limits<double>::infinity();
        for (size_t y = 0; y < centroids.size(); ++y) {
            double dist = 0.0;
            for (int j = 0; j < eval_set.dim; ++j)
                dist += (p[j] - centroids[y][j]) * (p[j] - centroids[y][j]);
            if (dist < best_d) {
                best_d = dist;
                best = static_cast<int>(y);
            }
        }
        if (best == eval_set.y_true[i]) ++correct;
    }
    return static_cast<double>(correct) / eval_set.size();
}

CondenseResult condense(const ScoreField& field, const Schedule& s, int ipc, int steps,
                        const Dataset& eval_set, Rng& rng) {
    if (ipc < 1) throw std::invalid_argument("condense: ipc must be >= 1");
    const int c = field.num_classes();
    const int d = field.dim();
    CondenseResult res;
    res.centroids.assign(c, std::vector<double>(d, 0.0));
    for (int y = 0; y < c; ++y) {
        const auto batch = sample_edm(field, y, ipc, steps, s, rng);
        for (int i = 0; i < ipc; ++i) {
            const auto p = batch.point(i);
            for (int j = 0; j < d; ++j) res.centroids[y][j] += p[j];
        }
        for (auto& v : res.centroids[y]) v /= ipc;
    }
    res.accuracy = centroid_accuracy(res.centroids, eval_set);
    return res;
}

std::vector<std::vector<double>> centroids_from_observed_labels(const Dataset& train, int ipc,
                                                                Rng& rng) {
    if (ipc < 1) throw std::invalid_argument("centroids_from_observed_labels: ipc must be >= 1");
    const int c = train.num_classes;
    std::vector<std::vector<int>> by_label(c);
    for (int i = 0; i < train.size(); ++i) {
        const auto& z = train.z[i];
        if (z.kind == Supervision::Kind::exact || z.kind == Supervision::Kind::noisy)
            by_label[z.label].push_back(i);
    }
    std::vector<std::vector<double>> centroids(c, std::vector<double>(train.dim, 0.0));
    for (int y = 0; y < c; ++y) {
        auto& idx = by_label[y];
        if (static_cast<int>(idx.size()) < ipc)
            throw std::invalid_argument("centroids_from_observed_labels: not enough labeled points");
        std::shuffle(idx.begin(), idx.end(), rng);
        for (int k = 0; k < ipc; ++k) {
            const auto p = train.point(idx[k]);
            for (int j = 0; j < train.dim; ++j) centroids[y][j] += p[j];
        }
        for (auto& v : centroids[y]) v /= ipc;
    }
    return centroids;
}

} // namespace wsdiff
