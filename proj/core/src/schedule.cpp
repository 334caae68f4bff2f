#include "wsdiff/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "wsdiff/linalg.hpp"

namespace wsdiff {

Schedule Schedule::edm(double sigma_min, double sigma_max, double p_mean, double p_std,
                       double sigma_data) {
    if (!(sigma_min > 0.0) || !(sigma_max > sigma_min))
        throw std::invalid_argument("edm schedule: need 0 < sigma_min < sigma_max");
    if (!(p_std > 0.0)) throw std::invalid_argument("edm schedule: p_std must be positive");
    if (!(sigma_data > 0.0)) throw std::invalid_argument("edm schedule: sigma_data must be positive");
    Schedule s;
    s.kind = ScheduleKind::edm;
    s.sigma_min = sigma_min;
    s.sigma_max = sigma_max;
    s.p_mean = p_mean;
    s.p_std = p_std;
    s.sigma_data = sigma_data;
    return s;
}

Schedule Schedule::ddpm(std::vector<double> betas, double sigma_data) {
    if (betas.empty()) throw std::invalid_argument("ddpm schedule: empty beta sequence");
    for (double b : betas)
        if (!(b >= 0.0 && b < 1.0)) throw std::invalid_argument("ddpm schedule: betas must lie in [0,1)");
    if (!(betas[0] > 0.0)) throw std::invalid_argument("ddpm schedule: beta_1 must be positive");
    Schedule s;
    s.kind = ScheduleKind::ddpm_discrete;
    s.betas = std::move(betas);
    s.sigma_data = sigma_data;
    return s;
}

Schedule Schedule::ddpm_linear(int steps, double beta_start, double beta_end, double sigma_data) {
    if (steps < 1) throw std::invalid_argument("ddpm schedule: steps must be >= 1");
    std::vector<double> betas(steps);
    for (int i = 0; i < steps; ++i) {
        const double f = (steps == 1) ? 0.0 : static_cast<double>(i) / (steps - 1);
        betas[i] = beta_start + f * (beta_end - beta_start);
    }
    return ddpm(std::move(betas), sigma_data);
}

Schedule Schedule::ve(double sigma_min, double sigma_max, double sigma_data) {
    if (!(sigma_min > 0.0) || !(sigma_max > sigma_min))
        throw std::invalid_argument("ve schedule: need 0 < sigma_min < sigma_max");
    Schedule s;
    s.kind = ScheduleKind::ve;
    s.sigma_min = sigma_min;
    s.sigma_max = sigma_max;
    s.sigma_data = sigma_data;
    return s;
}

Schedule Schedule::vp(double beta_min, double beta_max, double sigma_data) {
    if (!(beta_min > 0.0) || !(beta_max >= beta_min))
        throw std::invalid_argument("vp schedule: need 0 < beta_min <= beta_max");
    Schedule s;
    s.kind = ScheduleKind::vp;
    s.beta_min = beta_min;
    s.beta_max = beta_max;
    s.sigma_data = sigma_data;
    return s;
}

int Schedule::num_steps() const {
    if (kind != ScheduleKind::ddpm_discrete)
        throw std::invalid_argument("num_steps: only defined for discrete schedules");
    return static_cast<int>(betas.size());
}

AlphaSigma alpha_sigma(const Schedule& s, double t) {
    if (!std::isfinite(t)) throw std::domain_error("alpha_sigma: t not finite");
    switch (s.kind) {
    case ScheduleKind::edm:
        if (!(t > 0.0)) throw std::domain_error("alpha_sigma: edm requires t > 0");
        return {1.0, t};
    case ScheduleKind::ddpm_discrete: {
        const double ti = std::round(t);
        if (ti != t) throw std::domain_error("alpha_sigma: discrete schedule requires integer t");
        const int n = static_cast<int>(ti);
        const int T = static_cast<int>(s.betas.size());
        if (n < 0 || n > T) throw std::domain_error("alpha_sigma: t outside {0,..,T}");
        double prod = 1.0;
        for (int i = 0; i < n; ++i) prod *= 1.0 - s.betas[i];
        return {std::sqrt(prod), std::sqrt(1.0 - prod)};
    }
    case ScheduleKind::ve: {
        if (!(t >= 0.0 && t <= 1.0)) throw std::domain_error("alpha_sigma: ve requires t in [0,1]");
        const double st = s.sigma_min * std::pow(s.sigma_max / s.sigma_min, t);
        return {1.0, std::sqrt(std::max(0.0, st * st - s.sigma_min * s.sigma_min))};
    }
    case ScheduleKind::vp: {
        if (!(t >= 0.0 && t <= 1.0)) throw std::domain_error("alpha_sigma: vp requires t in [0,1]");
        const double ib = s.beta_min * t + 0.5 * (s.beta_max - s.beta_min) * t * t;
        const double e = std::exp(-ib);
        return {std::sqrt(e), std::sqrt(1.0 - e)};
    }
    }
    throw std::logic_error("alpha_sigma: unknown schedule kind");
}

double snr(const Schedule& s, double t) {
    const auto as = alpha_sigma(s, t);
    if (!(as.sigma > 0.0)) throw std::domain_error("snr: sigma_t = 0");
    return as.alpha * as.alpha / (as.sigma * as.sigma);
}

std::vector<double> convert_prediction(std::span<const double> x_t, double t,
                                       std::span<const double> value, PredictionKind from,
                                       PredictionKind to, const Schedule& s) {
    if (x_t.size() != value.size())
        throw std::invalid_argument("convert_prediction: dimension mismatch");
    for (double v : x_t)
        if (!std::isfinite(v)) throw std::invalid_argument("convert_prediction: non-finite x_t");
    for (double v : value)
        if (!std::isfinite(v)) throw std::invalid_argument("convert_prediction: non-finite value");

    const auto [alpha, sigma] = alpha_sigma(s, t);
    const size_t d = x_t.size();
    if (sigma == 0.0) {
        const bool degenerate = from == PredictionKind::score || to == PredictionKind::score ||
                                to == PredictionKind::epsilon || to == PredictionKind::v;
        if (degenerate)
            throw std::domain_error("convert_prediction: degenerate timestep (sigma_t = 0)");
    }

    // Everything routes through the implied clean sample.
    std::vector<double> x0(d);
    switch (from) {
    case PredictionKind::score:
        for (size_t i = 0; i < d; ++i) x0[i] = (x_t[i] + sigma * sigma * value[i]) / alpha;
        break;
    case PredictionKind::x0:
        for (size_t i = 0; i < d; ++i) x0[i] = value[i];
        break;
    case PredictionKind::epsilon:
        for (size_t i = 0; i < d; ++i) x0[i] = (x_t[i] - sigma * value[i]) / alpha;
        break;
    case PredictionKind::v: {
        const double n = alpha * alpha + sigma * sigma;
        for (size_t i = 0; i < d; ++i) x0[i] = (alpha * x_t[i] - sigma * value[i]) / n;
        break;
    }
    }

    std::vector<double> out(d);
    switch (to) {
    case PredictionKind::x0:
        return x0;
    case PredictionKind::score:
        for (size_t i = 0; i < d; ++i) out[i] = (alpha * x0[i] - x_t[i]) / (sigma * sigma);
        return out;
    case PredictionKind::epsilon:
        for (size_t i = 0; i < d; ++i) out[i] = (x_t[i] - alpha * x0[i]) / sigma;
        return out;
    case PredictionKind::v:
        for (size_t i = 0; i < d; ++i) {
            const double eps = (x_t[i] - alpha * x0[i]) / sigma;
            out[i] = alpha * eps - sigma * x0[i];
        }
        return out;
    }
    throw std::logic_error("convert_prediction: unknown prediction kind");
}

double ancestral_weight(const Schedule& s, int t) {
    if (s.kind != ScheduleKind::ddpm_discrete)
        throw std::invalid_argument("ancestral_weight: defined for discrete schedules only");
    if (t < 1) throw std::out_of_range("ancestral_weight: t has no predecessor");
    if (t > s.num_steps()) throw std::out_of_range("ancestral_weight: t beyond schedule");
    const auto cur = alpha_sigma(s, t);
    const auto prev = alpha_sigma(s, t - 1);
    if (!(prev.sigma > 0.0))
        throw std::domain_error("ancestral_weight: sigma_{t-1} = 0 (weight undefined at t = 1)");
    const double s2 = cur.sigma * cur.sigma;
    const double sp2 = prev.sigma * prev.sigma;
    const double a2 = cur.alpha * cur.alpha;
    const double ap2 = prev.alpha * prev.alpha;
    return 0.5 * s2 * (s2 * ap2 / (sp2 * a2) - 1.0);
}

double edm_loss_weight(double sigma, double sigma_data) {
    if (!(sigma > 0.0)) throw std::domain_error("edm_loss_weight: sigma must be positive");
    const double sd = sigma * sigma_data;
    return (sigma * sigma + sigma_data * sigma_data) / (sd * sd);
}

double sample_train_timestep(const Schedule& s, Rng& rng) {
    switch (s.kind) {
    case ScheduleKind::edm: {
        std::normal_distribution<double> n(s.p_mean, s.p_std);
        return std::exp(n(rng));
    }
    case ScheduleKind::ddpm_discrete: {
        std::uniform_int_distribution<int> u(1, s.num_steps());
        return static_cast<double>(u(rng));
    }
    default:
        throw std::invalid_argument("sample_train_timestep: schedule has no training law");
    }
}

double TimestepLaw::cdf(double t) const {
    if (lognormal) {
        if (!(t > 0.0)) return 0.0;
        return normal_cdf((std::log(t) - p_mean) / p_std);
    }
    return std::clamp(t, 0.0, 1.0);
}

double TimestepLaw::pdf(double t) const {
    if (lognormal) {
        if (!(t > 0.0)) return 0.0;
        const double z = (std::log(t) - p_mean) / p_std;
        return std::exp(-0.5 * z * z) / (t * p_std * std::sqrt(2.0 * M_PI));
    }
    return (t >= 0.0 && t <= 1.0) ? 1.0 : 0.0;
}

double TimestepLaw::quantile(double u) const {
    if (!(u > 0.0 && u < 1.0)) throw std::invalid_argument("TimestepLaw::quantile: u in (0,1)");
    if (lognormal) return std::exp(p_mean + p_std * inverse_normal_cdf(u));
    return u;
}

double TimestepLaw::median() const { return lognormal ? std::exp(p_mean) : 0.5; }

TimestepLaw timestep_law(const Schedule& s) {
    switch (s.kind) {
    case ScheduleKind::edm:
        return TimestepLaw{true, s.p_mean, s.p_std};
    case ScheduleKind::ddpm_discrete:
        return TimestepLaw{false, 0.0, 0.0};
    default:
        throw std::invalid_argument("timestep_law: schedule has no training law");
    }
}

} // namespace wsdiff
