#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "wsdiff/rng.hpp"
#include "wsdiff/schedule.hpp"

using namespace wsdiff;

TEST_CASE("edm alpha/sigma is the identity pair (1, t)") {
    const auto s = Schedule::edm();
    for (double t : {0.002, 0.3, 1.0, 80.0, 500.0}) {
        const auto as = alpha_sigma(s, t);
        CHECK(as.alpha == 1.0);
        CHECK(as.sigma == t);
    }
    CHECK_THROWS_AS(alpha_sigma(s, 0.0), std::domain_error);
    CHECK_THROWS_AS(alpha_sigma(s, -1.0), std::domain_error);
}

TEST_CASE("ddpm alpha/sigma matches the cumulative-product closed form") {
    const auto s = Schedule::ddpm({0.1, 0.2});

    const auto a0 = alpha_sigma(s, 0);
    CHECK(a0.alpha == 1.0);
    CHECK(a0.sigma == 0.0);

    const auto a1 = alpha_sigma(s, 1);
    CHECK(a1.alpha == doctest::Approx(std::sqrt(0.9)).epsilon(1e-15));
    CHECK(a1.sigma == doctest::Approx(std::sqrt(0.1)).epsilon(1e-15));

    const auto a2 = alpha_sigma(s, 2);
    CHECK(std::abs(a2.alpha - 0.8485281374238571) < 1e-15);
    CHECK(std::abs(a2.sigma - 0.5291502622129182) < 1e-15);

    CHECK_THROWS_AS(alpha_sigma(s, 0.5), std::domain_error);
    CHECK_THROWS_AS(alpha_sigma(s, 3), std::domain_error);
    CHECK_THROWS_AS(alpha_sigma(s, -1), std::domain_error);
    CHECK(s.num_steps() == 2);
}

TEST_CASE("ddpm satisfies alpha^2 + sigma^2 = 1 on the full linear beta grid") {
    const auto s = Schedule::ddpm_linear(1000);
    for (int t = 0; t <= s.num_steps(); ++t) {
        const auto as = alpha_sigma(s, t);
        CHECK(std::abs(as.alpha * as.alpha + as.sigma * as.sigma - 1.0) < 1e-12);
    }
}

TEST_CASE("ve variance is the exploded geometric ladder minus its floor") {
    const auto s = Schedule::ve(0.02, 100.0);
    const auto a0 = alpha_sigma(s, 0.0);
    CHECK(a0.alpha == 1.0);
    CHECK(a0.sigma == 0.0);

    const auto a1 = alpha_sigma(s, 1.0);
    CHECK(a1.alpha == 1.0);
    CHECK(a1.sigma == doctest::Approx(std::sqrt(100.0 * 100.0 - 0.02 * 0.02)).epsilon(1e-15));

    const auto ah = alpha_sigma(s, 0.5);
    const double st = 0.02 * std::pow(100.0 / 0.02, 0.5);
    CHECK(ah.sigma == doctest::Approx(std::sqrt(st * st - 0.02 * 0.02)).epsilon(1e-13));

    CHECK_THROWS_AS(alpha_sigma(s, 1.5), std::domain_error);
}

TEST_CASE("vp alpha/sigma matches the integrated-beta closed form") {
    const auto s = Schedule::vp();
    const auto a0 = alpha_sigma(s, 0.0);
    CHECK(a0.alpha == 1.0);
    CHECK(a0.sigma == 0.0);

    for (double t : {0.1, 0.5, 0.7, 1.0}) {
        const double ib = 0.1 * t + 0.5 * (20.0 - 0.1) * t * t;
        const auto as = alpha_sigma(s, t);
        CHECK(as.alpha == doctest::Approx(std::exp(-0.5 * ib)).epsilon(1e-14));
        CHECK(as.sigma == doctest::Approx(std::sqrt(1.0 - std::exp(-ib))).epsilon(1e-14));
        CHECK(std::abs(as.alpha * as.alpha + as.sigma * as.sigma - 1.0) < 1e-12);
    }
}

TEST_CASE("snr decreases strictly in t for every schedule kind") {
    const auto check_decreasing = [](const Schedule& s, const std::vector<double>& ts) {
        double prev = std::numeric_limits<double>::infinity();
        for (double t : ts) {
            const double v = snr(s, t);
            CHECK(v < prev);
            prev = v;
        }
    };
    check_decreasing(Schedule::edm(), {0.01, 0.1, 0.3, 1.0, 3.0, 10.0, 80.0});
    check_decreasing(Schedule::vp(), {0.05, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0});
    check_decreasing(Schedule::ve(0.02, 100.0), {0.1, 0.3, 0.5, 0.7, 0.9, 1.0});
    const auto dd = Schedule::ddpm_linear(50);
    std::vector<double> ts;
    for (int t = 1; t <= 50; ++t) ts.push_back(t);
    check_decreasing(dd, ts);
}

TEST_CASE("all 12 ordered prediction conversions roundtrip exactly") {
    const PredictionKind kinds[] = {PredictionKind::score, PredictionKind::x0,
                                    PredictionKind::epsilon, PredictionKind::v};
    auto rng = substream(123, "conv-roundtrip");
    std::normal_distribution<double> n(0.0, 1.0);

    const auto run = [&](const Schedule& s, double t) {
        for (auto from : kinds) {
            for (auto to : kinds) {
                if (from == to) continue;
                std::vector<double> x_t(3), value(3);
                for (auto& v : x_t) v = n(rng);
                for (auto& v : value) v = n(rng);
                const auto there = convert_prediction(x_t, t, value, from, to, s);
                const auto back = convert_prediction(x_t, t, there, to, from, s);
                for (size_t i = 0; i < value.size(); ++i)
                    CHECK(std::abs(back[i] - value[i]) < 1e-12);
            }
        }
    };
    run(Schedule::edm(), 0.7);
    run(Schedule::vp(), 0.4);
    run(Schedule::ddpm({0.1, 0.2}), 2.0);
}

TEST_CASE("conversions agree with the defining identities at a known (x0, eps)") {
    const auto s = Schedule::vp();
    const double t = 0.6;
    const auto [alpha, sigma] = alpha_sigma(s, t);

    const std::vector<double> x0 = {0.8, -0.3};
    const std::vector<double> eps = {1.1, 0.2};
    std::vector<double> x_t(2);
    for (int i = 0; i < 2; ++i) x_t[i] = alpha * x0[i] + sigma * eps[i];

    const auto got_x0 = convert_prediction(x_t, t, eps, PredictionKind::epsilon, PredictionKind::x0, s);
    const auto got_score =
        convert_prediction(x_t, t, eps, PredictionKind::epsilon, PredictionKind::score, s);
    const auto got_v = convert_prediction(x_t, t, eps, PredictionKind::epsilon, PredictionKind::v, s);
    for (int i = 0; i < 2; ++i) {
        CHECK(got_x0[i] == doctest::Approx(x0[i]).epsilon(1e-12));
        CHECK(got_score[i] == doctest::Approx(-eps[i] / sigma).epsilon(1e-12));
        CHECK(got_v[i] == doctest::Approx(alpha * eps[i] - sigma * x0[i]).epsilon(1e-12));
    }
}

TEST_CASE("sigma = 0 conversions throw exactly when degenerate") {
    const auto s = Schedule::ddpm({0.1, 0.2});
    const std::vector<double> x_t = {0.5, -0.5};
    const std::vector<double> value = {0.1, 0.2};
    // t = 0: sigma = 0, alpha = 1.
    CHECK_THROWS_AS(
        convert_prediction(x_t, 0, value, PredictionKind::score, PredictionKind::x0, s),
        std::domain_error);
    for (auto to : {PredictionKind::score, PredictionKind::epsilon, PredictionKind::v})
        CHECK_THROWS_AS(convert_prediction(x_t, 0, value, PredictionKind::x0, to, s),
                        std::domain_error);
    // x0 -> x0 and epsilon -> x0 stay well defined.
    const auto same = convert_prediction(x_t, 0, value, PredictionKind::x0, PredictionKind::x0, s);
    CHECK(same == value);
    const auto from_eps =
        convert_prediction(x_t, 0, value, PredictionKind::epsilon, PredictionKind::x0, s);
    CHECK(from_eps == x_t);
}

TEST_CASE("ancestral weight matches the frozen two-step instance and the SNR form") {
    const auto s = Schedule::ddpm({0.1, 0.2});
    CHECK(std::abs(ancestral_weight(s, 2) - 0.35) < 1e-15);
    CHECK_THROWS_AS(ancestral_weight(s, 1), std::domain_error);
    CHECK_THROWS_AS(ancestral_weight(s, 0), std::out_of_range);
    CHECK_THROWS_AS(ancestral_weight(s, 3), std::out_of_range);

    const auto lin = Schedule::ddpm_linear(20);
    for (int t = 2; t <= 20; ++t) {
        const auto cur = alpha_sigma(lin, t);
        const double want =
            0.5 * cur.sigma * cur.sigma * (snr(lin, t - 1) / snr(lin, t) - 1.0);
        CHECK(ancestral_weight(lin, t) == doctest::Approx(want).epsilon(1e-12));
        CHECK(ancestral_weight(lin, t) > 0.0);
    }
}

TEST_CASE("continuous loss weight matches its closed form") {
    CHECK(edm_loss_weight(0.5, 0.5) == doctest::Approx(8.0).epsilon(1e-15));
    for (double sigma : {0.01, 0.3, 2.0, 50.0}) {
        const double sd = 0.5;
        const double want = (sigma * sigma + sd * sd) / (sigma * sd * sigma * sd);
        CHECK(edm_loss_weight(sigma, sd) == doctest::Approx(want).epsilon(1e-14));
    }
    CHECK_THROWS_AS(edm_loss_weight(0.0, 0.5), std::domain_error);
}

TEST_CASE("timestep law: median, quantile/cdf inversion, normalization") {
    const auto law = timestep_law(Schedule::edm());
    CHECK(std::abs(law.median() - 0.30119421191220214) < 1e-15);
    CHECK(std::abs(law.quantile(0.5) - law.median()) < 1e-12);
    CHECK(std::abs(law.cdf(law.median()) - 0.5) < 1e-12);

    for (double u : {0.001, 0.05, 0.25, 0.5, 0.75, 0.95, 0.999})
        CHECK(std::abs(law.cdf(law.quantile(u)) - u) < 1e-9);

    // Composite trapezoid over a log grid covers essentially all the mass.
    double mass = 0.0;
    const int n = 20000;
    const double lo = std::log(1e-6), hi = std::log(1e4);
    double prev_t = std::exp(lo), prev_f = law.pdf(prev_t);
    for (int i = 1; i <= n; ++i) {
        const double t = std::exp(lo + (hi - lo) * i / n);
        const double f = law.pdf(t);
        mass += 0.5 * (prev_f + f) * (t - prev_t);
        prev_t = t;
        prev_f = f;
    }
    CHECK(std::abs(mass - 1.0) < 1e-6);

    const auto uniform = timestep_law(Schedule::ddpm({0.1, 0.2}));
    CHECK(uniform.median() == 0.5);
    CHECK(uniform.cdf(0.3) == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(uniform.pdf(0.3) == 1.0);
    CHECK(uniform.pdf(1.5) == 0.0);
}

TEST_CASE("training timestep draws follow the declared law and are reproducible") {
    const auto s = Schedule::edm();
    auto rng1 = substream(9, "draws");
    auto rng2 = substream(9, "draws");
    for (int i = 0; i < 100; ++i)
        CHECK(sample_train_timestep(s, rng1) == sample_train_timestep(s, rng2));

    auto rng = substream(10, "draws");
    double sum_log = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) sum_log += std::log(sample_train_timestep(s, rng));
    CHECK(std::abs(sum_log / n - (-1.2)) < 0.05);

    const auto dd = Schedule::ddpm_linear(10);
    auto drng = substream(11, "draws");
    for (int i = 0; i < 200; ++i) {
        const double t = sample_train_timestep(dd, drng);
        CHECK(t >= 1.0);
        CHECK(t <= 10.0);
        CHECK(t == std::round(t));
    }
}
