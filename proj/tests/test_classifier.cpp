#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "wsdiff/classifier.hpp"
#include "wsdiff/config.hpp"
#include "wsdiff/errors.hpp"
#include "wsdiff/oracle.hpp"
#include "wsdiff/rng.hpp"
#include "wsdiff/sampler.hpp"

using namespace wsdiff;

namespace {

// Score of a point mass at ref: the denoised estimate is always ref itself.
struct PointMassField final : ScoreField {
    std::vector<double> ref;
    int classes = 2;

    int dim() const override { return static_cast<int>(ref.size()); }
    int num_classes() const override { return classes; }
    void score(std::span<const double> x, int, double t, std::span<double> out) const override {
        for (size_t i = 0; i < ref.size(); ++i) out[i] = (ref[i] - x[i]) / (t * t);
    }
};

} // namespace

TEST_CASE("uniform-law planner splits the leftover mass evenly") {
    const auto s = Schedule::ddpm_linear(1000);
    const auto plan = plan_subinterval(s, 0.5);
    CHECK(plan.l == 0.25);
    CHECK(plan.r == 0.75);
    CHECK(plan.residual == 0.0);
    CHECK_THROWS_AS(plan_subinterval(s, 1.5), std::invalid_argument);
}

TEST_CASE("zero-width planner lands on the median") {
    const auto s = Schedule::edm();
    const auto plan = plan_subinterval(s, 0.0);
    CHECK(std::abs(plan.l - std::exp(-1.2)) < 1e-10);
    CHECK(plan.r == plan.l);
}

TEST_CASE("lognormal planner root agrees with an independent bisection") {
    const auto s = Schedule::edm();
    const double delta = 6.4;
    const auto plan = plan_subinterval(s, delta);
    CHECK(plan.residual < 1e-10);
    CHECK(plan.r == plan.l + delta);
    const auto law = timestep_law(s);
    CHECK(plan.l <= law.median());
    CHECK(plan.r >= law.median());

    // bisection on the same root function
    auto g = [&](double l) { return law.cdf(l) + law.cdf(l + delta) - 1.0; };
    double lo = 1e-12, hi = law.median();
    REQUIRE(g(lo) < 0.0);
    REQUIRE(g(hi) >= 0.0);
    while (hi - lo > 1e-15) {
        const double mid = 0.5 * (lo + hi);
        (g(mid) < 0.0 ? lo : hi) = mid;
    }
    CHECK(std::abs(plan.l - 0.5 * (lo + hi)) < 1e-9);
}

TEST_CASE("planner intervals always bracket the median") {
    const auto s = Schedule::edm();
    const auto law = timestep_law(s);
    for (double delta : {0.1, 0.5, 1.0, 2.0, 6.4, 12.0}) {
        const auto plan = plan_subinterval(s, delta);
        CHECK(plan.residual < 1e-10);
        CHECK(plan.l <= law.median());
        CHECK(plan.r >= law.median());
    }
    CHECK_THROWS_AS(plan_subinterval(s, -1.0), std::invalid_argument);
    CHECK_THROWS_AS(plan_subinterval(s, 1.0, 0), std::invalid_argument);
}

TEST_CASE("per-timestep weight is the loss weight times the law density") {
    const auto s = Schedule::edm();
    const double tau = std::exp(-1.2);
    // at the median the lognormal exponent vanishes
    const double lam = (tau * tau + 0.25) / (tau * tau * 0.25);
    const double pdf = 1.0 / (1.2 * tau * std::sqrt(2.0 * M_PI));
    CHECK(elbo_weight(s, tau) == doctest::Approx(lam * pdf).epsilon(1e-12));

    // off the median the exponent term shows up
    const double tau2 = 1.7;
    const double lam2 = (tau2 * tau2 + 0.25) / (tau2 * tau2 * 0.25);
    const double z = (std::log(tau2) + 1.2) / 1.2;
    const double pdf2 = std::exp(-0.5 * z * z) / (1.2 * tau2 * std::sqrt(2.0 * M_PI));
    CHECK(elbo_weight(s, tau2) == doctest::Approx(lam2 * pdf2).epsilon(1e-12));
}

TEST_CASE("a perfect denoiser scores a zero logit") {
    const auto s = Schedule::edm();
    PointMassField field;
    field.ref = {0.4, -1.1};
    const auto plan = plan_subinterval(s, 6.4, 16, true);
    auto rng = substream(3, "classify");
    const auto ds = make_plan_draws(plan, s, 2, rng);
    const double logit = elbo_logit(field, field.ref, 0, s, plan, ds);
    CHECK(std::abs(logit) < 1e-10);
}

TEST_CASE("elbo_logit rejects an empty draw set") {
    const auto s = Schedule::edm();
    PointMassField field;
    field.ref = {0.0, 0.0};
    const auto plan = plan_subinterval(s, 6.4, 4, true);
    DrawSet empty;
    empty.dim = 2;
    CHECK_THROWS_AS(elbo_logit(field, field.ref, 0, s, plan, empty), std::invalid_argument);
}

TEST_CASE("oracle-score logits rank classes like the oracle posterior") {
    const auto cfg = default_config();
    const auto& spec = cfg.mixture;
    const auto s = Schedule::edm();
    const OracleScoreField field(spec, s);
    const auto plan = plan_subinterval(s, 6.4, 16, true);
    const std::vector<double> prior = {0.5, 0.5};

    auto drng = substream(21, "classify");
    int agree = 0;
    const int n = 400;
    std::normal_distribution<double> g(0.0, 1.0);
    for (int i = 0; i < n; ++i) {
        const int y = i % 2;
        const auto mu = class_mean(spec, y);
        std::vector<double> x(2);
        for (int k = 0; k < 2; ++k) x[k] = mu[k] + 0.5 * g(drng);
        const auto logits = classifier_logits(field, x, s, plan, drng);
        const auto oracle = bayes_posterior(spec, x, prior);
        const int a = logits[0] > logits[1] ? 0 : 1;
        const int b = oracle[0] > oracle[1] ? 0 : 1;
        agree += (a == b);
    }
    CHECK(agree >= static_cast<int>(0.95 * n));
}

TEST_CASE("posterior reduces to the prior structure in degenerate cases") {
    const std::vector<double> logits = {-3.7, -3.7, -3.7};
    const std::vector<double> uniform = {1.0 / 3, 1.0 / 3, 1.0 / 3};
    const auto p = posterior_from_logits(logits, uniform);
    for (double v : p) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-12));

    const std::vector<double> onehot = {0.0, 1.0, 0.0};
    const std::vector<double> wild = {5.0, -2.0, 11.0};
    const auto q = posterior_from_logits(wild, onehot);
    CHECK(q[0] == 0.0);
    CHECK(q[1] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(q[2] == 0.0);
}

TEST_CASE("posteriors are simplexes and confident rankings survive reseeding") {
    const auto cfg = default_config();
    const auto& spec = cfg.mixture;
    const auto s = Schedule::edm();
    const OracleScoreField field(spec, s);
    const auto plan = plan_subinterval(s, 6.4, 16, true);
    const std::vector<double> prior = {0.5, 0.5};

    auto drng = substream(33, "classify");
    std::normal_distribution<double> g(0.0, 1.0);
    int confident = 0, stable = 0;
    for (int i = 0; i < 100; ++i) {
        const int y = i % 2;
        const auto mu = class_mean(spec, y);
        std::vector<double> x(2);
        for (int k = 0; k < 2; ++k) x[k] = mu[k] + 0.5 * g(drng);

        auto r0 = substream(100, "classify", i);
        const auto base = posterior(field, x, s, plan, prior, r0);
        CHECK(std::abs(base[0] + base[1] - 1.0) < 1e-12);
        CHECK(base[0] >= 0.0);
        CHECK(base[1] >= 0.0);
        if (std::max(base[0], base[1]) <= 0.7) continue;
        ++confident;
        const int want = base[0] > base[1] ? 0 : 1;
        int match = 0;
        for (int rep = 1; rep <= 5; ++rep) {
            auto rr = substream(100 + rep, "classify", i);
            const auto p = posterior(field, x, s, plan, prior, rr);
            match += ((p[0] > p[1] ? 0 : 1) == want);
        }
        if (match >= 5) ++stable;
    }
    REQUIRE(confident > 50);
    CHECK(stable >= static_cast<int>(0.9 * confident));
}

TEST_CASE("interval diagnostic vanishes for constant and linear reconstruction error") {
    TimestepLaw uniform{false, 0.0, 0.0};
    const auto c = [](double) { return 3.7; };
    CHECK(err_diagnostic_from_hbar(c, uniform, 0.2, 0.8) == 0.0);

    const auto lin = [](double t) { return 2.0 * t - 0.3; };
    CHECK(std::abs(err_diagnostic_from_hbar(lin, uniform, 0.1, 0.9)) < 1e-6);

    TimestepLaw logn{true, -1.2, 1.2};
    const auto c2 = [](double) { return -0.9; };
    CHECK(std::abs(err_diagnostic_from_hbar(c2, logn, 0.05, 3.0)) < 1e-12);
}

TEST_CASE("pl prior estimate follows the geometric closed form under frozen predictions") {
    // two candidate samples with deterministic restricted argmax: z = (0, 0.5, 0.5)
    Dataset d;
    d.dim = 1;
    d.num_classes = 3;
    d.x = {0.0, 1.0};
    d.y_true = {1, 2};
    d.z = {Supervision::make_candidate(0b011), Supervision::make_candidate(0b101)};
    const auto predict = [](std::span<const double>) {
        return std::vector<double>{0.2, 0.5, 0.3};
    };
    const std::vector<double> z = {0.0, 0.5, 0.5};
    for (int k = 1; k <= 12; ++k) {
        const auto r = estimate_prior_pl(d, predict, 0.9, k);
        const double muk = std::pow(0.9, k);
        double sum = 0.0;
        for (int j = 0; j < 3; ++j) {
            const double expect = muk / 3.0 + (1.0 - muk) * z[j];
            CHECK(std::abs(r[j] - expect) < 1e-10);
            sum += r[j];
        }
        CHECK(std::abs(sum - 1.0) < 1e-12);
    }
}

TEST_CASE("singleton candidate sets reduce the pl prior to label frequencies") {
    Dataset d;
    d.dim = 1;
    d.num_classes = 2;
    for (int i = 0; i < 8; ++i) {
        d.x.push_back(0.0);
        const int y = i < 6 ? 0 : 1;
        d.y_true.push_back(y);
        d.z.push_back(Supervision::make_candidate(1ull << y));
    }
    const auto predict = [](std::span<const double>) {
        return std::vector<double>{0.5, 0.5};
    };
    const auto r = estimate_prior_pl(d, predict, 0.0, 1);
    CHECK(r[0] == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(r[1] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("su prior counts exact labels and ignores the unlabeled pool") {
    Dataset d;
    d.dim = 1;
    d.num_classes = 2;
    for (int i = 0; i < 100; ++i) {
        d.x.push_back(static_cast<double>(i));
        d.y_true.push_back(i % 2);
        d.z.push_back(i < 75 ? Supervision::make_exact(0) : Supervision::make_unlabeled());
    }
    auto r = estimate_prior_su(d);
    CHECK(r[0] == 1.0);
    CHECK(r[1] == 0.0);

    // rewrite: 75 exact(0), 25 exact(1)
    for (int i = 0; i < 100; ++i) d.z[i] = Supervision::make_exact(i < 75 ? 0 : 1);
    r = estimate_prior_su(d);
    CHECK(r[0] == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(r[1] == doctest::Approx(0.25).epsilon(1e-12));

    // dropping unlabeled samples must not change the estimate
    for (int i = 75; i < 100; ++i) d.z[i] = Supervision::make_unlabeled();
    const auto before = estimate_prior_su(d);
    Dataset trimmed;
    trimmed.dim = 1;
    trimmed.num_classes = 2;
    for (int i = 0; i < 75; ++i) {
        trimmed.x.push_back(d.x[i]);
        trimmed.y_true.push_back(d.y_true[i]);
        trimmed.z.push_back(d.z[i]);
    }
    CHECK(estimate_prior_su(trimmed) == before);

    Dataset none;
    none.dim = 1;
    none.num_classes = 2;
    none.x = {0.0};
    none.y_true = {0};
    none.z = {Supervision::make_unlabeled()};
    CHECK_THROWS_AS(estimate_prior_su(none), std::invalid_argument);
}

TEST_CASE("noisy prior solve inverts the transition system") {
    const auto id = TransitionMatrix::symmetric(2, 0.0);
    const std::vector<double> tilde = {0.3, 0.7};
    CHECK(solve_prior_nl(tilde, id) == std::vector<double>{0.3, 0.7});

    const auto t = TransitionMatrix::symmetric(2, 0.4);
    const std::vector<double> bal = {0.5, 0.5};
    const auto pb = solve_prior_nl(bal, t);
    CHECK(pb[0] == doctest::Approx(0.5).epsilon(1e-12));

    bool clipped = true;
    const std::vector<double> skew = {0.6, 0.4};
    const auto ps = solve_prior_nl(skew, t, &clipped);
    CHECK(ps[0] == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(ps[1] == doctest::Approx(0.0).epsilon(1e-10));
    CHECK_FALSE(clipped);

    // pi_1 = 1.5 infeasible: clipped back onto the simplex and flagged
    const std::vector<double> wild = {0.7, 0.3};
    const auto pw = solve_prior_nl(wild, t, &clipped);
    CHECK(clipped);
    CHECK(pw[0] == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(pw[1] == doctest::Approx(0.0).epsilon(1e-10));

    // rate 0.5 collapses both rows; condition number blows past the gate
    const auto sing = TransitionMatrix::symmetric(2, 0.5);
    CHECK_THROWS_AS(solve_prior_nl(bal, sing), numerical_error);
}

TEST_CASE("plan draws are reproducible and respect the interval") {
    const auto s = Schedule::edm();
    const auto plan = plan_subinterval(s, 6.4, 64, true);
    auto r1 = substream(5, "classify");
    auto r2 = substream(5, "classify");
    const auto a = make_plan_draws(plan, s, 2, r1);
    const auto b = make_plan_draws(plan, s, 2, r2);
    CHECK(a.tau == b.tau);
    CHECK(a.eps == b.eps);
    REQUIRE(static_cast<int>(a.tau.size()) == 64);
    CHECK(a.eps.size() == 128);
    for (double t : a.tau) {
        CHECK(t >= plan.l);
        CHECK(t <= plan.r);
    }

    // unrestricted plans may draw outside the planned interval
    const auto full = TimestepPlan::unrestricted(512);
    auto r3 = substream(5, "classify");
    const auto c = make_plan_draws(full, s, 2, r3);
    const bool outside = std::any_of(c.tau.begin(), c.tau.end(),
                                     [&](double t) { return t < plan.l || t > plan.r; });
    CHECK(outside);
}
