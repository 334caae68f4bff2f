#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "wsdiff/oracle.hpp"
#include "wsdiff/rng.hpp"

using namespace wsdiff;

namespace {

MixtureSpec gauss_1d(std::vector<double> means, double var = 1.0) {
    MixtureSpec spec;
    spec.dim = 1;
    spec.prior.assign(means.size(), 1.0 / means.size());
    for (double mu : means) {
        ClassMixture cm;
        cm.weights = {1.0};
        Component comp;
        comp.mean = {mu};
        comp.cov = Matrix(1, 1);
        comp.cov.at(0, 0) = var;
        cm.components.push_back(comp);
        spec.classes.push_back(cm);
    }
    return spec;
}

// two-component 2D class mixtures, anisotropic covariances
MixtureSpec bimodal_2d() {
    MixtureSpec spec;
    spec.dim = 2;
    spec.prior = {0.4, 0.6};
    const double means[2][2][2] = {{{-1.0, 0.5}, {-2.0, -1.0}}, {{1.5, 0.0}, {0.5, 2.0}}};
    const double vars[2][2] = {{0.3, 0.9}, {0.6, 0.4}};
    for (int y = 0; y < 2; ++y) {
        ClassMixture cm;
        cm.weights = {0.7, 0.3};
        for (int k = 0; k < 2; ++k) {
            Component comp;
            comp.mean = {means[y][k][0], means[y][k][1]};
            comp.cov = Matrix(2, 2);
            comp.cov.at(0, 0) = vars[y][k];
            comp.cov.at(1, 1) = 2.0 * vars[y][k];
            comp.cov.at(0, 1) = comp.cov.at(1, 0) = 0.2 * vars[y][k];
            cm.components.push_back(comp);
        }
        spec.classes.push_back(cm);
    }
    return spec;
}

double fd_log_density(const MixtureSpec& spec, const Schedule& s, std::vector<double> x, int y,
                      double t, int i, double h) {
    x[i] += h;
    const double up = log_class_density(spec, s, x, y, t);
    x[i] -= 2 * h;
    const double dn = log_class_density(spec, s, x, y, t);
    return (up - dn) / (2 * h);
}

} // namespace

TEST_CASE("score vanishes at the mode of a single-component class") {
    const auto spec = gauss_1d({2.0, -2.0});
    const auto s = Schedule::edm();
    const double t = 0.7;
    const std::vector<double> x = {2.0}; // alpha = 1 keeps the mean in place
    const auto sc = clean_conditional_score(spec, s, x, 0, t);
    CHECK(std::abs(sc[0]) < 1e-14);
}

TEST_CASE("unit Gaussian score at alpha=1 sigma=1 is minus half the offset") {
    const auto spec = gauss_1d({2.0, -2.0});
    const auto s = Schedule::edm();
    const std::vector<double> x = {3.0};
    const auto sc = clean_conditional_score(spec, s, x, 0, 1.0);
    CHECK(sc[0] == doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("conditional scores match finite differences of the log density") {
    const auto spec = bimodal_2d();
    const auto s = Schedule::edm();
    auto rng = substream(5, "fd-oracle");
    std::uniform_real_distribution<double> ux(-3.0, 3.0);
    std::uniform_real_distribution<double> ut(0.05, 3.0);
    for (int trial = 0; trial < 100; ++trial) {
        const std::vector<double> x = {ux(rng), ux(rng)};
        const double t = ut(rng);
        const int y = trial % 2;
        const auto sc = clean_conditional_score(spec, s, x, y, t);
        for (int i = 0; i < 2; ++i) {
            const double fd = fd_log_density(spec, s, x, y, t, i, 1e-5);
            CHECK(std::abs(sc[i] - fd) < 1e-6 * std::max(1.0, std::abs(fd)));
        }
    }
}

TEST_CASE("noised mixture density matches the closed-form Gaussian") {
    const auto spec = gauss_1d({2.0, -2.0}, 0.5);
    const auto s = Schedule::edm();
    const double t = 1.5;
    const auto nm = noised_class_mixture(spec, s, 0, t);
    // component variance 0.5 plus noise 1.5^2
    const double var = 0.5 + t * t;
    const std::vector<double> x = {1.0};
    const double expect = -0.5 * std::log(2.0 * M_PI * var) - 0.5 * (1.0 - 2.0) * (1.0 - 2.0) / var;
    CHECK(nm.log_density(x) == doctest::Approx(expect).epsilon(1e-12));

    double ld = 0.0;
    std::vector<double> sc(1);
    nm.log_density_and_score(x, &ld, sc);
    CHECK(ld == doctest::Approx(expect).epsilon(1e-12));
    CHECK(sc[0] == doctest::Approx(-(1.0 - 2.0) / var).epsilon(1e-12));
}

TEST_CASE("one-hot supervision reduces the pooled score to the clean class score") {
    const auto spec = bimodal_2d();
    const auto s = Schedule::edm();
    SupervisionModel model;
    model.prior = {0.4, 0.6};
    const auto z = Supervision::make_exact(1);
    auto rng = substream(7, "fd-oracle");
    std::uniform_real_distribution<double> ux(-3.0, 3.0);
    for (int trial = 0; trial < 20; ++trial) {
        const std::vector<double> x = {ux(rng), ux(rng)};
        const double t = 0.1 + 0.2 * trial;
        const auto a = imprecise_conditional_score(spec, s, x, z, model, t);
        const auto b = clean_conditional_score(spec, s, x, 1, t);
        for (int i = 0; i < 2; ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
    }
}

TEST_CASE("pooled score under an even split matches finite differences") {
    const auto spec = gauss_1d({2.0, -2.0});
    const auto s = Schedule::edm();
    SupervisionModel model;
    model.prior = {0.5, 0.5};
    const auto z = Supervision::make_unlabeled();
    const double t = 0.8;
    for (double xv : {-2.5, -0.3, 0.0, 1.2, 2.8}) {
        const std::vector<double> x = {xv};
        const auto sc = imprecise_conditional_score(spec, s, x, z, model, t);
        // central difference of the log pooled density
        const double h = 1e-5;
        auto pooled = [&](double v) {
            const std::vector<double> p = {v};
            const double la = log_class_density(spec, s, p, 0, t);
            const double lb = log_class_density(spec, s, p, 1, t);
            const double m = std::max(la, lb);
            return m + std::log(0.5 * std::exp(la - m) + 0.5 * std::exp(lb - m));
        };
        const double fd = (pooled(xv + h) - pooled(xv - h)) / (2 * h);
        CHECK(std::abs(sc[0] - fd) < 1e-6 * std::max(1.0, std::abs(fd)));
    }
}

TEST_CASE("pooled score equals the posterior-weighted class scores") {
    // identity check across supervision kinds on random draws
    const auto spec = bimodal_2d();
    const auto s = Schedule::edm();
    SupervisionModel model;
    model.prior = {0.4, 0.6};
    model.transition = TransitionMatrix::symmetric(2, 0.3);
    model.inclusion = candidate_inclusion_matrix(PartialMode::random, 2, 0.5);

    auto rng = substream(11, "fd-oracle");
    std::uniform_real_distribution<double> ux(-3.0, 3.0);
    std::uniform_real_distribution<double> ut(0.01, 5.0);
    const Supervision zs[] = {Supervision::make_exact(0), Supervision::make_noisy(1),
                              Supervision::make_unlabeled(), Supervision::make_candidate(0b11)};
    double max_rel = 0.0;
    for (int trial = 0; trial < 250; ++trial) {
        const std::vector<double> x = {ux(rng), ux(rng)};
        const double t = ut(rng);
        const auto& z = zs[trial % 4];
        const auto lhs = imprecise_conditional_score(spec, s, x, z, model, t);
        const auto post = oracle_label_posterior(spec, s, x, z, model, t);
        std::vector<double> rhs(2, 0.0);
        for (int y = 0; y < 2; ++y) {
            const auto cs = clean_conditional_score(spec, s, x, y, t);
            for (int i = 0; i < 2; ++i) rhs[i] += post[y] * cs[i];
        }
        double num = 0.0, den = 0.0;
        for (int i = 0; i < 2; ++i) {
            num += (lhs[i] - rhs[i]) * (lhs[i] - rhs[i]);
            den += rhs[i] * rhs[i];
        }
        max_rel = std::max(max_rel, std::sqrt(num) / (std::sqrt(den) + 1e-12));
    }
    CHECK(max_rel < 1e-8);
}

TEST_CASE("posterior at the symmetric midpoint is uniform") {
    const auto spec = gauss_1d({2.0, -2.0});
    const auto s = Schedule::edm();
    const std::vector<double> prior = {0.5, 0.5};
    const std::vector<double> x = {0.0};
    const auto p = oracle_posterior(spec, s, x, 1.0, prior);
    CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("one-hot prior forces a one-hot posterior") {
    const auto spec = gauss_1d({2.0, -2.0});
    const auto s = Schedule::edm();
    const std::vector<double> prior = {0.0, 1.0};
    const std::vector<double> x = {1.9};
    const auto p = oracle_posterior(spec, s, x, 0.5, prior);
    CHECK(p[0] == 0.0);
    CHECK(p[1] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("posteriors are normalized across random inputs and times") {
    const auto spec = bimodal_2d();
    const auto s = Schedule::edm();
    const std::vector<double> prior = {0.4, 0.6};
    auto rng = substream(13, "fd-oracle");
    std::uniform_real_distribution<double> ux(-10.0, 10.0);
    std::uniform_real_distribution<double> ut(0.002, 40.0);
    for (int trial = 0; trial < 10000; ++trial) {
        const std::vector<double> x = {ux(rng), ux(rng)};
        const auto p = oracle_posterior(spec, s, x, ut(rng), prior);
        CHECK(std::abs(p[0] + p[1] - 1.0) < 1e-12);
        CHECK(p[0] >= 0.0);
        CHECK(p[1] >= 0.0);
    }
}

TEST_CASE("posterior at vanishing noise approaches the Bayes posterior") {
    const auto spec = bimodal_2d();
    const auto s = Schedule::edm();
    const std::vector<double> prior = {0.4, 0.6};
    auto rng = substream(17, "fd-oracle");
    std::uniform_real_distribution<double> ux(-3.0, 3.0);
    for (int trial = 0; trial < 50; ++trial) {
        const std::vector<double> x = {ux(rng), ux(rng)};
        const auto a = oracle_posterior(spec, s, x, 1e-6, prior);
        const auto b = bayes_posterior(spec, x, prior);
        CHECK(std::abs(a[0] - b[0]) < 1e-6);
        CHECK(bayes_classify(spec, x, prior) == (b[0] > b[1] ? 0 : 1));
    }
}

TEST_CASE("label posterior handles each supervision kind") {
    SupervisionModel model;
    model.prior = {0.3, 0.5, 0.2};

    const auto pe = model.label_posterior(Supervision::make_exact(1));
    CHECK(pe == std::vector<double>{0.0, 1.0, 0.0});

    CHECK(model.label_posterior(Supervision::make_unlabeled()) == model.prior);

    model.transition = TransitionMatrix::symmetric(3, 0.4);
    const auto pn = model.label_posterior(Supervision::make_noisy(0));
    // p(y|observed 0) proportional to prior_y T[y,0]
    const double u0 = 0.3 * 0.6, u1 = 0.5 * 0.2, u2 = 0.2 * 0.2;
    const double zsum = u0 + u1 + u2;
    CHECK(pn[0] == doctest::Approx(u0 / zsum).epsilon(1e-12));
    CHECK(pn[1] == doctest::Approx(u1 / zsum).epsilon(1e-12));
    CHECK(pn[2] == doctest::Approx(u2 / zsum).epsilon(1e-12));

    // candidate set without an inclusion model: prior restricted to the set
    const auto pc = model.label_posterior(Supervision::make_candidate(0b101));
    CHECK(pc[0] == doctest::Approx(0.3 / 0.5).epsilon(1e-12));
    CHECK(pc[1] == 0.0);
    CHECK(pc[2] == doctest::Approx(0.2 / 0.5).epsilon(1e-12));

    // with an inclusion model the set likelihood reweights members
    model.inclusion = candidate_inclusion_matrix(PartialMode::random, 3, 0.5);
    const auto pi = model.label_posterior(Supervision::make_candidate(0b101));
    // P(s|y) = q^(members-1) (1-q)^(nonmembers): equal for both members here
    CHECK(pi[0] == doctest::Approx(0.3 / 0.5).epsilon(1e-12));
    CHECK(pi[2] == doctest::Approx(0.2 / 0.5).epsilon(1e-12));

    CHECK_THROWS_AS(model.label_posterior(Supervision::make_candidate(0)), std::invalid_argument);
    CHECK_THROWS_AS(model.label_posterior(Supervision::make_exact(5)), std::invalid_argument);
}

TEST_CASE("noisy label posterior without a transition matrix is rejected") {
    SupervisionModel model;
    model.prior = {0.5, 0.5};
    CHECK_THROWS_AS(model.label_posterior(Supervision::make_noisy(0)), std::invalid_argument);
}

TEST_CASE("imprecise score rejects a malformed label posterior") {
    const auto spec = gauss_1d({2.0, -2.0});
    const auto s = Schedule::edm();
    SupervisionModel model;
    model.prior = {0.7, 0.7}; // not a simplex
    const std::vector<double> x = {0.5};
    CHECK_THROWS_AS(
        imprecise_conditional_score(spec, s, x, Supervision::make_unlabeled(), model, 1.0),
        std::invalid_argument);
}
