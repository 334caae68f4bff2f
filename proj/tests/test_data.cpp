#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>

#include "wsdiff/data.hpp"
#include "wsdiff/rng.hpp"

using namespace wsdiff;

namespace {

MixtureSpec two_class_1d() {
    MixtureSpec spec;
    spec.dim = 1;
    spec.prior = {0.5, 0.5};
    for (double mu : {-2.0, 2.0}) {
        ClassMixture cm;
        cm.weights = {1.0};
        Component comp;
        comp.mean = {mu};
        comp.cov = Matrix(1, 1);
        comp.cov.at(0, 0) = 1.0;
        cm.components.push_back(comp);
        spec.classes.push_back(cm);
    }
    return spec;
}

MixtureSpec ten_class_1d() {
    MixtureSpec spec;
    spec.dim = 1;
    spec.prior.assign(10, 0.1);
    for (int y = 0; y < 10; ++y) {
        ClassMixture cm;
        cm.weights = {1.0};
        Component comp;
        comp.mean = {static_cast<double>(y)};
        comp.cov = Matrix(1, 1);
        comp.cov.at(0, 0) = 0.1;
        cm.components.push_back(comp);
        spec.classes.push_back(cm);
    }
    return spec;
}

} // namespace

TEST_CASE("sample_dataset matches the generating prior and moments") {
    const auto spec = two_class_1d();
    auto rng = substream(7, "data");
    const auto d = sample_dataset(spec, 10000, rng);
    REQUIRE(d.size() == 10000);
    REQUIRE(d.dim == 1);
    REQUIRE(d.num_classes == 2);

    int n1 = 0;
    double sum1 = 0.0;
    for (int i = 0; i < d.size(); ++i) {
        CHECK(d.z[i].kind == Supervision::Kind::exact);
        CHECK(d.z[i].label == d.y_true[i]);
        if (d.y_true[i] == 1) {
            ++n1;
            sum1 += d.point(i)[0];
        }
    }
    CHECK(std::abs(n1 / 10000.0 - 0.5) < 0.02);

    // unit-variance class: stderr of the mean is 1/sqrt(n1)
    const double mean1 = sum1 / n1;
    CHECK(std::abs(mean1 - 2.0) < 3.0 / std::sqrt(static_cast<double>(n1)));
}

TEST_CASE("sample_dataset is deterministic under a fixed stream") {
    const auto spec = two_class_1d();
    auto r1 = substream(11, "data");
    auto r2 = substream(11, "data");
    const auto a = sample_dataset(spec, 500, r1);
    const auto b = sample_dataset(spec, 500, r2);
    CHECK(a.x == b.x);
    CHECK(a.y_true == b.y_true);
}

TEST_CASE("sample_dataset rejects a non-SPD covariance") {
    auto spec = two_class_1d();
    spec.classes[0].components[0].cov.at(0, 0) = -1.0;
    auto rng = substream(1, "data");
    CHECK_THROWS_AS(sample_dataset(spec, 10, rng), std::invalid_argument);
}

TEST_CASE("symmetric noisy corruption flips at the nominal rate") {
    const auto spec = ten_class_1d();
    auto rng = substream(3, "data");
    const auto d = sample_dataset(spec, 100000, rng);
    const auto t = TransitionMatrix::symmetric(10, 0.4);
    auto crng = substream(3, "corruption");
    const auto nd = corrupt_noisy(d, t, crng);

    CHECK(nd.x == d.x);
    CHECK(nd.y_true == d.y_true);
    int flipped = 0;
    for (int i = 0; i < nd.size(); ++i) {
        REQUIRE(nd.z[i].kind == Supervision::Kind::noisy);
        if (nd.z[i].label != nd.y_true[i]) ++flipped;
    }
    CHECK(std::abs(flipped / 100000.0 - 0.4) < 0.01);
}

TEST_CASE("noisy corruption at rate zero is the identity") {
    const auto spec = two_class_1d();
    auto rng = substream(5, "data");
    const auto d = sample_dataset(spec, 2000, rng);
    const auto t = TransitionMatrix::symmetric(2, 0.0);
    auto crng = substream(5, "corruption");
    const auto nd = corrupt_noisy(d, t, crng);
    for (int i = 0; i < nd.size(); ++i) CHECK(nd.z[i].label == nd.y_true[i]);
}

TEST_CASE("asymmetric noisy corruption flips only mapped classes to their targets") {
    const auto spec = ten_class_1d();
    auto rng = substream(9, "data");
    const auto d = sample_dataset(spec, 20000, rng);
    const auto t = TransitionMatrix::asymmetric(10, 0.4, {{0, 1}, {2, 3}});
    auto crng = substream(9, "corruption");
    const auto nd = corrupt_noisy(d, t, crng);

    int flips_from_0 = 0;
    for (int i = 0; i < nd.size(); ++i) {
        const int y = nd.y_true[i];
        const int zh = nd.z[i].label;
        if (y != 0 && y != 2) {
            CHECK(zh == y);
        } else if (zh != y) {
            CHECK(zh == (y == 0 ? 1 : 3));
            if (y == 0) ++flips_from_0;
        }
    }
    CHECK(flips_from_0 > 0);
}

TEST_CASE("empirical transition frequencies converge to the matrix") {
    const auto spec = ten_class_1d();
    auto rng = substream(3, "data");
    const auto d = sample_dataset(spec, 100000, rng);
    const auto t = TransitionMatrix::symmetric(10, 0.4);
    auto crng = substream(3, "corruption");
    const auto nd = corrupt_noisy(d, t, crng);

    std::vector<int> count(100, 0), row(10, 0);
    for (int i = 0; i < nd.size(); ++i) {
        ++count[static_cast<size_t>(nd.y_true[i]) * 10 + nd.z[i].label];
        ++row[nd.y_true[i]];
    }
    for (int i = 0; i < 10; ++i)
        for (int j = 0; j < 10; ++j) {
            const double tij = t.at(i, j);
            const double emp = static_cast<double>(count[static_cast<size_t>(i) * 10 + j]) / row[i];
            const double tol = 3.0 * std::sqrt(tij * (1.0 - tij) / row[i]) + 1e-12;
            CHECK(std::abs(emp - tij) <= tol);
        }
}

TEST_CASE("random partial corruption hits the expected candidate-set size") {
    const auto spec = ten_class_1d();
    auto rng = substream(17, "data");
    const auto d = sample_dataset(spec, 100000, rng);
    auto crng = substream(17, "corruption");
    const auto pd = corrupt_partial(d, PartialMode::random, 0.5, crng);

    double total = 0.0;
    for (int i = 0; i < pd.size(); ++i) {
        REQUIRE(pd.z[i].kind == Supervision::Kind::candidate);
        CHECK(pd.z[i].in_set(pd.y_true[i]));
        total += pd.z[i].set_size();
    }
    CHECK(std::abs(total / pd.size() - 5.5) < 0.05);
}

TEST_CASE("partial corruption with q=0 yields singleton sets") {
    const auto spec = two_class_1d();
    auto rng = substream(19, "data");
    const auto d = sample_dataset(spec, 1000, rng);
    auto crng = substream(19, "corruption");
    const auto pd = corrupt_partial(d, PartialMode::random, 0.0, crng);
    for (int i = 0; i < pd.size(); ++i) {
        CHECK(pd.z[i].set_size() == 1);
        CHECK(pd.z[i].in_set(pd.y_true[i]));
    }
}

TEST_CASE("class-dependent inclusion cycles q+0.2, q, q-0.2 with offset") {
    const auto m = candidate_inclusion_matrix(PartialMode::class_dependent, 5, 0.5);
    for (int i = 0; i < 5; ++i) {
        CHECK(m.at(i, i) == 1.0);
        CHECK(m.at(i, (i + 1) % 5) == doctest::Approx(0.7).epsilon(1e-15));
        CHECK(m.at(i, (i + 2) % 5) == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(m.at(i, (i + 3) % 5) == doctest::Approx(0.3).epsilon(1e-15));
        CHECK(m.at(i, (i + 4) % 5) == doctest::Approx(0.7).epsilon(1e-15));
    }
    // empirical inclusion frequency tracks the matrix row
    const auto spec = ten_class_1d();
    auto rng = substream(4, "data");
    const auto d = sample_dataset(spec, 50000, rng);
    auto crng = substream(4, "corruption");
    const auto pd = corrupt_partial(d, PartialMode::class_dependent, 0.5, crng);
    const auto incl = candidate_inclusion_matrix(PartialMode::class_dependent, 10, 0.5);
    std::vector<int> hit(100, 0), row(10, 0);
    for (int i = 0; i < pd.size(); ++i) {
        const int y = pd.y_true[i];
        ++row[y];
        for (int j = 0; j < 10; ++j)
            if (pd.z[i].in_set(j)) ++hit[static_cast<size_t>(y) * 10 + j];
    }
    for (int y = 0; y < 10; ++y)
        for (int j = 0; j < 10; ++j) {
            const double pij = incl.at(y, j);
            const double emp = static_cast<double>(hit[static_cast<size_t>(y) * 10 + j]) / row[y];
            const double tol = 3.0 * std::sqrt(pij * (1.0 - pij) / row[y]) + 1e-12;
            CHECK(std::abs(emp - pij) <= tol);
        }
}

TEST_CASE("class-dependent mode rejects small class counts and out-of-range q") {
    auto rng = substream(1, "corruption");
    const auto spec = two_class_1d();
    auto drng = substream(1, "data");
    const auto d = sample_dataset(spec, 10, drng);
    CHECK_THROWS_AS(corrupt_partial(d, PartialMode::class_dependent, 0.5, rng),
                    std::invalid_argument);
    CHECK_THROWS_AS(candidate_inclusion_matrix(PartialMode::class_dependent, 10, 0.9),
                    std::invalid_argument);
    CHECK_THROWS_AS(candidate_inclusion_matrix(PartialMode::class_dependent, 10, 0.1),
                    std::invalid_argument);
}

TEST_CASE("semi corruption keeps an exact per-class labeled count") {
    const auto spec = two_class_1d();
    auto rng = substream(29, "data");
    Dataset d = sample_dataset(spec, 100000, rng);
    // trim to exactly 500 per class for a deterministic count
    Dataset balanced;
    balanced.dim = d.dim;
    balanced.num_classes = d.num_classes;
    int kept[2] = {0, 0};
    for (int i = 0; i < d.size() && (kept[0] < 500 || kept[1] < 500); ++i) {
        const int y = d.y_true[i];
        if (kept[y] == 500) continue;
        ++kept[y];
        balanced.x.push_back(d.x[i]);
        balanced.y_true.push_back(y);
        balanced.z.push_back(d.z[i]);
    }
    REQUIRE(balanced.size() == 1000);

    auto crng = substream(29, "corruption");
    const auto sd = corrupt_semi(balanced, 0.1, crng);
    int labeled[2] = {0, 0};
    for (int i = 0; i < sd.size(); ++i) {
        if (sd.z[i].kind == Supervision::Kind::exact) ++labeled[sd.y_true[i]];
        else CHECK(sd.z[i].kind == Supervision::Kind::unlabeled);
    }
    CHECK(labeled[0] == 50);
    CHECK(labeled[1] == 50);

    auto crng2 = substream(31, "corruption");
    const auto sd2 = corrupt_semi(balanced, 0.01, crng2);
    int labeled2[2] = {0, 0};
    for (int i = 0; i < sd2.size(); ++i)
        if (sd2.z[i].kind == Supervision::Kind::exact) ++labeled2[sd2.y_true[i]];
    CHECK(labeled2[0] == 5);
    CHECK(labeled2[1] == 5);

    auto crng3 = substream(37, "corruption");
    const auto sd3 = corrupt_semi(balanced, 1.0, crng3);
    for (int i = 0; i < sd3.size(); ++i) CHECK(sd3.z[i].kind == Supervision::Kind::exact);
}

TEST_CASE("semi corruption keeps at least one label in tiny classes") {
    const auto spec = two_class_1d();
    auto rng = substream(41, "data");
    const auto d = sample_dataset(spec, 40, rng);
    auto crng = substream(41, "corruption");
    const auto sd = corrupt_semi(d, 0.01, crng);
    int labeled[2] = {0, 0};
    for (int i = 0; i < sd.size(); ++i)
        if (sd.z[i].kind == Supervision::Kind::exact) ++labeled[sd.y_true[i]];
    CHECK(labeled[0] == 1);
    CHECK(labeled[1] == 1);
}

TEST_CASE("transition matrix constructors are row-stochastic") {
    const auto s = TransitionMatrix::symmetric(10, 0.4);
    for (int i = 0; i < 10; ++i) {
        double row = 0.0;
        for (int j = 0; j < 10; ++j) row += s.at(i, j);
        CHECK(row == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(s.at(i, i) == doctest::Approx(0.6).epsilon(1e-12));
    }
    const auto a = TransitionMatrix::asymmetric(4, 0.3);
    for (int i = 0; i < 4; ++i) {
        CHECK(a.at(i, i) == doctest::Approx(0.7).epsilon(1e-12));
        CHECK(a.at(i, (i + 1) % 4) == doctest::Approx(0.3).epsilon(1e-12));
    }
    TransitionMatrix bad;
    bad.c = 2;
    bad.p = {0.5, 0.6, 0.5, 0.5};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("dataset CSV round trip is bit exact for every supervision kind") {
    const auto spec = ten_class_1d();
    auto rng = substream(43, "data");
    Dataset d = sample_dataset(spec, 64, rng);
    // mix all four kinds
    for (int i = 0; i < d.size(); ++i) {
        switch (i % 4) {
        case 0: break;
        case 1: d.z[i] = Supervision::make_noisy((d.y_true[i] + 1) % 10); break;
        case 2: d.z[i] = Supervision::make_unlabeled(); break;
        case 3: d.z[i] = Supervision::make_candidate((1ull << d.y_true[i]) | 1ull); break;
        }
    }
    const auto path = std::filesystem::temp_directory_path() / "wsdiff_test_roundtrip.csv";
    write_dataset_csv(d, path);
    const auto r = read_dataset_csv(path, 10);
    std::filesystem::remove(path);

    REQUIRE(r.size() == d.size());
    CHECK(r.dim == d.dim);
    for (int i = 0; i < d.size(); ++i) {
        CHECK(r.x[i] == d.x[i]);
        CHECK(r.y_true[i] == d.y_true[i]);
        CHECK(r.z[i].kind == d.z[i].kind);
        CHECK(r.z[i].label == d.z[i].label);
        CHECK(r.z[i].cset == d.z[i].cset);
    }
}

TEST_CASE("format_double survives parse round trips on awkward values") {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-308, 1e308, 0.0, -0.0, 123456789.123456789}) {
        const double back = std::stod(format_double(v));
        CHECK(std::memcmp(&back, &v, sizeof v) == 0);
    }
}

TEST_CASE("candidate-set helpers expose members and size") {
    const auto z = Supervision::make_candidate(0b10110ull);
    CHECK(z.set_size() == 3);
    CHECK(z.set_members() == std::vector<int>{1, 2, 4});
    CHECK(z.in_set(2));
    CHECK_FALSE(z.in_set(0));
}
