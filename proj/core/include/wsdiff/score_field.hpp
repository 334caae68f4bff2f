#pragma once

#include <functional>
#include <span>

#include "wsdiff/data.hpp"
#include "wsdiff/net.hpp"
#include "wsdiff/oracle.hpp"
#include "wsdiff/schedule.hpp"

namespace wsdiff {

// A conditional score field s(x, y, t). Implementations: the trained net,
// the mixture oracle, and ad-hoc stubs for tests.
struct ScoreField {
    virtual ~ScoreField() = default;
    virtual int dim() const = 0;
    virtual int num_classes() const = 0;
    virtual void score(std::span<const double> x, int y, double t,
                       std::span<double> out) const = 0;
};

// Net evaluated in continuous sigma-time (alpha = 1, sigma = t).
struct NetScoreField final : ScoreField {
    const ScoreNet* net;
    int classes;

    NetScoreField(const ScoreNet& n, int num_classes_) : net(&n), classes(num_classes_) {}
    int dim() const override { return net->cfg.dim; }
    int num_classes() const override { return classes; }
    void score(std::span<const double> x, int y, double t, std::span<double> out) const override {
        net->forward_score(x, y, t, out);
    }
};

struct OracleScoreField final : ScoreField {
    const MixtureSpec* spec;
    const Schedule* schedule;

    OracleScoreField(const MixtureSpec& sp, const Schedule& sc) : spec(&sp), schedule(&sc) {}
    int dim() const override { return spec->dim; }
    int num_classes() const override { return spec->num_classes(); }
    void score(std::span<const double> x, int y, double t, std::span<double> out) const override {
        auto s = clean_conditional_score(*spec, *schedule, x, y, t);
        std::copy(s.begin(), s.end(), out.begin());
    }
};

// Adapts a sigma-time field to a general (alpha, sigma) schedule:
// s_lin(x, t) = s(x / alpha_t, sigma_t / alpha_t) / alpha_t.
struct LinearizedScoreField final : ScoreField {
    const ScoreField* inner;
    const Schedule* schedule;

    LinearizedScoreField(const ScoreField& f, const Schedule& sc) : inner(&f), schedule(&sc) {}
    int dim() const override { return inner->dim(); }
    int num_classes() const override { return inner->num_classes(); }
    void score(std::span<const double> x, int y, double t, std::span<double> out) const override {
        const auto [alpha, sigma] = alpha_sigma(*schedule, t);
        std::vector<double> u(x.size());
        for (size_t i = 0; i < x.size(); ++i) u[i] = x[i] / alpha;
        inner->score(u, y, sigma / alpha, out);
        for (auto& v : out) v /= alpha;
    }
};

struct FnScoreField final : ScoreField {
    using Fn = std::function<void(std::span<const double>, int, double, std::span<double>)>;
    int d;
    int classes;
    Fn fn;

    FnScoreField(int dim_, int num_classes_, Fn f) : d(dim_), classes(num_classes_), fn(std::move(f)) {}
    int dim() const override { return d; }
    int num_classes() const override { return classes; }
    void score(std::span<const double> x, int y, double t, std::span<double> out) const override {
        fn(x, y, t, out);
    }
};

} // namespace wsdiff
