#include <benchmark/benchmark.h>

#include <vector>

#include "wsdiff/classifier.hpp"
#include "wsdiff/config.hpp"
#include "wsdiff/net.hpp"
#include "wsdiff/oracle.hpp"
#include "wsdiff/rng.hpp"
#include "wsdiff/sampler.hpp"
#include "wsdiff/schedule.hpp"
#include "wsdiff/score_field.hpp"

namespace {

wsdiff::MixtureSpec desk_spec() { return wsdiff::default_config().mixture; }

wsdiff::ScoreNet desk_net(int n_tokens) {
    wsdiff::NetConfig cfg;
    cfg.dim = 2;
    cfg.n_tokens = n_tokens;
    cfg.width = 64;
    auto rng = wsdiff::substream(7, "bench-net");
    return wsdiff::ScoreNet::init(cfg, rng);
}

void BM_NetForward(benchmark::State& state) {
    const auto net = desk_net(4);
    const std::vector<double> x = {0.3, -0.7};
    std::vector<double> out(2);
    for (auto _ : state) {
        net.forward_score(x, 1, 0.5, out);
        benchmark::DoNotOptimize(out.data());
    }
}
BENCHMARK(BM_NetForward);

void BM_NetForwardBackward(benchmark::State& state) {
    const auto net = desk_net(4);
    const std::vector<double> x = {0.3, -0.7};
    std::vector<double> out(2);
    std::vector<double> dscore = {1.0, -0.5};
    std::vector<double> grad(net.param_count(), 0.0);
    wsdiff::NetEval eval;
    for (auto _ : state) {
        net.forward_score(x, 1, 0.5, out, &eval);
        net.backward(eval, dscore, grad);
        benchmark::DoNotOptimize(grad.data());
    }
}
BENCHMARK(BM_NetForwardBackward);

void BM_OracleScore(benchmark::State& state) {
    const auto spec = desk_spec();
    const auto s = wsdiff::Schedule::edm();
    const std::vector<double> x = {0.3, -0.7};
    for (auto _ : state) {
        auto sc = wsdiff::clean_conditional_score(spec, s, x, 0, 0.5);
        benchmark::DoNotOptimize(sc.data());
    }
}
BENCHMARK(BM_OracleScore);

void BM_ClassifierPosterior(benchmark::State& state) {
    const auto spec = desk_spec();
    const auto s = wsdiff::Schedule::edm();
    const wsdiff::OracleScoreField field(spec, s);
    const auto plan = wsdiff::plan_subinterval(s, 6.4, 16, true);
    const std::vector<double> x = {0.3, -0.7};
    const std::vector<double> prior = {0.5, 0.5};
    auto rng = wsdiff::substream(7, "bench-cls");
    for (auto _ : state) {
        auto p = wsdiff::posterior(field, x, s, plan, prior, rng);
        benchmark::DoNotOptimize(p.data());
    }
}
BENCHMARK(BM_ClassifierPosterior);

void BM_PlanSubinterval(benchmark::State& state) {
    const auto s = wsdiff::Schedule::edm();
    for (auto _ : state) {
        auto plan = wsdiff::plan_subinterval(s, 6.4);
        benchmark::DoNotOptimize(plan.l);
    }
}
BENCHMARK(BM_PlanSubinterval);

void BM_SampleChain(benchmark::State& state) {
    const auto spec = desk_spec();
    const auto s = wsdiff::Schedule::edm();
    const wsdiff::OracleScoreField field(spec, s);
    auto rng = wsdiff::substream(7, "bench-sample");
    for (auto _ : state) {
        auto batch = wsdiff::sample_edm(field, 0, 1, 18, s, rng);
        benchmark::DoNotOptimize(batch.x.data());
    }
}
BENCHMARK(BM_SampleChain);

} // namespace

BENCHMARK_MAIN();
