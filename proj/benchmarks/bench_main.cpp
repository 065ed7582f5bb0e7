#include "eventcorr/deptest.hpp"
#include "eventcorr/estimators.hpp"
#include "eventcorr/events.hpp"
#include "eventcorr/inference.hpp"
#include "eventcorr/network.hpp"
#include "eventcorr/regression.hpp"
#include "eventcorr/synth.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace {

ecc::Sample make_sample(Eigen::Index n) {
    ecc::GenSpec spec;
    spec.rho_xy = 0.6;
    spec.rho_xz = 0.7;
    spec.rho_yz = 0.8;
    spec.n = n;
    spec.seed = 7;
    return ecc::generate(spec);
}

void bm_generate(benchmark::State& state) {
    const auto n = static_cast<Eigen::Index>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(make_sample(n));
    state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(bm_generate)->Arg(10000)->Arg(100000);

void bm_ecc_estimate(benchmark::State& state) {
    const ecc::Sample sample = make_sample(static_cast<Eigen::Index>(state.range(0)));
    const ecc::EventSpec event = ecc::EventSpec::above("z", 0.5);
    for (auto _ : state) benchmark::DoNotOptimize(ecc::ecc_estimate(sample, event));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(bm_ecc_estimate)->Arg(10000)->Arg(100000);

void bm_decile_sweep(benchmark::State& state) {
    const ecc::Sample sample = make_sample(static_cast<Eigen::Index>(state.range(0)));
    const auto bands = ecc::decile_sweep("z", 0.1);
    for (auto _ : state)
        for (const auto& band : bands)
            benchmark::DoNotOptimize(ecc::ecc_estimate(sample, band.second));
}
BENCHMARK(bm_decile_sweep)->Arg(100000);

void bm_delta_ci(benchmark::State& state) {
    const ecc::Sample sample = make_sample(static_cast<Eigen::Index>(state.range(0)));
    const ecc::EventSpec event = ecc::EventSpec::above("z", 0.5);
    for (auto _ : state) {
        const ecc::ThetaBundle tb = ecc::theta_bundle(sample, event);
        benchmark::DoNotOptimize(ecc::delta_ci(tb, 0.95));
    }
}
BENCHMARK(bm_delta_ci)->Arg(10000)->Arg(100000);

void bm_bootstrap_ci(benchmark::State& state) {
    const ecc::Sample sample = make_sample(10000);
    const ecc::EventSpec event = ecc::EventSpec::above("z", 0.5);
    const auto estimator = [](const ecc::Sample& s, const ecc::EventSpec& e) {
        return ecc::ecc_estimate(s, e).rho;
    };
    for (auto _ : state)
        benchmark::DoNotOptimize(ecc::bootstrap_ci(sample, event, estimator,
                                                   static_cast<int>(state.range(0)), 0.95, 11));
}
BENCHMARK(bm_bootstrap_ci)->Arg(200);

void bm_hoeffding(benchmark::State& state) {
    std::mt19937_64 eng(3);
    std::normal_distribution<double> normal;
    const auto n = static_cast<Eigen::Index>(state.range(0));
    Eigen::VectorXd x(n), y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        x(i) = normal(eng);
        y(i) = 0.5 * x(i) + normal(eng);
    }
    for (auto _ : state) benchmark::DoNotOptimize(ecc::hoeffding_d(x, y));
    state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(bm_hoeffding)->Arg(500)->Arg(5000);

void bm_fit_piecewise(benchmark::State& state) {
    std::mt19937_64 eng(5);
    std::normal_distribution<double> normal;
    const auto n = static_cast<Eigen::Index>(state.range(0));
    Eigen::VectorXd x(n), y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        x(i) = normal(eng);
        y(i) = std::tanh(x(i)) + 0.1 * normal(eng);
    }
    for (auto _ : state) benchmark::DoNotOptimize(ecc::fit_piecewise(x, y, 20));
    state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(bm_fit_piecewise)->Arg(10000);

void bm_regime_network(benchmark::State& state) {
    ecc::PanelSpec spec;
    spec.n = static_cast<Eigen::Index>(state.range(0));
    spec.p = 8;
    spec.seed = 9;
    const ecc::Panel panel = ecc::one_factor_panel(spec);
    const auto [stable, crisis] = ecc::split_regimes(panel, 0, spec.crisis_quantile);
    for (auto _ : state)
        benchmark::DoNotOptimize(ecc::regime_network(panel, stable, ecc::Regime::stable));
}
BENCHMARK(bm_regime_network)->Arg(4000)->Arg(16000);

void bm_counterfactual_network(benchmark::State& state) {
    ecc::PanelSpec spec;
    spec.n = static_cast<Eigen::Index>(state.range(0));
    spec.p = 8;
    spec.seed = 9;
    const ecc::Panel panel = ecc::one_factor_panel(spec);
    const auto [stable, crisis] = ecc::split_regimes(panel, 0, spec.crisis_quantile);
    for (auto _ : state)
        benchmark::DoNotOptimize(ecc::counterfactual_network(panel, stable, crisis, 0, 1.0));
}
BENCHMARK(bm_counterfactual_network)->Arg(16000);

} // namespace

BENCHMARK_MAIN();
