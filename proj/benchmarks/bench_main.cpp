#include <benchmark/benchmark.h>

#include "orbitshift/oracle.hpp"

using namespace orbitshift;

namespace {

const FieldSystem& tok() {
    static const FieldSystem sys = make_system("model-toroidal");
    return sys;
}

const Cycle& xcycle() {
    static const Cycle cyc = [] {
        Vec a(2), b(2);
        a << 3.0, 0.3;
        b << 3.0, 0.95;
        const auto seeds = line_scan(tok(), 2, a, b, 121);
        return find_cycle(tok(), seeds.front(), 2);
    }();
    return cyc;
}

void BM_IntegrateAbc(benchmark::State& state) {
    const FieldSystem abc = make_system("abc");
    Vec x0(3);
    x0 << 0.1, 0.2, 0.3;
    for (auto _ : state) {
        auto tr = integrate_flow(abc, x0, 0.0, 10.0);
        benchmark::DoNotOptimize(tr.states().back());
    }
}
BENCHMARK(BM_IntegrateAbc);

void BM_VariationsOrder3(benchmark::State& state) {
    const FieldSystem abc = make_system("abc");
    const Perturbation pert = make_perturbation(abc, "param:A");
    Vec x0(3);
    x0 << 0.1, 0.2, 0.3;
    for (auto _ : state) {
        auto b = integrate_variations(abc, x0, 0.0, 2.0, pert, 3);
        benchmark::DoNotOptimize(b.variation(3, 2.0));
    }
}
BENCHMARK(BM_VariationsOrder3);

void BM_FindXCycle(benchmark::State& state) {
    Vec guess(2);
    guess << 3.0, 0.64;
    for (auto _ : state) {
        auto cyc = find_cycle(tok(), guess, 2);
        benchmark::DoNotOptimize(cyc.closure_residual);
    }
}
BENCHMARK(BM_FindXCycle);

void BM_JacobianTotalDerivative(benchmark::State& state) {
    const Cycle& cyc = xcycle();
    const Perturbation pert =
        make_perturbation(tok(), "flux-harmonic", {{"m", 1}, {"n", 1}, {"amp", 3e-3}});
    for (auto _ : state) {
        auto jd = jacobian_total_derivative(cyc, pert);
        benchmark::DoNotOptimize(jd.ddp.front());
    }
}
BENCHMARK(BM_JacobianTotalDerivative);

}  // namespace

BENCHMARK_MAIN();
