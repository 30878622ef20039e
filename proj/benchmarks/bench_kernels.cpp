#include <benchmark/benchmark.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "plpde/hermfield.hpp"
#include "plpde/solver.hpp"
#include "plpde/symcalc.hpp"

using namespace plpde;
using std::numbers::pi;

namespace {

OperatorSpec sigma2(int n, int K) {
    OperatorSpec s;
    s.family = Family::sigma_root;
    s.k = 2;
    s.n = n;
    s.K = K;
    return s;
}

ScalarField wave(const ModelGeometry& g) {
    return ScalarField::from_function(g, [](auto x) { return 0.05 * std::cos(2 * pi * x[0]) + 0.03 * std::cos(2 * pi * x[3]); });
}

}  // namespace

static void BM_SigmaK(benchmark::State& state) {
    const auto m = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1, 2);
    std::vector<double> v(m);
    for (auto& x : v) x = u(rng);
    const int k = static_cast<int>(m / 2);
    for (auto _ : state) benchmark::DoNotOptimize(sigma_k(k, v));
}
BENCHMARK(BM_SigmaK)->Arg(4)->Arg(16)->Arg(70);

static void BM_ComplexHessian(benchmark::State& state) {
    const auto g = ModelGeometry::flat_torus(2, static_cast<int>(state.range(0)));
    const auto u = wave(g);
    TorusSpectral spectral(g);
    HermitianField out(g);
    for (auto _ : state) {
        complex_hessian(u.values, spectral, out);
        benchmark::DoNotOptimize(out.data.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(g.point_count()));
}
BENCHMARK(BM_ComplexHessian)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

static void BM_EvaluateOperator(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const auto g = ModelGeometry::flat_torus(n, 8);
    const Operator op(sigma2(n, n == 2 ? 1 : 2));
    const auto G = assemble_g(ScalarField::from_function(g, [](auto x) { return 0.02 * std::cos(2 * pi * x[0]); }),
                              HermitianField::scaled_metric(g, 1.0));
    SpectralField s(g);
    for (auto _ : state) {
        spectral_decompose(G, s);
        auto e = evaluate_operator(op, s, 0.0, true, true);
        benchmark::DoNotOptimize(e.value.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(g.point_count()));
}
BENCHMARK(BM_EvaluateOperator)->Arg(2)->Arg(3)->Unit(benchmark::kMillisecond);

static void BM_NewtonStep(benchmark::State& state) {
    const auto g = ModelGeometry::flat_torus(2, static_cast<int>(state.range(0)));
    const auto spec = mms_generate(g, sigma2(2, 1), wave(g), HermitianField::scaled_metric(g, 2.0));
    SolveState s(g);
    s.t = 0.0;
    s.b = 0.01;
    for (auto _ : state) benchmark::DoNotOptimize(newton_step(spec, s).b);
}
BENCHMARK(BM_NewtonStep)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
