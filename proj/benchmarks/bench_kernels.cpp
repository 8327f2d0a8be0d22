#include <benchmark/benchmark.h>

#include <cmath>

#include "nlsbif/continuation.hpp"
#include "nlsbif/operators.hpp"
#include "nlsbif/tridiag.hpp"

using namespace nlsbif;

namespace {

SymTridiag model_matrix(int n) {
    SymTridiag T(n);
    for (int i = 0; i < n; ++i)
        T.diag[static_cast<size_t>(i)] = 2.0 + 0.5 * std::sin(0.01 * i);
    for (int i = 0; i + 1 < n; ++i) T.off[static_cast<size_t>(i)] = -1.0;
    return T;
}

ProblemSpec well_problem() {
    ProblemSpec prob;
    prob.potential.wells.push_back({2.0, 0.0, 1.0});
    return prob;
}

void BM_sturm_count(benchmark::State& state) {
    SymTridiag T = model_matrix(static_cast<int>(state.range(0)));
    for (auto _ : state)
        benchmark::DoNotOptimize(sturm_count_below(T, 1.0));
}
BENCHMARK(BM_sturm_count)->Arg(6001)->Arg(24001);

void BM_trilu_solve(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    SymTridiag T = model_matrix(n);
    TriLU lu(T);
    std::vector<double> rhs(static_cast<size_t>(n), 1.0);
    for (auto _ : state)
        benchmark::DoNotOptimize(lu.solve(rhs));
}
BENCHMARK(BM_trilu_solve)->Arg(6001)->Arg(24001);

void BM_smallest_eig(benchmark::State& state) {
    auto g = Grid::line(30.0, static_cast<int>(state.range(0)));
    ProblemSpec prob = well_problem();
    OperatorMatrix H = assemble_H0(prob, g);
    for (auto _ : state)
        benchmark::DoNotOptimize(smallest_eigs(H, 1));
}
BENCHMARK(BM_smallest_eig)->Arg(6001);

void BM_newton_solve(benchmark::State& state) {
    auto g = Grid::line(30.0, static_cast<int>(state.range(0)));
    ProblemSpec prob = well_problem();
    LinearGroundState lin = linear_ground_state(prob.potential, g);
    BranchPoint seed = seed_from_zero(prob, lin, 0.1);
    Field guess = seed.psi;
    guess *= 1.02;
    ContinuationConfig cfg;
    cfg.track_eigs = false;
    for (auto _ : state)
        benchmark::DoNotOptimize(
            newton_solve(prob, guess, seed.E, 1e-10, PFrame::physical, cfg));
}
BENCHMARK(BM_newton_solve)->Arg(6001);

} // namespace

BENCHMARK_MAIN();
