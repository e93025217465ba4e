// Serial reference vs OpenMP kernels on a 64x64x32 grid.
#include <benchmark/benchmark.h>

#include <vector>

#include "swreg/augment.hpp"
#include "swreg/kernels.hpp"
#include "swreg/rng.hpp"

namespace {

using namespace swreg;

const Dims kDims{64, 64, 32};

struct Fixture {
    std::vector<double> vol;
    Ddf a, b;
    Fixture() : vol(kDims.voxels()) {
        Rng rng(7);
        for (double& v : vol) v = rng.uniform();
        a = sample_warpddf(rng, AugConfig{}, kDims);
        b = sample_warpddf(rng, AugConfig{}, kDims);
    }
};

const Fixture& fixture() {
    static const Fixture f;
    return f;
}

template <auto Warp>
void BM_warp(benchmark::State& state) {
    const Fixture& f = fixture();
    std::vector<double> out(kDims.voxels());
    for (auto _ : state) {
        Warp(f.vol, kDims, f.a.data(), out);
        benchmark::DoNotOptimize(out.data());
    }
}

template <auto Grad>
void BM_warp_grad(benchmark::State& state) {
    const Fixture& f = fixture();
    std::vector<double> g(3 * kDims.voxels());
    for (auto _ : state) {
        Grad(f.vol, kDims, f.a.data(), f.vol, g);
        benchmark::DoNotOptimize(g.data());
    }
}

template <auto Compose>
void BM_compose(benchmark::State& state) {
    const Fixture& f = fixture();
    std::vector<double> out(3 * kDims.voxels());
    for (auto _ : state) {
        Compose(f.a.data(), f.b.data(), kDims, out);
        benchmark::DoNotOptimize(out.data());
    }
}

template <auto Up>
void BM_upsample(benchmark::State& state) {
    const Dims c{8, 8, 4};
    std::vector<double> coarse(3 * c.voxels(), 0.5), fine(3 * kDims.voxels());
    for (auto _ : state) {
        Up(coarse, c, 3, kDims, fine);
        benchmark::DoNotOptimize(fine.data());
    }
}

template <auto Adj>
void BM_upsample_adjoint(benchmark::State& state) {
    const Dims c{8, 8, 4};
    std::vector<double> fine(3 * kDims.voxels(), 0.25), coarse(3 * c.voxels());
    for (auto _ : state) {
        Adj(fine, kDims, 3, c, coarse);
        benchmark::DoNotOptimize(coarse.data());
    }
}

BENCHMARK(BM_warp<kernels::serial::warp>)->Name("warp/serial");
BENCHMARK(BM_warp<kernels::omp::warp>)->Name("warp/omp");
BENCHMARK(BM_warp_grad<kernels::serial::warp_ddf_grad>)->Name("warp_ddf_grad/serial");
BENCHMARK(BM_warp_grad<kernels::omp::warp_ddf_grad>)->Name("warp_ddf_grad/omp");
BENCHMARK(BM_compose<kernels::serial::compose>)->Name("compose/serial");
BENCHMARK(BM_compose<kernels::omp::compose>)->Name("compose/omp");
BENCHMARK(BM_upsample<kernels::serial::upsample>)->Name("upsample/serial");
BENCHMARK(BM_upsample<kernels::omp::upsample>)->Name("upsample/omp");
BENCHMARK(BM_upsample_adjoint<kernels::serial::upsample_adjoint>)->Name("upsample_adjoint/serial");
BENCHMARK(BM_upsample_adjoint<kernels::omp::upsample_adjoint>)->Name("upsample_adjoint/omp");

}  // namespace

BENCHMARK_MAIN();
