#include <benchmark/benchmark.h>

#include "ssc/instances.hpp"

using namespace ssc;

namespace {

PointCloud random_cloud(size_t n, uint64_t seed) {
    Rng rng(seed);
    PointCloud c;
    for (size_t i = 0; i < n; ++i)
        c.push_back({float(rng.uniform(-1, 1)), float(rng.uniform(-1, 1)), float(rng.uniform(-1, 1))});
    return c;
}

}  // namespace

static void ChamferSymmetric(benchmark::State& state) {
    PointCloud a = random_cloud(size_t(state.range(0)), 1);
    PointCloud b = random_cloud(size_t(state.range(0)), 2);
    for (auto _ : state) benchmark::DoNotOptimize(chamfer(a, b));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(ChamferSymmetric)->RangeMultiplier(4)->Range(64, 4096)->Complexity();

static void RetrievalCompleter(benchmark::State& state) {
    const ClassPalette& pal = ClassPalette::indoor11();
    auto lib = std::make_shared<const ShapeLibrary>(ShapeLibrary::builtin(pal));
    ShapePriorCompleter completer(lib, size_t(state.range(0)), 0, 0);
    PointCloud partial = resample_stride(lib->templates_for(5)[0]->points, 512, 1);
    std::vector<float> conf(11, 0.0f);
    conf[4] = 1.0f;
    for (auto _ : state) benchmark::DoNotOptimize(completer.complete(partial, conf, CanonicalFrame{}));
}
BENCHMARK(RetrievalCompleter)->Arg(256)->Arg(1024)->Arg(4096);
