#include <benchmark/benchmark.h>

#include "ssc/pointgrid.hpp"
#include "ssc/scene.hpp"
#include "ssc/synth.hpp"
#include "ssc/volumes.hpp"

using namespace ssc;

namespace {

SyntheticScene bench_scene() {
    const ClassPalette& pal = ClassPalette::indoor11();
    SceneRecipe recipe;
    recipe.seed = 77;
    return generate(recipe, pal, ShapeLibrary::builtin(pal));
}

}  // namespace

static void BuildTsdf(benchmark::State& state) {
    SyntheticScene scene = bench_scene();
    for (auto _ : state)
        benchmark::DoNotOptimize(build_tsdf(scene.depth, scene.cam, scene.recipe.grid, 0.24f));
}
BENCHMARK(BuildTsdf)->Unit(benchmark::kMillisecond);

static void ProjectSemantics(benchmark::State& state) {
    SyntheticScene scene = bench_scene();
    for (auto _ : state)
        benchmark::DoNotOptimize(project_semantics(scene.seg2d, scene.depth, scene.cam, scene.recipe.grid));
}
BENCHMARK(ProjectSemantics)->Unit(benchmark::kMillisecond);

static void HeuristicCompletion(benchmark::State& state) {
    SyntheticScene scene = bench_scene();
    auto [tsdf, sem] = occlude(scene);
    HeuristicSceneCompleter completer;
    for (auto _ : state) benchmark::DoNotOptimize(completer.complete(tsdf, sem));
}
BENCHMARK(HeuristicCompletion)->Unit(benchmark::kMillisecond);

static void Gridding(benchmark::State& state) {
    Rng rng(5);
    PointCloud pts;
    for (int i = 0; i < state.range(0); ++i)
        pts.push_back({float(rng.uniform(-1, 1)), float(rng.uniform(-1, 1)), float(rng.uniform(-1, 1))});
    for (auto _ : state) benchmark::DoNotOptimize(gridding(pts, {32, 32, 32}));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(Gridding)->RangeMultiplier(4)->Range(1024, 65536)->Complexity();
