#include <benchmark/benchmark.h>

#include "ssc/completers.hpp"
#include "ssc/loop.hpp"
#include "ssc/synth.hpp"

using namespace ssc;

static void FullLoop(benchmark::State& state) {
    const ClassPalette& pal = ClassPalette::indoor11();
    auto lib = std::make_shared<const ShapeLibrary>(ShapeLibrary::builtin(pal));
    SceneRecipe recipe;
    recipe.seed = 99;
    SyntheticScene scene = generate(recipe, pal, *lib);
    auto [tsdf_v, sem] = occlude(scene);
    auto tsdf = std::make_shared<const TsdfVolume>(std::move(tsdf_v));

    LoopConfig cfg;
    cfg.iterations = int(state.range(0));
    cfg.early_stop_fraction = 0;
    LoopDependencies deps;
    deps.palette = &pal;
    deps.camera_origin = scene.cam.translation;
    deps.scene = make_scene_completer("heuristic");
    deps.instance = make_instance_completer("shape_prior", lib, {}, 1024, 0, 0);

    for (auto _ : state) benchmark::DoNotOptimize(run_loop(tsdf, sem, cfg, deps));
}
BENCHMARK(FullLoop)->Arg(0)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);
