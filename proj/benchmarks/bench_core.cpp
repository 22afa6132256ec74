// Microbenchmarks for the hot paths of the distillation loop: rasterization,
// field rendering, the projection pair, teacher evaluation, DDIM chains and
// the full per-iteration gradient.

#include <benchmark/benchmark.h>

#include "sdslab/diffusion.hpp"
#include "sdslab/sds.hpp"
#include "sdslab/shapes.hpp"
#include "sdslab/student.hpp"
#include "sdslab/teacher.hpp"

using namespace sdslab;

namespace {

PyramidField random_field(int render_res, uint64_t seed) {
    PyramidField field = make_pyramid({4, 8, 16, 32, 64}, render_res);
    Rng rng(seed);
    for (Grid& level : field.levels)
        for (double& v : level.v) v = rng.uniform(-0.1, 0.4);
    return field;
}

DenoiserModel bench_model(int data_dim) {
    Rng rng(11);
    return make_denoiser(data_dim, 1000, CondKind::view, 256, 3, 2, 8, rng);
}

} // namespace

static void BM_Rasterize(benchmark::State& state) {
    const ShapeSpec spec;
    const int res = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(rasterize(spec, res));
}
BENCHMARK(BM_Rasterize)->Arg(32)->Arg(128);

static void BM_FieldRender(benchmark::State& state) {
    const int res = static_cast<int>(state.range(0));
    const PyramidField field = random_field(res, 21);
    const Vec mask(field.level_count(), 1.0);
    for (auto _ : state) benchmark::DoNotOptimize(field_render(field, mask));
}
BENCHMARK(BM_FieldRender)->Arg(32)->Arg(128);

static void BM_Project(benchmark::State& state) {
    const int res = static_cast<int>(state.range(0));
    const PyramidField field = random_field(res, 22);
    const Grid grid = field_render(field, Vec(field.level_count(), 1.0));
    const ViewPose pose = ViewPose::at(0.7);
    for (auto _ : state) benchmark::DoNotOptimize(project(grid, pose));
}
BENCHMARK(BM_Project)->Arg(32)->Arg(128);

static void BM_ProjectAdjoint(benchmark::State& state) {
    const int res = static_cast<int>(state.range(0));
    Rng rng(23);
    const Vec grad = rng.normal_vec(static_cast<size_t>(res));
    const ViewPose pose = ViewPose::at(0.7);
    for (auto _ : state) benchmark::DoNotOptimize(project_adjoint(grad, pose, res));
}
BENCHMARK(BM_ProjectAdjoint)->Arg(32)->Arg(128);

static void BM_MlpForward(benchmark::State& state) {
    const DenoiserModel model = bench_model(32);
    Rng rng(31);
    const Vec x = rng.normal_vec(32);
    const Condition cond = Condition::view_at(0.4);
    for (auto _ : state) benchmark::DoNotOptimize(mlp_forward(model, x, 500, cond));
}
BENCHMARK(BM_MlpForward);

static void BM_MlpVjp(benchmark::State& state) {
    const DenoiserModel model = bench_model(32);
    Rng rng(32);
    const Vec x = rng.normal_vec(32);
    const Vec gout = rng.normal_vec(32);
    const Condition cond = Condition::view_at(0.4);
    for (auto _ : state) benchmark::DoNotOptimize(mlp_vjp(model, x, 500, cond, gout));
}
BENCHMARK(BM_MlpVjp);

static void BM_GmmOracle(benchmark::State& state) {
    GaussianMixture gmm;
    gmm.dim = 32;
    gmm.weights = {0.5, 0.5};
    gmm.means.assign(2, Vec(32, 0.0));
    gmm.means[0][0] = 1.0;
    gmm.means[1][0] = -1.0;
    gmm.std = {0.3, 0.3};
    const NoiseSchedule sched = make_schedule(1000, ScheduleKind::cosine);
    const DenoiserFn oracle = gmm_eps_oracle(gmm, sched);
    Rng rng(41);
    const Vec x = rng.normal_vec(32);
    const Condition cond = Condition::unconditional();
    for (auto _ : state) benchmark::DoNotOptimize(oracle(x, 700, cond));
}
BENCHMARK(BM_GmmOracle);

static void BM_DdimDenoise(benchmark::State& state) {
    const DenoiserModel model = bench_model(32);
    const DenoiserFn teacher = guided_denoiser(model, 5.0);
    const NoiseSchedule sched = make_schedule(1000, ScheduleKind::cosine);
    Rng rng(51);
    const NoisySample x_t{rng.normal_vec(32), 800};
    const Condition cond = Condition::view_at(0.4);
    const int steps = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(ddim_denoise(x_t, teacher, cond, steps, sched));
}
BENCHMARK(BM_DdimDenoise)->Arg(4)->Arg(8);

static void BM_DtcGrad(benchmark::State& state) {
    const PyramidField field = random_field(128, 61);
    const Vec mask(field.level_count(), 1.0);
    const DenoiserModel view = bench_model(32);
    const DenoiserModel cls = bench_model(32);
    DualTeacher teachers;
    teachers.coarse = guided_denoiser(view, 5.0);
    teachers.fine = guided_denoiser(cls, 25.0);
    teachers.res = 32;
    CurriculumState st;
    st.N = 3000;
    st.k = 2500;
    st.stage = Stage::two;
    const NoiseSchedule sched = make_schedule(1000, ScheduleKind::cosine);
    // t above the switch runs one teacher call, below it a DDIM sub-chain.
    const int t = static_cast<int>(state.range(0));
    Rng rng(62);
    for (auto _ : state)
        benchmark::DoNotOptimize(dtc_grad(field, mask, ViewPose::at(0.9), ViewPose::at(0.0), 0, t,
                                          teachers, st, SdsConfig{}, DebiasConfig{}, sched, rng));
}
BENCHMARK(BM_DtcGrad)->Arg(600)->Arg(150);

static void BM_NormalSmoothLoss(benchmark::State& state) {
    const PyramidField field = random_field(128, 71);
    const Grid grid = field_render(field, Vec(field.level_count(), 1.0));
    Rng rng(72);
    for (auto _ : state) benchmark::DoNotOptimize(normal_smooth_loss(grid, 1.0, rng, 64));
}
BENCHMARK(BM_NormalSmoothLoss);

BENCHMARK_MAIN();
