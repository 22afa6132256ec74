#include "doctest.h"

#include "sdslab/pipeline.hpp"
#include "test_util.hpp"

#include <cmath>
#include <filesystem>

using namespace sdslab;
namespace tt = sdslab::test;

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;

// Posterior-optimal epsilon for an isotropic Gaussian around the true
// projection of `spec` at the query view: a perfect per-pose teacher.
DenoiserFn projection_oracle(const ShapeSpec& spec, int res, double std_dev,
                             const NoiseSchedule& sched) {
    return [spec, res, std_dev, &sched](const Vec& x_t, int t, const Condition& cond) {
        const Vec mean = shape_projection(spec, cond.angle, res);
        const double a = sched.alpha[t], s = sched.sigma[t];
        const double var = a * a * std_dev * std_dev + s * s;
        Vec eps(x_t.size());
        for (size_t i = 0; i < eps.size(); ++i) eps[i] = s * (x_t[i] - a * mean[i]) / var;
        return eps;
    };
}

RunConfig tiny_config() {
    RunConfig cfg;
    cfg.level_res = {4, 8};
    cfg.render_res_one = 8;
    cfg.render_res_two = 16;
    cfg.teacher_res = 8;
    cfg.objective.lambda_reg = 0.0;
    return cfg;
}
} // namespace

TEST_CASE("AdamW leaves parameters alone with zero gradient and no decay") {
    AdamW opt(AdamWConfig{.lr = 0.1, .weight_decay = 0.0});
    Vec params{1.0, -2.0, 0.5};
    const Vec before = params;
    Vec zeros(3, 0.0);
    opt.update(params, zeros);
    opt.update(params, zeros);
    CHECK(params == before);
    CHECK(opt.steps_taken() == 2);
}

TEST_CASE("AdamW first step moves each parameter by approximately lr") {
    AdamW opt(AdamWConfig{.lr = 0.05, .weight_decay = 0.0});
    Vec params{0.3, -1.0};
    const Vec grads{1.0, -1.0}; // bias-corrected m/sqrt(v) = sign(g)
    opt.update(params, grads);
    CHECK(tt::rel_err(0.3 - params[0], 0.05) < 1e-6);
    CHECK(tt::rel_err(params[1] + 1.0, 0.05) < 1e-6);
}

TEST_CASE("AdamW applies decoupled decay even at zero gradient") {
    AdamW opt(AdamWConfig{.lr = 0.1, .weight_decay = 0.5});
    Vec params{2.0};
    opt.update(params, Vec{0.0});
    CHECK(params[0] == doctest::Approx(2.0 * (1.0 - 0.1 * 0.5)).epsilon(1e-12));
}

TEST_CASE("AdamW rejects bad gradients") {
    AdamW opt;
    Vec params{1.0, 2.0};
    CHECK_THROWS_AS(opt.update(params, Vec{1.0}), std::invalid_argument);
    CHECK_THROWS_AS(opt.update(params, Vec{1.0, std::nan("")}), std::domain_error);
    CHECK(params == Vec{1.0, 2.0}); // rejected updates must not touch state
}

TEST_CASE("AdamW is deterministic") {
    Rng rng(3);
    AdamW a(AdamWConfig{}), b(AdamWConfig{});
    Vec pa{0.1, 0.2, 0.3}, pb{0.1, 0.2, 0.3};
    for (int i = 0; i < 20; ++i) {
        const Vec g = rng.normal_vec(3);
        a.update(pa, g);
        b.update(pb, g);
    }
    CHECK(pa == pb);
}

TEST_CASE("an empty config resolves to the documented defaults") {
    ConfigMap empty = ConfigMap::parse_text("");
    const RunConfig cfg = RunConfig::from_config(empty);
    CHECK(cfg.seed == 0);
    CHECK(cfg.iters_stage_one == 3000);
    CHECK(cfg.iters_stage_two == 3000);
    CHECK(cfg.ref_prob == 0.25);
    CHECK(cfg.level_res == std::vector<int>{4, 8, 16, 32, 64});
    CHECK(cfg.render_res_two == 128);
    CHECK(cfg.t_max == 980);
    CHECK(cfg.schedule == TScheduleKind::annealed);
    CHECK(cfg.T == 1000);
}

TEST_CASE("resolved config text round-trips exactly") {
    RunConfig cfg = tiny_config();
    cfg.seed = 123;
    cfg.lr = 0.0125;
    cfg.schedule = TScheduleKind::linear;
    cfg.sds.weight_kind = WeightKind::constant;
    cfg.view_checkpoint = "teachers/view.dtck";
    const std::string text = cfg.to_config_text();

    ConfigMap parsed = ConfigMap::parse_text(text, "roundtrip");
    const RunConfig again = RunConfig::from_config(parsed);
    CHECK(again.to_config_text() == text);
    CHECK(again.seed == 123);
    CHECK(again.lr == 0.0125);
    CHECK(again.schedule == TScheduleKind::linear);
    CHECK(again.view_checkpoint == "teachers/view.dtck");
}

TEST_CASE("config rejects unknown keys and bad enum values") {
    ConfigMap unknown = ConfigMap::parse_text("[run]\nmystery = 1\n");
    CHECK_THROWS_WITH_AS(RunConfig::from_config(unknown), doctest::Contains("run.mystery"),
                         ConfigError);

    ConfigMap bad_sched = ConfigMap::parse_text("[curriculum]\nschedule = cosine\n");
    CHECK_THROWS_AS(RunConfig::from_config(bad_sched), ConfigError);
    ConfigMap bad_weight = ConfigMap::parse_text("[sds]\nweight_kind = quadratic\n");
    CHECK_THROWS_AS(RunConfig::from_config(bad_weight), ConfigError);
    ConfigMap bad_levels = ConfigMap::parse_text("[student]\nlevels = 4,eight\n");
    CHECK_THROWS_AS(RunConfig::from_config(bad_levels), ConfigError);
}

TEST_CASE("config validation rejects out-of-range values") {
    auto reject = [](void (*tweak)(RunConfig&)) {
        RunConfig cfg;
        tweak(cfg);
        CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    };
    reject([](RunConfig& c) { c.ref_prob = 1.5; });
    reject([](RunConfig& c) { c.iters_stage_one = -1; });
    reject([](RunConfig& c) { c.lr = 0.0; });
    reject([](RunConfig& c) { c.shape.value = 0.0; });
    reject([](RunConfig& c) { c.level_res.clear(); });
    reject([](RunConfig& c) { c.render_res_two = c.render_res_one; });
    reject([](RunConfig& c) { c.teacher_res = 3; });
    reject([](RunConfig& c) { c.t_min = 0; });
    reject([](RunConfig& c) { c.t_min = c.t_max; });
    reject([](RunConfig& c) { c.t_max = c.T + 1; });
    reject([](RunConfig& c) { c.step_len = 0; });
    reject([](RunConfig& c) { c.delta_min = c.delta_max + 1; });
    reject([](RunConfig& c) { c.smooth_samples = 0; });
    reject([](RunConfig& c) { c.sds.multi_step_count = 0; });
    CHECK_NOTHROW(RunConfig{}.validate());
}

TEST_CASE("run csv header lists the run-log columns in order") {
    const std::vector<std::string> want = {"stage",    "k",      "branch",        "t",
                                           "pose",     "lambda", "rec_loss",      "reg_loss",
                                           "sds_grad_norm", "grad_norm"};
    CHECK(kRunCsvHeader == want);
}

TEST_CASE("a forced reference iteration never consults the teachers") {
    RunConfig cfg = tiny_config();
    cfg.iters_stage_one = 1;
    cfg.ref_prob = 1.0;
    cfg.objective.lambda_reg = 0.01; // regularizer path must not need teachers either

    PyramidField field = make_pyramid(cfg.level_res, cfg.render_res_one);
    const NoiseSchedule sched = make_schedule(cfg.T, cfg.diffusion_kind);
    RunRecord record;
    // No teachers at all: the reference branch is teacher-free.
    CHECK(run_stage(field, DualTeacher{}, cfg, Stage::one, sched, RngPool(1), record));
    REQUIRE(record.rows.size() == 1);
    const RunRow& row = record.rows[0];
    CHECK(row.branch == 'r');
    CHECK(row.t == -1);
    CHECK(row.stage == 1);
    CHECK(row.k == 0);
    CHECK(row.pose == cfg.ref_angle);
    CHECK(row.rec > 0.0); // zero field vs. a real shape
    CHECK(row.reg == 0.0);
    CHECK(std::isfinite(row.grad_norm));
    CHECK(record.status == "completed");
}

TEST_CASE("the reference branch is taken at the configured rate") {
    RunConfig cfg = tiny_config();
    cfg.level_res = {4};
    cfg.render_res_one = 4;
    cfg.render_res_two = 8;
    cfg.teacher_res = 4;
    cfg.iters_stage_one = 10000;
    cfg.ref_prob = 0.25;

    DualTeacher teachers;
    teachers.res = 4;
    teachers.coarse = [](const Vec& x, int, const Condition&) { return Vec(x.size(), 0.0); };

    PyramidField field = make_pyramid(cfg.level_res, cfg.render_res_one);
    const NoiseSchedule sched = make_schedule(cfg.T, cfg.diffusion_kind);
    RunRecord record;
    REQUIRE(run_stage(field, teachers, cfg, Stage::one, sched, RngPool(9), record));
    long refs = 0;
    for (const RunRow& r : record.rows) refs += r.branch == 'r' ? 1 : 0;
    const double rate = static_cast<double>(refs) / static_cast<double>(record.rows.size());
    CHECK(rate > 0.23); // ~4.6 sigma of slack around 0.25
    CHECK(rate < 0.27);
}

TEST_CASE("distillation against a perfect teacher improves the render") {
    RunConfig cfg = tiny_config();
    cfg.iters_stage_one = 60;
    cfg.lr = 0.05;
    cfg.ref_prob = 0.2;

    const NoiseSchedule sched = make_schedule(cfg.T, cfg.diffusion_kind);
    DualTeacher teachers;
    teachers.res = cfg.teacher_res;
    teachers.coarse = projection_oracle(cfg.shape, cfg.teacher_res, 0.05, sched);

    PyramidField field = make_pyramid(cfg.level_res, cfg.render_res_one);
    const Grid gt = rasterize(cfg.shape, cfg.render_res_one);
    const Vec open(field.level_count(), 1.0);
    const double err0 = std::sqrt(mse(field_render(field, open), gt));

    RunRecord record;
    REQUIRE(run_stage(field, teachers, cfg, Stage::one, sched, RngPool(17), record));
    const double err1 = std::sqrt(mse(field_render(field, open), gt));
    CHECK(err1 < 0.7 * err0);
    for (const RunRow& r : record.rows)
        if (r.branch == 'u') CHECK(r.t >= 1);
}

TEST_CASE("run_stage is deterministic under a fixed pool root") {
    RunConfig cfg = tiny_config();
    cfg.iters_stage_one = 25;
    const NoiseSchedule sched = make_schedule(cfg.T, cfg.diffusion_kind);
    DualTeacher teachers;
    teachers.res = cfg.teacher_res;
    teachers.coarse = projection_oracle(cfg.shape, cfg.teacher_res, 0.05, sched);

    PyramidField fa = make_pyramid(cfg.level_res, cfg.render_res_one);
    PyramidField fb = make_pyramid(cfg.level_res, cfg.render_res_one);
    RunRecord ra, rb;
    REQUIRE(run_stage(fa, teachers, cfg, Stage::one, sched, RngPool(21), ra));
    REQUIRE(run_stage(fb, teachers, cfg, Stage::one, sched, RngPool(21), rb));
    CHECK(flatten_params(fa) == flatten_params(fb));
    REQUIRE(ra.rows.size() == rb.rows.size());
    for (size_t i = 0; i < ra.rows.size(); ++i) {
        CHECK(ra.rows[i].branch == rb.rows[i].branch);
        CHECK(ra.rows[i].t == rb.rows[i].t);
        CHECK(ra.rows[i].pose == rb.rows[i].pose);
        CHECK(ra.rows[i].grad_norm == rb.rows[i].grad_norm);
    }
}

TEST_CASE("a zero-iteration distillation reports the untouched field") {
    RunConfig cfg = tiny_config();
    cfg.iters_stage_one = 0;
    cfg.iters_stage_two = 0;
    const std::string dir = tt::temp_dir("distill0");

    const RunRecord rec = distill(cfg, DualTeacher{}, dir);
    CHECK(rec.rows.empty());
    CHECK(rec.status == "completed");
    CHECK(rec.final_psnr == rec.initial_psnr); // identical zero field both times
    CHECK(rec.final_mask_iou == 0.0);
    CHECK(rec.final_laplacian == -1.0); // constant field has no contour

    namespace fs = std::filesystem;
    CHECK(tt::read_file(dir + "/run.csv") ==
          "stage,k,branch,t,pose,lambda,rec_loss,reg_loss,sds_grad_norm,grad_norm\n");
    CHECK(fs::exists(dir + "/metrics.csv"));
    CHECK(fs::exists(dir + "/final.pgm"));
    CHECK(tt::read_file(dir + "/resolved.cfg") == cfg.to_config_text());
}

TEST_CASE("distill produces byte-identical artifacts across reruns") {
    RunConfig cfg = tiny_config();
    cfg.iters_stage_one = 8;
    cfg.iters_stage_two = 8;
    cfg.lr = 0.02;
    cfg.seed = 404;

    const NoiseSchedule sched = make_schedule(cfg.T, cfg.diffusion_kind);
    DualTeacher teachers;
    teachers.res = cfg.teacher_res;
    teachers.coarse = projection_oracle(cfg.shape, cfg.teacher_res, 0.05, sched);
    teachers.fine = teachers.coarse;

    const std::string da = tt::temp_dir("distillA");
    const std::string db = tt::temp_dir("distillB");
    const RunRecord ra = distill(cfg, teachers, da);
    const RunRecord rb = distill(cfg, teachers, db);
    CHECK(ra.status == "completed");
    CHECK(ra.final_psnr == rb.final_psnr);
    for (const char* name : {"/run.csv", "/metrics.csv", "/final.pgm", "/resolved.cfg"})
        CHECK(tt::read_file(da + name) == tt::read_file(db + name));
}

TEST_CASE("distill_from_config verifies checkpoints before running") {
    RunConfig cfg = tiny_config();
    cfg.iters_stage_one = 2;
    cfg.iters_stage_two = 2;
    cfg.dual_teacher = false;

    // Unset and missing paths fail fast.
    CHECK_THROWS_AS(distill_from_config(cfg), std::invalid_argument);
    cfg.view_checkpoint = tt::temp_dir("ckpt") + "/absent.dtck";
    CHECK_THROWS_AS(distill_from_config(cfg), std::runtime_error);

    // A checkpoint trained for the wrong projection length is rejected.
    const std::string dir = tt::temp_dir("ckpt2");
    Rng rng(7);
    DenoiserModel narrow = make_denoiser(4, cfg.T, CondKind::view, 8, 1, 2, 2, rng);
    save_checkpoint(narrow, dir + "/narrow.dtck");
    cfg.view_checkpoint = dir + "/narrow.dtck";
    CHECK_THROWS_AS(distill_from_config(cfg), std::invalid_argument);

    // Matching resolutions load and run end to end.
    DenoiserModel view = make_denoiser(cfg.teacher_res, cfg.T, CondKind::view, 8, 1, 2, 2, rng);
    DenoiserModel cls =
        make_denoiser(cfg.teacher_res, cfg.T, CondKind::class_label, 8, 1, 2, 2, rng);
    save_checkpoint(view, dir + "/view.dtck");
    save_checkpoint(cls, dir + "/class.dtck");
    cfg.view_checkpoint = dir + "/view.dtck";
    cfg.class_checkpoint = dir + "/class.dtck";
    cfg.dual_teacher = true;
    const RunRecord rec = distill_from_config(cfg);
    CHECK(rec.status == "completed");
    CHECK(rec.rows.size() == 4);
}
