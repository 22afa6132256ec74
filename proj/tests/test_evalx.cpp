#include "doctest.h"

#include "sdslab/evalx.hpp"
#include "test_util.hpp"

#include <cmath>

using namespace sdslab;
namespace tt = sdslab::test;

namespace {
GaussianMixture two_modes() {
    GaussianMixture gmm;
    gmm.dim = 2;
    gmm.weights = {0.5, 0.5};
    gmm.means = {Vec{-1.0, 0.0}, Vec{1.0, 0.0}};
    gmm.std = {0.3, 0.3};
    return gmm;
}

DenoiserFn zero_teacher() {
    return [](const Vec& x, int, const Condition&) { return Vec(x.size(), 0.0); };
}
} // namespace

TEST_CASE("psnr matches closed forms and saturates on identical grids") {
    const Grid a = Grid::constant(4, 4, 0.3);
    CHECK(psnr(a, a, 1.0) == 99.0);
    CHECK(psnr(a, Grid::constant(4, 4, 0.4), 1.0) == doctest::Approx(20.0).epsilon(1e-12));
    const Grid far = Grid::constant(4, 4, 0.8);
    CHECK(psnr(a, far, 1.0) ==
          doctest::Approx(10.0 * std::log10(1.0 / 0.25)).epsilon(1e-12));
    CHECK(psnr(a, far, 1.0) == psnr(far, a, 1.0));
    CHECK_THROWS_AS(psnr(a, far, 0.0), std::invalid_argument);
}

TEST_CASE("mask_iou counts thresholded overlap") {
    Grid a(1, 3), b(1, 3);
    a.v = {0.0, 1.0, 1.0};
    b.v = {1.0, 1.0, 0.0};
    CHECK(mask_iou(a, b, 0.5) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(mask_iou(a, a, 0.5) == 1.0);
    const Grid z = Grid::constant(2, 2, 0.0);
    CHECK(mask_iou(z, z, 0.5) == 1.0); // both empty counts as agreement
    CHECK(mask_iou(z, Grid::constant(2, 2, 1.0), 0.5) == 0.0);
}

TEST_CASE("pairwise_ssim matches the constant-window closed form") {
    const std::vector<Grid> same = {Grid::constant(8, 8, 0.3), Grid::constant(8, 8, 0.3)};
    CHECK(pairwise_ssim(same) == doctest::Approx(1.0).epsilon(1e-12));

    const double u = 0.2, v = 0.4, c1 = 0.01 * 0.01;
    const std::vector<Grid> flat = {Grid::constant(8, 8, u), Grid::constant(8, 8, v)};
    CHECK(pairwise_ssim(flat) ==
          doctest::Approx((2 * u * v + c1) / (u * u + v * v + c1)).epsilon(1e-9));

    // Independent noise fields are nearly orthogonal.
    Rng rng(50);
    std::vector<Grid> noise;
    for (int i = 0; i < 5; ++i) {
        Grid g(64, 64);
        for (double& e : g.v) e = rng.uniform();
        noise.push_back(std::move(g));
    }
    CHECK(pairwise_ssim(noise) < 0.1);

    CHECK_THROWS_AS(pairwise_ssim({Grid(8, 8)}), std::invalid_argument);
    CHECK_THROWS_AS(pairwise_ssim({Grid(8, 8), Grid(4, 4)}), std::invalid_argument);
}

TEST_CASE("theory_curve reports a flat zero error profile for the exact oracle") {
    const NoiseSchedule sched = make_schedule(1000, ScheduleKind::cosine);
    const GaussianMixture gmm = two_modes();
    const DenoiserFn oracle = gmm_eps_oracle(gmm, sched);

    Rng rng(60);
    const std::vector<double> mags = {0.0, 0.5, 1.0};
    const std::vector<int> ts = {100, 400, 800};
    const TheoryCurve curve = theory_curve(gmm, oracle, mags, ts, 1e-6, 20, sched, rng);

    REQUIRE(curve.cells.size() == mags.size() * ts.size());
    for (const TheoryCell& cell : curve.cells) CHECK(cell.err == 0.0);
    REQUIRE(curve.minimal_t.size() == mags.size());
    for (size_t i = 0; i < mags.size(); ++i) {
        CHECK(curve.minimal_t[i].first == mags[i]);
        CHECK(curve.minimal_t[i].second == ts.front()); // already adequate at the smallest t
    }
    CHECK(curve.epsilon == 1e-6);

    CHECK_THROWS_AS(theory_curve(gmm, oracle, mags, ts, 1e-6, 0, sched, rng),
                    std::invalid_argument);
    CHECK_THROWS_AS(theory_curve(gmm, oracle, {}, ts, 1e-6, 5, sched, rng),
                    std::invalid_argument);
    CHECK_THROWS_AS(theory_curve(gmm, oracle, mags, {}, 1e-6, 5, sched, rng),
                    std::invalid_argument);
}

TEST_CASE("variance_check returns exact agreement at t = 0") {
    const NoiseSchedule sched = make_schedule(1000, ScheduleKind::cosine);
    Rng rng(61);
    const Vec reference = rng.normal_vec(8);
    Rng draw(62);
    const VarianceResult res =
        variance_check(zero_teacher(), Condition::unconditional(), reference, 0, 3, 2, 2, sched,
                       draw);
    CHECK(res.ssim_full == 1.0); // t = 0 adds no noise and denoising passes through
    CHECK(res.ssim_low == 1.0);
    REQUIRE(res.full_stack.rows == 3);
    REQUIRE(res.full_stack.cols == 8);
    REQUIRE(res.low_stack.rows == 3);
    REQUIRE(res.low_stack.cols == 4);
    for (int m = 0; m < 3; ++m)
        for (int i = 0; i < 8; ++i) CHECK(res.full_stack.at(m, i) == reference[i]);

    CHECK_THROWS_AS(variance_check(zero_teacher(), Condition::unconditional(), reference, 0, 1, 2,
                                   2, sched, draw),
                    std::invalid_argument);
}

TEST_CASE("downsampling raises the agreement between noisy denoised draws") {
    const NoiseSchedule sched = make_schedule(1000, ScheduleKind::cosine);
    Vec reference(32);
    for (size_t i = 0; i < reference.size(); ++i) reference[i] = static_cast<double>(i) / 31.0;

    // Denoises 90% of the way back to the reference ramp, so each draw is
    // signal plus leftover per-draw noise; block means shrink exactly that
    // noise while keeping the shared ramp.
    const DenoiserFn shrink = [&reference, &sched](const Vec& x_t, int t, const Condition&) {
        const double a = sched.alpha[t], s = sched.sigma[t];
        Vec eps(x_t.size());
        for (size_t i = 0; i < eps.size(); ++i)
            eps[i] = 0.9 * (x_t[i] - a * reference[i]) / s;
        return eps;
    };
    Rng draw(63);
    const VarianceResult res = variance_check(shrink, Condition::unconditional(), reference, 800,
                                              8, 4, 1, sched, draw);
    CHECK(res.ssim_low > res.ssim_full + 0.05);
}

TEST_CASE("teacher_compare scores identical teachers identically") {
    const NoiseSchedule sched = make_schedule(1000, ScheduleKind::cosine);
    Rng corpus_rng(64);
    const ShapeCorpus corpus = make_corpus(4, 3, corpus_rng);
    const GaussianMixture gmm = two_modes();
    // The oracle ignores its condition, so view and class scoring coincide.
    const DenoiserFn teacher = gmm_eps_oracle(GaussianMixture{.dim = 16,
                                                              .weights = Vec{1.0},
                                                              .means = {Vec(16, 0.1)},
                                                              .std = Vec{0.5}},
                                              sched);

    Rng rng(65);
    const std::vector<int> ts = {200, 800};
    const auto rows =
        teacher_compare(teacher, teacher, corpus.holdout, ts, 16, 0.05, 2, 2, sched, rng);
    REQUIRE(rows.size() == ts.size());
    for (size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].t == ts[i]);
        CHECK(rows[i].iou_view == rows[i].iou_class);
        CHECK(rows[i].iou_view >= 0.0);
        CHECK(rows[i].iou_view <= 1.0);
    }

    Rng rng2(66);
    CHECK_THROWS_AS(teacher_compare(teacher, teacher, {}, ts, 16, 0.05, 2, 2, sched, rng2),
                    std::invalid_argument);
}

TEST_CASE("ablate marks below-threshold runs as failures and is reproducible") {
    RunConfig base;
    base.level_res = {4, 8};
    base.render_res_one = 8;
    base.render_res_two = 16;
    base.teacher_res = 8;
    base.iters_stage_one = 0; // untouched zero field scores far below threshold
    base.iters_stage_two = 0;

    std::vector<AblationCell> cells(2);
    cells[1].schedule = TScheduleKind::random;
    cells[1].mask_on = false;
    cells[1].dual_teacher = false;

    const AblationGrid grid = ablate(base, cells, 3, DualTeacher{}, 12.0);
    REQUIRE(grid.cells.size() == 2);
    for (const AblationCell& cell : grid.cells) {
        CHECK(cell.seeds == 3);
        CHECK(cell.failure_rate == 1.0);
        CHECK(cell.mean_psnr < 12.0);
        CHECK(cell.mean_psnr > 0.0);
    }
    CHECK(grid.psnr_threshold == 12.0);

    const std::string fa = tt::temp_dir("ablate") + "/a.csv";
    const std::string fb = tt::temp_dir("ablate") + "/b.csv";
    write_ablation_csv(grid, fa);
    write_ablation_csv(ablate(base, cells, 3, DualTeacher{}, 12.0), fb);
    const std::string text = tt::read_file(fa);
    CHECK(text.substr(0, text.find('\n')) ==
          "schedule,mask,dual_teacher,seeds,failure_rate,mean_psnr");
    CHECK(text == tt::read_file(fb));

    CHECK_THROWS_AS(ablate(base, cells, 0, DualTeacher{}), std::invalid_argument);
}
