#include "sdslab/evalx.hpp"

#include "sdslab/io.hpp"
#include "sdslab/sds.hpp"
#include "sdslab/student.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sdslab {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

double psnr(const Grid& a, const Grid& b, double peak) {
    if (peak <= 0.0) throw std::invalid_argument("psnr: peak must be positive");
    const double m = mse(a, b);
    if (m == 0.0) return 99.0;
    return 10.0 * std::log10(peak * peak / m);
}

double mask_iou(const Grid& a, const Grid& b, double threshold) {
    require_same_shape(a, b, "mask_iou");
    std::size_t inter = 0;
    std::size_t uni = 0;
    for (std::size_t i = 0; i < a.v.size(); ++i) {
        const bool pa = a.v[i] > threshold;
        const bool pb = b.v[i] > threshold;
        inter += (pa && pb) ? 1 : 0;
        uni += (pa || pb) ? 1 : 0;
    }
    if (uni == 0) return 1.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {

// SSIM with per-window uniform statistics; window shrinks to the grid when the
// grid is smaller than 8 in a dimension (so 1×R row vectors use 1×8 windows).
double ssim_pair(const Grid& a, const Grid& b) {
    const int wr = std::min(8, a.rows);
    const int wc = std::min(8, a.cols);
    const double c1 = 0.01 * 0.01;
    const double c2 = 0.03 * 0.03;
    const double n = static_cast<double>(wr) * wc;
    double acc = 0.0;
    int windows = 0;
    for (int r0 = 0; r0 + wr <= a.rows; ++r0) {
        for (int c0 = 0; c0 + wc <= a.cols; ++c0) {
            double sa = 0.0, sb = 0.0, saa = 0.0, sbb = 0.0, sab = 0.0;
            for (int r = r0; r < r0 + wr; ++r) {
                for (int c = c0; c < c0 + wc; ++c) {
                    const double x = a.at(r, c);
                    const double y = b.at(r, c);
                    sa += x;
                    sb += y;
                    saa += x * x;
                    sbb += y * y;
                    sab += x * y;
                }
            }
            const double mu_a = sa / n;
            const double mu_b = sb / n;
            const double var_a = saa / n - mu_a * mu_a;
            const double var_b = sbb / n - mu_b * mu_b;
            const double cov = sab / n - mu_a * mu_b;
            const double num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2);
            const double den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
            acc += num / den;
            ++windows;
        }
    }
    return acc / windows;
}

} // namespace

double pairwise_ssim(const std::vector<Grid>& grids) {
    if (grids.size() < 2) throw std::invalid_argument("pairwise_ssim: need at least two grids");
    for (std::size_t i = 1; i < grids.size(); ++i)
        require_same_shape(grids[0], grids[i], "pairwise_ssim");
    double acc = 0.0;
    int pairs = 0;
    for (std::size_t i = 0; i < grids.size(); ++i) {
        for (std::size_t j = i + 1; j < grids.size(); ++j) {
            acc += ssim_pair(grids[i], grids[j]);
            ++pairs;
        }
    }
    return acc / pairs;
}

TheoryCurve theory_curve(const GaussianMixture& gmm, const DenoiserFn& teacher,
                         const std::vector<double>& delta_mags, const std::vector<int>& t_grid,
                         double epsilon, int trials, const NoiseSchedule& sched, Rng& rng) {
    if (trials <= 0) throw std::invalid_argument("theory_curve: trials must be positive");
    if (delta_mags.empty() || t_grid.empty())
        throw std::invalid_argument("theory_curve: empty delta or t grid");
    const std::size_t dim = static_cast<std::size_t>(gmm.dim);
    const Condition none = Condition::unconditional();

    TheoryCurve out;
    out.epsilon = epsilon;
    for (double mag : delta_mags) {
        int best_t = -1;
        for (int t : t_grid) {
            double err = 0.0;
            for (int trial = 0; trial < trials; ++trial) {
                // Starting point: a mixture sample pushed ||δ|| in a random
                // direction, modelling an off-distribution render.
                Vec x = gmm_sample(gmm, rng);
                if (mag > 0.0) {
                    Vec dir = rng.normal_vec(dim);
                    const double dn = std::sqrt(std::max(norm2(dir), 1e-300));
                    for (std::size_t i = 0; i < dim; ++i) x[i] += mag * dir[i] / dn;
                }
                const Vec eps = rng.normal_vec(dim);
                const NoisySample xt = perturb(x, t, eps, sched);
                const Vec pred = teacher(xt.data, t, none);
                const Vec star = gmm_eps(gmm, xt, sched);
                double e = 0.0;
                for (std::size_t i = 0; i < dim; ++i) {
                    const double d = pred[i] - star[i];
                    e += d * d;
                }
                err += e;
            }
            err /= trials;
            out.cells.push_back({mag, t, err});
            if (best_t < 0 && err <= epsilon) best_t = t;
        }
        out.minimal_t.emplace_back(mag, best_t);
    }
    return out;
}

namespace {

// Un-normalized block mean: each low-res sample averages a contiguous run of
// `factor` entries. Vectors here are projections, so 1-D.
Vec downsample_vec(const Vec& v, int factor) {
    if (factor <= 0 || v.size() % static_cast<std::size_t>(factor) != 0)
        throw std::invalid_argument("downsample_vec: size must be a multiple of factor");
    Vec out(v.size() / factor, 0.0);
    for (std::size_t i = 0; i < out.size(); ++i) {
        double s = 0.0;
        for (int j = 0; j < factor; ++j) s += v[i * factor + j];
        out[i] = s / factor;
    }
    return out;
}

Grid row_grid(const Vec& v) {
    Grid g = Grid::zeros(1, static_cast<int>(v.size()));
    g.v = v;
    return g;
}

} // namespace

VarianceResult variance_check(const DenoiserFn& teacher, const Condition& cond,
                              const Vec& reference, int t, int M, int downsample, int ddim_steps,
                              const NoiseSchedule& sched, Rng& rng) {
    if (M < 2) throw std::invalid_argument("variance_check: need at least two draws");
    std::vector<Grid> full;
    std::vector<Grid> low;
    full.reserve(M);
    low.reserve(M);
    for (int m = 0; m < M; ++m) {
        const Vec eps = rng.normal_vec(reference.size());
        const NoisySample xt = perturb(reference, t, eps, sched);
        const DenoisedEstimate x0 = ddim_denoise(xt, teacher, cond, ddim_steps, sched);
        full.push_back(row_grid(x0.data));
        low.push_back(row_grid(downsample_vec(x0.data, downsample)));
    }
    VarianceResult res;
    res.ssim_full = pairwise_ssim(full);
    res.ssim_low = pairwise_ssim(low);
    res.full_stack = Grid::zeros(M, full.front().cols);
    res.low_stack = Grid::zeros(M, low.front().cols);
    for (int m = 0; m < M; ++m) {
        std::copy(full[m].v.begin(), full[m].v.end(),
                  res.full_stack.v.begin() + static_cast<std::ptrdiff_t>(m) * full[m].cols);
        std::copy(low[m].v.begin(), low[m].v.end(),
                  res.low_stack.v.begin() + static_cast<std::ptrdiff_t>(m) * low[m].cols);
    }
    return res;
}

std::vector<TeacherCompareRow> teacher_compare(const DenoiserFn& view_teacher,
                                               const DenoiserFn& class_teacher,
                                               const std::vector<ShapeSpec>& holdout,
                                               const std::vector<int>& t_list, int res,
                                               double threshold, int draws_per_shape,
                                               int ddim_steps, const NoiseSchedule& sched,
                                               Rng& rng) {
    if (holdout.empty()) throw std::invalid_argument("teacher_compare: empty holdout set");
    std::vector<TeacherCompareRow> rows;
    rows.reserve(t_list.size());
    for (int t : t_list) {
        double acc_view = 0.0;
        double acc_class = 0.0;
        int count = 0;
        for (const ShapeSpec& shape : holdout) {
            for (int d = 0; d < draws_per_shape; ++d) {
                const double angle = rng.uniform() * 2.0 * kPi;
                const Vec clean = shape_projection(shape, angle, res);
                const Vec eps = rng.normal_vec(clean.size());
                const NoisySample xt = perturb(clean, t, eps, sched);
                const Condition view_cond = Condition::view_at(angle);
                const Condition class_cond = Condition::of_class(shape.class_id);
                const DenoisedEstimate xv =
                    ddim_denoise(xt, view_teacher, view_cond, ddim_steps, sched);
                const DenoisedEstimate xc =
                    ddim_denoise(xt, class_teacher, class_cond, ddim_steps, sched);
                const Grid gt = row_grid(clean);
                acc_view += mask_iou(row_grid(xv.data), gt, threshold);
                acc_class += mask_iou(row_grid(xc.data), gt, threshold);
                ++count;
            }
        }
        rows.push_back({t, acc_view / count, acc_class / count});
    }
    return rows;
}

AblationGrid ablate(const RunConfig& base, const std::vector<AblationCell>& cells, int seeds,
                    const DualTeacher& teachers, double psnr_threshold) {
    if (seeds <= 0) throw std::invalid_argument("ablate: seeds must be positive");
    AblationGrid grid;
    grid.psnr_threshold = psnr_threshold;
    for (const AblationCell& cell : cells) {
        AblationCell filled = cell;
        int failures = 0;
        double psnr_sum = 0.0;
        for (int s = 0; s < seeds; ++s) {
            RunConfig cfg = base;
            cfg.seed = base.seed + static_cast<std::uint64_t>(s);
            cfg.schedule = cell.schedule;
            cfg.mask_on = cell.mask_on;
            cfg.dual_teacher = cell.dual_teacher;
            DualTeacher dt = teachers;
            if (!cell.dual_teacher) dt.fine = dt.coarse;
            const RunRecord rec = distill(cfg, dt, "");
            const bool finite = std::isfinite(rec.final_psnr);
            const bool failed =
                rec.status != "completed" || !finite || rec.final_psnr < psnr_threshold;
            failures += failed ? 1 : 0;
            psnr_sum += finite ? rec.final_psnr : 0.0;
        }
        filled.seeds = seeds;
        filled.failure_rate = static_cast<double>(failures) / seeds;
        filled.mean_psnr = psnr_sum / seeds;
        grid.cells.push_back(filled);
    }
    return grid;
}

void write_ablation_csv(const AblationGrid& grid, const std::string& path) {
    CsvWriter csv(path, {"schedule", "mask", "dual_teacher", "seeds", "failure_rate",
                         "mean_psnr"});
    for (const AblationCell& cell : grid.cells) {
        const char* sched = cell.schedule == TScheduleKind::annealed ? "annealed"
                            : cell.schedule == TScheduleKind::random ? "random"
                                                                     : "linear";
        csv.row({sched, cell.mask_on ? "on" : "off", cell.dual_teacher ? "on" : "off",
                 CsvWriter::num(cell.seeds), CsvWriter::num(cell.failure_rate),
                 CsvWriter::num(cell.mean_psnr)});
    }
}

} // namespace sdslab
