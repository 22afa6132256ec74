#include "sdslab/sds.hpp"

#include <algorithm>
#include <cmath>

namespace sdslab {

double sds_weight(const SdsConfig& cfg, int t, const NoiseSchedule& sched) {
    if (t < 0 || t > sched.T) throw std::invalid_argument("sds_weight: t out of range");
    const double s = sched.sigma[t];
    return cfg.weight_kind == WeightKind::sigma_sq ? s * s : 1.0;
}

Vec sds_grad_eps(const Vec& render, const Vec& eps_hat, const Vec& noise, int t,
                 const NoiseSchedule& sched, const SdsConfig& cfg) {
    require_same_shape(render, eps_hat, "sds_grad_eps");
    require_same_shape(eps_hat, noise, "sds_grad_eps");
    const double w = sds_weight(cfg, t, sched);
    Vec out(render.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = w * (eps_hat[i] - noise[i]);
    return out;
}

Vec sds_grad_x0(const Vec& render, const Vec& x0_hat, int t, const NoiseSchedule& sched,
                const SdsConfig& cfg) {
    require_same_shape(render, x0_hat, "sds_grad_x0");
    const double s = sched.sigma[t];
    // ω̄ = ω/σ; for the σ² weight this is just σ, so t = 0 stays finite.
    double wbar;
    if (cfg.weight_kind == WeightKind::sigma_sq) {
        wbar = s;
    } else {
        if (s == 0.0) throw std::domain_error("sds_grad_x0: sigma_t = 0 under constant weight");
        wbar = 1.0 / s;
    }
    const double factor = wbar * (cfg.alpha_free ? 1.0 : sched.alpha[t]);
    Vec out(render.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = factor * (render[i] - x0_hat[i]);
    return out;
}

Vec to_teacher_space(const Vec& proj, int teacher_res) {
    const int n = static_cast<int>(proj.size());
    if (teacher_res < 1 || n % teacher_res != 0)
        throw std::invalid_argument("to_teacher_space: render length not a multiple of teacher length");
    const int m = n / teacher_res;
    Vec out(teacher_res, 0.0);
    for (int j = 0; j < teacher_res; ++j) {
        double acc = 0.0;
        for (int i = 0; i < m; ++i) acc += proj[static_cast<size_t>(j) * m + i];
        out[j] = acc / (static_cast<double>(m) * n);
    }
    return out;
}

Vec teacher_space_adjoint(const Vec& grad_teacher_space, int render_res) {
    const int r = static_cast<int>(grad_teacher_space.size());
    if (r < 1 || render_res % r != 0)
        throw std::invalid_argument("teacher_space_adjoint: render length not a multiple of teacher length");
    const int m = render_res / r;
    const double w = 1.0 / (static_cast<double>(m) * render_res);
    Vec out(render_res);
    for (int j = 0; j < r; ++j)
        for (int i = 0; i < m; ++i) out[static_cast<size_t>(j) * m + i] = w * grad_teacher_space[j];
    return out;
}

DtcGradResult dtc_grad(const PyramidField& field, const Vec& mask, ViewPose pose, ViewPose ref_pose,
                       int class_id, int t, const DualTeacher& teachers,
                       const CurriculumState& state, const SdsConfig& cfg,
                       const DebiasConfig& debias, const NoiseSchedule& sched, Rng& rng) {
    if (!teachers.coarse) throw std::invalid_argument("dtc_grad: missing coarse teacher");
    const int R = field.render_res;

    const Grid field2d = field_render(field, mask);
    const Vec proj = project(field2d, pose);
    const Vec x_pi = to_teacher_space(proj, teachers.res);
    const Vec noise = rng.normal_vec(x_pi.size());
    const NoisySample x_t = perturb(x_pi, t, noise, sched);

    // Gradient w.r.t. the teacher-space projection for one guidance source.
    auto teacher_term = [&](const DenoiserFn& fn, const Condition& cond) {
        if (t < cfg.multi_step_switch_t && cfg.multi_step_count > 1) {
            const DenoisedEstimate x0 = ddim_denoise(x_t, fn, cond, cfg.multi_step_count, sched);
            return sds_grad_x0(x_pi, x0.data, t, sched, cfg);
        }
        const Vec eps_hat = fn(x_t.data, t, cond);
        return sds_grad_eps(x_pi, eps_hat, noise, t, sched, cfg);
    };
    // Adjoint chain back to per-level coefficient gradients.
    auto chain = [&](const Vec& g_teacher) {
        const Vec g_proj = teacher_space_adjoint(g_teacher, R);
        const Grid g_field = project_adjoint(g_proj, pose, R);
        return render_grad_to_params(field, g_field, mask);
    };

    const double rel = pose.angle - ref_pose.angle;

    DtcGradResult res;
    res.lambda = lambda_at(state);

    const GateAction coarse_gate = debias_gate(rel, TeacherRole::coarse, state.stage, rng, debias);
    res.coarse_gate = coarse_gate.kind;
    std::vector<Grid> total = chain(teacher_term(teachers.coarse, Condition::view_at(pose.angle)));
    if (coarse_gate.kind == GateKind::clip) {
        const double norm = norm2(flatten_level_grads(total));
        if (norm > coarse_gate.max_norm)
            for (Grid& g : total) scale(g.v, coarse_gate.max_norm / norm);
    }

    if (res.lambda > 0.0 && teachers.fine) {
        const GateAction fine_gate = debias_gate(rel, TeacherRole::fine, state.stage, rng, debias);
        res.fine_gate = fine_gate.kind;
        if (fine_gate.kind != GateKind::drop) {
            const std::vector<Grid> tex =
                chain(teacher_term(teachers.fine, Condition::of_class(class_id)));
            for (size_t i = 0; i < total.size(); ++i) axpy(res.lambda, tex[i].v, total[i].v);
        }
    }

    const double w = pose_weight(pose, ref_pose, cfg.pose_w_min);
    for (Grid& g : total) scale(g.v, w);

    res.grad_norm = norm2(flatten_level_grads(total));
    if (!std::isfinite(res.grad_norm)) throw DivergenceError(state.k, t, pose.angle);
    res.level_grads = std::move(total);
    return res;
}

RecLoss rec_loss(const Vec& render_ref, const Vec& reference, const Vec& ref_mask,
                 const RecWeights& weights) {
    require_same_shape(render_ref, reference, "rec_loss");
    require_same_shape(render_ref, ref_mask, "rec_loss");
    const size_t n = render_ref.size();
    if (n == 0) throw std::invalid_argument("rec_loss: empty vectors");

    RecLoss out;
    out.grad.assign(n, 0.0);

    // Value term.
    for (size_t i = 0; i < n; ++i) {
        const double d = render_ref[i] - reference[i];
        out.value_mse += d * d;
        out.grad[i] += weights.value * 2.0 * d / n;
    }
    out.value_mse /= n;

    // Mask term: hard binarization on the render side, so it vanishes exactly
    // when render equals reference (and ref_mask used the same threshold). Its
    // analytic gradient is zero almost everywhere.
    for (size_t i = 0; i < n; ++i) {
        const double m = render_ref[i] > weights.mask_threshold ? 1.0 : 0.0;
        const double d = m - ref_mask[i];
        out.mask_mse += d * d;
    }
    out.mask_mse /= n;

    // Pearson decorrelation penalty 1 − r.
    double mean_a = 0.0, mean_b = 0.0;
    for (size_t i = 0; i < n; ++i) {
        mean_a += render_ref[i];
        mean_b += reference[i];
    }
    mean_a /= n;
    mean_b /= n;
    double saa = 0.0, sbb = 0.0, sab = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double a = render_ref[i] - mean_a, b = reference[i] - mean_b;
        saa += a * a;
        sbb += b * b;
        sab += a * b;
    }
    if (saa < 1e-18 || sbb < 1e-18) {
        out.pearson_skipped = true; // constant side: correlation undefined
    } else {
        const double denom = std::sqrt(saa * sbb);
        const double r = sab / denom;
        out.pearson_term = 1.0 - r;
        for (size_t i = 0; i < n; ++i) {
            const double a = render_ref[i] - mean_a, b = reference[i] - mean_b;
            out.grad[i] += -weights.pearson * (b - (sab / saa) * a) / denom;
        }
    }

    out.total = weights.value * out.value_mse + weights.mask * out.mask_mse +
                weights.pearson * out.pearson_term;
    return out;
}

namespace {
double bilinear_sample(const Grid& g, double x, double y) {
    const int x0 = static_cast<int>(x), y0 = static_cast<int>(y);
    const int x1 = std::min(x0 + 1, g.cols - 1), y1 = std::min(y0 + 1, g.rows - 1);
    const double fx = x - x0, fy = y - y0;
    return (1 - fy) * ((1 - fx) * g.at(y0, x0) + fx * g.at(y0, x1)) +
           fy * ((1 - fx) * g.at(y1, x0) + fx * g.at(y1, x1));
}

void bilinear_scatter(Grid& g, double x, double y, double w) {
    const int x0 = static_cast<int>(x), y0 = static_cast<int>(y);
    const int x1 = std::min(x0 + 1, g.cols - 1), y1 = std::min(y0 + 1, g.rows - 1);
    const double fx = x - x0, fy = y - y0;
    g.at(y0, x0) += (1 - fy) * (1 - fx) * w;
    g.at(y0, x1) += (1 - fy) * fx * w;
    g.at(y1, x0) += fy * (1 - fx) * w;
    g.at(y1, x1) += fy * fx * w;
}

// Softening scale for normalizing field gradients into normals. Near-flat
// regions have no meaningful surface direction; the softened normal
// g/sqrt(||g||^2 + eps^2) fades to zero there instead of amplifying noise,
// and keeps the analytic gradient bounded by 1/eps.
constexpr double kNormalSoftening = 1e-2;

// Central-difference step for field gradients. Half a cell, not a whole one:
// the bilinear interpolant of a one-cell checkerboard satisfies
// B(x ± 1) = 1 − B(x), so a full-cell difference would cancel exactly and
// leave the roughest representable field with zero loss.
constexpr double kFdStep = 0.5;
constexpr double kFdScale = 1.0 / (2.0 * kFdStep);

// Central-difference field gradient at a continuous interior point.
std::array<double, 2> fd_gradient(const Grid& g, double x, double y) {
    return {kFdScale * (bilinear_sample(g, x + kFdStep, y) - bilinear_sample(g, x - kFdStep, y)),
            kFdScale * (bilinear_sample(g, x, y + kFdStep) - bilinear_sample(g, x, y - kFdStep))};
}

// Accumulates d<cot, n(x,y)>/d field into grad, where n is the softened
// normal of fd_gradient.
void normal_vjp(const Grid& field, double x, double y, const std::array<double, 2>& cot,
                Grid& grad) {
    const auto g = fd_gradient(field, x, y);
    const double s =
        1.0 / std::sqrt(g[0] * g[0] + g[1] * g[1] + kNormalSoftening * kNormalSoftening);
    // n = s*g, so d<cot,n>/dg = s*cot - s^3*(g.cot)*g.
    const double gc = g[0] * cot[0] + g[1] * cot[1];
    const std::array<double, 2> gg{s * cot[0] - s * s * s * gc * g[0],
                                   s * cot[1] - s * s * s * gc * g[1]};
    bilinear_scatter(grad, x + kFdStep, y, kFdScale * gg[0]);
    bilinear_scatter(grad, x - kFdStep, y, -kFdScale * gg[0]);
    bilinear_scatter(grad, x, y + kFdStep, kFdScale * gg[1]);
    bilinear_scatter(grad, x, y - kFdStep, -kFdScale * gg[1]);
}

std::array<double, 2> safe_normal(const Grid& g, double x, double y) {
    const auto grad = fd_gradient(g, x, y);
    const double s = 1.0 / std::sqrt(grad[0] * grad[0] + grad[1] * grad[1] +
                                     kNormalSoftening * kNormalSoftening);
    return {grad[0] * s, grad[1] * s};
}
} // namespace

SmoothLoss normal_smooth_loss(const Grid& field2d, double beta, Rng& rng, int samples) {
    if (beta <= 0) throw std::invalid_argument("normal_smooth_loss: beta must be positive");
    if (field2d.rows < 3 || field2d.cols < 3)
        throw std::invalid_argument("normal_smooth_loss: field smaller than 3x3");
    if (samples < 1) throw std::invalid_argument("normal_smooth_loss: need at least one sample");

    const double lo = 1.0;
    const double hi_x = field2d.cols - 2.0, hi_y = field2d.rows - 2.0;
    SmoothLoss out;
    out.grad = Grid::zeros(field2d.rows, field2d.cols);

    for (int s = 0; s < samples; ++s) {
        const double ax = rng.uniform(lo, hi_x), ay = rng.uniform(lo, hi_y);
        const double bx = std::clamp(ax + beta * rng.normal(), lo, hi_x);
        const double by = std::clamp(ay + beta * rng.normal(), lo, hi_y);
        const auto na = safe_normal(field2d, ax, ay);
        const auto nb = safe_normal(field2d, bx, by);
        std::array<double, 2> sgn{};
        for (int d = 0; d < 2; ++d) {
            const double diff = na[d] - nb[d];
            out.loss += std::fabs(diff);
            sgn[d] = diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0);
        }
        normal_vjp(field2d, ax, ay, sgn, out.grad);
        normal_vjp(field2d, bx, by, {-sgn[0], -sgn[1]}, out.grad);
    }
    out.loss /= samples;
    scale(out.grad.v, 1.0 / samples);
    return out;
}

double laplacian_loss(const IsoContour& contour) {
    const auto& v = contour.vertices;
    const size_t n = v.size();
    if (n < 3) throw std::invalid_argument("laplacian_loss: need at least 3 vertices");
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const auto& prev = v[(i + n - 1) % n];
        const auto& next = v[(i + 1) % n];
        acc += std::hypot(2 * v[i][0] - prev[0] - next[0], 2 * v[i][1] - prev[1] - next[1]);
    }
    return acc / n;
}

IsoContour laplacian_smooth(const IsoContour& contour, double tau) {
    const auto& v = contour.vertices;
    const size_t n = v.size();
    if (n < 3) throw std::invalid_argument("laplacian_smooth: need at least 3 vertices");
    IsoContour out = contour;
    for (size_t i = 0; i < n; ++i) {
        const auto& prev = v[(i + n - 1) % n];
        const auto& next = v[(i + 1) % n];
        out.vertices[i][0] -= tau * (2 * v[i][0] - prev[0] - next[0]);
        out.vertices[i][1] -= tau * (2 * v[i][1] - prev[1] - next[1]);
    }
    return out;
}

} // namespace sdslab
