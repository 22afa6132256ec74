#include "sdslab/pipeline.hpp"

#include "sdslab/evalx.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <utility>

namespace sdslab {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;

std::string schedule_name(TScheduleKind k) {
    switch (k) {
    case TScheduleKind::annealed: return "annealed";
    case TScheduleKind::random: return "random";
    case TScheduleKind::linear: return "linear";
    }
    return "annealed";
}

TScheduleKind parse_schedule(const std::string& s) {
    if (s == "annealed") return TScheduleKind::annealed;
    if (s == "random") return TScheduleKind::random;
    if (s == "linear") return TScheduleKind::linear;
    throw ConfigError("curriculum.schedule must be annealed, random or linear (got '" + s + "')");
}

std::string weight_kind_name(WeightKind k) {
    return k == WeightKind::sigma_sq ? "sigma_sq" : "constant";
}

WeightKind parse_weight_kind(const std::string& s) {
    if (s == "sigma_sq") return WeightKind::sigma_sq;
    if (s == "constant") return WeightKind::constant;
    throw ConfigError("sds.weight_kind must be sigma_sq or constant (got '" + s + "')");
}

std::string diffusion_name(ScheduleKind k) {
    return k == ScheduleKind::cosine ? "cosine" : "linear_beta";
}

ScheduleKind parse_diffusion(const std::string& s) {
    if (s == "cosine") return ScheduleKind::cosine;
    if (s == "linear_beta") return ScheduleKind::linear_beta;
    throw ConfigError("diffusion.schedule must be cosine or linear_beta (got '" + s + "')");
}

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stoi(item));
        } catch (const std::exception&) {
            throw ConfigError("expected a comma-separated integer list, got '" + s + "'");
        }
    }
    if (out.empty()) throw ConfigError("expected a nonempty integer list, got '" + s + "'");
    return out;
}

std::string join_int_list(const std::vector<int>& v) {
    std::string out;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(v[i]);
    }
    return out;
}

Grid clamp01(const Grid& g) {
    Grid out = g;
    for (double& e : out.v) e = std::clamp(e, 0.0, 1.0);
    return out;
}
} // namespace

RunConfig RunConfig::from_config(ConfigMap& cfg) {
    RunConfig c;
    c.seed = cfg.get_u64("run.seed", c.seed);
    c.iters_stage_one = cfg.get_int("run.iters_stage_one", static_cast<int>(c.iters_stage_one));
    c.iters_stage_two = cfg.get_int("run.iters_stage_two", static_cast<int>(c.iters_stage_two));
    c.ref_angle = cfg.get_double("run.ref_angle", c.ref_angle);
    c.ref_prob = cfg.get_double("run.ref_prob", c.ref_prob);
    c.lr = cfg.get_double("run.lr", c.lr);
    c.weight_decay = cfg.get_double("run.weight_decay", c.weight_decay);
    c.reg_on_ref = cfg.get_bool("run.reg_on_ref", c.reg_on_ref);
    c.reg_on_unseen = cfg.get_bool("run.reg_on_unseen", c.reg_on_unseen);

    c.shape.class_id = cfg.get_int("shape.class", c.shape.class_id);
    c.shape.cx = cfg.get_double("shape.cx", c.shape.cx);
    c.shape.cy = cfg.get_double("shape.cy", c.shape.cy);
    c.shape.rx = cfg.get_double("shape.rx", c.shape.rx);
    c.shape.ry = cfg.get_double("shape.ry", c.shape.ry);
    c.shape.angle = cfg.get_double("shape.angle", c.shape.angle);
    c.shape.value = cfg.get_double("shape.value", c.shape.value);

    c.level_res = parse_int_list(cfg.get_string("student.levels", join_int_list(c.level_res)));
    c.render_res_one = cfg.get_int("student.render_res_one", c.render_res_one);
    c.render_res_two = cfg.get_int("student.render_res_two", c.render_res_two);
    c.iso_frac = cfg.get_double("student.iso_frac", c.iso_frac);

    c.t_max = cfg.get_int("curriculum.t_max", c.t_max);
    c.t_min = cfg.get_int("curriculum.t_min", c.t_min);
    c.step_len = cfg.get_int("curriculum.step_len", static_cast<int>(c.step_len));
    c.delta_max = cfg.get_int("curriculum.delta_max", c.delta_max);
    c.delta_min = cfg.get_int("curriculum.delta_min", c.delta_min);
    c.lambda_max = cfg.get_double("curriculum.lambda_max", c.lambda_max);
    c.log_base = cfg.get_double("curriculum.log_base", c.log_base);
    c.schedule = parse_schedule(cfg.get_string("curriculum.schedule", schedule_name(c.schedule)));
    c.mask_on = cfg.get_bool("curriculum.mask_on", c.mask_on);

    c.sds.weight_kind =
        parse_weight_kind(cfg.get_string("sds.weight_kind", weight_kind_name(c.sds.weight_kind)));
    c.sds.cfg_scale_coarse = cfg.get_double("sds.cfg_coarse", c.sds.cfg_scale_coarse);
    c.sds.cfg_scale_fine = cfg.get_double("sds.cfg_fine", c.sds.cfg_scale_fine);
    c.sds.multi_step_switch_t = cfg.get_int("sds.multi_step_switch_t", c.sds.multi_step_switch_t);
    c.sds.multi_step_count = cfg.get_int("sds.multi_step_count", c.sds.multi_step_count);
    c.sds.alpha_free = cfg.get_bool("sds.alpha_free", c.sds.alpha_free);
    c.sds.pose_w_min = cfg.get_double("sds.pose_w_min", c.sds.pose_w_min);
    c.debias.clip_max_norm = cfg.get_double("sds.clip_max_norm", c.debias.clip_max_norm);
    c.debias.drop_prob = cfg.get_double("sds.drop_prob", c.debias.drop_prob);
    c.objective.lambda_reg = cfg.get_double("sds.lambda_reg", c.objective.lambda_reg);
    c.objective.lambda_rec = cfg.get_double("sds.lambda_rec", c.objective.lambda_rec);
    c.rec.value = cfg.get_double("sds.rec_value", c.rec.value);
    c.rec.mask = cfg.get_double("sds.rec_mask", c.rec.mask);
    c.rec.pearson = cfg.get_double("sds.rec_pearson", c.rec.pearson);
    c.rec.mask_threshold = cfg.get_double("sds.mask_threshold", c.rec.mask_threshold);
    c.smooth_beta = cfg.get_double("sds.smooth_beta", c.smooth_beta);
    c.smooth_samples = cfg.get_int("sds.smooth_samples", c.smooth_samples);
    c.dual_teacher = cfg.get_bool("sds.dual_teacher", c.dual_teacher);

    c.view_checkpoint = cfg.get_string("teacher.view_checkpoint", c.view_checkpoint);
    c.class_checkpoint = cfg.get_string("teacher.class_checkpoint", c.class_checkpoint);
    c.teacher_res = cfg.get_int("teacher.res", c.teacher_res);

    c.T = cfg.get_int("diffusion.t_steps", c.T);
    c.diffusion_kind = parse_diffusion(cfg.get_string("diffusion.schedule", diffusion_name(c.diffusion_kind)));

    cfg.reject_unknown_keys();
    c.validate();
    return c;
}

std::string RunConfig::to_config_text() const {
    std::ostringstream os;
    const auto d = [](double v) { return format_double(v); };
    const auto b = [](bool v) { return v ? "true" : "false"; };
    os << "[run]\n";
    os << "seed = " << seed << "\n";
    os << "iters_stage_one = " << iters_stage_one << "\n";
    os << "iters_stage_two = " << iters_stage_two << "\n";
    os << "ref_angle = " << d(ref_angle) << "\n";
    os << "ref_prob = " << d(ref_prob) << "\n";
    os << "lr = " << d(lr) << "\n";
    os << "weight_decay = " << d(weight_decay) << "\n";
    os << "reg_on_ref = " << b(reg_on_ref) << "\n";
    os << "reg_on_unseen = " << b(reg_on_unseen) << "\n";
    os << "\n[shape]\n";
    os << "class = " << shape.class_id << "\n";
    os << "cx = " << d(shape.cx) << "\n";
    os << "cy = " << d(shape.cy) << "\n";
    os << "rx = " << d(shape.rx) << "\n";
    os << "ry = " << d(shape.ry) << "\n";
    os << "angle = " << d(shape.angle) << "\n";
    os << "value = " << d(shape.value) << "\n";
    os << "\n[student]\n";
    os << "levels = " << join_int_list(level_res) << "\n";
    os << "render_res_one = " << render_res_one << "\n";
    os << "render_res_two = " << render_res_two << "\n";
    os << "iso_frac = " << d(iso_frac) << "\n";
    os << "\n[curriculum]\n";
    os << "t_max = " << t_max << "\n";
    os << "t_min = " << t_min << "\n";
    os << "step_len = " << step_len << "\n";
    os << "delta_max = " << delta_max << "\n";
    os << "delta_min = " << delta_min << "\n";
    os << "lambda_max = " << d(lambda_max) << "\n";
    os << "log_base = " << d(log_base) << "\n";
    os << "schedule = " << schedule_name(schedule) << "\n";
    os << "mask_on = " << b(mask_on) << "\n";
    os << "\n[sds]\n";
    os << "weight_kind = " << weight_kind_name(sds.weight_kind) << "\n";
    os << "cfg_coarse = " << d(sds.cfg_scale_coarse) << "\n";
    os << "cfg_fine = " << d(sds.cfg_scale_fine) << "\n";
    os << "multi_step_switch_t = " << sds.multi_step_switch_t << "\n";
    os << "multi_step_count = " << sds.multi_step_count << "\n";
    os << "alpha_free = " << b(sds.alpha_free) << "\n";
    os << "pose_w_min = " << d(sds.pose_w_min) << "\n";
    os << "clip_max_norm = " << d(debias.clip_max_norm) << "\n";
    os << "drop_prob = " << d(debias.drop_prob) << "\n";
    os << "lambda_reg = " << d(objective.lambda_reg) << "\n";
    os << "lambda_rec = " << d(objective.lambda_rec) << "\n";
    os << "rec_value = " << d(rec.value) << "\n";
    os << "rec_mask = " << d(rec.mask) << "\n";
    os << "rec_pearson = " << d(rec.pearson) << "\n";
    os << "mask_threshold = " << d(rec.mask_threshold) << "\n";
    os << "smooth_beta = " << d(smooth_beta) << "\n";
    os << "smooth_samples = " << smooth_samples << "\n";
    os << "dual_teacher = " << b(dual_teacher) << "\n";
    os << "\n[teacher]\n";
    os << "view_checkpoint = " << view_checkpoint << "\n";
    os << "class_checkpoint = " << class_checkpoint << "\n";
    os << "res = " << teacher_res << "\n";
    os << "\n[diffusion]\n";
    os << "t_steps = " << T << "\n";
    os << "schedule = " << diffusion_name(diffusion_kind) << "\n";
    return os.str();
}

void RunConfig::validate() const {
    if (ref_prob < 0.0 || ref_prob > 1.0)
        throw std::invalid_argument("run config: ref_prob outside [0,1]");
    if (iters_stage_one < 0 || iters_stage_two < 0)
        throw std::invalid_argument("run config: negative iteration count");
    if (lr <= 0.0) throw std::invalid_argument("run config: lr must be positive");
    if (shape.value <= 0.0 || shape.value > 1.0)
        throw std::invalid_argument("run config: shape value outside (0,1]");
    if (level_res.empty()) throw std::invalid_argument("run config: no pyramid levels");
    if (render_res_two <= render_res_one)
        throw std::invalid_argument("run config: stage-two resolution must exceed stage one");
    if (teacher_res < 1 || render_res_one % teacher_res != 0 || render_res_two % teacher_res != 0)
        throw std::invalid_argument("run config: render resolutions must be multiples of teacher.res");
    if (T < 2 || t_min <= 0 || t_min >= t_max || t_max > T)
        throw std::invalid_argument("run config: need 0 < t_min < t_max <= t_steps");
    if (step_len < 1) throw std::invalid_argument("run config: step_len must be >= 1");
    if (delta_min < 0 || delta_min > delta_max)
        throw std::invalid_argument("run config: bad interval radius bounds");
    if (smooth_samples < 1) throw std::invalid_argument("run config: smooth_samples must be >= 1");
    if (sds.multi_step_count < 1)
        throw std::invalid_argument("run config: multi_step_count must be >= 1");
}

bool run_stage(PyramidField& field, const DualTeacher& teachers, const RunConfig& cfg, Stage stage,
               const NoiseSchedule& sched, const RngPool& pool, RunRecord& record) {
    cfg.validate();
    const long N = stage == Stage::one ? cfg.iters_stage_one : cfg.iters_stage_two;
    const int stage_num = stage == Stage::one ? 1 : 2;
    if (N == 0) return true;

    CurriculumState st;
    st.N = N;
    st.l = cfg.step_len;
    st.t_max = cfg.t_max;
    st.t_min = cfg.t_min;
    st.delta_max = cfg.delta_max;
    st.delta_min = cfg.delta_min;
    st.stage = stage;
    st.L = field.level_count();
    st.schedule = cfg.schedule;
    st.lambda_max = cfg.lambda_max;
    st.log_base = cfg.log_base;

    const ViewPose ref = ViewPose::at(cfg.ref_angle);
    const int R = field.render_res;
    const Grid gt = rasterize(cfg.shape, R);
    const Vec reference = to_teacher_space(project(gt, ref), cfg.teacher_res);
    Vec ref_mask(reference.size());
    for (size_t i = 0; i < reference.size(); ++i)
        ref_mask[i] = reference[i] > cfg.rec.mask_threshold ? 1.0 : 0.0;

    // Independent substreams per stage and subsystem, so toggling one
    // consumer never shifts another's draws.
    const std::string p = stage_num == 1 ? "s1." : "s2.";
    Rng branch_rng = pool.stream(p + "branch");
    Rng pose_rng = pool.stream(p + "pose");
    Rng t_rng = pool.stream(p + "t");
    Rng sds_rng = pool.stream(p + "sds"); // perturbation noise + de-bias gates
    Rng reg_rng = pool.stream(p + "reg");

    AdamW opt(AdamWConfig{.lr = cfg.lr, .weight_decay = cfg.weight_decay});
    Vec params = flatten_params(field);
    const Vec open_mask(field.level_count(), 1.0);
    int high_grad_streak = 0;

    for (long k = 0; k < N; ++k) {
        st.k = k;
        const Vec mask = cfg.mask_on ? band_mask(k, N, st.L) : open_mask;
        RunRow row;
        row.stage = stage_num;
        row.k = k;
        row.lambda = lambda_at(st);
        bool diverged = false;
        try {
            std::vector<Grid> grads;
            if (branch_rng.uniform() < cfg.ref_prob) {
                row.branch = 'r';
                row.pose = ref.angle;
                const Grid rendered = field_render(field, mask);
                const Vec xbar = to_teacher_space(project(rendered, ref), cfg.teacher_res);
                const RecLoss rl = rec_loss(xbar, reference, ref_mask, cfg.rec);
                row.rec = rl.total;
                Vec g = rl.grad;
                scale(g, cfg.objective.lambda_rec);
                const Grid g_field = project_adjoint(teacher_space_adjoint(g, R), ref, R);
                grads = render_grad_to_params(field, g_field, mask);
            } else {
                row.branch = 'u';
                const ViewPose pose = ViewPose::at(pose_rng.uniform(0.0, kTwoPi));
                row.pose = pose.angle;
                row.t = sample_t(st, t_rng);
                DtcGradResult dg = dtc_grad(field, mask, pose, ref, cfg.shape.class_id, row.t,
                                            teachers, st, cfg.sds, cfg.debias, sched, sds_rng);
                row.sds_norm = dg.grad_norm;
                grads = std::move(dg.level_grads);
            }
            if ((row.branch == 'r' ? cfg.reg_on_ref : cfg.reg_on_unseen) &&
                cfg.objective.lambda_reg > 0.0) {
                const Grid rendered = field_render(field, mask);
                const SmoothLoss sm =
                    normal_smooth_loss(rendered, cfg.smooth_beta, reg_rng, cfg.smooth_samples);
                row.reg = sm.loss;
                const std::vector<Grid> rg = render_grad_to_params(field, sm.grad, mask);
                for (size_t i = 0; i < grads.size(); ++i)
                    axpy(cfg.objective.lambda_reg, rg[i].v, grads[i].v);
            }
            const Vec flat = flatten_level_grads(grads);
            row.grad_norm = norm2(flat);
            opt.update(params, flat);
            assign_params(field, params);
        } catch (const DivergenceError&) {
            diverged = true;
        } catch (const std::domain_error&) { // optimizer rejected non-finite grads
            diverged = true;
        }
        record.rows.push_back(row);
        if (diverged || !all_finite(params)) {
            record.status = "diverged";
            return false;
        }
        high_grad_streak = row.grad_norm > 1e6 ? high_grad_streak + 1 : 0;
        if (high_grad_streak >= 10) {
            record.status = "diverged";
            return false;
        }
    }
    return true;
}

const std::vector<std::string> kRunCsvHeader = {"stage",    "k",        "branch",       "t",
                                                "pose",     "lambda",   "rec_loss",     "reg_loss",
                                                "sds_grad_norm", "grad_norm"};

void write_run_csv(const RunRecord& record, const std::string& path) {
    CsvWriter csv(path, kRunCsvHeader);
    for (const RunRow& r : record.rows)
        csv.row({CsvWriter::num(r.stage), CsvWriter::num(r.k), std::string(1, r.branch),
                 CsvWriter::num(r.t), CsvWriter::num(r.pose), CsvWriter::num(r.lambda),
                 CsvWriter::num(r.rec), CsvWriter::num(r.reg), CsvWriter::num(r.sds_norm),
                 CsvWriter::num(r.grad_norm)});
    csv.close();
}

RunRecord distill(const RunConfig& cfg, const DualTeacher& teachers, const std::string& out_dir) {
    cfg.validate();
    const RngPool pool(cfg.seed);
    const NoiseSchedule sched = make_schedule(cfg.T, cfg.diffusion_kind);
    PyramidField field = make_pyramid(cfg.level_res, cfg.render_res_one, 1);
    RunRecord record;

    {
        const Grid gt2 = rasterize(cfg.shape, cfg.render_res_two);
        const PyramidField initial = upgrade_stage(field, cfg.render_res_two);
        const Grid r0 = field_render(initial, Vec(initial.level_count(), 1.0));
        record.initial_psnr = psnr(clamp01(r0), gt2, 1.0);
    }

    DualTeacher active = teachers;
    if (!cfg.dual_teacher) active.fine = nullptr;

    bool ok = run_stage(field, active, cfg, Stage::one, sched, pool, record);
    if (ok) {
        field = upgrade_stage(field, cfg.render_res_two);
        run_stage(field, active, cfg, Stage::two, sched, pool, record);
    }

    // Final metrics against the ground truth at the field's own resolution.
    const Grid gt = rasterize(cfg.shape, field.render_res);
    const Grid render = field_render(field, Vec(field.level_count(), 1.0));
    const Grid clamped = clamp01(render);
    const double level = cfg.iso_frac * cfg.shape.value;
    record.final_psnr = psnr(clamped, gt, 1.0);
    record.final_mask_iou = mask_iou(render, gt, level);
    try {
        record.final_laplacian = laplacian_loss(extract_contour(render, level));
    } catch (const EmptyContour&) {
        record.final_laplacian = -1.0;
    }

    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        const std::filesystem::path dir(out_dir);
        write_run_csv(record, (dir / "run.csv").string());
        CsvWriter metrics((dir / "metrics.csv").string(),
                          {"status", "initial_psnr", "final_psnr", "final_mask_iou",
                           "final_laplacian"});
        metrics.row({record.status, CsvWriter::num(record.initial_psnr),
                     CsvWriter::num(record.final_psnr), CsvWriter::num(record.final_mask_iou),
                     CsvWriter::num(record.final_laplacian)});
        metrics.close();
        write_pgm(clamped, (dir / "final.pgm").string());
        std::ofstream cfg_out(dir / "resolved.cfg", std::ios::binary);
        cfg_out << cfg.to_config_text();
    }
    return record;
}

RunRecord distill_from_config(const RunConfig& cfg, const std::string& out_dir) {
    if (cfg.view_checkpoint.empty())
        throw std::invalid_argument("distill: teacher.view_checkpoint not set");
    const DenoiserModel view = load_checkpoint(cfg.view_checkpoint);
    DenoiserModel cls;
    DualTeacher teachers;
    teachers.coarse = guided_denoiser(view, cfg.sds.cfg_scale_coarse);
    teachers.res = cfg.teacher_res;
    if (cfg.dual_teacher) {
        if (cfg.class_checkpoint.empty())
            throw std::invalid_argument("distill: teacher.class_checkpoint not set");
        cls = load_checkpoint(cfg.class_checkpoint);
        teachers.fine = guided_denoiser(cls, cfg.sds.cfg_scale_fine);
    }
    if (view.data_dim != cfg.teacher_res || (cfg.dual_teacher && cls.data_dim != cfg.teacher_res))
        throw std::invalid_argument("distill: teacher checkpoint resolution != teacher.res");
    return distill(cfg, teachers, out_dir);
}

} // namespace sdslab
