// Command-line front end. One subcommand per experiment; every run takes
// (--config, --seed, --out), writes its artifacts under --out, and echoes the
// fully resolved configuration (defaults included) both to stdout and to
// <out>/resolved.cfg so runs are auditable and reproducible byte-for-byte.

#include "CLI11.hpp"

#include "sdslab/curriculum.hpp"
#include "sdslab/diffusion.hpp"
#include "sdslab/evalx.hpp"
#include "sdslab/io.hpp"
#include "sdslab/pipeline.hpp"
#include "sdslab/rng.hpp"
#include "sdslab/sds.hpp"
#include "sdslab/shapes.hpp"
#include "sdslab/student.hpp"
#include "sdslab/teacher.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace sdslab;

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

struct CommonArgs {
    std::string config;
    std::string out;
    uint64_t seed = 0;
    CLI::Option* seed_opt = nullptr;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config, "configuration file (key = value)");
    args.seed_opt = cmd->add_option("--seed", args.seed, "root seed (overrides the config)");
    cmd->add_option("--out", args.out, "output directory")->required();
}

// SDSLAB_OUT_ROOT rebases relative output directories (the only env override).
fs::path resolve_out(const std::string& out) {
    fs::path p(out);
    const char* root = std::getenv("SDSLAB_OUT_ROOT");
    if (root != nullptr && *root != '\0' && p.is_relative()) p = fs::path(root) / p;
    fs::create_directories(p);
    return p;
}

ConfigMap load_config(const CommonArgs& args) {
    if (args.config.empty()) return ConfigMap::parse_text("", "<defaults>");
    return ConfigMap::parse_file(args.config);
}

void emit_resolved(const std::string& text, const fs::path& out) {
    std::ofstream f(out / "resolved.cfg", std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + (out / "resolved.cfg").string());
    f << text;
    std::cout << text;
}

std::string bool_name(bool b) { return b ? "true" : "false"; }

CondKind parse_cond_kind(const std::string& s) {
    if (s == "view") return CondKind::view;
    if (s == "class") return CondKind::class_label;
    if (s == "none") return CondKind::none;
    throw ConfigError("teacher kind must be view, class or none (got '" + s + "')");
}

std::string cond_kind_name(CondKind k) {
    switch (k) {
    case CondKind::view: return "view";
    case CondKind::class_label: return "class";
    case CondKind::none: return "none";
    }
    return "none";
}

ScheduleKind parse_diffusion(const std::string& s) {
    if (s == "cosine") return ScheduleKind::cosine;
    if (s == "linear_beta") return ScheduleKind::linear_beta;
    throw ConfigError("diffusion.schedule must be cosine or linear_beta (got '" + s + "')");
}

std::string diffusion_name(ScheduleKind k) {
    return k == ScheduleKind::cosine ? "cosine" : "linear_beta";
}

std::vector<int> parse_int_list(const std::string& s, const std::string& key) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stoi(item));
        } catch (const std::exception&) {
            throw ConfigError(key + ": expected a comma-separated integer list, got '" + s + "'");
        }
    }
    if (out.empty()) throw ConfigError(key + ": empty list");
    return out;
}

std::vector<double> parse_double_list(const std::string& s, const std::string& key) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw ConfigError(key + ": expected a comma-separated number list, got '" + s + "'");
        }
    }
    if (out.empty()) throw ConfigError(key + ": empty list");
    return out;
}

template <typename T, typename Fmt>
std::string join_list(const std::vector<T>& v, Fmt fmt) {
    std::string out;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += fmt(v[i]);
    }
    return out;
}

ShapeSpec shape_from_config(ConfigMap& cfg) {
    ShapeSpec s;
    s.class_id = cfg.get_int("shape.class", s.class_id);
    s.cx = cfg.get_double("shape.cx", s.cx);
    s.cy = cfg.get_double("shape.cy", s.cy);
    s.rx = cfg.get_double("shape.rx", s.rx);
    s.ry = cfg.get_double("shape.ry", s.ry);
    s.angle = cfg.get_double("shape.angle", s.angle);
    s.value = cfg.get_double("shape.value", s.value);
    return s;
}

std::string shape_config_text(const ShapeSpec& s) {
    std::ostringstream os;
    os << "[shape]\n";
    os << "class = " << s.class_id << "\n";
    os << "cx = " << format_double(s.cx) << "\n";
    os << "cy = " << format_double(s.cy) << "\n";
    os << "rx = " << format_double(s.rx) << "\n";
    os << "ry = " << format_double(s.ry) << "\n";
    os << "angle = " << format_double(s.angle) << "\n";
    os << "value = " << format_double(s.value) << "\n";
    return os.str();
}

uint64_t resolve_seed(const CommonArgs& args, ConfigMap& cfg) {
    const uint64_t from_cfg = cfg.get_u64("run.seed", 0);
    return args.seed_opt->count() > 0 ? args.seed : from_cfg;
}

// ---- teacher-train ------------------------------------------------------------

int cmd_teacher_train(const CommonArgs& args) {
    ConfigMap cfg = load_config(args);
    const fs::path out = resolve_out(args.out);
    const uint64_t seed = resolve_seed(args, cfg);

    const CondKind kind = parse_cond_kind(cfg.get_string("teacher_train.kind", "view"));
    TeacherTrainConfig tc;
    tc.steps = cfg.get_int("teacher_train.steps", tc.steps);
    tc.batch = cfg.get_int("teacher_train.batch", tc.batch);
    tc.lr = cfg.get_double("teacher_train.lr", tc.lr);
    tc.weight_decay = cfg.get_double("teacher_train.weight_decay", tc.weight_decay);
    tc.cond_dropout = cfg.get_double("teacher_train.cond_dropout", tc.cond_dropout);
    tc.hidden = cfg.get_int("teacher_train.hidden", tc.hidden);
    tc.hidden_layers = cfg.get_int("teacher_train.hidden_layers", tc.hidden_layers);
    tc.t_freqs = cfg.get_int("teacher_train.t_freqs", tc.t_freqs);
    tc.num_classes = cfg.get_int("teacher_train.num_classes", tc.num_classes);
    tc.log_every = cfg.get_int("teacher_train.log_every", tc.log_every);
    const int n_train = cfg.get_int("corpus.train", 40);
    const int n_holdout = cfg.get_int("corpus.holdout", 20);
    const int res = cfg.get_int("teacher.res", 32);
    const int T = cfg.get_int("diffusion.t_steps", 1000);
    const ScheduleKind dk = parse_diffusion(cfg.get_string("diffusion.schedule", "cosine"));
    cfg.reject_unknown_keys();

    std::ostringstream echo;
    echo << "[run]\nseed = " << seed << "\n";
    echo << "\n[teacher_train]\n";
    echo << "kind = " << cond_kind_name(kind) << "\n";
    echo << "steps = " << tc.steps << "\n";
    echo << "batch = " << tc.batch << "\n";
    echo << "lr = " << format_double(tc.lr) << "\n";
    echo << "weight_decay = " << format_double(tc.weight_decay) << "\n";
    echo << "cond_dropout = " << format_double(tc.cond_dropout) << "\n";
    echo << "hidden = " << tc.hidden << "\n";
    echo << "hidden_layers = " << tc.hidden_layers << "\n";
    echo << "t_freqs = " << tc.t_freqs << "\n";
    echo << "num_classes = " << tc.num_classes << "\n";
    echo << "log_every = " << tc.log_every << "\n";
    echo << "\n[corpus]\ntrain = " << n_train << "\nholdout = " << n_holdout << "\n";
    echo << "\n[teacher]\nres = " << res << "\n";
    echo << "\n[diffusion]\nt_steps = " << T << "\nschedule = " << diffusion_name(dk) << "\n";
    emit_resolved(echo.str(), out);

    const NoiseSchedule sched = make_schedule(T, dk);
    const RngPool pool(seed);
    Rng corpus_rng = pool.stream("corpus");
    const ShapeCorpus corpus = make_corpus(n_train, n_holdout, corpus_rng);
    const DatasetFn train_set = make_projection_dataset(corpus.train, kind, res);
    const DatasetFn holdout_set = make_projection_dataset(corpus.holdout, kind, res);

    std::vector<TrainLogRow> log;
    const DenoiserModel model = train_teacher(train_set, kind, tc, res, sched, pool, &log);

    CsvWriter csv((out / "train_log.csv").string(), {"step", "loss"});
    for (const TrainLogRow& row : log) csv.row({CsvWriter::num(row.step), CsvWriter::num(row.loss)});
    csv.close();

    const std::string ckpt = (out / ("teacher_" + cond_kind_name(kind) + ".ckpt")).string();
    save_checkpoint(model, ckpt);

    Rng eval_rng = pool.stream("holdout-eval");
    const double holdout_mse = eval_eps_mse(model, holdout_set, T / 2, sched, 256, eval_rng);
    std::cout << "checkpoint: " << ckpt << "\n";
    std::cout << "holdout eps-mse (t = " << T / 2 << "): " << format_double(holdout_mse) << "\n";
    return 0;
}

// ---- distill -------------------------------------------------------------------

int cmd_distill(const CommonArgs& args) {
    ConfigMap cfg = load_config(args);
    RunConfig rc = RunConfig::from_config(cfg);
    if (args.seed_opt->count() > 0) rc.seed = args.seed;
    const fs::path out = resolve_out(args.out);

    std::cout << rc.to_config_text();
    const RunRecord rec = distill_from_config(rc, out.string());
    std::cout << "status: " << rec.status << "\n";
    std::cout << "psnr: " << format_double(rec.initial_psnr) << " -> "
              << format_double(rec.final_psnr) << "\n";
    std::cout << "mask_iou: " << format_double(rec.final_mask_iou) << "\n";
    std::cout << "contour_laplacian: " << format_double(rec.final_laplacian) << "\n";
    return rec.status == "completed" ? 0 : 2;
}

// ---- ablate --------------------------------------------------------------------

AblationCell parse_cell(const std::string& s) {
    std::stringstream ss(s);
    std::string sched, mask, dual;
    if (!std::getline(ss, sched, ':') || !std::getline(ss, mask, ':') ||
        !std::getline(ss, dual, ':'))
        throw ConfigError("ablate.cells: each cell is schedule:mask:dual (got '" + s + "')");
    AblationCell cell;
    if (sched == "annealed")
        cell.schedule = TScheduleKind::annealed;
    else if (sched == "random")
        cell.schedule = TScheduleKind::random;
    else if (sched == "linear")
        cell.schedule = TScheduleKind::linear;
    else
        throw ConfigError("ablate.cells: unknown schedule '" + sched + "'");
    const auto on_off = [](const std::string& v, const char* what) {
        if (v == "on") return true;
        if (v == "off") return false;
        throw ConfigError(std::string("ablate.cells: ") + what + " must be on or off");
    };
    cell.mask_on = on_off(mask, "mask");
    cell.dual_teacher = on_off(dual, "dual");
    return cell;
}

int cmd_ablate(const CommonArgs& args) {
    ConfigMap cfg = load_config(args);
    // Consume the harness keys before the run config's unknown-key sweep.
    const int seeds = cfg.get_int("ablate.seeds", 10);
    const double threshold = cfg.get_double("ablate.psnr_threshold", 12.0);
    const std::string cells_text = cfg.get_string(
        "ablate.cells", "annealed:on:on,random:on:on,linear:on:on,annealed:off:on,annealed:on:off");
    RunConfig rc = RunConfig::from_config(cfg);
    if (args.seed_opt->count() > 0) rc.seed = args.seed;
    const fs::path out = resolve_out(args.out);

    std::vector<AblationCell> cells;
    {
        std::stringstream ss(cells_text);
        std::string item;
        while (std::getline(ss, item, ',')) cells.push_back(parse_cell(item));
    }
    if (cells.empty()) throw ConfigError("ablate.cells: empty grid");

    std::ostringstream echo;
    echo << rc.to_config_text();
    echo << "\n[ablate]\n";
    echo << "seeds = " << seeds << "\n";
    echo << "psnr_threshold = " << format_double(threshold) << "\n";
    echo << "cells = " << cells_text << "\n";
    emit_resolved(echo.str(), out);

    // Teachers stay alive for the whole grid; the guided wrappers hold
    // references to them.
    if (rc.view_checkpoint.empty()) throw ConfigError("ablate: teacher.view_checkpoint not set");
    if (rc.class_checkpoint.empty()) throw ConfigError("ablate: teacher.class_checkpoint not set");
    const DenoiserModel view = load_checkpoint(rc.view_checkpoint);
    const DenoiserModel cls = load_checkpoint(rc.class_checkpoint);
    if (view.data_dim != rc.teacher_res || cls.data_dim != rc.teacher_res)
        throw std::invalid_argument("ablate: teacher checkpoint resolution != teacher.res");
    DualTeacher teachers;
    teachers.coarse = guided_denoiser(view, rc.sds.cfg_scale_coarse);
    teachers.fine = guided_denoiser(cls, rc.sds.cfg_scale_fine);
    teachers.res = rc.teacher_res;

    const AblationGrid grid = ablate(rc, cells, seeds, teachers, threshold);
    write_ablation_csv(grid, (out / "ablation.csv").string());
    for (const AblationCell& cell : grid.cells)
        std::cout << "cell " << (cell.schedule == TScheduleKind::annealed ? "annealed"
                                 : cell.schedule == TScheduleKind::random ? "random"
                                                                          : "linear")
                  << ":" << (cell.mask_on ? "on" : "off") << ":"
                  << (cell.dual_teacher ? "on" : "off")
                  << "  failure_rate = " << format_double(cell.failure_rate)
                  << "  mean_psnr = " << format_double(cell.mean_psnr) << "\n";
    return 0;
}

// ---- theory-check --------------------------------------------------------------

int cmd_theory_check(const CommonArgs& args) {
    ConfigMap cfg = load_config(args);
    const fs::path out = resolve_out(args.out);
    const uint64_t seed = resolve_seed(args, cfg);

    const int dim = cfg.get_int("theory.dim", 2);
    const double mode_distance = cfg.get_double("theory.mode_distance", 2.0);
    const double mode_std = cfg.get_double("theory.mode_std", 0.05);
    const std::vector<double> deltas =
        parse_double_list(cfg.get_string("theory.deltas", "0,0.5,1"), "theory.deltas");
    const std::vector<int> t_grid = parse_int_list(
        cfg.get_string("theory.t_grid", "20,40,80,120,160,200,300,400,600,800,980"),
        "theory.t_grid");
    const int trials = cfg.get_int("theory.trials", 200);
    const double epsilon_scale = cfg.get_double("theory.epsilon_scale", 2.0);
    TeacherTrainConfig tc;
    tc.steps = cfg.get_int("theory.train_steps", 1500);
    tc.batch = cfg.get_int("theory.batch", 64);
    tc.hidden = cfg.get_int("theory.hidden", 64);
    tc.hidden_layers = cfg.get_int("theory.hidden_layers", 2);
    tc.lr = cfg.get_double("theory.lr", tc.lr);
    tc.weight_decay = cfg.get_double("theory.weight_decay", tc.weight_decay);
    const int T = cfg.get_int("diffusion.t_steps", 1000);
    const ScheduleKind dk = parse_diffusion(cfg.get_string("diffusion.schedule", "cosine"));
    cfg.reject_unknown_keys();
    if (dim < 1) throw ConfigError("theory.dim must be positive");
    for (size_t i = 1; i < t_grid.size(); ++i)
        if (t_grid[i] <= t_grid[i - 1]) throw ConfigError("theory.t_grid must be increasing");

    std::ostringstream echo;
    echo << "[run]\nseed = " << seed << "\n";
    echo << "\n[theory]\n";
    echo << "dim = " << dim << "\n";
    echo << "mode_distance = " << format_double(mode_distance) << "\n";
    echo << "mode_std = " << format_double(mode_std) << "\n";
    echo << "deltas = " << join_list(deltas, [](double v) { return format_double(v); }) << "\n";
    echo << "t_grid = " << join_list(t_grid, [](int v) { return std::to_string(v); }) << "\n";
    echo << "trials = " << trials << "\n";
    echo << "epsilon_scale = " << format_double(epsilon_scale) << "\n";
    echo << "train_steps = " << tc.steps << "\n";
    echo << "batch = " << tc.batch << "\n";
    echo << "hidden = " << tc.hidden << "\n";
    echo << "hidden_layers = " << tc.hidden_layers << "\n";
    echo << "lr = " << format_double(tc.lr) << "\n";
    echo << "weight_decay = " << format_double(tc.weight_decay) << "\n";
    echo << "\n[diffusion]\nt_steps = " << T << "\nschedule = " << diffusion_name(dk) << "\n";
    emit_resolved(echo.str(), out);

    // Two well-separated modes on the first axis.
    GaussianMixture gmm;
    gmm.dim = dim;
    gmm.weights = {0.5, 0.5};
    gmm.means.assign(2, Vec(dim, 0.0));
    gmm.means[0][0] = mode_distance / 2.0;
    gmm.means[1][0] = -mode_distance / 2.0;
    gmm.std = {mode_std, mode_std};

    const NoiseSchedule sched = make_schedule(T, dk);
    const RngPool pool(seed);
    const DatasetFn dataset = [&gmm](Rng& r) {
        return ProjectionSample{gmm_sample(gmm, r), Condition::unconditional()};
    };
    const DenoiserModel model = train_teacher(dataset, CondKind::none, tc, dim, sched, pool);
    const DenoiserFn trained = guided_denoiser(model, 1.0);

    Rng rng_trained = pool.stream("theory-trained");
    const TheoryCurve trained_curve =
        theory_curve(gmm, trained, deltas, t_grid, 0.0, trials, sched, rng_trained);
    Rng rng_oracle = pool.stream("theory-oracle");
    const TheoryCurve oracle_curve = theory_curve(gmm, gmm_eps_oracle(gmm, sched), deltas, t_grid,
                                                  0.0, trials, sched, rng_oracle);

    // Error floor: best on-distribution error (the smallest ||δ|| row).
    double floor = std::numeric_limits<double>::infinity();
    for (const TheoryCell& c : trained_curve.cells)
        if (c.delta_mag == deltas.front()) floor = std::min(floor, c.err);
    const double epsilon = epsilon_scale * floor;

    CsvWriter theory_csv((out / "theory.csv").string(), {"delta", "t", "err"});
    for (const TheoryCell& c : trained_curve.cells)
        theory_csv.row({CsvWriter::num(c.delta_mag), CsvWriter::num(c.t), CsvWriter::num(c.err)});
    theory_csv.close();

    CsvWriter oracle_csv((out / "oracle.csv").string(), {"delta", "t", "err"});
    double oracle_max = 0.0;
    for (const TheoryCell& c : oracle_curve.cells) {
        oracle_csv.row({CsvWriter::num(c.delta_mag), CsvWriter::num(c.t), CsvWriter::num(c.err)});
        oracle_max = std::max(oracle_max, c.err);
    }
    oracle_csv.close();

    CsvWriter min_csv((out / "minimal_t.csv").string(), {"delta", "minimal_t"});
    for (double mag : deltas) {
        int minimal = -1;
        for (const TheoryCell& c : trained_curve.cells)
            if (c.delta_mag == mag && c.err <= epsilon) {
                minimal = c.t;
                break;
            }
        min_csv.row({CsvWriter::num(mag), CsvWriter::num(minimal)});
        std::cout << "delta " << format_double(mag) << ": minimal adequate t = " << minimal
                  << "\n";
    }
    min_csv.close();

    CsvWriter summary((out / "summary.csv").string(), {"floor", "epsilon", "oracle_max_err"});
    summary.row({CsvWriter::num(floor), CsvWriter::num(epsilon), CsvWriter::num(oracle_max)});
    summary.close();
    std::cout << "floor = " << format_double(floor) << ", epsilon = " << format_double(epsilon)
              << ", oracle max err = " << format_double(oracle_max) << "\n";
    return 0;
}

// ---- variance-check -------------------------------------------------------------

int cmd_variance_check(const CommonArgs& args) {
    ConfigMap cfg = load_config(args);
    const fs::path out = resolve_out(args.out);
    const uint64_t seed = resolve_seed(args, cfg);

    const std::string ckpt = cfg.get_string("variance.checkpoint", "");
    const int t = cfg.get_int("variance.t", 900);
    const int draws = cfg.get_int("variance.draws", 16);
    const int downsample = cfg.get_int("variance.downsample", 4);
    const int ddim_steps = cfg.get_int("variance.ddim_steps", 8);
    const double view_angle = cfg.get_double("variance.angle", 0.0);
    const double cfg_scale = cfg.get_double("variance.cfg_scale", 1.0);
    const ShapeSpec shape = shape_from_config(cfg);
    const int res = cfg.get_int("teacher.res", 32);
    const int T = cfg.get_int("diffusion.t_steps", 1000);
    const ScheduleKind dk = parse_diffusion(cfg.get_string("diffusion.schedule", "cosine"));
    cfg.reject_unknown_keys();
    if (ckpt.empty()) throw ConfigError("variance.checkpoint not set");

    std::ostringstream echo;
    echo << "[run]\nseed = " << seed << "\n";
    echo << "\n[variance]\n";
    echo << "checkpoint = " << ckpt << "\n";
    echo << "t = " << t << "\n";
    echo << "draws = " << draws << "\n";
    echo << "downsample = " << downsample << "\n";
    echo << "ddim_steps = " << ddim_steps << "\n";
    echo << "angle = " << format_double(view_angle) << "\n";
    echo << "cfg_scale = " << format_double(cfg_scale) << "\n";
    echo << "\n" << shape_config_text(shape);
    echo << "\n[teacher]\nres = " << res << "\n";
    echo << "\n[diffusion]\nt_steps = " << T << "\nschedule = " << diffusion_name(dk) << "\n";
    emit_resolved(echo.str(), out);

    const DenoiserModel model = load_checkpoint(ckpt);
    if (model.data_dim != res)
        throw std::invalid_argument("variance-check: checkpoint resolution != teacher.res");
    const Condition cond = model.cond_kind == CondKind::view ? Condition::view_at(view_angle)
                           : model.cond_kind == CondKind::class_label
                               ? Condition::of_class(shape.class_id)
                               : Condition::unconditional();
    const DenoiserFn teacher = guided_denoiser(model, cfg_scale);
    const Vec reference = shape_projection(shape, view_angle, res);

    const NoiseSchedule sched = make_schedule(T, dk);
    Rng rng = RngPool(seed).stream("variance");
    const VarianceResult vr =
        variance_check(teacher, cond, reference, t, draws, downsample, ddim_steps, sched, rng);

    CsvWriter csv((out / "variance.csv").string(),
                  {"t", "draws", "downsample", "ssim_full", "ssim_low"});
    csv.row({CsvWriter::num(t), CsvWriter::num(draws), CsvWriter::num(downsample),
             CsvWriter::num(vr.ssim_full), CsvWriter::num(vr.ssim_low)});
    csv.close();
    write_pgm(vr.full_stack, (out / "denoised_full.pgm").string());
    write_pgm(vr.low_stack, (out / "denoised_low.pgm").string());
    std::cout << "ssim_full = " << format_double(vr.ssim_full)
              << ", ssim_low = " << format_double(vr.ssim_low) << "\n";
    return 0;
}

// ---- teacher-compare --------------------------------------------------------------

int cmd_teacher_compare(const CommonArgs& args) {
    ConfigMap cfg = load_config(args);
    const fs::path out = resolve_out(args.out);
    const uint64_t seed = resolve_seed(args, cfg);

    const std::string view_ckpt = cfg.get_string("compare.view_checkpoint", "");
    const std::string class_ckpt = cfg.get_string("compare.class_checkpoint", "");
    const int holdout = cfg.get_int("compare.holdout", 20);
    const int draws = cfg.get_int("compare.draws", 3);
    const double threshold = cfg.get_double("compare.threshold", 0.1);
    const int ddim_steps = cfg.get_int("compare.ddim_steps", 8);
    const std::vector<int> t_list =
        parse_int_list(cfg.get_string("compare.t_list", "200,400,600,800"), "compare.t_list");
    const int res = cfg.get_int("teacher.res", 32);
    const int T = cfg.get_int("diffusion.t_steps", 1000);
    const ScheduleKind dk = parse_diffusion(cfg.get_string("diffusion.schedule", "cosine"));
    cfg.reject_unknown_keys();
    if (view_ckpt.empty()) throw ConfigError("compare.view_checkpoint not set");
    if (class_ckpt.empty()) throw ConfigError("compare.class_checkpoint not set");

    std::ostringstream echo;
    echo << "[run]\nseed = " << seed << "\n";
    echo << "\n[compare]\n";
    echo << "view_checkpoint = " << view_ckpt << "\n";
    echo << "class_checkpoint = " << class_ckpt << "\n";
    echo << "holdout = " << holdout << "\n";
    echo << "draws = " << draws << "\n";
    echo << "threshold = " << format_double(threshold) << "\n";
    echo << "ddim_steps = " << ddim_steps << "\n";
    echo << "t_list = " << join_list(t_list, [](int v) { return std::to_string(v); }) << "\n";
    echo << "\n[teacher]\nres = " << res << "\n";
    echo << "\n[diffusion]\nt_steps = " << T << "\nschedule = " << diffusion_name(dk) << "\n";
    emit_resolved(echo.str(), out);

    const DenoiserModel view = load_checkpoint(view_ckpt);
    const DenoiserModel cls = load_checkpoint(class_ckpt);
    if (view.cond_kind != CondKind::view)
        throw std::invalid_argument("teacher-compare: view checkpoint is not view-conditioned");
    if (cls.cond_kind != CondKind::class_label)
        throw std::invalid_argument("teacher-compare: class checkpoint is not class-conditioned");
    if (view.data_dim != res || cls.data_dim != res)
        throw std::invalid_argument("teacher-compare: checkpoint resolution != teacher.res");

    const RngPool pool(seed);
    Rng shape_rng = pool.stream("compare-shapes");
    std::vector<ShapeSpec> shapes;
    shapes.reserve(holdout);
    for (int i = 0; i < holdout; ++i) shapes.push_back(sample_shape(i % 2, shape_rng));

    const NoiseSchedule sched = make_schedule(T, dk);
    Rng rng = pool.stream("compare");
    const std::vector<TeacherCompareRow> rows =
        teacher_compare(guided_denoiser(view, 1.0), guided_denoiser(cls, 1.0), shapes, t_list,
                        res, threshold, draws, ddim_steps, sched, rng);

    CsvWriter csv((out / "compare.csv").string(), {"t", "maskiou_view", "maskiou_class"});
    for (const TeacherCompareRow& row : rows) {
        csv.row({CsvWriter::num(row.t), CsvWriter::num(row.iou_view),
                 CsvWriter::num(row.iou_class)});
        std::cout << "t = " << row.t << ": view " << format_double(row.iou_view) << ", class "
                  << format_double(row.iou_class) << "\n";
    }
    csv.close();
    return 0;
}

// ---- render ---------------------------------------------------------------------

int cmd_render(const CommonArgs& args) {
    ConfigMap cfg = load_config(args);
    const fs::path out = resolve_out(args.out);
    const uint64_t seed = resolve_seed(args, cfg);

    const ShapeSpec shape = shape_from_config(cfg);
    const int res = cfg.get_int("render.res", 128);
    const int angles = cfg.get_int("render.angles", 8);
    cfg.reject_unknown_keys();
    if (res < 2) throw ConfigError("render.res must be at least 2");
    if (angles < 1) throw ConfigError("render.angles must be positive");

    std::ostringstream echo;
    echo << "[run]\nseed = " << seed << "\n";
    echo << "\n" << shape_config_text(shape);
    echo << "\n[render]\nres = " << res << "\nangles = " << angles << "\n";
    emit_resolved(echo.str(), out);

    write_pgm(rasterize(shape, res), (out / "shape.pgm").string());
    CsvWriter csv((out / "projections.csv").string(), {"angle", "bin", "value"});
    for (int a = 0; a < angles; ++a) {
        const double angle = kTwoPi * a / angles;
        const Vec proj = shape_projection(shape, angle, res);
        for (size_t b = 0; b < proj.size(); ++b)
            csv.row({CsvWriter::num(angle), CsvWriter::num(static_cast<int>(b)),
                     CsvWriter::num(proj[b])});
    }
    csv.close();
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"score-distillation lab: teachers, distillation runs and experiment harnesses"};
    app.require_subcommand(1);

    CommonArgs a_train, a_distill, a_ablate, a_theory, a_variance, a_compare, a_render;
    CLI::App* c_train =
        app.add_subcommand("teacher-train", "train a conditional denoising teacher");
    CLI::App* c_distill = app.add_subcommand("distill", "run two-stage distillation");
    CLI::App* c_ablate = app.add_subcommand("ablate", "failure-rate grid over schedule/mask/teacher");
    CLI::App* c_theory =
        app.add_subcommand("theory-check", "score-error floor vs off-distribution distance");
    CLI::App* c_variance =
        app.add_subcommand("variance-check", "denoised-set agreement at full vs low resolution");
    CLI::App* c_compare =
        app.add_subcommand("teacher-compare", "view- vs class-conditioned denoising quality");
    CLI::App* c_render = app.add_subcommand("render", "rasterize a shape and its projections");
    add_common(c_train, a_train);
    add_common(c_distill, a_distill);
    add_common(c_ablate, a_ablate);
    add_common(c_theory, a_theory);
    add_common(c_variance, a_variance);
    add_common(c_compare, a_compare);
    add_common(c_render, a_render);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help();
        return 1;
    }

    try {
        if (c_train->parsed()) return cmd_teacher_train(a_train);
        if (c_distill->parsed()) return cmd_distill(a_distill);
        if (c_ablate->parsed()) return cmd_ablate(a_ablate);
        if (c_theory->parsed()) return cmd_theory_check(a_theory);
        if (c_variance->parsed()) return cmd_variance_check(a_variance);
        if (c_compare->parsed()) return cmd_teacher_compare(a_compare);
        if (c_render->parsed()) return cmd_render(a_render);
        std::cerr << "no subcommand\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
