#include "sdslab/teacher.hpp"

#include "sdslab/io.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sdslab {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;

double wrap_angle(double a) {
    a = std::fmod(a, kTwoPi);
    if (a < 0) a += kTwoPi;
    return a;
}

// Keep parameters exactly representable in float32 so checkpoints
// round-trip bit-exactly.
void snap_to_f32(Vec& params) {
    for (double& p : params) p = static_cast<double>(static_cast<float>(p));
}
} // namespace

Condition Condition::view_at(double angle_rad) {
    Condition c;
    c.kind = CondKind::view;
    c.angle = wrap_angle(angle_rad);
    return c;
}

Condition Condition::of_class(int id) {
    Condition c;
    c.kind = CondKind::class_label;
    c.class_id = id;
    return c;
}

// ---- Gaussian mixture oracle ----------------------------------------------

Vec gmm_score(const GaussianMixture& gmm, const Vec& x, int t, const NoiseSchedule& sched) {
    if (static_cast<int>(x.size()) != gmm.dim)
        throw std::invalid_argument("gmm_score: dimension mismatch");
    const double a = sched.alpha[t], s = sched.sigma[t];
    const size_t K = gmm.weights.size();

    // Log-density of each component of the t-marginal, stabilized with
    // log-sum-exp for the responsibilities.
    Vec logp(K);
    Vec var(K);
    for (size_t k = 0; k < K; ++k) {
        var[k] = a * a * gmm.std[k] * gmm.std[k] + s * s;
        double sq = 0.0;
        for (int i = 0; i < gmm.dim; ++i) {
            const double d = x[i] - a * gmm.means[k][i];
            sq += d * d;
        }
        logp[k] = std::log(gmm.weights[k]) - 0.5 * gmm.dim * std::log(kTwoPi * var[k]) -
                  sq / (2.0 * var[k]);
    }
    const double lmax = *std::max_element(logp.begin(), logp.end());
    double z = 0.0;
    for (size_t k = 0; k < K; ++k) z += std::exp(logp[k] - lmax);

    Vec out(gmm.dim, 0.0);
    for (size_t k = 0; k < K; ++k) {
        const double resp = std::exp(logp[k] - lmax) / z;
        for (int i = 0; i < gmm.dim; ++i)
            out[i] += resp * (a * gmm.means[k][i] - x[i]) / var[k];
    }
    return out;
}

Vec gmm_sample(const GaussianMixture& gmm, Rng& rng) {
    const double u = rng.uniform();
    size_t k = 0;
    double acc = 0.0;
    for (; k + 1 < gmm.weights.size(); ++k) {
        acc += gmm.weights[k];
        if (u < acc) break;
    }
    Vec x = rng.normal_vec(gmm.dim);
    for (int i = 0; i < gmm.dim; ++i) x[i] = gmm.means[k][i] + gmm.std[k] * x[i];
    return x;
}

Vec gmm_eps(const GaussianMixture& gmm, const NoisySample& x_t, const NoiseSchedule& sched) {
    Vec score = gmm_score(gmm, x_t.data, x_t.t, sched);
    scale(score, -sched.sigma[x_t.t]);
    return score;
}

DenoiserFn gmm_eps_oracle(GaussianMixture gmm, const NoiseSchedule& sched) {
    return [gmm = std::move(gmm), &sched](const Vec& x, int t, const Condition&) {
        return gmm_eps(gmm, NoisySample{x, t}, sched);
    };
}

// ---- denoiser MLP -----------------------------------------------------------

int DenoiserModel::cond_dim() const {
    switch (cond_kind) {
    case CondKind::view: return 2;
    case CondKind::class_label: return num_classes;
    case CondKind::none: return 0;
    }
    return 0;
}

size_t DenoiserModel::param_count() const {
    size_t n = 0;
    for (size_t l = 0; l + 1 < widths.size(); ++l)
        n += static_cast<size_t>(widths[l + 1]) * widths[l] + widths[l + 1];
    return n;
}

namespace {
Vec embed_input(const DenoiserModel& m, const Vec& x_t, int t, const Condition& cond) {
    Vec in;
    in.reserve(m.in_dim());
    in.insert(in.end(), x_t.begin(), x_t.end());
    const double u = static_cast<double>(t) / m.T;
    for (int j = 0; j < m.t_freqs; ++j) {
        const double w = 3.14159265358979323846 * std::ldexp(1.0, j) * u;
        in.push_back(std::sin(w));
        in.push_back(std::cos(w));
    }
    switch (m.cond_kind) {
    case CondKind::view:
        if (cond.kind == CondKind::view) {
            in.push_back(std::sin(cond.angle));
            in.push_back(std::cos(cond.angle));
        } else {
            in.push_back(0.0);
            in.push_back(0.0);
        }
        break;
    case CondKind::class_label:
        for (int c = 0; c < m.num_classes; ++c)
            in.push_back(cond.kind == CondKind::class_label && cond.class_id == c ? 1.0 : 0.0);
        break;
    case CondKind::none: break;
    }
    return in;
}

// Forward pass keeping all activations; a[0] is the embedded input,
// hidden layers use tanh, the final layer is linear.
std::vector<Vec> forward_activations(const DenoiserModel& m, const Vec& input) {
    const size_t L = m.widths.size() - 1;
    std::vector<Vec> a(L + 1);
    a[0] = input;
    size_t off = 0;
    for (size_t l = 0; l < L; ++l) {
        const int nin = m.widths[l], nout = m.widths[l + 1];
        Vec z(nout);
        for (int o = 0; o < nout; ++o) {
            double acc = m.params[off + static_cast<size_t>(nout) * nin + o]; // bias
            const double* w = &m.params[off + static_cast<size_t>(o) * nin];
            for (int i = 0; i < nin; ++i) acc += w[i] * a[l][i];
            z[o] = (l + 1 == L) ? acc : std::tanh(acc);
        }
        a[l + 1] = std::move(z);
        off += static_cast<size_t>(nout) * nin + nout;
    }
    return a;
}
} // namespace

DenoiserModel make_denoiser(int data_dim, int T, CondKind kind, int hidden, int hidden_layers,
                            int num_classes, int t_freqs, Rng& rng) {
    if (data_dim < 1 || hidden < 1 || hidden_layers < 1)
        throw std::invalid_argument("make_denoiser: invalid architecture");
    DenoiserModel m;
    m.data_dim = data_dim;
    m.T = T;
    m.cond_kind = kind;
    m.num_classes = num_classes;
    m.t_freqs = t_freqs;
    m.widths.push_back(m.in_dim());
    for (int l = 0; l < hidden_layers; ++l) m.widths.push_back(hidden);
    m.widths.push_back(data_dim);

    m.params.resize(m.param_count());
    size_t off = 0;
    for (size_t l = 0; l + 1 < m.widths.size(); ++l) {
        const int nin = m.widths[l], nout = m.widths[l + 1];
        const double bound = std::sqrt(6.0 / (nin + nout));
        for (int i = 0; i < nout * nin; ++i) m.params[off + i] = rng.uniform(-bound, bound);
        if (l == 0) {
            // Condition columns start at zero: an unseen condition is then a
            // strict no-op, and a fully dropped-out condition never trains.
            for (int r = 0; r < nout; ++r)
                for (int c = nin - m.cond_dim(); c < nin; ++c)
                    m.params[off + static_cast<size_t>(r) * nin + c] = 0.0;
        }
        off += static_cast<size_t>(nout) * nin;
        for (int i = 0; i < nout; ++i) m.params[off + i] = 0.0;
        off += nout;
    }
    snap_to_f32(m.params);
    return m;
}

Vec mlp_forward(const DenoiserModel& model, const Vec& x_t, int t, const Condition& cond) {
    if (static_cast<int>(x_t.size()) != model.data_dim)
        throw std::invalid_argument("mlp_forward: input layout mismatch");
    if (model.params.size() != model.param_count())
        throw std::invalid_argument("mlp_forward: parameter vector length mismatch");
    return forward_activations(model, embed_input(model, x_t, t, cond)).back();
}

MlpGrads mlp_vjp(const DenoiserModel& model, const Vec& x_t, int t, const Condition& cond,
                 const Vec& gout) {
    if (static_cast<int>(gout.size()) != model.data_dim)
        throw std::invalid_argument("mlp_vjp: gout length mismatch");
    const std::vector<Vec> a = forward_activations(model, embed_input(model, x_t, t, cond));
    const size_t L = model.widths.size() - 1;

    MlpGrads g;
    g.params.assign(model.params.size(), 0.0);

    // Layer parameter offsets.
    std::vector<size_t> offsets(L);
    size_t off = 0;
    for (size_t l = 0; l < L; ++l) {
        offsets[l] = off;
        off += static_cast<size_t>(model.widths[l + 1]) * model.widths[l] + model.widths[l + 1];
    }

    Vec delta = gout; // dL/da at the current layer output
    for (size_t l = L; l-- > 0;) {
        const int nin = model.widths[l], nout = model.widths[l + 1];
        if (l + 1 != L)
            for (int o = 0; o < nout; ++o) delta[o] *= 1.0 - a[l + 1][o] * a[l + 1][o];
        double* gw = &g.params[offsets[l]];
        double* gb = gw + static_cast<size_t>(nout) * nin;
        Vec prev(nin, 0.0);
        for (int o = 0; o < nout; ++o) {
            const double d = delta[o];
            gb[o] += d;
            const double* w = &model.params[offsets[l] + static_cast<size_t>(o) * nin];
            double* gwrow = gw + static_cast<size_t>(o) * nin;
            for (int i = 0; i < nin; ++i) {
                gwrow[i] += d * a[l][i];
                prev[i] += d * w[i];
            }
        }
        delta = std::move(prev);
    }
    g.input.assign(delta.begin(), delta.begin() + model.data_dim);
    return g;
}

Vec cfg_combine(const Vec& eps_uncond, const Vec& eps_cond, double scale) {
    require_same_shape(eps_uncond, eps_cond, "cfg_combine");
    if (scale < 0) throw std::invalid_argument("cfg_combine: scale must be >= 0");
    Vec out(eps_uncond.size());
    for (size_t i = 0; i < out.size(); ++i)
        out[i] = eps_uncond[i] + scale * (eps_cond[i] - eps_uncond[i]);
    return out;
}

DenoiserFn guided_denoiser(const DenoiserModel& model, double cfg_scale) {
    return [&model, cfg_scale](const Vec& x, int t, const Condition& cond) {
        if (cfg_scale == 1.0 || cond.kind == CondKind::none)
            return mlp_forward(model, x, t, cond);
        const Vec u = mlp_forward(model, x, t, Condition::unconditional());
        const Vec c = mlp_forward(model, x, t, cond);
        return cfg_combine(u, c, cfg_scale);
    };
}

// ---- training ---------------------------------------------------------------

double train_step(DenoiserModel& model, const TrainBatch& batch, const NoiseSchedule& sched,
                  AdamW& opt) {
    if (batch.size() == 0) throw std::invalid_argument("train_step: empty batch");
    const size_t B = batch.size();
    const double denom = static_cast<double>(B) * model.data_dim;

    double loss = 0.0;
    Vec grads(model.params.size(), 0.0);
    for (size_t b = 0; b < B; ++b) {
        const NoisySample x_t = perturb(batch.x0[b], batch.t[b], batch.noise[b], sched);
        const Vec eps_hat = mlp_forward(model, x_t.data, batch.t[b], batch.cond[b]);
        Vec gout(eps_hat.size());
        for (size_t i = 0; i < eps_hat.size(); ++i) {
            const double r = eps_hat[i] - batch.noise[b][i];
            loss += r * r;
            gout[i] = 2.0 * r / denom;
        }
        const MlpGrads g = mlp_vjp(model, x_t.data, batch.t[b], batch.cond[b], gout);
        axpy(1.0, g.params, grads);
    }
    loss /= denom;
    if (!std::isfinite(loss)) throw TrainingDivergence(opt.steps_taken());

    opt.update(model.params, grads);
    snap_to_f32(model.params);
    return loss;
}

DenoiserModel train_teacher(const DatasetFn& dataset, CondKind kind, const TeacherTrainConfig& cfg,
                            int data_dim, const NoiseSchedule& sched, const RngPool& rng,
                            std::vector<TrainLogRow>* log) {
    if (!dataset) throw std::invalid_argument("train_teacher: empty dataset");
    Rng init_rng = rng.stream("teacher-init");
    Rng data_rng = rng.stream("teacher-data");
    DenoiserModel model = make_denoiser(data_dim, sched.T, kind, cfg.hidden, cfg.hidden_layers,
                                        cfg.num_classes, cfg.t_freqs, init_rng);
    AdamW opt(AdamWConfig{.lr = cfg.lr, .weight_decay = cfg.weight_decay});

    for (int step = 0; step < cfg.steps; ++step) {
        TrainBatch batch;
        for (int b = 0; b < cfg.batch; ++b) {
            ProjectionSample s = dataset(data_rng);
            if (static_cast<int>(s.x0.size()) != data_dim)
                throw std::invalid_argument("train_teacher: dataset sample has wrong length");
            // Condition dropout trains the unconditional branch for CFG.
            if (data_rng.uniform() < cfg.cond_dropout) s.cond = Condition::unconditional();
            batch.x0.push_back(std::move(s.x0));
            batch.cond.push_back(s.cond);
            batch.t.push_back(data_rng.uniform_int(1, sched.T));
            batch.noise.push_back(data_rng.normal_vec(data_dim));
        }
        double loss;
        try {
            loss = train_step(model, batch, sched, opt);
        } catch (const TrainingDivergence&) {
            throw TrainingDivergence(step);
        }
        if (log && (step % cfg.log_every == 0 || step + 1 == cfg.steps))
            log->push_back({step, loss});
    }
    return model;
}

double eval_eps_mse(const DenoiserModel& model, const DatasetFn& dataset, int t,
                    const NoiseSchedule& sched, int n, Rng& rng) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        const ProjectionSample s = dataset(rng);
        const Vec noise = rng.normal_vec(s.x0.size());
        const NoisySample x_t = perturb(s.x0, t, noise, sched);
        const Vec eps_hat = mlp_forward(model, x_t.data, t, s.cond);
        acc += mse(eps_hat, noise);
    }
    return acc / n;
}

// ---- checkpoint (de)serialization --------------------------------------------

void save_checkpoint(const DenoiserModel& model, const std::string& path) {
    std::vector<Tensor> tensors;
    Tensor meta;
    meta.name = "meta";
    meta.dims = {5};
    meta.data = {static_cast<float>(model.data_dim), static_cast<float>(model.T),
                 static_cast<float>(static_cast<int>(model.cond_kind)),
                 static_cast<float>(model.num_classes), static_cast<float>(model.t_freqs)};
    tensors.push_back(std::move(meta));

    Tensor widths;
    widths.name = "widths";
    widths.dims = {static_cast<uint32_t>(model.widths.size())};
    for (int w : model.widths) widths.data.push_back(static_cast<float>(w));
    tensors.push_back(std::move(widths));

    Tensor params;
    params.name = "params";
    params.dims = {static_cast<uint32_t>(model.params.size())};
    params.data.assign(model.params.begin(), model.params.end());
    tensors.push_back(std::move(params));

    save_tensor_file(tensors, path);
}

DenoiserModel load_checkpoint(const std::string& path) {
    const std::vector<Tensor> tensors = load_tensor_file(path);
    auto find = [&](const std::string& name) -> const Tensor& {
        for (const Tensor& t : tensors)
            if (t.name == name) return t;
        throw CorruptCheckpoint("checkpoint missing tensor '" + name + "': " + path);
    };
    const Tensor& meta = find("meta");
    if (meta.data.size() != 5) throw CorruptCheckpoint("bad meta tensor in " + path);
    DenoiserModel m;
    m.data_dim = static_cast<int>(meta.data[0]);
    m.T = static_cast<int>(meta.data[1]);
    m.cond_kind = static_cast<CondKind>(static_cast<int>(meta.data[2]));
    m.num_classes = static_cast<int>(meta.data[3]);
    m.t_freqs = static_cast<int>(meta.data[4]);
    for (float w : find("widths").data) m.widths.push_back(static_cast<int>(w));
    const Tensor& params = find("params");
    m.params.assign(params.data.begin(), params.data.end());
    if (m.widths.empty() || m.widths.front() != m.in_dim() || m.widths.back() != m.data_dim ||
        m.params.size() != m.param_count())
        throw CorruptCheckpoint("inconsistent model dimensions in " + path);
    return m;
}

} // namespace sdslab
