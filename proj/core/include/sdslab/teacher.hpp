#pragma once

#include "sdslab/diffusion.hpp"
#include "sdslab/grid.hpp"
#include "sdslab/optim.hpp"
#include "sdslab/rng.hpp"

#include <functional>
#include <string>
#include <vector>

namespace sdslab {

enum class CondKind { view, class_label, none };

struct Condition {
    CondKind kind = CondKind::none;
    double angle = 0.0; // radians in [0, 2pi), valid iff kind == view
    int class_id = 0;   // valid iff kind == class_label

    static Condition view_at(double angle_rad);
    static Condition of_class(int id);
    static Condition unconditional() { return Condition{}; }
};

// Analytic data distribution with isotropic components; its noisy
// marginals have closed-form scores, making it an exact teacher oracle.
struct GaussianMixture {
    int dim = 0;
    Vec weights;            // K nonnegative entries summing to 1
    std::vector<Vec> means; // K vectors of length dim
    Vec std;                // K positive isotropic standard deviations
};

// Exact score of the time-t marginal: the mixture with component means
// alpha_t * mu_k and variances alpha_t^2 * std_k^2 + sigma_t^2.
Vec gmm_score(const GaussianMixture& gmm, const Vec& x, int t, const NoiseSchedule& sched);

// Draws one sample from the mixture.
Vec gmm_sample(const GaussianMixture& gmm, Rng& rng);

// Bayes-optimal epsilon-prediction, -sigma_t * gmm_score.
Vec gmm_eps(const GaussianMixture& gmm, const NoisySample& x_t, const NoiseSchedule& sched);

// Wraps the exact oracle as a denoiser callable (condition is ignored).
DenoiserFn gmm_eps_oracle(GaussianMixture gmm, const NoiseSchedule& sched);

// Small fully connected conditional epsilon-prediction network. Input
// layout is concat(noisy projection, sinusoidal t-embedding, condition
// embedding); output has the projection length. Parameters are kept on
// the float32 grid so checkpoints round-trip bit-exactly.
struct DenoiserModel {
    int data_dim = 0;
    int T = 1000;
    CondKind cond_kind = CondKind::none;
    int num_classes = 2;
    int t_freqs = 8;
    std::vector<int> widths; // {in_dim, hidden..., data_dim}
    Vec params;              // per layer: W row-major (out x in), then b

    int cond_dim() const;
    int in_dim() const { return data_dim + 2 * t_freqs + cond_dim(); }
    size_t param_count() const;
};

DenoiserModel make_denoiser(int data_dim, int T, CondKind kind, int hidden, int hidden_layers,
                            int num_classes, int t_freqs, Rng& rng);

Vec mlp_forward(const DenoiserModel& model, const Vec& x_t, int t, const Condition& cond);

struct MlpGrads {
    Vec input; // gradient w.r.t. the noisy-projection slice of the input
    Vec params;
};

// Vector-Jacobian product: gradients of <gout, mlp_forward(...)> w.r.t.
// the data input and the flat parameter vector.
MlpGrads mlp_vjp(const DenoiserModel& model, const Vec& x_t, int t, const Condition& cond,
                 const Vec& gout);

Vec cfg_combine(const Vec& eps_uncond, const Vec& eps_cond, double scale);

// Wraps a model as a classifier-free-guided denoiser callable.
DenoiserFn guided_denoiser(const DenoiserModel& model, double cfg_scale);

struct TrainBatch {
    std::vector<Vec> x0;
    std::vector<int> t;
    std::vector<Vec> noise;
    std::vector<Condition> cond;
    size_t size() const { return x0.size(); }
};

// Mean squared epsilon-prediction error over the batch plus one optimizer
// update. Throws TrainingDivergence on a non-finite loss.
double train_step(DenoiserModel& model, const TrainBatch& batch, const NoiseSchedule& sched,
                  AdamW& opt);

struct TrainingDivergence : std::runtime_error {
    long iteration;
    explicit TrainingDivergence(long it)
        : std::runtime_error("training diverged (non-finite loss) at iteration " + std::to_string(it)),
          iteration(it) {}
};

struct ProjectionSample {
    Vec x0;
    Condition cond;
};

// Draws one (projection, condition) training pair.
using DatasetFn = std::function<ProjectionSample(Rng&)>;

struct TeacherTrainConfig {
    int steps = 3000;
    int batch = 64;
    double lr = 1e-3;
    double weight_decay = 2e-5;
    double cond_dropout = 0.1;
    int hidden = 256;
    int hidden_layers = 3;
    int t_freqs = 8;
    int num_classes = 2;
    int log_every = 100;
};

struct TrainLogRow {
    int step;
    double loss;
};

DenoiserModel train_teacher(const DatasetFn& dataset, CondKind kind, const TeacherTrainConfig& cfg,
                            int data_dim, const NoiseSchedule& sched, const RngPool& rng,
                            std::vector<TrainLogRow>* log = nullptr);

// Mean per-element epsilon-MSE of the model on `n` draws at fixed t.
double eval_eps_mse(const DenoiserModel& model, const DatasetFn& dataset, int t,
                    const NoiseSchedule& sched, int n, Rng& rng);

void save_checkpoint(const DenoiserModel& model, const std::string& path);
DenoiserModel load_checkpoint(const std::string& path);

} // namespace sdslab
