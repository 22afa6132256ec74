#pragma once

#include "sdslab/grid.hpp"

#include <span>

namespace sdslab {

struct AdamWConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 2e-5; // decoupled
};

// Adaptive-moment optimizer with decoupled weight decay.
class AdamW {
public:
    AdamW() = default;
    explicit AdamW(AdamWConfig cfg) : cfg_(cfg) {}

    // One update step; throws std::domain_error on non-finite gradients.
    void update(std::span<double> params, std::span<const double> grads);

    const AdamWConfig& config() const { return cfg_; }
    long steps_taken() const { return step_; }

private:
    AdamWConfig cfg_;
    Vec m_, v_;
    long step_ = 0;
};

} // namespace sdslab
