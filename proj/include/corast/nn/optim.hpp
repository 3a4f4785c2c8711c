#pragma once

#include <cstdint>
#include <vector>

#include "corast/nn/parameters.hpp"

namespace corast::nn {

struct AdamOptions {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Moment estimates for every parameter of one ParameterSet, in set order.
struct AdamState {
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    std::int64_t t = 0;
};

/// Adam with bias correction and no weight decay.
class Adam {
public:
    explicit Adam(AdamOptions options = {}) : options_(options) {}

    /// One update from the gradients currently held in `params`.
    void step(ParameterSet& params, double lr);

    const AdamState& state() const { return state_; }
    const AdamOptions& options() const { return options_; }
    void reset() { state_ = {}; }

private:
    AdamOptions options_;
    AdamState state_;
};

struct LrSchedule {
    double lr0 = 1e-3;
    double eta_min = 0.0;
    std::int64_t t_max = 1;
};

/// Cosine annealing: eta_min + (lr0 - eta_min) * (1 + cos(pi * step / t_max)) / 2.
/// Steps outside [0, t_max] are clamped with a warning.
double cosine_lr(const LrSchedule& schedule, std::int64_t step);

}  // namespace corast::nn
