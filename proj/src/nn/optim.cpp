#include "corast/nn/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "corast/errors.hpp"
#include "corast/log.hpp"

namespace corast::nn {

void Adam::step(ParameterSet& params, double lr) {
    auto& items = params.items();
    if (state_.t == 0 && state_.m.empty()) {
        for (const auto& p : items) {
            state_.m.emplace_back(p.value.shape());
            state_.v.emplace_back(p.value.shape());
        }
    }
    if (state_.m.size() != items.size())
        throw ConfigError("Adam: parameter count changed between steps");
    for (std::size_t i = 0; i < items.size(); ++i)
        if (state_.m[i].shape() != items[i].value.shape())
            throw ConfigError("Adam: shape of '" + items[i].name + "' changed between steps");

    state_.t += 1;
    const double b1 = options_.beta1;
    const double b2 = options_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(state_.t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(state_.t));
    for (std::size_t i = 0; i < items.size(); ++i) {
        double* w = items[i].value.data();
        const double* g = items[i].grad.data();
        double* m = state_.m[i].data();
        double* v = state_.v[i].data();
        const std::size_t n = items[i].value.size();
        for (std::size_t j = 0; j < n; ++j) {
            m[j] = b1 * m[j] + (1.0 - b1) * g[j];
            v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
            const double m_hat = m[j] / c1;
            const double v_hat = v[j] / c2;
            w[j] -= lr * m_hat / (std::sqrt(v_hat) + options_.eps);
        }
    }
}

double cosine_lr(const LrSchedule& schedule, std::int64_t step) {
    if (schedule.t_max <= 0) throw ConfigError("cosine_lr: t_max must be positive");
    if (step < 0 || step > schedule.t_max) {
        warn("cosine_lr: step " + std::to_string(step) + " outside [0, " + std::to_string(schedule.t_max) +
             "], clamped");
        step = std::clamp<std::int64_t>(step, 0, schedule.t_max);
    }
    const double phase = std::numbers::pi * static_cast<double>(step) / static_cast<double>(schedule.t_max);
    return schedule.eta_min + (schedule.lr0 - schedule.eta_min) * (1.0 + std::cos(phase)) / 2.0;
}

}  // namespace corast::nn
