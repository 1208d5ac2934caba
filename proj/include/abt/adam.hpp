#pragma once

#include <cstdint>
#include <vector>

#include "abt/params.hpp"

namespace abt {

// Adam with bias correction. Moment arrays are kept per parameter tensor,
// aligned with the ModelParams order.
struct AdamState {
    double learning_rate = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::int64_t step_count = 0;
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;

    static AdamState init(const ModelParams& params, double learning_rate, double beta1,
                          double beta2, double epsilon = 1e-8);
};

// One update over every parameter, reading gradients off the tensors
// (populated by backward). A parameter whose grad was never touched is
// treated as having zero gradient. Increments step_count by exactly 1.
void adam_step(ModelParams& params, AdamState& state);

}  // namespace abt
