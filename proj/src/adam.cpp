#include "abt/adam.hpp"

#include <cmath>

namespace abt {

AdamState AdamState::init(const ModelParams& params, double learning_rate, double beta1,
                          double beta2, double epsilon) {
    if (!(learning_rate > 0.0)) throw InvalidHyperparam("adam learning rate must be positive");
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
        throw InvalidHyperparam("adam betas must lie in (0,1)");
    }
    if (!(epsilon > 0.0)) throw InvalidHyperparam("adam epsilon must be positive");
    AdamState s;
    s.learning_rate = learning_rate;
    s.beta1 = beta1;
    s.beta2 = beta2;
    s.epsilon = epsilon;
    for (const auto& [name, t] : params.entries) {
        s.first_moment.emplace_back(static_cast<std::size_t>(t.numel()), 0.0);
        s.second_moment.emplace_back(static_cast<std::size_t>(t.numel()), 0.0);
    }
    return s;
}

void adam_step(ModelParams& params, AdamState& state) {
    if (state.first_moment.size() != params.size() ||
        state.second_moment.size() != params.size()) {
        throw ShapeMismatch("adam state not aligned with parameter count");
    }
    state.step_count += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
    for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor& t = params.entries[p].second;
        auto& m = state.first_moment[p];
        auto& v = state.second_moment[p];
        const std::size_t n = static_cast<std::size_t>(t.numel());
        if (m.size() != n || v.size() != n) {
            throw ShapeMismatch("adam moment length mismatch for " + params.entries[p].first);
        }
        auto grad = t.grad();
        if (!grad.empty() && grad.size() != n) {
            throw ShapeMismatch("gradient length mismatch for " + params.entries[p].first);
        }
        auto data = t.mutable_data();
        for (std::size_t i = 0; i < n; ++i) {
            const double g = grad.empty() ? 0.0 : grad[i];
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            data[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
        }
    }
}

}  // namespace abt
