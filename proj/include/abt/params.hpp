#pragma once

#include <string>
#include <utility>
#include <vector>

#include "abt/tensor.hpp"

namespace abt {

// Ordered, named collection of trainable tensors. Order is part of the
// contract: checkpoints and optimizer state are aligned by position.
struct ModelParams {
    std::vector<std::pair<std::string, Tensor>> entries;

    void add(std::string name, Tensor t) { entries.emplace_back(std::move(name), std::move(t)); }

    Tensor& at(const std::string& name) {
        for (auto& [n, t] : entries) {
            if (n == name) return t;
        }
        throw ShapeMismatch("no parameter named " + name);
    }

    const Tensor& at(const std::string& name) const {
        return const_cast<ModelParams*>(this)->at(name);
    }

    std::size_t size() const { return entries.size(); }

    void zero_grad() {
        for (auto& [n, t] : entries) t.zero_grad();
    }

    std::int64_t total_numel() const {
        std::int64_t n = 0;
        for (const auto& [name, t] : entries) n += t.numel();
        return n;
    }
};

}  // namespace abt
