#pragma once

// Differentiable operations on Tensor. All ops allocate a fresh output and
// never mutate their inputs; gradients are recorded only when an input has
// requires_grad set.

#include <cstdint>

#include "abt/tensor.hpp"

namespace abt {

// --- elementwise ---
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double c);
Tensor mul_scalar(const Tensor& a, double c);
Tensor abs_val(const Tensor& a);
// Natural log; caller guarantees positivity (pair with clamp for losses).
Tensor log_val(const Tensor& a);
// Clamp to [lo, hi]; gradient is passed through strictly inside the bounds.
Tensor clamp(const Tensor& a, double lo, double hi);

// --- reductions ---
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

// --- structure ---
Tensor reshape(const Tensor& a, const Shape& shape);
// [N,Ca,H,W] + [N,Cb,H,W] -> [N,Ca+Cb,H,W]
Tensor concat_channels(const Tensor& a, const Tensor& b);

// --- activations ---
enum class ActKind { relu, leaky_relu, sigmoid, tanh };

struct Activation {
    ActKind kind;
    double slope = 0.0;  // leaky_relu only, must lie in (0,1)

    static Activation relu() { return {ActKind::relu, 0.0}; }
    static Activation leaky_relu(double slope) { return {ActKind::leaky_relu, slope}; }
    static Activation sigmoid() { return {ActKind::sigmoid, 0.0}; }
    static Activation tanh() { return {ActKind::tanh, 0.0}; }
};

Tensor activation(const Tensor& a, const Activation& act);

// Inverted dropout: each element is zeroed with probability `rate` and the
// survivors scaled by 1/(1-rate). The mask depends only on `seed`, so a call
// is reproducible; training=false is the identity.
Tensor dropout(const Tensor& a, double rate, bool training, std::uint64_t seed);

// --- dense layers ---
// input [N,Cin,H,W], kernel [Cout,Cin,kh,kw], bias [Cout]
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, int stride,
              int padding);
// input [N,Cin,H,W], kernel [Cin,Cout,kh,kw], bias [Cout]; exact adjoint of
// conv2d with the same stride/padding.
Tensor conv_transpose2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, int stride,
                        int padding);
// input [N,F], weight [O,F], bias [O] -> [N,O]
Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias);

}  // namespace abt
