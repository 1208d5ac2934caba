#include "abt/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "abt/rng.hpp"
#include "conv_kernels.hpp"

namespace abt {

namespace {

using detail::ConvGeom;
using detail::TensorNode;

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeMismatch(std::string(op) + ": " + shape_str(a.shape()) + " vs " +
                            shape_str(b.shape()));
    }
}

// parent grad may be absent when that input does not require gradients
void accumulate(TensorNode& parent, const std::vector<double>& contribution) {
    if (!parent.requires_grad) return;
    for (std::size_t i = 0; i < contribution.size(); ++i) parent.grad[i] += contribution[i];
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    std::vector<double> out(a.data().begin(), a.data().end());
    auto bd = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bd[i];
    return Tensor::make_node(a.shape(), std::move(out), {a, b}, [](TensorNode& self) {
        accumulate(*self.parents[0], self.grad);
        accumulate(*self.parents[1], self.grad);
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    std::vector<double> out(a.data().begin(), a.data().end());
    auto bd = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bd[i];
    return Tensor::make_node(a.shape(), std::move(out), {a, b}, [](TensorNode& self) {
        accumulate(*self.parents[0], self.grad);
        TensorNode& b_node = *self.parents[1];
        if (b_node.requires_grad) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) b_node.grad[i] -= self.grad[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    std::vector<double> out(a.numel());
    auto ad = a.data();
    auto bd = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] * bd[i];
    return Tensor::make_node(a.shape(), std::move(out), {a, b}, [](TensorNode& self) {
        TensorNode& a_node = *self.parents[0];
        TensorNode& b_node = *self.parents[1];
        if (a_node.requires_grad) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                a_node.grad[i] += self.grad[i] * b_node.data[i];
            }
        }
        if (b_node.requires_grad) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                b_node.grad[i] += self.grad[i] * a_node.data[i];
            }
        }
    });
}

Tensor add_scalar(const Tensor& a, double c) {
    std::vector<double> out(a.data().begin(), a.data().end());
    for (double& v : out) v += c;
    return Tensor::make_node(a.shape(), std::move(out), {a}, [](TensorNode& self) {
        accumulate(*self.parents[0], self.grad);
    });
}

Tensor mul_scalar(const Tensor& a, double c) {
    std::vector<double> out(a.data().begin(), a.data().end());
    for (double& v : out) v *= c;
    return Tensor::make_node(a.shape(), std::move(out), {a}, [c](TensorNode& self) {
        TensorNode& a_node = *self.parents[0];
        if (a_node.requires_grad) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                a_node.grad[i] += c * self.grad[i];
            }
        }
    });
}

Tensor abs_val(const Tensor& a) {
    std::vector<double> out(a.numel());
    auto ad = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::fabs(ad[i]);
    return Tensor::make_node(a.shape(), std::move(out), {a}, [](TensorNode& self) {
        TensorNode& a_node = *self.parents[0];
        if (!a_node.requires_grad) return;
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            const double x = a_node.data[i];
            // subgradient 0 at the kink
            const double s = (x > 0.0) ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
            a_node.grad[i] += s * self.grad[i];
        }
    });
}

Tensor log_val(const Tensor& a) {
    std::vector<double> out(a.numel());
    auto ad = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(ad[i]);
    return Tensor::make_node(a.shape(), std::move(out), {a}, [](TensorNode& self) {
        TensorNode& a_node = *self.parents[0];
        if (!a_node.requires_grad) return;
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            a_node.grad[i] += self.grad[i] / a_node.data[i];
        }
    });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
    if (!(lo < hi)) throw InvalidHyperparam("clamp: lo must be < hi");
    std::vector<double> out(a.numel());
    auto ad = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(std::max(ad[i], lo), hi);
    return Tensor::make_node(a.shape(), std::move(out), {a}, [lo, hi](TensorNode& self) {
        TensorNode& a_node = *self.parents[0];
        if (!a_node.requires_grad) return;
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            const double x = a_node.data[i];
            if (x > lo && x < hi) a_node.grad[i] += self.grad[i];
        }
    });
}

Tensor sum(const Tensor& a) {
    double acc = 0.0;
    for (double v : a.data()) acc += v;
    return Tensor::make_node({1}, {acc}, {a}, [](TensorNode& self) {
        TensorNode& a_node = *self.parents[0];
        if (!a_node.requires_grad) return;
        const double g = self.grad[0];
        for (double& gv : a_node.grad) gv += g;
    });
}

Tensor mean(const Tensor& a) {
    double acc = 0.0;
    for (double v : a.data()) acc += v;
    const double inv_n = 1.0 / static_cast<double>(a.numel());
    return Tensor::make_node({1}, {acc * inv_n}, {a}, [inv_n](TensorNode& self) {
        TensorNode& a_node = *self.parents[0];
        if (!a_node.requires_grad) return;
        const double g = self.grad[0] * inv_n;
        for (double& gv : a_node.grad) gv += g;
    });
}

Tensor reshape(const Tensor& a, const Shape& shape) {
    if (shape_numel(shape) != a.numel()) {
        throw ShapeMismatch("reshape: " + shape_str(a.shape()) + " to " + shape_str(shape));
    }
    std::vector<double> out(a.data().begin(), a.data().end());
    return Tensor::make_node(shape, std::move(out), {a}, [](TensorNode& self) {
        accumulate(*self.parents[0], self.grad);
    });
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    if (sa.size() != 4 || sb.size() != 4 || sa[0] != sb[0] || sa[2] != sb[2] || sa[3] != sb[3]) {
        throw ShapeMismatch("concat_channels: " + shape_str(sa) + " vs " + shape_str(sb));
    }
    const int n = sa[0];
    const std::int64_t plane = static_cast<std::int64_t>(sa[2]) * sa[3];
    const std::int64_t a_len = sa[1] * plane;
    const std::int64_t b_len = sb[1] * plane;
    std::vector<double> out(static_cast<std::size_t>(n) * (a_len + b_len));
    auto ad = a.data();
    auto bd = b.data();
    for (int i = 0; i < n; ++i) {
        std::memcpy(out.data() + i * (a_len + b_len), ad.data() + i * a_len,
                    a_len * sizeof(double));
        std::memcpy(out.data() + i * (a_len + b_len) + a_len, bd.data() + i * b_len,
                    b_len * sizeof(double));
    }
    Shape out_shape = {n, sa[1] + sb[1], sa[2], sa[3]};
    return Tensor::make_node(
        out_shape, std::move(out), {a, b}, [n, a_len, b_len](TensorNode& self) {
            TensorNode& a_node = *self.parents[0];
            TensorNode& b_node = *self.parents[1];
            for (int i = 0; i < n; ++i) {
                const double* g = self.grad.data() + i * (a_len + b_len);
                if (a_node.requires_grad) {
                    double* ga = a_node.grad.data() + i * a_len;
                    for (std::int64_t j = 0; j < a_len; ++j) ga[j] += g[j];
                }
                if (b_node.requires_grad) {
                    double* gb = b_node.grad.data() + i * b_len;
                    for (std::int64_t j = 0; j < b_len; ++j) gb[j] += g[a_len + j];
                }
            }
        });
}

Tensor activation(const Tensor& a, const Activation& act) {
    if (act.kind == ActKind::leaky_relu && !(act.slope > 0.0 && act.slope < 1.0)) {
        throw InvalidHyperparam("leaky_relu slope must lie in (0,1)");
    }
    std::vector<double> out(a.numel());
    auto ad = a.data();
    switch (act.kind) {
    case ActKind::relu:
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] > 0.0 ? ad[i] : 0.0;
        break;
    case ActKind::leaky_relu:
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i] = ad[i] > 0.0 ? ad[i] : act.slope * ad[i];
        }
        break;
    case ActKind::sigmoid:
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-ad[i]));
        break;
    case ActKind::tanh:
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(ad[i]);
        break;
    }
    const Activation captured = act;
    return Tensor::make_node(a.shape(), std::move(out), {a}, [captured](TensorNode& self) {
        TensorNode& a_node = *self.parents[0];
        if (!a_node.requires_grad) return;
        switch (captured.kind) {
        case ActKind::relu:
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                if (a_node.data[i] > 0.0) a_node.grad[i] += self.grad[i];
            }
            break;
        case ActKind::leaky_relu:
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                a_node.grad[i] +=
                    (a_node.data[i] > 0.0 ? 1.0 : captured.slope) * self.grad[i];
            }
            break;
        case ActKind::sigmoid:
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                const double y = self.data[i];
                a_node.grad[i] += y * (1.0 - y) * self.grad[i];
            }
            break;
        case ActKind::tanh:
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                const double y = self.data[i];
                a_node.grad[i] += (1.0 - y * y) * self.grad[i];
            }
            break;
        }
    });
}

Tensor dropout(const Tensor& a, double rate, bool training, std::uint64_t seed) {
    if (!(rate >= 0.0 && rate < 1.0)) {
        throw InvalidHyperparam("dropout rate must lie in [0,1)");
    }
    if (!training || rate == 0.0) {
        std::vector<double> out(a.data().begin(), a.data().end());
        return Tensor::make_node(a.shape(), std::move(out), {a}, [](TensorNode& self) {
            accumulate(*self.parents[0], self.grad);
        });
    }
    const double scale = 1.0 / (1.0 - rate);
    std::vector<double> out(a.numel());
    auto ad = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = hash_unit(seed, i) < rate ? 0.0 : ad[i] * scale;
    }
    return Tensor::make_node(a.shape(), std::move(out), {a}, [rate, scale, seed](TensorNode& self) {
        TensorNode& a_node = *self.parents[0];
        if (!a_node.requires_grad) return;
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            if (hash_unit(seed, i) >= rate) a_node.grad[i] += scale * self.grad[i];
        }
    });
}

namespace {

void check_conv_hyperparams(int stride, int padding) {
    if (stride < 1) throw InvalidHyperparam("stride must be >= 1");
    if (padding < 0) throw InvalidHyperparam("padding must be >= 0");
}

void add_bias_rows(double* out, const double* bias, int channels, std::int64_t positions) {
    for (int c = 0; c < channels; ++c) {
        const double b = bias[c];
        double* row = out + c * positions;
        for (std::int64_t p = 0; p < positions; ++p) row[p] += b;
    }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, int stride,
              int padding) {
    check_conv_hyperparams(stride, padding);
    const Shape& is = input.shape();
    const Shape& ks = kernel.shape();
    if (is.size() != 4 || ks.size() != 4 || bias.shape().size() != 1) {
        throw ShapeMismatch("conv2d: expected input [N,C,H,W], kernel [Co,Ci,kh,kw], bias [Co]");
    }
    const int n = is[0], ci = is[1], h = is[2], w = is[3];
    const int co = ks[0], kh = ks[2], kw = ks[3];
    if (ks[1] != ci) {
        throw ShapeMismatch("conv2d: input channels " + std::to_string(ci) +
                            " vs kernel channels " + std::to_string(ks[1]));
    }
    if (bias.shape()[0] != co) throw ShapeMismatch("conv2d: bias does not match out channels");
    if (h + 2 * padding < kh || w + 2 * padding < kw) {
        throw ShapeMismatch("conv2d: kernel larger than padded input");
    }
    const int oh = (h + 2 * padding - kh) / stride + 1;
    const int ow = (w + 2 * padding - kw) / stride + 1;
    const ConvGeom g{ci, h, w, kh, kw, stride, padding, oh, ow};
    const std::int64_t patch = g.patch_rows();
    const std::int64_t pos = g.out_positions();
    const std::int64_t in_sz = static_cast<std::int64_t>(ci) * h * w;
    const std::int64_t out_sz = static_cast<std::int64_t>(co) * pos;

    std::vector<double> out(static_cast<std::size_t>(n) * out_sz);
    std::vector<double> cols(static_cast<std::size_t>(patch) * pos);
    for (int i = 0; i < n; ++i) {
        detail::im2col(input.data().data() + i * in_sz, g, cols.data());
        detail::gemm_nn(co, static_cast<int>(patch), static_cast<int>(pos), kernel.data().data(),
                        cols.data(), out.data() + i * out_sz, false);
        add_bias_rows(out.data() + i * out_sz, bias.data().data(), co, pos);
    }

    Shape out_shape = {n, co, oh, ow};
    return Tensor::make_node(
        out_shape, std::move(out), {input, kernel, bias},
        [g, n, co, patch, pos, in_sz, out_sz](TensorNode& self) {
            TensorNode& in_node = *self.parents[0];
            TensorNode& k_node = *self.parents[1];
            TensorNode& b_node = *self.parents[2];
            std::vector<double> cols(static_cast<std::size_t>(patch) * pos);
            std::vector<double> gcols;
            if (in_node.requires_grad) gcols.resize(cols.size());
            for (int i = 0; i < n; ++i) {
                const double* go = self.grad.data() + i * out_sz;
                if (k_node.requires_grad) {
                    detail::im2col(in_node.data.data() + i * in_sz, g, cols.data());
                    detail::gemm_nt_acc(co, static_cast<int>(patch), static_cast<int>(pos), go,
                                        cols.data(), k_node.grad.data());
                }
                if (in_node.requires_grad) {
                    detail::gemm_tn(co, static_cast<int>(patch), static_cast<int>(pos),
                                    k_node.data.data(), go, gcols.data(), false);
                    detail::col2im_add(gcols.data(), g, in_node.grad.data() + i * in_sz);
                }
                if (b_node.requires_grad) {
                    for (int c = 0; c < co; ++c) {
                        double acc = 0.0;
                        const double* row = go + c * pos;
                        for (std::int64_t p = 0; p < pos; ++p) acc += row[p];
                        b_node.grad[c] += acc;
                    }
                }
            }
        });
}

Tensor conv_transpose2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, int stride,
                        int padding) {
    check_conv_hyperparams(stride, padding);
    const Shape& is = input.shape();
    const Shape& ks = kernel.shape();
    if (is.size() != 4 || ks.size() != 4 || bias.shape().size() != 1) {
        throw ShapeMismatch(
            "conv_transpose2d: expected input [N,C,H,W], kernel [Ci,Co,kh,kw], bias [Co]");
    }
    const int n = is[0], ci = is[1], ih = is[2], iw = is[3];
    const int co = ks[1], kh = ks[2], kw = ks[3];
    if (ks[0] != ci) {
        throw ShapeMismatch("conv_transpose2d: input channels " + std::to_string(ci) +
                            " vs kernel channels " + std::to_string(ks[0]));
    }
    if (bias.shape()[0] != co) {
        throw ShapeMismatch("conv_transpose2d: bias does not match out channels");
    }
    const int oh = (ih - 1) * stride - 2 * padding + kh;
    const int ow = (iw - 1) * stride - 2 * padding + kw;
    if (oh < 1 || ow < 1) throw ShapeMismatch("conv_transpose2d: empty output");

    // The transposed convolution is the adjoint of a conv2d whose input is our
    // output; the shared geometry is expressed from that convolution's view.
    const ConvGeom g{co, oh, ow, kh, kw, stride, padding, ih, iw};
    const std::int64_t patch = g.patch_rows();  // co*kh*kw
    const std::int64_t pos = g.out_positions();  // ih*iw
    const std::int64_t in_sz = static_cast<std::int64_t>(ci) * pos;
    const std::int64_t out_sz = static_cast<std::int64_t>(co) * oh * ow;

    std::vector<double> out(static_cast<std::size_t>(n) * out_sz, 0.0);
    std::vector<double> tmp(static_cast<std::size_t>(patch) * pos);
    for (int i = 0; i < n; ++i) {
        detail::gemm_tn(ci, static_cast<int>(patch), static_cast<int>(pos), kernel.data().data(),
                        input.data().data() + i * in_sz, tmp.data(), false);
        detail::col2im_add(tmp.data(), g, out.data() + i * out_sz);
        add_bias_rows(out.data() + i * out_sz, bias.data().data(), co,
                      static_cast<std::int64_t>(oh) * ow);
    }

    Shape out_shape = {n, co, oh, ow};
    return Tensor::make_node(
        out_shape, std::move(out), {input, kernel, bias},
        [g, n, ci, co, patch, pos, in_sz, out_sz](TensorNode& self) {
            TensorNode& in_node = *self.parents[0];
            TensorNode& k_node = *self.parents[1];
            TensorNode& b_node = *self.parents[2];
            std::vector<double> cols(static_cast<std::size_t>(patch) * pos);
            const std::int64_t spatial = static_cast<std::int64_t>(g.in_h) * g.in_w;
            for (int i = 0; i < n; ++i) {
                const double* go = self.grad.data() + i * out_sz;
                if (in_node.requires_grad || k_node.requires_grad) {
                    detail::im2col(go, g, cols.data());
                }
                if (in_node.requires_grad) {
                    detail::gemm_nn(ci, static_cast<int>(patch), static_cast<int>(pos),
                                    k_node.data.data(), cols.data(),
                                    in_node.grad.data() + i * in_sz, true);
                }
                if (k_node.requires_grad) {
                    detail::gemm_nt_acc(ci, static_cast<int>(patch), static_cast<int>(pos),
                                        in_node.data.data() + i * in_sz, cols.data(),
                                        k_node.grad.data());
                }
                if (b_node.requires_grad) {
                    for (int c = 0; c < co; ++c) {
                        double acc = 0.0;
                        const double* row = go + c * spatial;
                        for (std::int64_t p = 0; p < spatial; ++p) acc += row[p];
                        b_node.grad[c] += acc;
                    }
                }
            }
        });
}

Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias) {
    const Shape& is = input.shape();
    const Shape& ws = weight.shape();
    if (is.size() != 2 || ws.size() != 2 || bias.shape().size() != 1) {
        throw ShapeMismatch("linear: expected input [N,F], weight [O,F], bias [O]");
    }
    const int n = is[0], f = is[1], o = ws[0];
    if (ws[1] != f) throw ShapeMismatch("linear: feature dims disagree");
    if (bias.shape()[0] != o) throw ShapeMismatch("linear: bias does not match out dim");

    std::vector<double> out(static_cast<std::size_t>(n) * o, 0.0);
    detail::gemm_nt_acc(n, o, f, input.data().data(), weight.data().data(), out.data());
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < o; ++j) out[i * o + j] += bias.data()[j];
    }

    return Tensor::make_node({n, o}, std::move(out), {input, weight, bias},
                             [n, f, o](TensorNode& self) {
                                 TensorNode& in_node = *self.parents[0];
                                 TensorNode& w_node = *self.parents[1];
                                 TensorNode& b_node = *self.parents[2];
                                 if (in_node.requires_grad) {
                                     detail::gemm_nn(n, o, f, self.grad.data(),
                                                     w_node.data.data(), in_node.grad.data(),
                                                     true);
                                 }
                                 if (w_node.requires_grad) {
                                     detail::gemm_tn(n, o, f, self.grad.data(),
                                                     in_node.data.data(), w_node.grad.data(),
                                                     true);
                                 }
                                 if (b_node.requires_grad) {
                                     for (int i = 0; i < n; ++i) {
                                         for (int j = 0; j < o; ++j) {
                                             b_node.grad[j] += self.grad[i * o + j];
                                         }
                                     }
                                 }
                             });
}

}  // namespace abt
