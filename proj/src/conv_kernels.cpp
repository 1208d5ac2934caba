#include "conv_kernels.hpp"

#include <algorithm>
#include <cstring>

namespace abt::detail {

void im2col(const double* src, const ConvGeom& g, double* cols) {
    const std::int64_t positions = g.out_positions();
    const std::int64_t plane = static_cast<std::int64_t>(g.in_h) * g.in_w;
    for (int ci = 0; ci < g.in_c; ++ci) {
        const double* src_c = src + ci * plane;
        for (int r = 0; r < g.kh; ++r) {
            for (int q = 0; q < g.kw; ++q) {
                double* row = cols + ((static_cast<std::int64_t>(ci) * g.kh + r) * g.kw + q) *
                                         positions;
                for (int oh = 0; oh < g.out_h; ++oh) {
                    const int ih = oh * g.stride - g.pad + r;
                    double* out_row = row + static_cast<std::int64_t>(oh) * g.out_w;
                    if (ih < 0 || ih >= g.in_h) {
                        std::fill(out_row, out_row + g.out_w, 0.0);
                        continue;
                    }
                    const double* in_row = src_c + static_cast<std::int64_t>(ih) * g.in_w;
                    const int base = -g.pad + q;
                    for (int ow = 0; ow < g.out_w; ++ow) {
                        const int iw = ow * g.stride + base;
                        out_row[ow] = (iw >= 0 && iw < g.in_w) ? in_row[iw] : 0.0;
                    }
                }
            }
        }
    }
}

void col2im_add(const double* cols, const ConvGeom& g, double* dst) {
    const std::int64_t positions = g.out_positions();
    const std::int64_t plane = static_cast<std::int64_t>(g.in_h) * g.in_w;
    for (int ci = 0; ci < g.in_c; ++ci) {
        double* dst_c = dst + ci * plane;
        for (int r = 0; r < g.kh; ++r) {
            for (int q = 0; q < g.kw; ++q) {
                const double* row = cols + ((static_cast<std::int64_t>(ci) * g.kh + r) * g.kw +
                                            q) *
                                               positions;
                for (int oh = 0; oh < g.out_h; ++oh) {
                    const int ih = oh * g.stride - g.pad + r;
                    if (ih < 0 || ih >= g.in_h) continue;
                    double* dst_row = dst_c + static_cast<std::int64_t>(ih) * g.in_w;
                    const double* src_row = row + static_cast<std::int64_t>(oh) * g.out_w;
                    const int base = -g.pad + q;
                    for (int ow = 0; ow < g.out_w; ++ow) {
                        const int iw = ow * g.stride + base;
                        if (iw >= 0 && iw < g.in_w) dst_row[iw] += src_row[ow];
                    }
                }
            }
        }
    }
}

namespace {
constexpr int kKBlock = 64;  // keeps the streamed B panel inside L2
}

void gemm_nn(int m_dim, int k_dim, int n_dim, const double* a, const double* b, double* c,
             bool accumulate) {
    if (!accumulate) {
        std::memset(c, 0, static_cast<std::size_t>(m_dim) * n_dim * sizeof(double));
    }
    for (int k0 = 0; k0 < k_dim; k0 += kKBlock) {
        const int k1 = std::min(k0 + kKBlock, k_dim);
        for (int m = 0; m < m_dim; ++m) {
            const double* a_row = a + static_cast<std::int64_t>(m) * k_dim;
            double* c_row = c + static_cast<std::int64_t>(m) * n_dim;
            for (int k = k0; k < k1; ++k) {
                const double av = a_row[k];
                if (av == 0.0) continue;
                const double* b_row = b + static_cast<std::int64_t>(k) * n_dim;
                for (int n = 0; n < n_dim; ++n) c_row[n] += av * b_row[n];
            }
        }
    }
}

void gemm_nt_acc(int m_dim, int k_dim, int n_dim, const double* a, const double* b, double* c) {
    for (int m = 0; m < m_dim; ++m) {
        const double* a_row = a + static_cast<std::int64_t>(m) * n_dim;
        double* c_row = c + static_cast<std::int64_t>(m) * k_dim;
        for (int k = 0; k < k_dim; ++k) {
            const double* b_row = b + static_cast<std::int64_t>(k) * n_dim;
            // Eight independent partial sums; vectorizes without reassociating
            // the final reduction order.
            double acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
            int n = 0;
            for (; n + 8 <= n_dim; n += 8) {
                for (int l = 0; l < 8; ++l) acc[l] += a_row[n + l] * b_row[n + l];
            }
            double tail = 0.0;
            for (; n < n_dim; ++n) tail += a_row[n] * b_row[n];
            const double dot =
                ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) +
                tail;
            c_row[k] += dot;
        }
    }
}

void gemm_tn(int m_dim, int k_dim, int n_dim, const double* a, const double* b, double* c,
             bool accumulate) {
    if (!accumulate) {
        std::memset(c, 0, static_cast<std::size_t>(k_dim) * n_dim * sizeof(double));
    }
    for (int m = 0; m < m_dim; ++m) {
        const double* a_row = a + static_cast<std::int64_t>(m) * k_dim;
        const double* b_row = b + static_cast<std::int64_t>(m) * n_dim;
        for (int k = 0; k < k_dim; ++k) {
            const double av = a_row[k];
            if (av == 0.0) continue;
            double* c_row = c + static_cast<std::int64_t>(k) * n_dim;
            for (int n = 0; n < n_dim; ++n) c_row[n] += av * b_row[n];
        }
    }
}

}  // namespace abt::detail
