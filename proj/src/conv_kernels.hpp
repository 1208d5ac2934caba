#pragma once

// Internal dense kernels backing conv2d / conv_transpose2d / linear.
// Everything here is single-threaded and runs in a fixed order, so results
// are bit-reproducible run to run.

#include <cstdint>

namespace abt::detail {

// Geometry of a forward convolution X[in_c, in_h, in_w] -> Y[*, out_h, out_w].
// conv_transpose2d reuses the same geometry with the roles of its input and
// output swapped (it is the adjoint map).
struct ConvGeom {
    int in_c;
    int in_h;
    int in_w;
    int kh;
    int kw;
    int stride;
    int pad;
    int out_h;
    int out_w;

    std::int64_t patch_rows() const {
        return static_cast<std::int64_t>(in_c) * kh * kw;
    }
    std::int64_t out_positions() const {
        return static_cast<std::int64_t>(out_h) * out_w;
    }
};

// cols[(ci*kh + r)*kw + q, oh*out_w + ow] = src[ci, oh*stride - pad + r, ow*stride - pad + q]
// with zeros for out-of-bounds taps. cols must hold patch_rows()*out_positions().
void im2col(const double* src, const ConvGeom& g, double* cols);

// Adjoint of im2col: scatter-adds cols back into dst[in_c, in_h, in_w].
// dst is accumulated into, not overwritten.
void col2im_add(const double* cols, const ConvGeom& g, double* dst);

// C[m,n] (+)= sum_k A[m,k] * B[k,n]
void gemm_nn(int m_dim, int k_dim, int n_dim, const double* a, const double* b, double* c,
             bool accumulate);

// C[m,k] += sum_n A[m,n] * B[k,n]
void gemm_nt_acc(int m_dim, int k_dim, int n_dim, const double* a, const double* b, double* c);

// C[k,n] (+)= sum_m A[m,k] * B[m,n]
void gemm_tn(int m_dim, int k_dim, int n_dim, const double* a, const double* b, double* c,
             bool accumulate);

}  // namespace abt::detail
