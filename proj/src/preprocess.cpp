#include "abt/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <deque>
#include <limits>
#include <numeric>

namespace abt::prep {

Volume sum_late_frames(const FrameSequence& frames, double window_start_min) {
    frames.validate();
    Volume out;
    bool any = false;
    for (std::size_t i = 0; i < frames.frames.size(); ++i) {
        if (frames.midpoint_min(i) < window_start_min) continue;
        if (!any) {
            out = frames.frames[i];
            any = true;
        } else {
            const auto& f = frames.frames[i];
            for (std::size_t v = 0; v < out.voxels.size(); ++v) out.voxels[v] += f.voxels[v];
        }
    }
    if (!any) {
        throw NoQualifyingFrames("no frame midpoint at or after " +
                                 std::to_string(window_start_min) + " min");
    }
    out.units = VolumeUnits::arbitrary;
    return out;
}

Volume suvr_normalize(const Volume& vol, const BrainMask& ref) {
    if (vol.dims != ref.dims) throw ShapeMismatch("reference mask grid differs from volume");
    double acc = 0.0;
    std::int64_t n = 0;
    for (std::size_t i = 0; i < ref.bits.size(); ++i) {
        if (ref.bits[i]) {
            acc += vol.voxels[i];
            ++n;
        }
    }
    if (n == 0) throw EmptyMask("SUVR reference region is empty");
    const double mean = acc / static_cast<double>(n);
    if (!(mean > 0.0)) throw InvalidRange("SUVR reference mean must be positive");
    Volume out = vol;
    for (double& v : out.voxels) v /= mean;
    out.units = VolumeUnits::suvr;
    return out;
}

BrainMask reference_region(const Volume& mri, const BrainMask& brain, double quantile) {
    if (mri.dims != brain.dims) throw ShapeMismatch("brain mask grid differs from volume");
    std::vector<double> vals;
    vals.reserve(static_cast<std::size_t>(brain.count()));
    for (std::size_t i = 0; i < brain.bits.size(); ++i) {
        if (brain.bits[i]) vals.push_back(mri.voxels[i]);
    }
    if (vals.empty()) throw EmptyMask("brain mask is empty");
    std::sort(vals.begin(), vals.end());
    const std::size_t k = static_cast<std::size_t>(
        std::min<double>(static_cast<double>(vals.size() - 1),
                         quantile * static_cast<double>(vals.size())));
    const double cut = vals[k];
    BrainMask ref = BrainMask::empty_like(mri.dims);
    for (std::size_t i = 0; i < brain.bits.size(); ++i) {
        ref.bits[i] = (brain.bits[i] && mri.voxels[i] >= cut) ? 1 : 0;
    }
    return ref;
}

namespace {

// Otsu's threshold over a 256-bin histogram; returns the cut value, with
// foreground defined as value >= cut.
double otsu_threshold(const Volume& vol) {
    const double lo = vol.min_value();
    const double hi = vol.max_value();
    if (!(hi > lo)) throw EmptyMask("volume has fewer than two distinct intensities");
    constexpr int kBins = 256;
    const double width = (hi - lo) / kBins;
    std::array<std::int64_t, kBins> hist{};
    for (double v : vol.voxels) {
        int b = static_cast<int>((v - lo) / width);
        b = std::clamp(b, 0, kBins - 1);
        hist[b]++;
    }
    const double total = static_cast<double>(vol.numel());
    double sum_all = 0.0;
    for (int b = 0; b < kBins; ++b) sum_all += (b + 0.5) * static_cast<double>(hist[b]);

    double best = -1.0;
    int best_split = 0;
    double w0 = 0.0, sum0 = 0.0;
    for (int b = 0; b < kBins - 1; ++b) {
        w0 += static_cast<double>(hist[b]);
        if (w0 == 0.0) continue;
        const double w1 = total - w0;
        if (w1 == 0.0) break;
        sum0 += (b + 0.5) * static_cast<double>(hist[b]);
        const double mu0 = sum0 / w0;
        const double mu1 = (sum_all - sum0) / w1;
        const double between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if (between > best) {
            best = between;
            best_split = b;
        }
    }
    return lo + (best_split + 1) * width;
}

BrainMask largest_component_6(const BrainMask& in) {
    BrainMask out = BrainMask::empty_like(in.dims);
    std::vector<std::int32_t> label(in.bits.size(), 0);
    const int nx = in.dims[0], ny = in.dims[1], nz = in.dims[2];
    std::int32_t next = 0;
    std::int64_t best_count = 0;
    std::int32_t best_label = 0;
    std::deque<std::array<int, 3>> queue;
    for (int z = 0; z < nz; ++z) {
        for (int y = 0; y < ny; ++y) {
            for (int x = 0; x < nx; ++x) {
                const std::int64_t idx = in.offset(x, y, z);
                if (!in.bits[idx] || label[idx]) continue;
                ++next;
                std::int64_t count = 0;
                label[idx] = next;
                queue.push_back({x, y, z});
                while (!queue.empty()) {
                    auto [cx, cy, cz] = queue.front();
                    queue.pop_front();
                    ++count;
                    constexpr int kNbr[6][3] = {{1, 0, 0},  {-1, 0, 0}, {0, 1, 0},
                                                {0, -1, 0}, {0, 0, 1},  {0, 0, -1}};
                    for (const auto& d : kNbr) {
                        const int ax = cx + d[0], ay = cy + d[1], az = cz + d[2];
                        if (ax < 0 || ax >= nx || ay < 0 || ay >= ny || az < 0 || az >= nz) {
                            continue;
                        }
                        const std::int64_t aidx = in.offset(ax, ay, az);
                        if (in.bits[aidx] && !label[aidx]) {
                            label[aidx] = next;
                            queue.push_back({ax, ay, az});
                        }
                    }
                }
                if (count > best_count) {
                    best_count = count;
                    best_label = next;
                }
            }
        }
    }
    for (std::size_t i = 0; i < label.size(); ++i) out.bits[i] = (label[i] == best_label);
    return out;
}

BrainMask box_dilate(const BrainMask& in) {
    BrainMask out = BrainMask::empty_like(in.dims);
    const int nx = in.dims[0], ny = in.dims[1], nz = in.dims[2];
    for (int z = 0; z < nz; ++z) {
        for (int y = 0; y < ny; ++y) {
            for (int x = 0; x < nx; ++x) {
                bool hit = false;
                for (int dz = -1; dz <= 1 && !hit; ++dz) {
                    for (int dy = -1; dy <= 1 && !hit; ++dy) {
                        for (int dx = -1; dx <= 1 && !hit; ++dx) {
                            const int ax = x + dx, ay = y + dy, az = z + dz;
                            if (ax < 0 || ax >= nx || ay < 0 || ay >= ny || az < 0 ||
                                az >= nz) {
                                continue;
                            }
                            hit = in.at(ax, ay, az);
                        }
                    }
                }
                out.set(x, y, z, hit);
            }
        }
    }
    return out;
}

BrainMask box_erode(const BrainMask& in) {
    BrainMask out = BrainMask::empty_like(in.dims);
    const int nx = in.dims[0], ny = in.dims[1], nz = in.dims[2];
    for (int z = 0; z < nz; ++z) {
        for (int y = 0; y < ny; ++y) {
            for (int x = 0; x < nx; ++x) {
                bool all = true;
                for (int dz = -1; dz <= 1 && all; ++dz) {
                    for (int dy = -1; dy <= 1 && all; ++dy) {
                        for (int dx = -1; dx <= 1 && all; ++dx) {
                            const int ax = x + dx, ay = y + dy, az = z + dz;
                            if (ax < 0 || ax >= nx || ay < 0 || ay >= ny || az < 0 ||
                                az >= nz) {
                                all = false;  // outside counts as background
                                continue;
                            }
                            all = in.at(ax, ay, az);
                        }
                    }
                }
                out.set(x, y, z, all);
            }
        }
    }
    return out;
}

}  // namespace

BrainMask extract_brain_mask(const Volume& vol) {
    const double cut = otsu_threshold(vol);
    BrainMask fg = BrainMask::empty_like(vol.dims);
    std::int64_t n = 0;
    for (std::size_t i = 0; i < vol.voxels.size(); ++i) {
        const bool on = vol.voxels[i] >= cut;
        fg.bits[i] = on;
        n += on;
    }
    if (n == 0) throw EmptyMask("Otsu threshold produced no foreground");
    return box_erode(box_dilate(largest_component_6(fg)));
}

BrainMask support_mask(const Volume& vol, double max_fraction) {
    const double cut = max_fraction * vol.max_value();
    BrainMask fg = BrainMask::empty_like(vol.dims);
    std::int64_t n = 0;
    for (std::size_t i = 0; i < vol.voxels.size(); ++i) {
        const bool on = vol.voxels[i] >= cut && vol.voxels[i] > 0.0;
        fg.bits[i] = on;
        n += on;
    }
    if (n == 0) throw EmptyMask("support threshold produced no foreground");
    return largest_component_6(fg);
}

Volume apply_mask(const Volume& vol, const BrainMask& mask) {
    if (vol.dims != mask.dims) throw ShapeMismatch("mask grid differs from volume");
    Volume out = vol;
    for (std::size_t i = 0; i < out.voxels.size(); ++i) {
        if (!mask.bits[i]) out.voxels[i] = 0.0;
    }
    return out;
}

namespace {

double trilinear(const Volume& vol, double fx, double fy, double fz) {
    const int x0 = static_cast<int>(std::floor(fx));
    const int y0 = static_cast<int>(std::floor(fy));
    const int z0 = static_cast<int>(std::floor(fz));
    const double wx = fx - x0, wy = fy - y0, wz = fz - z0;
    const int nx = vol.dims[0], ny = vol.dims[1], nz = vol.dims[2];
    if (x0 >= 0 && x0 + 1 < nx && y0 >= 0 && y0 + 1 < ny && z0 >= 0 && z0 + 1 < nz) {
        const std::int64_t base = vol.offset(x0, y0, z0);
        const std::int64_t sy = nx, sz = static_cast<std::int64_t>(nx) * ny;
        const double* v = vol.voxels.data() + base;
        const double c00 = v[0] + wx * (v[1] - v[0]);
        const double c10 = v[sy] + wx * (v[sy + 1] - v[sy]);
        const double c01 = v[sz] + wx * (v[sz + 1] - v[sz]);
        const double c11 = v[sz + sy] + wx * (v[sz + sy + 1] - v[sz + sy]);
        const double c0 = c00 + wy * (c10 - c00);
        const double c1 = c01 + wy * (c11 - c01);
        return c0 + wz * (c1 - c0);
    }
    if (x0 <= -2 || x0 >= nx || y0 <= -2 || y0 >= ny || z0 <= -2 || z0 >= nz) return 0.0;
    double acc = 0.0;
    for (int dz = 0; dz <= 1; ++dz) {
        const int z = z0 + dz;
        if (z < 0 || z >= nz) continue;
        const double w_z = dz ? wz : 1.0 - wz;
        if (w_z == 0.0) continue;
        for (int dy = 0; dy <= 1; ++dy) {
            const int y = y0 + dy;
            if (y < 0 || y >= ny) continue;
            const double w_yz = w_z * (dy ? wy : 1.0 - wy);
            if (w_yz == 0.0) continue;
            for (int dx = 0; dx <= 1; ++dx) {
                const int x = x0 + dx;
                if (x < 0 || x >= nx) continue;
                const double w = w_yz * (dx ? wx : 1.0 - wx);
                if (w != 0.0) acc += w * vol.at(x, y, z);
            }
        }
    }
    return acc;
}

}  // namespace

Volume resample(const Volume& vol, const AffineTransform& t, std::array<int, 3> out_dims) {
    if (!t.invertible()) throw SingularTransform("resample transform is singular");
    const AffineTransform inv = t.inverse();
    Volume out = Volume::zeros(out_dims, vol.spacing_mm, vol.units);
    const auto& sp = vol.spacing_mm;
    const std::array<double, 3> step = {inv.matrix[0][0] * sp[0] / sp[0],
                                        inv.matrix[1][0] * sp[0] / sp[1],
                                        inv.matrix[2][0] * sp[0] / sp[2]};
    for (int z = 0; z < out_dims[2]; ++z) {
        for (int y = 0; y < out_dims[1]; ++y) {
            const std::array<double, 3> p = inv.apply({0.0, y * sp[1], z * sp[2]});
            double qx = p[0] / sp[0], qy = p[1] / sp[1], qz = p[2] / sp[2];
            for (int x = 0; x < out_dims[0]; ++x) {
                out.at(x, y, z) = trilinear(vol, qx, qy, qz);
                qx += step[0];
                qy += step[1];
                qz += step[2];
            }
        }
    }
    return out;
}

BrainMask resample_mask(const BrainMask& mask, std::array<double, 3> spacing_mm,
                        const AffineTransform& t, std::array<int, 3> out_dims) {
    if (!t.invertible()) throw SingularTransform("resample transform is singular");
    const AffineTransform inv = t.inverse();
    BrainMask out = BrainMask::empty_like(out_dims);
    for (int z = 0; z < out_dims[2]; ++z) {
        for (int y = 0; y < out_dims[1]; ++y) {
            for (int x = 0; x < out_dims[0]; ++x) {
                const std::array<double, 3> p =
                    inv.apply({x * spacing_mm[0], y * spacing_mm[1], z * spacing_mm[2]});
                const int sx = static_cast<int>(std::lround(p[0] / spacing_mm[0]));
                const int sy = static_cast<int>(std::lround(p[1] / spacing_mm[1]));
                const int sz = static_cast<int>(std::lround(p[2] / spacing_mm[2]));
                const bool in = sx >= 0 && sx < mask.dims[0] && sy >= 0 && sy < mask.dims[1] &&
                                sz >= 0 && sz < mask.dims[2];
                out.set(x, y, z, in && mask.at(sx, sy, sz));
            }
        }
    }
    return out;
}

namespace {

// 12-parameter vector in preconditioned units; the first 9 are the linear
// part applied about the fixed-volume center, the last 3 the residual
// translation. Centering decouples the matrix parameters from the
// translation ones, which plain gradient descent needs.
struct ParamSpace {
    double matrix_scale;
    double translation_scale;
    std::array<double, 3> center_mm;

    std::array<double, 12> to_params(const AffineTransform& t) const {
        std::array<double, 12> p{};
        std::array<double, 3> mc{};
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                p[i * 3 + j] = t.matrix[i][j] / matrix_scale;
                mc[i] += t.matrix[i][j] * center_mm[j];
            }
        }
        // t.translation = center - M*center + shift  =>  shift = ...
        for (int i = 0; i < 3; ++i) {
            p[9 + i] = (t.translation_mm[i] - center_mm[i] + mc[i]) / translation_scale;
        }
        return p;
    }

    AffineTransform to_transform(const std::array<double, 12>& p) const {
        std::array<std::array<double, 3>, 3> linear;
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) linear[i][j] = p[i * 3 + j] * matrix_scale;
        }
        std::array<double, 3> shift = {p[9] * translation_scale, p[10] * translation_scale,
                                       p[11] * translation_scale};
        return AffineTransform::about_center(linear, center_mm, shift);
    }
};

double registration_mse(const Volume& moving, const Volume& fixed, const AffineTransform& t,
                        int stride_xy) {
    if (!t.invertible()) return std::numeric_limits<double>::infinity();
    const AffineTransform inv = t.inverse();
    const auto& sp = fixed.spacing_mm;
    // sample points advance by a constant vector along x, in voxel units
    const std::array<double, 3> step = {inv.matrix[0][0] * sp[0] * stride_xy / sp[0],
                                        inv.matrix[1][0] * sp[0] * stride_xy / sp[1],
                                        inv.matrix[2][0] * sp[0] * stride_xy / sp[2]};
    double acc = 0.0;
    std::int64_t count = 0;
    for (int z = 0; z < fixed.dims[2]; ++z) {
        for (int y = 0; y < fixed.dims[1]; y += stride_xy) {
            std::array<double, 3> p = inv.apply({0.0, y * sp[1], z * sp[2]});
            double qx = p[0] / sp[0], qy = p[1] / sp[1], qz = p[2] / sp[2];
            for (int x = 0; x < fixed.dims[0]; x += stride_xy) {
                const double m = trilinear(moving, qx, qy, qz);
                const double d = m - fixed.at(x, y, z);
                acc += d * d;
                ++count;
                qx += step[0];
                qy += step[1];
                qz += step[2];
            }
        }
    }
    return acc / static_cast<double>(count);
}

// Quasi-Newton descent with central-difference gradients and a backtracking
// halving line search. BFGS curvature memory handles the coupling between
// translation and shear parameters that makes plain gradient descent crawl.
struct DescentState {
    std::array<double, 12> params;
    double value;
    int iterations = 0;
    bool converged = false;
    std::vector<double> trace;  // accepted objective values
};

DescentState descend(const Volume& moving, const Volume& fixed, const ParamSpace& space,
                     std::array<double, 12> params, const std::vector<int>& active,
                     const RegistrationOptions& opts, int iter_budget) {
    auto eval = [&](const std::array<double, 12>& p) {
        return registration_mse(moving, fixed, space.to_transform(p), opts.sample_stride_xy);
    };
    const int k = static_cast<int>(active.size());
    auto gradient = [&](const std::array<double, 12>& at) {
        std::vector<double> g(static_cast<std::size_t>(k));
        for (int i = 0; i < k; ++i) {
            std::array<double, 12> p = at;
            p[active[i]] += opts.fd_step;
            const double fp = eval(p);
            p[active[i]] -= 2.0 * opts.fd_step;
            const double fm = eval(p);
            g[i] = (fp - fm) / (2.0 * opts.fd_step);
        }
        return g;
    };

    DescentState st;
    st.params = params;
    st.value = eval(params);
    st.trace.push_back(st.value);

    // inverse-Hessian approximation in the scaled space
    std::vector<double> hess(static_cast<std::size_t>(k) * k, 0.0);
    for (int i = 0; i < k; ++i) hess[i * k + i] = 1.0;

    std::vector<double> g = gradient(st.params);
    int stall = 0;
    while (st.iterations < iter_budget) {
        ++st.iterations;
        double gnorm = 0.0;
        for (double v : g) gnorm += v * v;
        gnorm = std::sqrt(gnorm);
        if (gnorm < 1e-14) {
            st.converged = true;
            break;
        }

        std::vector<double> dir(static_cast<std::size_t>(k), 0.0);
        double descent = 0.0;
        for (int i = 0; i < k; ++i) {
            for (int j = 0; j < k; ++j) dir[i] -= hess[i * k + j] * g[j];
            descent += dir[i] * g[i];
        }
        if (!(descent < 0.0)) {  // curvature memory went bad; restart steepest
            for (int i = 0; i < k; ++i) {
                for (int j = 0; j < k; ++j) hess[i * k + j] = (i == j) ? 1.0 : 0.0;
                dir[i] = -g[i];
            }
        }

        double lambda = opts.initial_step;
        bool accepted = false;
        std::array<double, 12> trial;
        double ft = 0.0;
        while (lambda >= 1e-7) {
            trial = st.params;
            for (int i = 0; i < k; ++i) trial[active[i]] += lambda * dir[i];
            ft = eval(trial);
            if (ft < st.value) {
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if (!accepted) {
            st.converged = true;
            break;
        }

        const std::vector<double> g_new = gradient(trial);
        // BFGS update with step s and gradient change y
        std::vector<double> step_vec(static_cast<std::size_t>(k));
        std::vector<double> y(static_cast<std::size_t>(k));
        double sy = 0.0;
        for (int i = 0; i < k; ++i) {
            step_vec[i] = lambda * dir[i];
            y[i] = g_new[i] - g[i];
            sy += step_vec[i] * y[i];
        }
        if (sy > 1e-12) {
            const double rho = 1.0 / sy;
            // H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T
            std::vector<double> hy(static_cast<std::size_t>(k), 0.0);
            for (int i = 0; i < k; ++i) {
                for (int j = 0; j < k; ++j) hy[i] += hess[i * k + j] * y[j];
            }
            double yhy = 0.0;
            for (int i = 0; i < k; ++i) yhy += y[i] * hy[i];
            for (int i = 0; i < k; ++i) {
                for (int j = 0; j < k; ++j) {
                    hess[i * k + j] += rho * rho * (yhy + sy) * step_vec[i] * step_vec[j] -
                                       rho * (hy[i] * step_vec[j] + step_vec[i] * hy[j]);
                }
            }
        }

        const double rel_improve = (st.value - ft) / std::max(st.value, 1e-30);
        st.params = trial;
        st.value = ft;
        st.trace.push_back(ft);
        g = g_new;
        if (rel_improve < opts.rel_tolerance) {
            if (++stall >= 2) {
                st.converged = true;
                break;
            }
        } else {
            stall = 0;
        }
    }
    return st;
}

}  // namespace

namespace {

Volume smooth_axial(const Volume& in, int passes) {
    Volume cur = in;
    Volume tmp = in;
    const int nx = in.dims[0], ny = in.dims[1], nz = in.dims[2];
    const std::int64_t plane = static_cast<std::int64_t>(nx) * ny;
    for (int p = 0; p < passes; ++p) {
        for (int z = 0; z < nz; ++z) {
            for (int y = 0; y < ny; ++y) {
                for (int x = 0; x < nx; ++x) {
                    const std::int64_t idx = cur.offset(x, y, z);
                    const double c = cur.voxels[idx];
                    const double lo = z > 0 ? cur.voxels[idx - plane] : c;
                    const double hi = z < nz - 1 ? cur.voxels[idx + plane] : c;
                    tmp.voxels[idx] = 0.25 * lo + 0.5 * c + 0.25 * hi;
                }
            }
        }
        std::swap(cur.voxels, tmp.voxels);
    }
    return cur;
}

}  // namespace

RegistrationOptions pipeline_registration_options() {
    RegistrationOptions opts;
    opts.axial_smooth_passes = 2;
    opts.sample_stride_xy = 2;
    return opts;
}

RegistrationResult register_affine(const Volume& moving, const Volume& fixed,
                                   const AffineTransform& init,
                                   const RegistrationOptions& opts) {
    if (moving.spacing_mm != fixed.spacing_mm) {
        throw ShapeMismatch("moving and fixed volumes use different spacing");
    }
    if (opts.axial_smooth_passes > 0) {
        RegistrationOptions inner = opts;
        inner.axial_smooth_passes = 0;
        return register_affine(smooth_axial(moving, opts.axial_smooth_passes),
                               smooth_axial(fixed, opts.axial_smooth_passes), init, inner);
    }
    const std::array<double, 3> center_mm = {(fixed.dims[0] - 1) * 0.5 * fixed.spacing_mm[0],
                                             (fixed.dims[1] - 1) * 0.5 * fixed.spacing_mm[1],
                                             (fixed.dims[2] - 1) * 0.5 * fixed.spacing_mm[2]};
    const ParamSpace space{opts.matrix_scale, opts.translation_scale_mm, center_mm};
    std::array<double, 12> params = space.to_params(init);

    const std::vector<int> translation_only = {9, 10, 11};
    std::vector<int> full(12);
    std::iota(full.begin(), full.end(), 0);

    DescentState stage1 =
        descend(moving, fixed, space, params, translation_only, opts, opts.max_iters / 2);
    DescentState stage2 = descend(moving, fixed, space, stage1.params, full, opts,
                                  opts.max_iters - stage1.iterations);

    RegistrationResult result;
    result.transform = space.to_transform(stage2.params);
    result.final_mse = stage2.value;
    result.iterations = stage1.iterations + stage2.iterations;
    result.converged = stage2.converged;
    result.objective_trace = std::move(stage1.trace);
    result.objective_trace.insert(result.objective_trace.end(), stage2.trace.begin(),
                                  stage2.trace.end());

    // a subsampled metric buys speed; polish the answer on the full lattice
    if (opts.sample_stride_xy > 1 && result.iterations < opts.max_iters) {
        RegistrationOptions fine = opts;
        fine.sample_stride_xy = 1;
        DescentState polish = descend(moving, fixed, space, stage2.params, full, fine,
                                      opts.max_iters - result.iterations);
        result.transform = space.to_transform(polish.params);
        result.final_mse = polish.value;
        result.iterations += polish.iterations;
        result.converged = polish.converged;
        result.objective_trace.insert(result.objective_trace.end(), polish.trace.begin(),
                                      polish.trace.end());
    }
    return result;
}

std::vector<Image2D> slice_axial(const Volume& vol) {
    std::vector<Image2D> out;
    out.reserve(static_cast<std::size_t>(vol.dims[2]));
    const std::int64_t plane = static_cast<std::int64_t>(vol.dims[0]) * vol.dims[1];
    for (int z = 0; z < vol.dims[2]; ++z) {
        Image2D img;
        img.width = vol.dims[0];
        img.height = vol.dims[1];
        img.pixels.assign(vol.voxels.begin() + z * plane, vol.voxels.begin() + (z + 1) * plane);
        out.push_back(std::move(img));
    }
    return out;
}

Volume stack_axial(const std::vector<Image2D>& slices, std::array<double, 3> spacing_mm,
                   VolumeUnits units) {
    if (slices.empty()) throw ShapeMismatch("cannot stack zero slices");
    const int w = slices[0].width, h = slices[0].height;
    Volume out = Volume::zeros({w, h, static_cast<int>(slices.size())}, spacing_mm, units);
    const std::int64_t plane = static_cast<std::int64_t>(w) * h;
    for (std::size_t z = 0; z < slices.size(); ++z) {
        if (slices[z].width != w || slices[z].height != h) {
            throw ShapeMismatch("slice " + std::to_string(z) + " has mismatched size");
        }
        std::memcpy(out.voxels.data() + z * plane, slices[z].pixels.data(),
                    static_cast<std::size_t>(plane) * sizeof(double));
    }
    return out;
}

namespace {

// PET-like reference rendered from MRI tissue bands. The white level and the
// gray/white ratio are estimated from the PET histogram itself, so the two
// registration channels share one intensity scale and plain MSE is a valid
// metric between them.
Volume render_pet_reference(const Volume& mri, const Volume& pet_sum) {
    const BrainMask head = support_mask(pet_sum);
    std::vector<double> vals;
    vals.reserve(static_cast<std::size_t>(head.count()));
    for (std::size_t i = 0; i < head.bits.size(); ++i) {
        if (head.bits[i]) vals.push_back(pet_sum.voxels[i]);
    }
    if (vals.empty()) throw EmptyMask("PET support is empty");
    std::sort(vals.begin(), vals.end());
    const double white = vals[vals.size() / 2];  // white dominates the support
    const double hot = vals[static_cast<std::size_t>(0.97 * (vals.size() - 1))];
    const double gray = std::max(white, hot);

    Volume pseudo = Volume::zeros(mri.dims, mri.spacing_mm, VolumeUnits::arbitrary);
    for (std::size_t i = 0; i < mri.voxels.size(); ++i) {
        const double v = mri.voxels[i];
        if (v < 0.15) {
            pseudo.voxels[i] = 0.0;
        } else if (v < 0.45) {
            pseudo.voxels[i] = 0.25 * white;
        } else if (v < 0.80) {
            pseudo.voxels[i] = gray;
        } else {
            pseudo.voxels[i] = white;
        }
    }
    return pseudo;
}

}  // namespace

SubjectPreproc preprocess_subject(const Volume& mri, const FrameSequence& pet_frames,
                                  double window_start_min,
                                  const RegistrationOptions& reg_opts) {
    const Volume pet_sum = sum_late_frames(pet_frames, window_start_min);
    const BrainMask mri_mask = extract_brain_mask(mri);

    // Cross-modal intensity MSE is not meaningful between raw MRI and PET, so
    // the PET is registered against a PET-like reference rendered from the
    // MRI; the recovered transform is then applied to the PET intensities.
    const Volume reference = render_pet_reference(mri, pet_sum);
    SubjectPreproc out;
    out.registration =
        register_affine(pet_sum, reference, AffineTransform::identity(), reg_opts);

    const Volume pet_reg = resample(pet_sum, out.registration.transform, mri.dims);
    const BrainMask ref = reference_region(mri, mri_mask);
    out.pet_suvr = suvr_normalize(pet_reg, ref);
    out.brain_mask = mri_mask;
    return out;
}

}  // namespace abt::prep
