#include "abt/volume.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace abt {

Volume Volume::zeros(std::array<int, 3> dims, std::array<double, 3> spacing_mm,
                     VolumeUnits units) {
    Volume v;
    v.dims = dims;
    v.spacing_mm = spacing_mm;
    v.units = units;
    v.voxels.assign(static_cast<std::size_t>(v.numel()), 0.0);
    return v;
}

double Volume::min_value() const {
    return *std::min_element(voxels.begin(), voxels.end());
}

double Volume::max_value() const {
    return *std::max_element(voxels.begin(), voxels.end());
}

Image2D Image2D::zeros(int width, int height) {
    Image2D img;
    img.width = width;
    img.height = height;
    img.pixels.assign(static_cast<std::size_t>(width) * height, 0.0);
    return img;
}

void FrameSequence::validate() const {
    if (frames.empty()) throw ShapeMismatch("frame sequence is empty");
    if (start_min.size() != frames.size() || end_min.size() != frames.size()) {
        throw ShapeMismatch("frame times do not match frame count");
    }
    for (std::size_t i = 0; i < frames.size(); ++i) {
        if (!frames[i].same_grid(frames[0])) {
            throw ShapeMismatch("frame " + std::to_string(i) + " is on a different grid");
        }
        if (!(end_min[i] > start_min[i])) {
            throw InvalidHyperparam("frame " + std::to_string(i) + " has end <= start");
        }
        if (i > 0 && !(start_min[i] > start_min[i - 1])) {
            throw InvalidHyperparam("frame starts are not strictly increasing");
        }
    }
}

BrainMask BrainMask::empty_like(std::array<int, 3> dims) {
    BrainMask m;
    m.dims = dims;
    m.bits.assign(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2], 0);
    return m;
}

std::int64_t BrainMask::count() const {
    std::int64_t n = 0;
    for (std::uint8_t b : bits) n += (b != 0);
    return n;
}

Volume BrainMask::to_volume(std::array<double, 3> spacing_mm) const {
    Volume v = Volume::zeros(dims, spacing_mm, VolumeUnits::arbitrary);
    for (std::size_t i = 0; i < bits.size(); ++i) v.voxels[i] = bits[i] ? 1.0 : 0.0;
    return v;
}

AffineTransform AffineTransform::about_center(
    const std::array<std::array<double, 3>, 3>& linear, const std::array<double, 3>& center_mm,
    const std::array<double, 3>& shift_mm) {
    AffineTransform t;
    t.matrix = linear;
    for (int i = 0; i < 3; ++i) {
        double lc = 0.0;
        for (int j = 0; j < 3; ++j) lc += linear[i][j] * center_mm[j];
        t.translation_mm[i] = center_mm[i] - lc + shift_mm[i];
    }
    return t;
}

std::array<double, 3> AffineTransform::apply(const std::array<double, 3>& p) const {
    std::array<double, 3> out;
    for (int i = 0; i < 3; ++i) {
        out[i] = matrix[i][0] * p[0] + matrix[i][1] * p[1] + matrix[i][2] * p[2] +
                 translation_mm[i];
    }
    return out;
}

double AffineTransform::det() const {
    const auto& m = matrix;
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
           m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

bool AffineTransform::invertible(double eps) const { return std::fabs(det()) > eps; }

AffineTransform AffineTransform::inverse() const {
    const double d = det();
    if (std::fabs(d) <= 1e-9) throw SingularTransform("determinant " + std::to_string(d));
    const auto& m = matrix;
    AffineTransform inv;
    inv.matrix[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / d;
    inv.matrix[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / d;
    inv.matrix[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / d;
    inv.matrix[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / d;
    inv.matrix[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / d;
    inv.matrix[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / d;
    inv.matrix[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / d;
    inv.matrix[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / d;
    inv.matrix[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / d;
    // inv.translation = -inv.matrix * translation
    for (int i = 0; i < 3; ++i) {
        double acc = 0.0;
        for (int j = 0; j < 3; ++j) acc += inv.matrix[i][j] * translation_mm[j];
        inv.translation_mm[i] = -acc;
    }
    return inv;
}

AffineTransform AffineTransform::compose(const AffineTransform& a, const AffineTransform& b) {
    AffineTransform c;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            double acc = 0.0;
            for (int k = 0; k < 3; ++k) acc += a.matrix[i][k] * b.matrix[k][j];
            c.matrix[i][j] = acc;
        }
        double t = a.translation_mm[i];
        for (int k = 0; k < 3; ++k) t += a.matrix[i][k] * b.translation_mm[k];
        c.translation_mm[i] = t;
    }
    return c;
}

}  // namespace abt
