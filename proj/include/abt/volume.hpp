#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "abt/errors.hpp"

namespace abt {

enum class VolumeUnits { arbitrary, suvr };

// 3D scalar grid. Voxel (x,y,z) lives at flat offset (z*Y + y)*X + x, so an
// axial (z) slice is one contiguous block. The continuous mm coordinate of a
// voxel index is index * spacing_mm along each axis.
struct Volume {
    std::array<int, 3> dims{0, 0, 0};  // X, Y, Z
    std::array<double, 3> spacing_mm{1.0, 1.0, 1.0};
    VolumeUnits units = VolumeUnits::arbitrary;
    std::vector<double> voxels;

    static Volume zeros(std::array<int, 3> dims, std::array<double, 3> spacing_mm,
                        VolumeUnits units = VolumeUnits::arbitrary);

    std::int64_t numel() const {
        return static_cast<std::int64_t>(dims[0]) * dims[1] * dims[2];
    }
    std::int64_t offset(int x, int y, int z) const {
        return (static_cast<std::int64_t>(z) * dims[1] + y) * dims[0] + x;
    }
    double at(int x, int y, int z) const { return voxels[offset(x, y, z)]; }
    double& at(int x, int y, int z) { return voxels[offset(x, y, z)]; }
    bool in_bounds(int x, int y, int z) const {
        return x >= 0 && x < dims[0] && y >= 0 && y < dims[1] && z >= 0 && z < dims[2];
    }
    bool same_grid(const Volume& other) const {
        return dims == other.dims && spacing_mm == other.spacing_mm;
    }
    double min_value() const;
    double max_value() const;
};

// One 2D axial slice; pixels[y*width + x].
struct Image2D {
    int width = 0;
    int height = 0;
    std::vector<double> pixels;

    static Image2D zeros(int width, int height);
    double at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
    double& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

// Dynamic acquisition: frames on a shared grid plus their time windows.
struct FrameSequence {
    std::vector<Volume> frames;
    std::vector<double> start_min;
    std::vector<double> end_min;

    // Throws ShapeMismatch / InvalidHyperparam if the invariants are broken:
    // shared grids, strictly increasing starts, end > start per frame.
    void validate() const;
    double midpoint_min(std::size_t i) const { return 0.5 * (start_min[i] + end_min[i]); }
};

// Boolean voxel mask on the Volume layout.
struct BrainMask {
    std::array<int, 3> dims{0, 0, 0};
    std::vector<std::uint8_t> bits;

    static BrainMask empty_like(std::array<int, 3> dims);
    std::int64_t offset(int x, int y, int z) const {
        return (static_cast<std::int64_t>(z) * dims[1] + y) * dims[0] + x;
    }
    bool at(int x, int y, int z) const { return bits[offset(x, y, z)] != 0; }
    void set(int x, int y, int z, bool v) { bits[offset(x, y, z)] = v ? 1 : 0; }
    std::int64_t count() const;
    Volume to_volume(std::array<double, 3> spacing_mm) const;
};

// Affine map y = matrix * x + translation, acting on mm coordinates.
struct AffineTransform {
    std::array<std::array<double, 3>, 3> matrix{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
    std::array<double, 3> translation_mm{0.0, 0.0, 0.0};

    static AffineTransform identity() { return {}; }
    // Linear part L applied about a fixed center c with an extra shift s:
    // y = L*(x-c) + c + s.
    static AffineTransform about_center(const std::array<std::array<double, 3>, 3>& linear,
                                        const std::array<double, 3>& center_mm,
                                        const std::array<double, 3>& shift_mm);

    std::array<double, 3> apply(const std::array<double, 3>& p) const;
    double det() const;
    bool invertible(double eps = 1e-9) const;
    AffineTransform inverse() const;  // throws SingularTransform
    // (a.then_after(b))(x) == a(b(x))
    static AffineTransform compose(const AffineTransform& a, const AffineTransform& b);
};

}  // namespace abt
