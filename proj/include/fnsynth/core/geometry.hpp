#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>

#include "fnsynth/core/error.hpp"

namespace fnsynth {

/// Grid extent in voxels, ordered (x, y, z). x varies fastest in memory.
using Dims = std::array<std::int64_t, 3>;

/// Integer voxel position.
using Index3 = std::array<std::int64_t, 3>;

/// Continuous 3-vector (voxel coordinates or millimetres, depending on context).
using Vec3 = std::array<double, 3>;

/// Row-major 4x4 homogeneous transform.
using Affine = std::array<std::array<double, 4>, 4>;

inline Affine identity_affine() {
    Affine a{};
    for (int i = 0; i < 4; ++i) a[i][i] = 1.0;
    return a;
}

inline Affine diagonal_affine(const Vec3& spacing) {
    Affine a = identity_affine();
    for (int i = 0; i < 3; ++i) a[i][i] = spacing[i];
    return a;
}

inline Affine multiply(const Affine& lhs, const Affine& rhs) {
    Affine out{};
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) {
            double s = 0.0;
            for (int k = 0; k < 4; ++k) s += lhs[r][k] * rhs[k][c];
            out[r][c] = s;
        }
    return out;
}

inline double linear_determinant(const Affine& a) {
    return a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
           a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
           a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
}

/// Maps a continuous voxel coordinate to world millimetres.
inline Vec3 apply_affine(const Affine& a, const Vec3& p) {
    Vec3 out{};
    for (int r = 0; r < 3; ++r) out[r] = a[r][0] * p[0] + a[r][1] * p[1] + a[r][2] * p[2] + a[r][3];
    return out;
}

/// Voxel-to-world placement of a 3D grid.
struct VolumeGeometry {
    Dims dims{1, 1, 1};
    Vec3 spacing{1.0, 1.0, 1.0};
    Affine affine = identity_affine();

    /// Geometry with an axis-aligned affine whose diagonal is the spacing.
    static VolumeGeometry make(const Dims& dims, const Vec3& spacing = {1.0, 1.0, 1.0}) {
        VolumeGeometry g{dims, spacing, diagonal_affine(spacing)};
        g.validate();
        return g;
    }

    std::size_t voxel_count() const {
        return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) *
               static_cast<std::size_t>(dims[2]);
    }

    bool contains(std::int64_t x, std::int64_t y, std::int64_t z) const {
        return x >= 0 && y >= 0 && z >= 0 && x < dims[0] && y < dims[1] && z < dims[2];
    }
    bool contains(const Index3& p) const { return contains(p[0], p[1], p[2]); }

    std::size_t index(std::int64_t x, std::int64_t y, std::int64_t z) const {
        return static_cast<std::size_t>(x + dims[0] * (y + dims[1] * z));
    }
    std::size_t index(const Index3& p) const { return index(p[0], p[1], p[2]); }

    Index3 position(std::size_t i) const {
        const auto n = static_cast<std::int64_t>(i);
        return {n % dims[0], (n / dims[0]) % dims[1], n / (dims[0] * dims[1])};
    }

    void validate() const {
        for (int a = 0; a < 3; ++a) {
            if (dims[a] < 1) throw DimensionError("volume dims must be >= 1 on every axis");
            if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a]))
                throw ArgumentError("voxel spacing must be positive and finite");
        }
        if (std::abs(linear_determinant(affine)) < 1e-12)
            throw ArgumentError("affine linear part is singular");
    }

    bool same_grid(const VolumeGeometry& other) const { return dims == other.dims; }
};

inline std::string to_string(const Dims& d) {
    return std::to_string(d[0]) + "x" + std::to_string(d[1]) + "x" + std::to_string(d[2]);
}

} // namespace fnsynth
