#pragma once

// Procedural label phantoms for tests, demos and the acceptance harness.

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "fnsynth/core/random.hpp"
#include "fnsynth/core/volume.hpp"

namespace fnsynth::phantom {

struct Ellipsoid {
    Vec3 center{0, 0, 0};
    Vec3 radii{1, 1, 1};

    bool contains(const Vec3& p) const {
        double s = 0;
        for (int a = 0; a < 3; ++a) {
            const double d = (p[a] - center[a]) / radii[a];
            s += d * d;
        }
        return s <= 1.0;
    }
};

template <class T>
void paint(Volume<T>& v, const Ellipsoid& e, T value) {
    const auto& d = v.dims();
    Index3 lo, hi;
    for (int a = 0; a < 3; ++a) {
        lo[a] = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(e.center[a] - e.radii[a])));
        hi[a] = std::min<std::int64_t>(d[a] - 1, static_cast<std::int64_t>(std::ceil(e.center[a] + e.radii[a])));
    }
    for (std::int64_t z = lo[2]; z <= hi[2]; ++z)
        for (std::int64_t y = lo[1]; y <= hi[1]; ++y)
            for (std::int64_t x = lo[0]; x <= hi[0]; ++x)
                if (e.contains({double(x), double(y), double(z)})) v.at(x, y, z) = value;
}

inline BinaryMask sphere(const Dims& dims, const Vec3& center, double radius) {
    BinaryMask m(VolumeGeometry::make(dims), 0);
    paint<std::uint8_t>(m, {center, {radius, radius, radius}}, 1);
    return m;
}

inline BinaryMask box(const Dims& dims, const Index3& lo, const Index3& hi) {
    BinaryMask m(VolumeGeometry::make(dims), 0);
    for (std::int64_t z = lo[2]; z <= hi[2]; ++z)
        for (std::int64_t y = lo[1]; y <= hi[1]; ++y)
            for (std::int64_t x = lo[0]; x <= hi[0]; ++x) m.at(x, y, z) = 1;
    return m;
}

/// Fetal-brain-like label volume in the default vocabulary: external CSF
/// envelope, cortical shell, white matter, two lateral ventricles, deep gray
/// matter, brainstem with an attached cerebellum, and a small fourth
/// ventricle between them. Axes: x left-right, y posterior-anterior, z
/// inferior-superior. Sizes and positions jitter by a few percent with `seed`.
inline LabelVolume fetal_brain(std::int64_t n = 96, std::uint64_t seed = 0) {
    Rng rng(seed);
    auto jitter = [&](double scale) { return 1.0 + scale * (2.0 * rng.uniform() - 1.0); };
    const double N = static_cast<double>(n);
    const double c = 0.5 * (N - 1.0);
    const Vec3 center{c + jitter(0.01) - 1.0, c + jitter(0.01) - 1.0, c};

    auto at = [&](double fx, double fy, double fz) { return Vec3{center[0] + fx * N, center[1] + fy * N, center[2] + fz * N}; };
    auto r = [&](double fx, double fy, double fz, double j = 0.04) {
        const double s = jitter(j);
        return Vec3{fx * N * s, fy * N * jitter(j), fz * N * s};
    };

    LabelVolume v(VolumeGeometry::make({n, n, n}, {0.8, 0.8, 0.8}), Vocabulary::feta(), 0);
    const Vec3 brain = r(0.40, 0.44, 0.38, 0.03);
    auto scaled = [&](double k) { return Ellipsoid{center, {brain[0] * k, brain[1] * k, brain[2] * k}}; };
    paint<label_t>(v, scaled(1.0), 1);  // external CSF
    paint<label_t>(v, scaled(0.92), 2); // cortex
    paint<label_t>(v, scaled(0.80), 3); // white matter

    const double vx = 0.10 * jitter(0.05);
    const Vec3 vr = r(0.035, 0.14, 0.055);
    const double asym = jitter(0.08);
    paint<label_t>(v, {at(-vx, 0.01, 0.06), vr}, 4);
    paint<label_t>(v, {at(vx, 0.01, 0.06), {vr[0] * asym, vr[1], vr[2] * asym}}, 4);

    const Vec3 dr = r(0.05, 0.06, 0.04);
    paint<label_t>(v, {at(-0.10, 0.03, -0.08), dr}, 6);
    paint<label_t>(v, {at(0.10, 0.03, -0.08), dr}, 6);

    const Vec3 cr = r(0.14, 0.08, 0.08);
    paint<label_t>(v, {at(0.0, -0.20, -0.21), cr}, 5);
    const Vec3 br = r(0.055, 0.055, 0.13);
    paint<label_t>(v, {at(0.0, -0.09, -0.24), br}, 7);
    paint<label_t>(v, {at(0.0, -0.135, -0.20), r(0.02, 0.012, 0.02, 0.0)}, 4); // fourth ventricle
    return v;
}

/// Smooth intensity image for a label volume: per-label mean plus a gentle
/// gradient and seeded noise.
inline IntensityVolume fetal_image(const LabelVolume& labels, std::uint64_t seed = 0) {
    static constexpr double kMean[] = {0.0, 900.0, 450.0, 650.0, 950.0, 500.0, 550.0, 600.0};
    Rng rng(seed);
    IntensityVolume img(labels.geometry(), 0.0);
    const auto& d = labels.dims();
    for (std::size_t i = 0; i < img.size(); ++i) {
        const label_t c = labels[i];
        const double mean = c < 8 ? kMean[c] : 500.0;
        const Index3 p = labels.geometry().position(i);
        const double bias = 1.0 + 0.05 * (static_cast<double>(p[2]) / static_cast<double>(d[2]) - 0.5);
        img[i] = c == 0 ? 0.0 : mean * bias + 10.0 * rng.normal();
    }
    return img;
}

} // namespace fnsynth::phantom
