#pragma once

// Binary morphology on 3D voxel masks. Grid borders are background for every
// operation: nothing outside the grid is ever set.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <numeric>
#include <vector>

#include "fnsynth/core/resample.hpp"
#include "fnsynth/core/volume.hpp"

namespace fnsynth::morph {

/// Neighbourhood used by dilate/erode. Disabled axes contribute no neighbours,
/// which gives in-plane (x-y) elements.
struct StructuringElement {
    enum class Connectivity { Face, Full };

    Connectivity connectivity = Connectivity::Face;
    std::array<bool, 3> axes{true, true, true};

    /// 6-neighbourhood.
    static StructuringElement face() { return {}; }
    /// 26-neighbourhood.
    static StructuringElement full() { return {Connectivity::Full, {true, true, true}}; }
    /// x-y 4-neighbourhood.
    static StructuringElement in_plane() { return {Connectivity::Face, {true, true, false}}; }

    void validate() const {
        if (!axes[0] && !axes[1] && !axes[2]) throw ArgumentError("structuring element needs at least one axis");
    }

    std::vector<Index3> offsets() const {
        std::vector<Index3> out;
        for (int dz = -1; dz <= 1; ++dz)
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const Index3 d{dx, dy, dz};
                    int nonzero = 0;
                    bool ok = true;
                    for (int a = 0; a < 3; ++a) {
                        if (d[a] == 0) continue;
                        ++nonzero;
                        if (!axes[a]) ok = false;
                    }
                    if (!ok || nonzero == 0) continue;
                    if (connectivity == Connectivity::Face && nonzero != 1) continue;
                    out.push_back(d);
                }
        return out;
    }
};

/// 6- or 26-connectivity offsets.
inline std::vector<Index3> neighbor_offsets(int connectivity) {
    if (connectivity == 6) return StructuringElement::face().offsets();
    if (connectivity == 26) return StructuringElement::full().offsets();
    throw ArgumentError("connectivity must be 6 or 26");
}

namespace detail {

// dst(p) = op(src(p-e), src(p), src(p+e)) along one axis; outside the grid counts as 0.
template <bool IsDilate>
BinaryMask filter_axis(const BinaryMask& src, int axis) {
    BinaryMask dst(src.geometry(), 0);
    const auto& d = src.dims();
    const std::int64_t stride = axis == 0 ? 1 : (axis == 1 ? d[0] : d[0] * d[1]);
    const std::int64_t n = d[axis];
    const std::uint8_t* in = src.voxels().data();
    std::uint8_t* out = dst.voxels().data();
    for (std::int64_t z = 0; z < d[2]; ++z)
        for (std::int64_t y = 0; y < d[1]; ++y)
            for (std::int64_t x = 0; x < d[0]; ++x) {
                const Index3 p{x, y, z};
                const auto i = static_cast<std::int64_t>(src.geometry().index(p));
                const std::uint8_t lo = p[axis] > 0 ? in[i - stride] : 0;
                const std::uint8_t hi = p[axis] + 1 < n ? in[i + stride] : 0;
                if constexpr (IsDilate)
                    out[i] = (in[i] | lo | hi) ? 1 : 0;
                else
                    out[i] = (in[i] && lo && hi) ? 1 : 0;
            }
    return dst;
}

template <bool IsDilate>
BinaryMask step(const BinaryMask& m, const StructuringElement& e) {
    if (e.connectivity == StructuringElement::Connectivity::Full) {
        BinaryMask cur = m;
        for (int a = 0; a < 3; ++a)
            if (e.axes[a]) cur = filter_axis<IsDilate>(cur, a);
        return cur;
    }
    BinaryMask out = m;
    for (int a = 0; a < 3; ++a) {
        if (!e.axes[a]) continue;
        const BinaryMask f = filter_axis<IsDilate>(m, a);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = IsDilate ? (out[i] | f[i]) : (out[i] & f[i]);
    }
    return out;
}

} // namespace detail

/// `iterations` successive single-step dilations.
inline BinaryMask dilate(const BinaryMask& mask, const StructuringElement& element, int iterations = 1) {
    element.validate();
    if (iterations < 0) throw ArgumentError("dilate: iterations must be >= 0");
    BinaryMask cur = mask;
    for (int k = 0; k < iterations; ++k) cur = detail::step<true>(cur, element);
    return cur;
}

/// Erosion with out-of-grid voxels treated as unset, so border voxels erode.
inline BinaryMask erode(const BinaryMask& mask, const StructuringElement& element, int iterations = 1) {
    element.validate();
    if (iterations < 0) throw ArgumentError("erode: iterations must be >= 0");
    BinaryMask cur = mask;
    for (int k = 0; k < iterations; ++k) cur = detail::step<false>(cur, element);
    return cur;
}

/// One dilation step restricted to `region`: (dilate(mask) & region) | mask.
inline BinaryMask dilate_within(const BinaryMask& mask, const BinaryMask& region, const StructuringElement& element) {
    BinaryMask grown = dilate(mask, element, 1);
    for (std::size_t i = 0; i < grown.size(); ++i) grown[i] = (mask[i] || (grown[i] && region[i])) ? 1 : 0;
    return grown;
}

/// Set-voxel linear indices of one connected component.
struct Component {
    std::vector<std::size_t> voxels;
    Index3 min_voxel{0, 0, 0};

    std::size_t size() const noexcept { return voxels.size(); }

    BinaryMask to_mask(const VolumeGeometry& g) const {
        BinaryMask m(g, 0);
        for (auto i : voxels) m[i] = 1;
        return m;
    }
};

/// Flood-fill labelling of connected regions whose voxels satisfy `same(i, j)`
/// with their neighbour. Returns per-voxel region ids (npos for excluded voxels).
template <class Include, class Same>
std::vector<std::uint32_t> label_regions(const VolumeGeometry& g, int connectivity, Include include, Same same,
                                         std::vector<std::vector<std::size_t>>& regions) {
    constexpr auto kNone = std::numeric_limits<std::uint32_t>::max();
    const auto offsets = neighbor_offsets(connectivity);
    std::vector<std::uint32_t> ids(g.voxel_count(), kNone);
    std::vector<std::size_t> stack;
    regions.clear();
    for (std::size_t seed = 0; seed < ids.size(); ++seed) {
        if (ids[seed] != kNone || !include(seed)) continue;
        const auto id = static_cast<std::uint32_t>(regions.size());
        regions.emplace_back();
        auto& members = regions.back();
        ids[seed] = id;
        stack.push_back(seed);
        while (!stack.empty()) {
            const std::size_t cur = stack.back();
            stack.pop_back();
            members.push_back(cur);
            const Index3 p = g.position(cur);
            for (const auto& o : offsets) {
                const Index3 q{p[0] + o[0], p[1] + o[1], p[2] + o[2]};
                if (!g.contains(q)) continue;
                const std::size_t j = g.index(q);
                if (ids[j] != kNone || !include(j) || !same(cur, j)) continue;
                ids[j] = id;
                stack.push_back(j);
            }
        }
        std::sort(members.begin(), members.end());
    }
    return ids;
}

/// Maximal connected components of `mask`, ordered by size descending, then
/// by lexicographic (x, y, z) minimum voxel.
inline std::vector<Component> connected_components(const BinaryMask& mask, int connectivity = 26) {
    std::vector<std::vector<std::size_t>> regions;
    label_regions(
        mask.geometry(), connectivity, [&](std::size_t i) { return mask[i] != 0; },
        [](std::size_t, std::size_t) { return true; }, regions);
    std::vector<Component> out;
    out.reserve(regions.size());
    for (auto& r : regions) {
        Component c;
        c.voxels = std::move(r);
        c.min_voxel = mask.geometry().position(c.voxels.front());
        for (auto i : c.voxels) c.min_voxel = std::min(c.min_voxel, mask.geometry().position(i));
        out.push_back(std::move(c));
    }
    std::sort(out.begin(), out.end(), [](const Component& a, const Component& b) {
        if (a.size() != b.size()) return a.size() > b.size();
        return a.min_voxel < b.min_voxel;
    });
    return out;
}

/// Mean voxel index of the set voxels.
inline Vec3 centroid(const BinaryMask& mask) {
    Vec3 sum{0, 0, 0};
    std::size_t n = 0;
    const auto& d = mask.dims();
    for (std::int64_t z = 0; z < d[2]; ++z)
        for (std::int64_t y = 0; y < d[1]; ++y)
            for (std::int64_t x = 0; x < d[0]; ++x)
                if (mask.at(x, y, z)) {
                    sum[0] += static_cast<double>(x);
                    sum[1] += static_cast<double>(y);
                    sum[2] += static_cast<double>(z);
                    ++n;
                }
    if (n == 0) throw EmptyForegroundError("centroid of an empty mask");
    for (auto& s : sum) s /= static_cast<double>(n);
    return sum;
}

/// Nearest integer with exact halves going to the lower index.
inline std::int64_t round_half_down(double s) { return static_cast<std::int64_t>(std::ceil(s - 0.5)); }

/// Resamples the mask under p -> center + factors * (p - center), using the
/// inverse map and nearest-neighbour lookup.
inline BinaryMask scale_mask(const BinaryMask& mask, const Vec3& factors, const Vec3& center) {
    for (double f : factors)
        if (!(f > 0.0 && f <= 4.0)) throw ArgumentError("scale factors must lie in (0, 4]");
    if (factors == Vec3{1.0, 1.0, 1.0}) return mask;
    const auto& d = mask.dims();
    std::array<std::vector<std::int64_t>, 3> src;
    for (int a = 0; a < 3; ++a) {
        src[a].resize(static_cast<std::size_t>(d[a]));
        for (std::int64_t i = 0; i < d[a]; ++i)
            src[a][i] = round_half_down(center[a] + (static_cast<double>(i) - center[a]) / factors[a]);
    }
    BinaryMask out(mask.geometry(), 0);
    for (std::int64_t z = 0; z < d[2]; ++z) {
        const auto sz = src[2][z];
        if (sz < 0 || sz >= d[2]) continue;
        for (std::int64_t y = 0; y < d[1]; ++y) {
            const auto sy = src[1][y];
            if (sy < 0 || sy >= d[1]) continue;
            for (std::int64_t x = 0; x < d[0]; ++x) {
                const auto sx = src[0][x];
                if (sx < 0 || sx >= d[0]) continue;
                out.at(x, y, z) = mask.at(sx, sy, sz);
            }
        }
    }
    return out;
}

/// Closing then opening, one face-connected iteration each. Computed on a
/// padded copy so the grid border does not act as an obstacle.
inline BinaryMask smooth_mask(const BinaryMask& mask) {
    if (is_empty(mask)) return mask;
    constexpr std::int64_t pad = 2;
    const auto& d = mask.dims();
    const Dims big{d[0] + 2 * pad, d[1] + 2 * pad, d[2] + 2 * pad};
    BinaryMask padded = pad_into(mask, VolumeGeometry::make(big), {pad, pad, pad}, std::uint8_t{0});
    const auto e = StructuringElement::face();
    BinaryMask closed = erode(dilate(padded, e), e);
    BinaryMask opened = dilate(erode(closed, e), e);
    BinaryMask out = crop(opened, {pad, pad, pad}, d);
    out.geometry() = mask.geometry();
    return out;
}

namespace detail {

// Squared 1D distance transform of a sampled function (lower envelope of parabolas).
inline void edt_1d(const double* f, double* out, std::int64_t n, std::vector<std::int64_t>& v, std::vector<double>& z) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    v.assign(static_cast<std::size_t>(n), 0);
    z.assign(static_cast<std::size_t>(n) + 1, 0.0);
    std::int64_t k = -1;
    for (std::int64_t q = 0; q < n; ++q) {
        if (f[q] == inf) continue;
        if (k < 0) {
            k = 0;
            v[0] = q;
            z[0] = -inf;
            z[1] = inf;
            continue;
        }
        double s;
        for (;;) {
            const std::int64_t r = v[k];
            s = ((f[q] + static_cast<double>(q * q)) - (f[r] + static_cast<double>(r * r))) /
                (2.0 * static_cast<double>(q - r));
            if (s <= z[k] && k > 0)
                --k;
            else
                break;
        }
        if (s <= z[k]) {
            // k == 0 and the new parabola dominates everywhere
            v[0] = q;
            z[0] = -inf;
            z[1] = inf;
            continue;
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = inf;
    }
    if (k < 0) {
        std::fill(out, out + n, inf);
        return;
    }
    std::int64_t j = 0;
    for (std::int64_t q = 0; q < n; ++q) {
        while (z[j + 1] < static_cast<double>(q)) ++j;
        const double dq = static_cast<double>(q - v[j]);
        out[q] = dq * dq + f[v[j]];
    }
}

} // namespace detail

/// Squared Euclidean distance (in voxels) from each voxel to the nearest set
/// voxel of `mask`; +inf everywhere when the mask is empty.
inline Volume<double> squared_distance_transform(const BinaryMask& mask) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    Volume<double> dist(mask.geometry(), inf);
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) dist[i] = 0.0;
    const auto& d = mask.dims();
    std::vector<double> line, res;
    std::vector<std::int64_t> v;
    std::vector<double> z;
    for (int axis = 0; axis < 3; ++axis) {
        const std::int64_t n = d[axis];
        line.resize(static_cast<std::size_t>(n));
        res.resize(static_cast<std::size_t>(n));
        const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
        for (std::int64_t j = 0; j < d[a2]; ++j)
            for (std::int64_t i = 0; i < d[a1]; ++i) {
                Index3 p{};
                p[a1] = i;
                p[a2] = j;
                for (std::int64_t q = 0; q < n; ++q) {
                    p[axis] = q;
                    line[q] = dist.at(p);
                }
                detail::edt_1d(line.data(), res.data(), n, v, z);
                for (std::int64_t q = 0; q < n; ++q) {
                    p[axis] = q;
                    dist.at(p) = res[q];
                }
            }
    }
    return dist;
}

/// Euclidean distance transform (voxel units).
inline Volume<double> distance_transform(const BinaryMask& mask) {
    Volume<double> d = squared_distance_transform(mask);
    for (auto& v : d.buffer()) v = std::sqrt(v);
    return d;
}

/// Minimum Euclidean index distance between a voxel of `a` and a voxel of `b`.
inline double min_distance(const BinaryMask& a, const BinaryMask& b) {
    require_same_dims(a.geometry(), b.geometry(), "min_distance");
    if (is_empty(a) || is_empty(b)) throw EmptyForegroundError("min_distance: empty operand");
    const Volume<double> d2 = squared_distance_transform(b);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i]) best = std::min(best, d2[i]);
    return std::sqrt(best);
}

} // namespace fnsynth::morph
