#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>

#include <json.hpp>

#include "fnsynth/core/volume.hpp"

namespace fnsynth {

/// Original intensity range, kept so normalized images can be mapped back.
struct IntensityRange {
    double min = -1.0;
    double max = 1.0;
};

/// Everything needed to undo crop + resize (+ normalization) of one subject.
struct CropRecord {
    Dims original_dims{1, 1, 1};
    Index3 offset{0, 0, 0};
    Dims cropped_dims{1, 1, 1};
    Dims target_dims{1, 1, 1};
    Vec3 original_spacing{1.0, 1.0, 1.0};
    Affine original_affine = identity_affine();
    std::optional<IntensityRange> intensity;

    void validate() const {
        for (int a = 0; a < 3; ++a)
            if (offset[a] < 0 || cropped_dims[a] < 1 || offset[a] + cropped_dims[a] > original_dims[a])
                throw ArgumentError("crop record: offset + cropped dims exceed original dims");
    }

    VolumeGeometry original_geometry() const { return {original_dims, original_spacing, original_affine}; }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["original_dims"] = original_dims;
        j["offset"] = offset;
        j["cropped_dims"] = cropped_dims;
        j["target_dims"] = target_dims;
        j["original_spacing"] = original_spacing;
        j["original_affine"] = original_affine;
        if (intensity)
            j["intensity"] = {{"min", intensity->min}, {"max", intensity->max}};
        else
            j["intensity"] = nullptr;
        return j;
    }

    static CropRecord from_json(const nlohmann::json& j) {
        CropRecord r;
        try {
            r.original_dims = j.at("original_dims").get<Dims>();
            r.offset = j.at("offset").get<Index3>();
            r.cropped_dims = j.at("cropped_dims").get<Dims>();
            r.target_dims = j.at("target_dims").get<Dims>();
            r.original_spacing = j.at("original_spacing").get<Vec3>();
            r.original_affine = j.at("original_affine").get<Affine>();
            if (j.contains("intensity") && !j.at("intensity").is_null())
                r.intensity = IntensityRange{j["intensity"].at("min").get<double>(), j["intensity"].at("max").get<double>()};
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(std::string("crop record: ") + e.what());
        }
        r.validate();
        return r;
    }
};

enum class Interpolation { Nearest, Trilinear };

namespace detail {

inline Affine translation(const Index3& offset) {
    Affine t = identity_affine();
    for (int a = 0; a < 3; ++a) t[a][3] = static_cast<double>(offset[a]);
    return t;
}

/// ceil(n / d) for d > 0.
inline std::int64_t ceil_div(std::int64_t n, std::int64_t d) { return n >= 0 ? (n + d - 1) / d : -((-n) / d); }

/// Nearest source index for destination index i under voxel-centre alignment.
/// Source coordinate s = (i + 0.5) * src / dst - 0.5; exact halves go to the lower index.
inline std::int64_t nearest_source(std::int64_t i, std::int64_t src, std::int64_t dst) {
    const std::int64_t idx = ceil_div((2 * i + 1) * src - 2 * dst, 2 * dst);
    return std::clamp<std::int64_t>(idx, 0, src - 1);
}

inline VolumeGeometry resized_geometry(const VolumeGeometry& g, const Dims& target) {
    VolumeGeometry out = g;
    out.dims = target;
    Affine m = identity_affine();
    for (int a = 0; a < 3; ++a) {
        const double scale = static_cast<double>(g.dims[a]) / static_cast<double>(target[a]);
        out.spacing[a] = g.spacing[a] * scale;
        m[a][a] = scale;
        m[a][3] = 0.5 * scale - 0.5;
    }
    out.affine = multiply(g.affine, m);
    return out;
}

} // namespace detail

/// Sub-grid [offset, offset + dims) of `vol`; the affine is shifted so world positions are unchanged.
template <class V>
V crop(const V& vol, const Index3& offset, const Dims& dims) {
    const auto& g = vol.geometry();
    for (int a = 0; a < 3; ++a)
        if (offset[a] < 0 || dims[a] < 1 || offset[a] + dims[a] > g.dims[a])
            throw DimensionError("crop window outside the volume");
    V out = vol;
    VolumeGeometry cg{dims, g.spacing, multiply(g.affine, detail::translation(offset))};
    std::vector<typename V::value_type> buf(cg.voxel_count());
    std::size_t k = 0;
    for (std::int64_t z = 0; z < dims[2]; ++z)
        for (std::int64_t y = 0; y < dims[1]; ++y)
            for (std::int64_t x = 0; x < dims[0]; ++x) buf[k++] = vol.at(x + offset[0], y + offset[1], z + offset[2]);
    out.geometry() = cg;
    out.buffer() = std::move(buf);
    return out;
}

/// Inverse of crop: places `vol` at `offset` in a grid of `geometry`, filling the rest with `fill`.
template <class V>
V pad_into(const V& vol, const VolumeGeometry& geometry, const Index3& offset, typename V::value_type fill) {
    const auto& d = vol.dims();
    for (int a = 0; a < 3; ++a)
        if (offset[a] < 0 || offset[a] + d[a] > geometry.dims[a]) throw DimensionError("pad window outside target grid");
    V out = vol;
    out.geometry() = geometry;
    out.buffer().assign(geometry.voxel_count(), fill);
    for (std::int64_t z = 0; z < d[2]; ++z)
        for (std::int64_t y = 0; y < d[1]; ++y)
            for (std::int64_t x = 0; x < d[0]; ++x) out.at(x + offset[0], y + offset[1], z + offset[2]) = vol.at(x, y, z);
    return out;
}

/// Tight bounding box of set voxels, as (min corner, dims). Throws on an empty mask.
inline std::pair<Index3, Dims> bounding_box(const BinaryMask& m) {
    const auto& d = m.dims();
    Index3 lo{d[0], d[1], d[2]}, hi{-1, -1, -1};
    for (std::int64_t z = 0; z < d[2]; ++z)
        for (std::int64_t y = 0; y < d[1]; ++y)
            for (std::int64_t x = 0; x < d[0]; ++x)
                if (m.at(x, y, z)) {
                    const Index3 p{x, y, z};
                    for (int a = 0; a < 3; ++a) {
                        lo[a] = std::min(lo[a], p[a]);
                        hi[a] = std::max(hi[a], p[a]);
                    }
                }
    if (hi[0] < 0) throw EmptyForegroundError("mask has no set voxels");
    return {lo, {hi[0] - lo[0] + 1, hi[1] - lo[1] + 1, hi[2] - lo[2] + 1}};
}

struct CropResult {
    LabelVolume labels;
    std::optional<IntensityVolume> image;
    CropRecord record;
};

/// Crops to the non-background bounding box expanded by `margin`, clamped to the grid.
/// When `image` is given it is cropped with the same window.
inline CropResult crop_to_foreground(const LabelVolume& labels, std::int64_t margin,
                                     const IntensityVolume* image = nullptr) {
    if (margin < 0) throw ArgumentError("crop margin must be >= 0");
    if (image) require_same_dims(labels.geometry(), image->geometry(), "crop_to_foreground");
    const BinaryMask fg = labels.foreground();
    Index3 lo;
    Dims ext;
    try {
        std::tie(lo, ext) = bounding_box(fg);
    } catch (const EmptyForegroundError&) {
        throw EmptyForegroundError("crop_to_foreground: volume is entirely background");
    }
    const auto& d = labels.dims();
    Index3 off;
    Dims dims;
    for (int a = 0; a < 3; ++a) {
        const std::int64_t b = std::max<std::int64_t>(0, lo[a] - margin);
        const std::int64_t e = std::min<std::int64_t>(d[a], lo[a] + ext[a] + margin);
        off[a] = b;
        dims[a] = e - b;
    }
    CropResult r;
    r.labels = crop(labels, off, dims);
    if (image) r.image = crop(*image, off, dims);
    r.record.original_dims = d;
    r.record.offset = off;
    r.record.cropped_dims = dims;
    r.record.target_dims = dims;
    r.record.original_spacing = labels.geometry().spacing;
    r.record.original_affine = labels.geometry().affine;
    return r;
}

/// Nearest-neighbour resize of any grid (labels, masks). Introduces no new values.
template <class V>
V resize_nearest(const V& vol, const Dims& target) {
    for (int a = 0; a < 3; ++a)
        if (target[a] < 1) throw DimensionError("resize target must be >= 1 on every axis");
    const auto& src = vol.dims();
    std::array<std::vector<std::int64_t>, 3> map;
    for (int a = 0; a < 3; ++a) {
        map[a].resize(static_cast<std::size_t>(target[a]));
        for (std::int64_t i = 0; i < target[a]; ++i) map[a][i] = detail::nearest_source(i, src[a], target[a]);
    }
    V out = vol;
    out.geometry() = detail::resized_geometry(vol.geometry(), target);
    std::vector<typename V::value_type> buf(out.geometry().voxel_count());
    std::size_t k = 0;
    for (std::int64_t z = 0; z < target[2]; ++z)
        for (std::int64_t y = 0; y < target[1]; ++y)
            for (std::int64_t x = 0; x < target[0]; ++x) buf[k++] = vol.at(map[0][x], map[1][y], map[2][z]);
    out.buffer() = std::move(buf);
    return out;
}

inline IntensityVolume resize_trilinear(const IntensityVolume& vol, const Dims& target) {
    for (int a = 0; a < 3; ++a)
        if (target[a] < 1) throw DimensionError("resize target must be >= 1 on every axis");
    const auto& src = vol.dims();
    struct Tap {
        std::int64_t i0, i1;
        double w1;
    };
    std::array<std::vector<Tap>, 3> taps;
    for (int a = 0; a < 3; ++a) {
        const double scale = static_cast<double>(src[a]) / static_cast<double>(target[a]);
        for (std::int64_t i = 0; i < target[a]; ++i) {
            double s = (static_cast<double>(i) + 0.5) * scale - 0.5;
            s = std::clamp(s, 0.0, static_cast<double>(src[a] - 1));
            const auto i0 = static_cast<std::int64_t>(std::floor(s));
            const auto i1 = std::min(i0 + 1, src[a] - 1);
            taps[a].push_back({i0, i1, s - static_cast<double>(i0)});
        }
    }
    IntensityVolume out(detail::resized_geometry(vol.geometry(), target), 0.0);
    std::size_t k = 0;
    for (std::int64_t z = 0; z < target[2]; ++z) {
        const Tap tz = taps[2][z];
        for (std::int64_t y = 0; y < target[1]; ++y) {
            const Tap ty = taps[1][y];
            for (std::int64_t x = 0; x < target[0]; ++x) {
                const Tap tx = taps[0][x];
                auto lerp_x = [&](std::int64_t yy, std::int64_t zz) {
                    return vol.at(tx.i0, yy, zz) * (1.0 - tx.w1) + vol.at(tx.i1, yy, zz) * tx.w1;
                };
                const double c0 = lerp_x(ty.i0, tz.i0) * (1.0 - ty.w1) + lerp_x(ty.i1, tz.i0) * ty.w1;
                const double c1 = lerp_x(ty.i0, tz.i1) * (1.0 - ty.w1) + lerp_x(ty.i1, tz.i1) * ty.w1;
                out[k++] = c0 * (1.0 - tz.w1) + c1 * tz.w1;
            }
        }
    }
    return out;
}

/// Resize a label volume; only nearest-neighbour is valid for labels.
inline LabelVolume resize(const LabelVolume& labels, const Dims& target, Interpolation mode = Interpolation::Nearest) {
    if (mode != Interpolation::Nearest) throw ModeError("trilinear interpolation is not allowed on label volumes");
    return resize_nearest(labels, target);
}

inline IntensityVolume resize(const IntensityVolume& image, const Dims& target,
                              Interpolation mode = Interpolation::Trilinear) {
    return mode == Interpolation::Nearest ? resize_nearest(image, target) : resize_trilinear(image, target);
}

/// Linear map of [min, max] onto [-1, 1]. A constant image maps to all -1.
inline std::pair<IntensityVolume, IntensityRange> normalize_intensity(const IntensityVolume& image) {
    if (image.size() == 0) throw DimensionError("normalize_intensity: empty volume");
    const auto [lo_it, hi_it] = std::minmax_element(image.voxels().begin(), image.voxels().end());
    const IntensityRange range{*lo_it, *hi_it};
    IntensityVolume out = image;
    const double span = range.max - range.min;
    for (auto& v : out.buffer()) v = span > 0.0 ? 2.0 * (v - range.min) / span - 1.0 : -1.0;
    return {std::move(out), range};
}

inline IntensityVolume denormalize_intensity(const IntensityVolume& image, const IntensityRange& range) {
    IntensityVolume out = image;
    const double span = range.max - range.min;
    for (auto& v : out.buffer()) v = (v + 1.0) * 0.5 * span + range.min;
    return out;
}

namespace detail {
inline void check_revert_dims(const Dims& dims, const CropRecord& record) {
    record.validate();
    if (dims != record.target_dims)
        throw DimensionError("revert_geometry: volume dims " + to_string(dims) + " differ from record target " +
                             to_string(record.target_dims));
}
} // namespace detail

/// Undo resize + crop: back to cropped dims, then pad with background at the recorded offset.
inline LabelVolume revert_geometry(const LabelVolume& labels, const CropRecord& record) {
    detail::check_revert_dims(labels.dims(), record);
    const LabelVolume small = resize_nearest(labels, record.cropped_dims);
    return pad_into(small, record.original_geometry(), record.offset, labels.vocabulary().background_code());
}

/// Intensity variant; padding uses the recorded minimum (or -1 when no range was recorded).
inline IntensityVolume revert_geometry(const IntensityVolume& image, const CropRecord& record) {
    detail::check_revert_dims(image.dims(), record);
    const IntensityVolume small = resize_trilinear(image, record.cropped_dims);
    const double fill = record.intensity ? record.intensity->min : -1.0;
    return pad_into(small, record.original_geometry(), record.offset, fill);
}

} // namespace fnsynth
