#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "fnsynth/core/geometry.hpp"
#include "fnsynth/core/vocabulary.hpp"

namespace fnsynth {

/// Dense 3D grid of T with voxel geometry. Value type; copies deep-copy voxels.
template <class T>
class Volume {
public:
    using value_type = T;

    Volume() = default;
    explicit Volume(VolumeGeometry geometry, T fill = T{})
        : geometry_(std::move(geometry)), voxels_(geometry_.voxel_count(), fill) {
        geometry_.validate();
    }
    Volume(VolumeGeometry geometry, std::vector<T> voxels)
        : geometry_(std::move(geometry)), voxels_(std::move(voxels)) {
        geometry_.validate();
        if (voxels_.size() != geometry_.voxel_count())
            throw DimensionError("voxel buffer size does not match dims " + to_string(geometry_.dims));
    }

    const VolumeGeometry& geometry() const noexcept { return geometry_; }
    VolumeGeometry& geometry() noexcept { return geometry_; }
    const Dims& dims() const noexcept { return geometry_.dims; }
    std::size_t size() const noexcept { return voxels_.size(); }

    T& operator[](std::size_t i) { return voxels_[i]; }
    const T& operator[](std::size_t i) const { return voxels_[i]; }
    T& at(std::int64_t x, std::int64_t y, std::int64_t z) { return voxels_[geometry_.index(x, y, z)]; }
    const T& at(std::int64_t x, std::int64_t y, std::int64_t z) const {
        return voxels_[geometry_.index(x, y, z)];
    }
    T& at(const Index3& p) { return voxels_[geometry_.index(p)]; }
    const T& at(const Index3& p) const { return voxels_[geometry_.index(p)]; }

    std::span<T> voxels() noexcept { return voxels_; }
    std::span<const T> voxels() const noexcept { return voxels_; }
    std::vector<T>& buffer() noexcept { return voxels_; }
    const std::vector<T>& buffer() const noexcept { return voxels_; }

    bool operator==(const Volume& other) const {
        return geometry_.dims == other.geometry_.dims && voxels_ == other.voxels_;
    }

private:
    VolumeGeometry geometry_{};
    std::vector<T> voxels_;
};

/// Boolean voxel set. Stored as bytes (0/1) so spans are addressable.
using BinaryMask = Volume<std::uint8_t>;

/// Scalar image. All values must be finite.
using IntensityVolume = Volume<double>;

/// Label grid plus the vocabulary that names its codes.
class LabelVolume : public Volume<label_t> {
public:
    LabelVolume() = default;
    LabelVolume(VolumeGeometry geometry, Vocabulary vocabulary, label_t fill = 0)
        : Volume<label_t>(std::move(geometry), fill), vocabulary_(std::move(vocabulary)) {}
    LabelVolume(Volume<label_t> grid, Vocabulary vocabulary)
        : Volume<label_t>(std::move(grid)), vocabulary_(std::move(vocabulary)) {}

    const Vocabulary& vocabulary() const noexcept { return vocabulary_; }
    Vocabulary& vocabulary() noexcept { return vocabulary_; }

    /// Every voxel code must be in the vocabulary, which has exactly one background code.
    void validate() const {
        vocabulary_.background_code();
        std::vector<bool> seen(65536, false);
        for (label_t v : voxels()) seen[v] = true;
        for (std::size_t c = 0; c < seen.size(); ++c)
            if (seen[c] && !vocabulary_.contains(static_cast<label_t>(c)))
                throw UnmappedLabelError("voxel code " + std::to_string(c) + " is not in the vocabulary");
    }

    /// Indicator of voxels whose code is in `codes`.
    BinaryMask mask_of(std::span<const label_t> codes) const {
        std::vector<bool> want(65536, false);
        for (label_t c : codes) want[c] = true;
        BinaryMask m(geometry(), 0);
        auto src = voxels();
        for (std::size_t i = 0; i < src.size(); ++i) m[i] = want[src[i]] ? 1 : 0;
        return m;
    }
    BinaryMask mask_of(label_t code) const { return mask_of(std::span<const label_t>(&code, 1)); }
    BinaryMask mask_of_role(Role role, Side side = Side::Any) const {
        const auto codes = vocabulary_.codes(role, side);
        return mask_of(codes);
    }
    BinaryMask foreground() const {
        const label_t bg = vocabulary_.background_code();
        BinaryMask m(geometry(), 0);
        auto src = voxels();
        for (std::size_t i = 0; i < src.size(); ++i) m[i] = src[i] != bg ? 1 : 0;
        return m;
    }

private:
    Vocabulary vocabulary_;
};

inline std::size_t count(const BinaryMask& m) {
    return static_cast<std::size_t>(std::count_if(m.voxels().begin(), m.voxels().end(),
                                                  [](std::uint8_t b) { return b != 0; }));
}

inline std::size_t count_code(const Volume<label_t>& v, label_t code) {
    return static_cast<std::size_t>(std::count(v.voxels().begin(), v.voxels().end(), code));
}

inline bool is_empty(const BinaryMask& m) {
    return std::none_of(m.voxels().begin(), m.voxels().end(), [](std::uint8_t b) { return b != 0; });
}

inline void require_same_dims(const VolumeGeometry& a, const VolumeGeometry& b, const char* what) {
    if (a.dims != b.dims)
        throw DimensionError(std::string(what) + ": dims " + to_string(a.dims) + " vs " + to_string(b.dims));
}

} // namespace fnsynth
