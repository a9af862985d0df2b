#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fnsynth/core/volume.hpp"
#include "fnsynth/morphology/morphology.hpp"

namespace fnsynth::labels {

/// Role -> training class {0 background, 1 fluid, 2 cortex, 3 misc}.
class ClassMap {
public:
    ClassMap() = default;

    ClassMap& set(Role role, int cls) {
        if (cls < 0 || cls > 3) throw ArgumentError("class index must be in 0..3");
        map_[role] = cls;
        return *this;
    }
    std::optional<int> lookup(Role role) const {
        auto it = map_.find(role);
        if (it == map_.end()) return std::nullopt;
        return it->second;
    }

    /// Fluid = external CSF + ventricles; cortex = gray matter; misc = the rest.
    /// Class roles map to themselves so remapping a 4-class volume is a no-op.
    static ClassMap standard() {
        ClassMap m;
        m.set(Role::Background, 0)
            .set(Role::ExternalCsf, 1)
            .set(Role::Ventricles, 1)
            .set(Role::GrayMatter, 2)
            .set(Role::WhiteMatter, 3)
            .set(Role::Cerebellum, 3)
            .set(Role::DeepGrayMatter, 3)
            .set(Role::Brainstem, 3)
            .set(Role::FluidClass, 1)
            .set(Role::CortexClass, 2)
            .set(Role::MiscClass, 3);
        return m;
    }

    /// {"role-name": class, ...}; roles not listed keep their standard class.
    static ClassMap from_json(const nlohmann::json& j) {
        ClassMap m = standard();
        if (!j.is_object()) throw FormatError("class map JSON must be an object {role: class}");
        for (const auto& [key, value] : j.items()) {
            auto role = parse_role_name(key);
            if (!role) throw FormatError("class map: unknown role '" + key + "'");
            if (!value.is_number_integer()) throw FormatError("class map: class for '" + key + "' must be an integer");
            m.set(*role, value.get<int>());
        }
        return m;
    }

    nlohmann::json to_json() const {
        nlohmann::json j = nlohmann::json::object();
        for (const auto& [role, cls] : map_) j[std::string(role_name(role))] = cls;
        return j;
    }

private:
    std::map<Role, int> map_;
};

/// Voxelwise role -> class substitution. Output uses the 4-class vocabulary.
inline LabelVolume remap_classes(const LabelVolume& labels, const ClassMap& map = ClassMap::standard()) {
    std::array<int, 65536> lut;
    lut.fill(-1);
    for (const auto& [code, info] : labels.vocabulary().entries())
        if (auto cls = map.lookup(info.role)) lut[code] = *cls;
    LabelVolume out(labels.geometry(), Vocabulary::four_class(), 0);
    auto src = labels.voxels();
    for (std::size_t i = 0; i < src.size(); ++i) {
        const int cls = lut[src[i]];
        if (cls < 0)
            throw UnmappedLabelError("remap_classes: code " + std::to_string(src[i]) + " has no class mapping");
        out[i] = static_cast<label_t>(cls);
    }
    return out;
}

/// Modal code among `codes`, ties to the smallest code. Empty input -> nullopt.
inline std::optional<label_t> modal_code(const std::vector<label_t>& codes) {
    if (codes.empty()) return std::nullopt;
    std::map<label_t, std::size_t> freq;
    for (auto c : codes) ++freq[c];
    label_t best = freq.begin()->first;
    std::size_t best_n = 0;
    for (const auto& [c, n] : freq)
        if (n > best_n) {
            best = c;
            best_n = n;
        }
    return best;
}

/// Codes of voxels in the 26-neighbour shell of `members` (excluding members).
inline std::vector<label_t> shell_codes(const Volume<label_t>& labels, const std::vector<std::size_t>& members,
                                        std::vector<std::uint8_t>& scratch) {
    const auto& g = labels.geometry();
    scratch.resize(g.voxel_count(), 0);
    for (auto i : members) scratch[i] = 1;
    static const auto offsets = morph::neighbor_offsets(26);
    std::vector<label_t> out;
    std::vector<std::size_t> touched;
    for (auto i : members) {
        const Index3 p = g.position(i);
        for (const auto& o : offsets) {
            const Index3 q{p[0] + o[0], p[1] + o[1], p[2] + o[2]};
            if (!g.contains(q)) continue;
            const auto j = g.index(q);
            if (scratch[j]) continue;
            scratch[j] = 2;
            touched.push_back(j);
            out.push_back(labels[j]);
        }
    }
    for (auto i : members) scratch[i] = 0;
    for (auto j : touched) scratch[j] = 0;
    return out;
}

/// Reassigns every same-code connected component smaller than `min_size` to
/// the modal label of its 26-neighbour shell (ties -> smallest code; an
/// all-background shell -> background). Single pass over a snapshot of the
/// input: shells are read from the input, not from partially cleaned output.
inline LabelVolume clean_small_components(const LabelVolume& labels, std::size_t min_size = 20, int connectivity = 6) {
    std::vector<std::vector<std::size_t>> regions;
    morph::label_regions(
        labels.geometry(), connectivity, [](std::size_t) { return true; },
        [&](std::size_t a, std::size_t b) { return labels[a] == labels[b]; }, regions);
    LabelVolume out = labels;
    const label_t bg = labels.vocabulary().background_code();
    std::vector<std::uint8_t> scratch;
    for (const auto& r : regions) {
        if (r.size() >= min_size) continue;
        const auto shell = shell_codes(labels, r, scratch);
        const label_t target = modal_code(shell).value_or(bg);
        for (auto i : r) out[i] = target;
    }
    return out;
}

/// Per-role left/right masks produced by split_hemispheres.
struct HemisphereSplit {
    BinaryMask white_matter_left, white_matter_right;
    BinaryMask ventricles_left, ventricles_right;
    std::optional<double> rotation_degrees;
    int kmeans_iterations = 0;
};

struct SplitResult {
    LabelVolume labels;
    HemisphereSplit split;
};

namespace detail {

inline constexpr Role kSplitRoles[] = {Role::WhiteMatter, Role::Ventricles};

inline HemisphereSplit masks_from_codes(const LabelVolume& v) {
    HemisphereSplit s;
    s.white_matter_left = v.mask_of_role(Role::WhiteMatter, Side::Left);
    s.white_matter_right = v.mask_of_role(Role::WhiteMatter, Side::Right);
    s.ventricles_left = v.mask_of_role(Role::Ventricles, Side::Left);
    s.ventricles_right = v.mask_of_role(Role::Ventricles, Side::Right);
    return s;
}

} // namespace detail

/// True when white matter and ventricles carry left/right codes only.
inline bool is_hemisphere_split(const LabelVolume& labels) {
    const auto& vocab = labels.vocabulary();
    for (Role r : detail::kSplitRoles) {
        if (!vocab.has_role(r, Side::Left) || !vocab.has_role(r, Side::Right)) return false;
        for (auto c : vocab.codes(r, Side::None))
            if (count_code(labels, c) > 0) return false;
    }
    return true;
}

/// Splits white matter and ventricles into left/right codes with 2-means
/// (Lloyd) on the voxel coordinates of their union, so both roles share one
/// midline. The anterior-posterior axis must be parallel to grid Y; otherwise
/// pass the in-plane angle (degrees) that aligns it. Coordinates are rotated
/// for clustering only, the label grid itself is never resampled.
inline SplitResult split_hemispheres(const LabelVolume& labels, std::optional<double> rotation_degrees = {}) {
    const auto& vocab = labels.vocabulary();
    if (is_hemisphere_split(labels)) return {labels, detail::masks_from_codes(labels)};
    for (Role r : detail::kSplitRoles)
        if (vocab.codes(r, Side::None).empty())
            throw MissingRoleError(std::string("split_hemispheres: role '") + std::string(role_name(r)) + "' absent");

    std::vector<label_t> unsided;
    for (Role r : detail::kSplitRoles)
        for (auto c : vocab.codes(r, Side::None)) unsided.push_back(c);
    const BinaryMask region = labels.mask_of(unsided);

    const auto& g = labels.geometry();
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < region.size(); ++i)
        if (region[i]) members.push_back(i);
    if (members.size() < 2) throw DegenerateClusterError("split_hemispheres: fewer than two voxels to cluster");

    const double theta = rotation_degrees.value_or(0.0) * std::numbers::pi / 180.0;
    const double cx = 0.5 * static_cast<double>(g.dims[0] - 1), cy = 0.5 * static_cast<double>(g.dims[1] - 1);
    std::vector<Vec3> pts;
    pts.reserve(members.size());
    for (auto i : members) {
        const Index3 p = g.position(i);
        const double x = static_cast<double>(p[0]) - cx, y = static_cast<double>(p[1]) - cy;
        pts.push_back({std::cos(theta) * x - std::sin(theta) * y + cx, std::sin(theta) * x + std::cos(theta) * y + cy,
                       static_cast<double>(p[2])});
    }

    // Initial centres: centroids of the points left and right of the x-range midpoint.
    double xmin = pts[0][0], xmax = pts[0][0];
    for (const auto& p : pts) {
        xmin = std::min(xmin, p[0]);
        xmax = std::max(xmax, p[0]);
    }
    const double mid = 0.5 * (xmin + xmax);
    std::vector<std::uint8_t> assign(pts.size());
    for (std::size_t k = 0; k < pts.size(); ++k) assign[k] = pts[k][0] > mid ? 1 : 0;

    auto centres = [&]() {
        std::array<Vec3, 2> c{};
        std::array<std::size_t, 2> n{0, 0};
        for (std::size_t k = 0; k < pts.size(); ++k) {
            for (int a = 0; a < 3; ++a) c[assign[k]][a] += pts[k][a];
            ++n[assign[k]];
        }
        if (n[0] == 0 || n[1] == 0) throw DegenerateClusterError("split_hemispheres: one cluster is empty");
        for (int s = 0; s < 2; ++s)
            for (int a = 0; a < 3; ++a) c[s][a] /= static_cast<double>(n[s]);
        return c;
    };

    int iterations = 0;
    for (; iterations < 100; ++iterations) {
        const auto c = centres();
        bool changed = false;
        for (std::size_t k = 0; k < pts.size(); ++k) {
            double d0 = 0, d1 = 0;
            for (int a = 0; a < 3; ++a) {
                d0 += (pts[k][a] - c[0][a]) * (pts[k][a] - c[0][a]);
                d1 += (pts[k][a] - c[1][a]) * (pts[k][a] - c[1][a]);
            }
            const std::uint8_t s = d1 < d0 ? 1 : 0;
            if (s != assign[k]) {
                assign[k] = s;
                changed = true;
            }
        }
        if (!changed) break;
    }
    centres(); // re-check that neither cluster emptied on the last update

    // Right = cluster whose mean lies at larger world x.
    std::array<Vec3, 2> grid_mean{};
    std::array<std::size_t, 2> n{0, 0};
    for (std::size_t k = 0; k < members.size(); ++k) {
        const Index3 p = g.position(members[k]);
        for (int a = 0; a < 3; ++a) grid_mean[assign[k]][a] += static_cast<double>(p[a]);
        ++n[assign[k]];
    }
    for (int s = 0; s < 2; ++s)
        for (auto& v : grid_mean[s]) v /= static_cast<double>(n[s]);
    const std::uint8_t right_cluster =
        apply_affine(g.affine, grid_mean[1])[0] >= apply_affine(g.affine, grid_mean[0])[0] ? 1 : 0;

    LabelVolume out = labels;
    auto& ov = out.vocabulary();
    std::map<label_t, std::array<label_t, 2>> sided; // unsided -> {left, right}
    label_t next = static_cast<label_t>(ov.max_code() + 1);
    for (Role r : detail::kSplitRoles)
        for (auto c : vocab.codes(r, Side::None)) {
            sided[c] = {next, static_cast<label_t>(next + 1)};
            ov.add(next, r, Side::Left);
            ov.add(static_cast<label_t>(next + 1), r, Side::Right);
            next = static_cast<label_t>(next + 2);
        }
    for (std::size_t k = 0; k < members.size(); ++k) {
        const auto i = members[k];
        const auto& lr = sided.at(labels[i]);
        out[i] = assign[k] == right_cluster ? lr[1] : lr[0];
    }
    SplitResult res{std::move(out), {}};
    res.split = detail::masks_from_codes(res.labels);
    res.split.rotation_degrees = rotation_degrees;
    res.split.kmeans_iterations = iterations;
    return res;
}

/// Folds left/right codes back into the unsided code of the same role, when
/// the vocabulary has one. Inverse of split_hemispheres.
inline LabelVolume merge_hemispheres(const LabelVolume& labels) {
    LabelVolume out = labels;
    auto& vocab = out.vocabulary();
    std::array<label_t, 65536> lut;
    for (std::size_t c = 0; c < lut.size(); ++c) lut[c] = static_cast<label_t>(c);
    std::vector<label_t> drop;
    for (const auto& [code, info] : labels.vocabulary().entries()) {
        if (info.side == Side::None) continue;
        auto parent = labels.vocabulary().first_code(info.role, Side::None);
        if (!parent) continue;
        lut[code] = *parent;
        drop.push_back(code);
    }
    for (auto& v : out.buffer()) v = lut[v];
    for (auto c : drop) vocab.erase(c);
    return out;
}

/// Ventricle voxels inside the brainstem+cerebellum mask dilated `dilations`
/// times with the in-plane (x-y) 4-neighbourhood.
inline BinaryMask extract_fourth_ventricle(const LabelVolume& labels, int dilations = 4) {
    const auto& vocab = labels.vocabulary();
    if (!vocab.has_role(Role::Brainstem) || !vocab.has_role(Role::Cerebellum))
        throw MissingRoleError("extract_fourth_ventricle: brainstem and cerebellum roles are required");
    auto posterior = vocab.codes(Role::Brainstem);
    for (auto c : vocab.codes(Role::Cerebellum)) posterior.push_back(c);
    const BinaryMask grown = morph::dilate(labels.mask_of(posterior), morph::StructuringElement::in_plane(), dilations);
    BinaryMask out = labels.mask_of_role(Role::Ventricles);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (out[i] && grown[i]) ? 1 : 0;
    return out;
}

} // namespace fnsynth::labels
