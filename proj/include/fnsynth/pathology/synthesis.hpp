#pragma once

// Label-morphology synthesizers: ventriculomegaly (constrained ventricle
// dilation), cerebellar / pontocerebellar hypoplasia (anisotropic shrinkage)
// and microcephaly (uniform shrinkage with CSF back-fill).

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "fnsynth/core/volume.hpp"
#include "fnsynth/labels/label_prep.hpp"
#include "fnsynth/morphology/morphology.hpp"
#include "fnsynth/pathology/config.hpp"
#include "fnsynth/pathology/plan.hpp"
#include "fnsynth/pathology/report.hpp"

namespace fnsynth::pathology {

using SynthesisResult = std::pair<LabelVolume, SynthesisReport>;

namespace detail {

inline void check_severity(double s, const char* what) {
    if (!(s >= 0.0 && s <= 1.0)) throw ArgumentError(std::string(what) + ": severity must lie in [0, 1]");
}

inline std::vector<label_t> codes_of(const Vocabulary& v, std::initializer_list<Role> roles) {
    std::vector<label_t> out;
    for (Role r : roles)
        for (auto c : v.codes(r)) out.push_back(c);
    return out;
}

inline bool contains(const std::vector<label_t>& v, label_t c) { return std::find(v.begin(), v.end(), c) != v.end(); }

inline bool adjacent26(const BinaryMask& a, const BinaryMask& b) {
    const BinaryMask grown = morph::dilate(b, morph::StructuringElement::full(), 1);
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] && grown[i]) return true;
    return false;
}

/// Voxels of `structure` that touch `other` (26-neighbourhood). Falls back to
/// the structure voxels closest to `other` when they do not touch.
inline BinaryMask contact_voxels(const BinaryMask& structure, const BinaryMask& other) {
    const BinaryMask grown = morph::dilate(other, morph::StructuringElement::full(), 1);
    BinaryMask contact(structure.geometry(), 0);
    bool any = false;
    for (std::size_t i = 0; i < contact.size(); ++i)
        if (structure[i] && grown[i]) contact[i] = 1, any = true;
    if (any || is_empty(other)) return contact;
    const auto d2 = morph::squared_distance_transform(other);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < d2.size(); ++i)
        if (structure[i]) best = std::min(best, d2[i]);
    for (std::size_t i = 0; i < d2.size(); ++i)
        if (structure[i] && d2[i] == best) contact[i] = 1;
    return contact;
}

/// Resamples the codes in `subset` under p -> center + factors * (p - center),
/// writing only at voxels where `writable` is set. Returns the new code grid
/// restricted to `writable` (voxels with no mapped source get `vacant`).
inline std::vector<label_t> scale_codes(const Volume<label_t>& labels, const std::vector<label_t>& subset,
                                        const Vec3& factors, const Vec3& center, const BinaryMask& writable,
                                        label_t vacant) {
    const auto& d = labels.dims();
    std::array<std::vector<std::int64_t>, 3> src;
    for (int a = 0; a < 3; ++a) {
        src[a].resize(static_cast<std::size_t>(d[a]));
        for (std::int64_t i = 0; i < d[a]; ++i)
            src[a][i] = morph::round_half_down(center[a] + (static_cast<double>(i) - center[a]) / factors[a]);
    }
    std::vector<bool> in_subset(65536, false);
    for (auto c : subset) in_subset[c] = true;
    std::vector<label_t> out(labels.buffer());
    for (std::int64_t z = 0; z < d[2]; ++z)
        for (std::int64_t y = 0; y < d[1]; ++y)
            for (std::int64_t x = 0; x < d[0]; ++x) {
                const std::size_t i = labels.geometry().index(x, y, z);
                if (!writable[i]) continue;
                const Index3 s{src[0][x], src[1][y], src[2][z]};
                label_t v = vacant;
                if (labels.geometry().contains(s)) {
                    const label_t c = labels.at(s);
                    if (in_subset[c]) v = c;
                }
                out[i] = v;
            }
    return out;
}

/// Fills each connected region of `vacant`-coded voxels with the modal code
/// of its 26-shell, ignoring `excluded` codes; `fallback` when nothing remains.
inline std::size_t fill_vacant(Volume<label_t>& grid, label_t vacant, const std::vector<label_t>& excluded,
                               label_t fallback) {
    std::vector<std::vector<std::size_t>> regions;
    morph::label_regions(
        grid.geometry(), 26, [&](std::size_t i) { return grid[i] == vacant; },
        [](std::size_t, std::size_t) { return true; }, regions);
    std::vector<std::uint8_t> scratch;
    std::size_t filled = 0;
    for (const auto& r : regions) {
        auto shell = labels::shell_codes(grid, r, scratch);
        std::erase_if(shell, [&](label_t c) { return c == vacant || contains(excluded, c); });
        const label_t code = labels::modal_code(shell).value_or(fallback);
        for (auto i : r) grid[i] = code;
        filled += r.size();
    }
    return filled;
}

/// A code not used by the vocabulary, used as a temporary "vacant" marker.
inline label_t scratch_code(const Vocabulary& v) {
    for (label_t c = 65535; c > 0; --c)
        if (!v.contains(c)) return c;
    throw ArgumentError("vocabulary uses every label code");
}

inline label_t fill_fallback(const Vocabulary& v) {
    if (auto c = v.first_code(Role::ExternalCsf)) return *c;
    return v.background_code();
}

} // namespace detail

/// Dilates left and right ventricles within their own hemisphere's white matter.
///
/// Per hemisphere, the largest dilation count k_max keeping the ventricle
/// volume <= budget_fraction * (pre-dilation hemisphere WM volume) is found;
/// growth only claims WM voxels at distance >= clearance from every structure
/// other than WM and ventricles. Symmetric plans share k = round(s * min k_max);
/// asymmetric plans use k_h = round(s_h * k_max_h). The grown mask is smoothed,
/// re-intersected with the claimable region and, if smoothing pushed it over
/// budget, regrown with k - 1. Requires left/right WM and ventricle codes (see
/// labels::split_hemispheres); sided codes are merged back when the vocabulary
/// has an unsided parent code.
inline SynthesisResult synthesize_ventriculomegaly(const LabelVolume& labels, const PathologyPlan& plan,
                                                   const SynthesisConfig& cfg = {}) {
    cfg.validate();
    const auto& vocab = labels.vocabulary();
    for (Role r : {Role::WhiteMatter, Role::Ventricles})
        for (Side s : {Side::Left, Side::Right})
            if (!vocab.has_role(r, s))
                throw MissingRoleError("synthesize_ventriculomegaly: missing left/right white matter or ventricle codes");
    for (double s : plan.vm_hemisphere_severity) detail::check_severity(s, "synthesize_ventriculomegaly");

    const label_t bg = vocab.background_code();
    const auto wm_codes = vocab.codes(Role::WhiteMatter);
    const auto vent_codes = vocab.codes(Role::Ventricles);
    BinaryMask other(labels.geometry(), 0);
    for (std::size_t i = 0; i < other.size(); ++i) {
        const label_t c = labels[i];
        other[i] = (c != bg && !detail::contains(wm_codes, c) && !detail::contains(vent_codes, c)) ? 1 : 0;
    }
    const Volume<double> d2_other = morph::squared_distance_transform(other);
    const double clearance2 = cfg.vm_clearance * cfg.vm_clearance;

    VentriculomegalyReport rep;
    std::array<BinaryMask, 2> ventricle, claimable;
    std::array<Volume<int>, 2> arrival; // dilation step at which a voxel joins (-1 never)
    constexpr std::array<Side, 2> sides{Side::Left, Side::Right};

    for (int h = 0; h < 2; ++h) {
        ventricle[h] = labels.mask_of_role(Role::Ventricles, sides[h]);
        const BinaryMask wm = labels.mask_of_role(Role::WhiteMatter, sides[h]);
        claimable[h] = BinaryMask(labels.geometry(), 0);
        for (std::size_t i = 0; i < wm.size(); ++i) claimable[h][i] = (wm[i] && d2_other[i] >= clearance2) ? 1 : 0;

        auto& g = rep.hemispheres[h];
        g.white_matter_before = count(wm);
        g.ventricle_before = count(ventricle[h]);
        g.budget = cfg.vm_budget_fraction * static_cast<double>(g.white_matter_before);
        g.over_budget_on_input = static_cast<double>(g.ventricle_before) > g.budget;

        arrival[h] = Volume<int>(labels.geometry(), -1);
        for (std::size_t i = 0; i < wm.size(); ++i)
            if (ventricle[h][i]) arrival[h][i] = 0;
        if (g.over_budget_on_input || g.ventricle_before == 0) continue;

        BinaryMask cur = ventricle[h];
        std::size_t size = g.ventricle_before;
        for (int k = 1; k <= cfg.vm_max_iterations; ++k) {
            BinaryMask next = morph::dilate_within(cur, claimable[h], cfg.vm_element);
            const std::size_t next_size = count(next);
            if (next_size == size || static_cast<double>(next_size) > g.budget) break;
            for (std::size_t i = 0; i < next.size(); ++i)
                if (next[i] && !cur[i]) arrival[h][i] = k;
            cur = std::move(next);
            size = next_size;
            g.k_max = k;
        }
    }

    std::array<int, 2> k{0, 0};
    if (plan.vm_iterations) {
        for (int h = 0; h < 2; ++h) k[h] = std::min((*plan.vm_iterations)[h], rep.hemispheres[h].k_max);
    } else if (plan.vm_symmetry == Symmetry::Symmetric) {
        const int shared_max = std::min(rep.hemispheres[0].k_max, rep.hemispheres[1].k_max);
        k[0] = k[1] = static_cast<int>(std::lround(plan.vm_hemisphere_severity[0] * shared_max));
    } else {
        for (int h = 0; h < 2; ++h)
            k[h] = static_cast<int>(std::lround(plan.vm_hemisphere_severity[h] * rep.hemispheres[h].k_max));
    }

    LabelVolume out = labels;
    for (int h = 0; h < 2; ++h) {
        auto& g = rep.hemispheres[h];
        BinaryMask final_mask = ventricle[h];
        for (; k[h] > 0; --k[h]) {
            BinaryMask grown(labels.geometry(), 0);
            for (std::size_t i = 0; i < grown.size(); ++i) grown[i] = (arrival[h][i] >= 0 && arrival[h][i] <= k[h]) ? 1 : 0;
            const BinaryMask smooth = morph::smooth_mask(grown);
            BinaryMask candidate = ventricle[h];
            for (std::size_t i = 0; i < candidate.size(); ++i)
                if (smooth[i] && claimable[h][i]) candidate[i] = 1;
            if (static_cast<double>(count(candidate)) <= g.budget) {
                final_mask = std::move(candidate);
                break;
            }
        }
        g.k = k[h];
        const label_t code = *vocab.first_code(Role::Ventricles, sides[h]);
        for (std::size_t i = 0; i < final_mask.size(); ++i)
            if (final_mask[i] && !ventricle[h][i]) {
                out[i] = code;
                rep.min_claimed_clearance = std::min(rep.min_claimed_clearance, std::sqrt(d2_other[i]));
            }
        g.ventricle_after = count(final_mask);
        if (k[h] > 0 && static_cast<double>(g.ventricle_after) > g.budget) rep.budget_ok = false;
    }
    rep.clearance_ok = !(rep.min_claimed_clearance < cfg.vm_clearance);

    SynthesisReport report;
    report.ventriculomegaly = rep;
    return {labels::merge_hemispheres(out), report};
}

/// Cerebellar mode: the cerebellum alone is shrunk by f in x, y and z about
/// its brainstem attachment point. Pontocerebellar mode: brainstem, fourth
/// ventricle and cerebellum are shrunk by f in x-y about their joint centroid,
/// the cerebellum is regrown in-plane round((1 - f) * r_xy) steps into the
/// vacated space, then shrunk by f in x, y, z about the attachment point.
/// f = config.hypoplasia_factor(severity). Vacated voxels take the modal code
/// of their surroundings (excluding the shrunk structures), else CSF.
inline SynthesisResult synthesize_hypoplasia(const LabelVolume& labels, const PathologyPlan& plan, HypoplasiaMode mode,
                                             const SynthesisConfig& cfg = {}) {
    cfg.validate();
    const auto& vocab = labels.vocabulary();
    if (!vocab.has_role(Role::Brainstem) || !vocab.has_role(Role::Cerebellum))
        throw MissingRoleError("synthesize_hypoplasia: brainstem and cerebellum roles are required");
    const Pathology which =
        mode == HypoplasiaMode::Cerebellar ? Pathology::CerebellarHypoplasia : Pathology::PontocerebellarHypoplasia;
    const double severity = plan.severity_of(which);
    detail::check_severity(severity, "synthesize_hypoplasia");

    const auto brainstem_codes = vocab.codes(Role::Brainstem);
    const auto cerebellum_codes = vocab.codes(Role::Cerebellum);
    const BinaryMask brainstem0 = labels.mask_of(brainstem_codes);
    const BinaryMask cerebellum0 = labels.mask_of(cerebellum_codes);
    if (is_empty(brainstem0) || is_empty(cerebellum0))
        throw MissingRoleError("synthesize_hypoplasia: brainstem or cerebellum has no voxels");

    HypoplasiaReport rep;
    rep.mode = mode;
    rep.severity = severity;
    rep.factor = cfg.hypoplasia_factor(severity);
    rep.brainstem_before = count(brainstem0);
    rep.cerebellum_before = count(cerebellum0);
    const double f = rep.factor;

    auto finish = [&](LabelVolume out) {
        rep.brainstem_after = count(out.mask_of(brainstem_codes));
        const BinaryMask cb = out.mask_of(cerebellum_codes);
        rep.cerebellum_after = count(cb);
        rep.adjacency_ok = detail::adjacent26(cb, out.mask_of(brainstem_codes));
        SynthesisReport report;
        report.hypoplasia = rep;
        return SynthesisResult{std::move(out), report};
    };

    if (f == 1.0) {
        rep.attachment = morph::centroid(detail::contact_voxels(cerebellum0, brainstem0));
        rep.center = rep.attachment;
        return finish(labels);
    }

    const label_t vacant = detail::scratch_code(vocab);
    LabelVolume grid = labels;
    std::vector<label_t> excluded = cerebellum_codes;
    excluded.insert(excluded.end(), brainstem_codes.begin(), brainstem_codes.end());

    if (mode == HypoplasiaMode::Pontocerebellar) {
        const BinaryMask v4 = labels::extract_fourth_ventricle(labels, cfg.fourth_ventricle_dilations);
        rep.fourth_ventricle_voxels = count(v4);
        BinaryMask joint(labels.geometry(), 0);
        for (std::size_t i = 0; i < joint.size(); ++i) joint[i] = (brainstem0[i] || cerebellum0[i] || v4[i]) ? 1 : 0;
        rep.center = morph::centroid(joint);

        // Fourth-ventricle voxels are tagged with a second scratch code so
        // only they (not the lateral ventricles) move with the posterior fossa.
        std::vector<label_t> subset = brainstem_codes;
        subset.insert(subset.end(), cerebellum_codes.begin(), cerebellum_codes.end());
        Volume<label_t> tagged = grid;
        label_t v4_tag = 0;
        if (rep.fourth_ventricle_voxels > 0) {
            Vocabulary tmp = vocab;
            tmp.add(vacant, Role::Background, Side::None);
            v4_tag = detail::scratch_code(tmp);
            for (std::size_t i = 0; i < v4.size(); ++i)
                if (v4[i]) tagged[i] = v4_tag;
            subset.push_back(v4_tag);
        }
        tagged.buffer() = detail::scale_codes(tagged, subset, {f, f, 1.0}, rep.center, joint, vacant);
        if (v4_tag != 0) {
            label_t v4_code = 0;
            for (std::size_t i = 0; i < v4.size(); ++i)
                if (v4[i]) {
                    v4_code = labels[i];
                    break;
                }
            for (auto& c : tagged.buffer())
                if (c == v4_tag) c = v4_code;
            excluded.push_back(v4_code);
        }
        grid.buffer() = tagged.buffer();

        // Regrow the cerebellum in-plane into vacated space.
        BinaryMask cb = grid.mask_of(cerebellum_codes);
        if (!is_empty(cb)) {
            const auto [lo, ext] = bounding_box(cb);
            (void)lo;
            const double r_xy = 0.25 * static_cast<double>(ext[0] + ext[1]);
            rep.roundness_iterations = static_cast<int>(std::lround((1.0 - f) * r_xy));
            const auto offsets = morph::StructuringElement::in_plane().offsets();
            for (int it = 0; it < rep.roundness_iterations; ++it) {
                std::vector<std::pair<std::size_t, label_t>> claims;
                for (std::size_t i = 0; i < grid.size(); ++i) {
                    if (grid[i] != vacant) continue;
                    const Index3 p = grid.geometry().position(i);
                    label_t best = 0;
                    bool found = false;
                    for (const auto& o : offsets) {
                        const Index3 q{p[0] + o[0], p[1] + o[1], p[2] + o[2]};
                        if (!grid.geometry().contains(q)) continue;
                        const label_t c = grid.at(q);
                        if (detail::contains(cerebellum_codes, c) && (!found || c < best)) best = c, found = true;
                    }
                    if (found) claims.emplace_back(i, best);
                }
                if (claims.empty()) break;
                for (const auto& [i, c] : claims) grid[i] = c;
            }
        }
    }

    // Shrink the cerebellum in all three axes about its brainstem attachment point.
    const BinaryMask brainstem = grid.mask_of(brainstem_codes);
    const BinaryMask cerebellum = grid.mask_of(cerebellum_codes);
    if (!is_empty(cerebellum)) {
        const BinaryMask contact = detail::contact_voxels(cerebellum, brainstem);
        rep.attachment = morph::centroid(contact);
        if (mode == HypoplasiaMode::Cerebellar) rep.center = rep.attachment;
        grid.buffer() = detail::scale_codes(grid, cerebellum_codes, {f, f, f}, rep.attachment, cerebellum, vacant);

        const BinaryMask shrunk = grid.mask_of(cerebellum_codes);
        if (!detail::adjacent26(shrunk, brainstem)) {
            // Keep the contact voxel nearest the attachment point.
            std::size_t best_i = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < contact.size(); ++i) {
                if (!contact[i]) continue;
                const Index3 p = grid.geometry().position(i);
                double d = 0;
                for (int a = 0; a < 3; ++a) d += (static_cast<double>(p[a]) - rep.attachment[a]) * (static_cast<double>(p[a]) - rep.attachment[a]);
                if (d < best_d) best_d = d, best_i = i;
            }
            if (std::isfinite(best_d)) {
                grid[best_i] = labels::modal_code([&] {
                    std::vector<label_t> cs;
                    for (std::size_t i = 0; i < contact.size(); ++i)
                        if (contact[i]) cs.push_back(labels[i]);
                    std::erase_if(cs, [&](label_t c) { return !detail::contains(cerebellum_codes, c); });
                    if (cs.empty()) cs.push_back(cerebellum_codes.front());
                    return cs;
                }()).value();
                rep.anchor_restored = true;
            }
        }
    }

    rep.vacated_filled = detail::fill_vacant(grid, vacant, excluded, detail::fill_fallback(vocab));
    return finish(std::move(grid));
}

/// Shrinks every non-background label by f = 1 - max_shrink * severity about
/// the whole-brain centroid; the part of the original foreground no longer
/// covered becomes external CSF, so the foreground union is unchanged.
inline SynthesisResult synthesize_microcephaly(const LabelVolume& labels, const PathologyPlan& plan,
                                               const SynthesisConfig& cfg = {}) {
    cfg.validate();
    const auto& vocab = labels.vocabulary();
    const auto csf = vocab.first_code(Role::ExternalCsf);
    if (!csf) throw MissingRoleError("synthesize_microcephaly: external-CSF role is required");
    const double severity = plan.severity_of(Pathology::Microcephaly);
    detail::check_severity(severity, "synthesize_microcephaly");

    const label_t bg = vocab.background_code();
    const auto csf_codes = vocab.codes(Role::ExternalCsf);
    const BinaryMask fg = labels.foreground();

    MicrocephalyReport rep;
    rep.severity = severity;
    rep.factor = cfg.microcephaly_factor(severity);
    rep.foreground = count(fg);
    for (auto c : labels.voxels())
        if (c != bg && !detail::contains(csf_codes, c)) ++rep.non_csf_before;
    if (rep.foreground == 0) throw EmptyForegroundError("synthesize_microcephaly: volume is entirely background");
    rep.center = morph::centroid(fg);

    LabelVolume out = labels;
    if (rep.factor != 1.0) {
        auto scaled = detail::scale_codes(labels, [&] {
            std::vector<label_t> all;
            for (const auto& [code, info] : vocab.entries())
                if (code != bg) all.push_back(code);
            return all;
        }(), {rep.factor, rep.factor, rep.factor}, rep.center, fg, *csf);
        for (std::size_t i = 0; i < fg.size(); ++i)
            if (fg[i]) {
                if (scaled[i] == *csf && !detail::contains(csf_codes, labels[i])) ++rep.csf_filled;
                out[i] = scaled[i];
            }
    }
    const BinaryMask fg_after = out.foreground();
    rep.union_preserved = fg_after == fg;
    for (auto c : out.voxels())
        if (c != bg && !detail::contains(csf_codes, c)) ++rep.non_csf_after;
    SynthesisReport report;
    report.microcephaly = rep;
    return {std::move(out), report};
}

/// Applies the plan's pathologies in the order microcephaly, hypoplasia,
/// ventriculomegaly, each on the previous output. VM runs last so its budget
/// sees the final white-matter geometry; hemispheres are split on demand.
inline SynthesisResult apply_plan(const LabelVolume& labels, const PathologyPlan& plan, const SynthesisConfig& cfg = {}) {
    plan.validate();
    cfg.validate();
    LabelVolume cur = labels;
    SynthesisReport report;
    if (plan.has(Pathology::Microcephaly)) {
        auto [next, rep] = synthesize_microcephaly(cur, plan, cfg);
        cur = std::move(next);
        report.merge(rep);
    }
    if (plan.has(Pathology::CerebellarHypoplasia) || plan.has(Pathology::PontocerebellarHypoplasia)) {
        const auto mode = plan.has(Pathology::CerebellarHypoplasia) ? HypoplasiaMode::Cerebellar
                                                                    : HypoplasiaMode::Pontocerebellar;
        auto [next, rep] = synthesize_hypoplasia(cur, plan, mode, cfg);
        cur = std::move(next);
        report.merge(rep);
    }
    if (plan.has(Pathology::Ventriculomegaly)) {
        const auto split = labels::split_hemispheres(cur, cfg.hemisphere_rotation_degrees);
        auto [next, rep] = synthesize_ventriculomegaly(split.labels, plan, cfg);
        cur = std::move(next);
        report.merge(rep);
    }
    return {std::move(cur), report};
}

} // namespace fnsynth::pathology
