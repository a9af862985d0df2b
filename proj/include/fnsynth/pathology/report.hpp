#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>

#include <json.hpp>

#include "fnsynth/core/geometry.hpp"

namespace fnsynth::pathology {

struct HemisphereGrowth {
    int k_max = 0;
    int k = 0;
    std::size_t white_matter_before = 0;
    std::size_t ventricle_before = 0;
    std::size_t ventricle_after = 0;
    double budget = 0.0;
    /// Ventricles already exceeded the budget; the hemisphere is left untouched.
    bool over_budget_on_input = false;
};

struct VentriculomegalyReport {
    std::array<HemisphereGrowth, 2> hemispheres{}; // left, right
    /// Smallest distance from a newly claimed ventricle voxel to any other structure (inf if none claimed).
    double min_claimed_clearance = INFINITY;
    bool budget_ok = true;
    bool clearance_ok = true;
};

enum class HypoplasiaMode { Cerebellar, Pontocerebellar };

struct HypoplasiaReport {
    HypoplasiaMode mode = HypoplasiaMode::Cerebellar;
    double severity = 0.0;
    double factor = 1.0;
    Vec3 center{0, 0, 0};
    Vec3 attachment{0, 0, 0};
    int roundness_iterations = 0;
    std::size_t brainstem_before = 0, brainstem_after = 0;
    std::size_t cerebellum_before = 0, cerebellum_after = 0;
    std::size_t fourth_ventricle_voxels = 0;
    std::size_t vacated_filled = 0;
    /// The contact voxel nearest the attachment point had to be restored to keep the cerebellum attached.
    bool anchor_restored = false;
    bool adjacency_ok = true;
};

struct MicrocephalyReport {
    double severity = 0.0;
    double factor = 1.0;
    Vec3 center{0, 0, 0};
    std::size_t foreground = 0;
    std::size_t non_csf_before = 0, non_csf_after = 0;
    std::size_t csf_filled = 0;
    bool union_preserved = true;
};

/// Parameters applied and constraint checks, per pathology.
struct SynthesisReport {
    std::optional<MicrocephalyReport> microcephaly;
    std::optional<HypoplasiaReport> hypoplasia;
    std::optional<VentriculomegalyReport> ventriculomegaly;

    bool all_checks_pass() const {
        if (microcephaly && !microcephaly->union_preserved) return false;
        if (hypoplasia && !hypoplasia->adjacency_ok) return false;
        if (ventriculomegaly && (!ventriculomegaly->budget_ok || !ventriculomegaly->clearance_ok)) return false;
        return true;
    }

    void merge(const SynthesisReport& other) {
        if (other.microcephaly) microcephaly = other.microcephaly;
        if (other.hypoplasia) hypoplasia = other.hypoplasia;
        if (other.ventriculomegaly) ventriculomegaly = other.ventriculomegaly;
    }

    nlohmann::json to_json() const {
        nlohmann::json j = nlohmann::json::object();
        auto finite_or_null = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
        if (microcephaly) {
            const auto& m = *microcephaly;
            j["microcephaly"] = {{"severity", m.severity},
                                 {"factor", m.factor},
                                 {"center", m.center},
                                 {"foreground", m.foreground},
                                 {"non_csf_before", m.non_csf_before},
                                 {"non_csf_after", m.non_csf_after},
                                 {"csf_filled", m.csf_filled},
                                 {"union_preserved", m.union_preserved}};
        }
        if (hypoplasia) {
            const auto& h = *hypoplasia;
            j["hypoplasia"] = {{"mode", h.mode == HypoplasiaMode::Cerebellar ? "cerebellar" : "pontocerebellar"},
                               {"severity", h.severity},
                               {"factor", h.factor},
                               {"center", h.center},
                               {"attachment", h.attachment},
                               {"roundness_iterations", h.roundness_iterations},
                               {"brainstem_before", h.brainstem_before},
                               {"brainstem_after", h.brainstem_after},
                               {"cerebellum_before", h.cerebellum_before},
                               {"cerebellum_after", h.cerebellum_after},
                               {"fourth_ventricle_voxels", h.fourth_ventricle_voxels},
                               {"vacated_filled", h.vacated_filled},
                               {"anchor_restored", h.anchor_restored},
                               {"adjacency_ok", h.adjacency_ok}};
        }
        if (ventriculomegaly) {
            const auto& v = *ventriculomegaly;
            nlohmann::json hs = nlohmann::json::array();
            for (const auto& h : v.hemispheres)
                hs.push_back({{"k_max", h.k_max},
                              {"k", h.k},
                              {"white_matter_before", h.white_matter_before},
                              {"ventricle_before", h.ventricle_before},
                              {"ventricle_after", h.ventricle_after},
                              {"budget", h.budget},
                              {"over_budget_on_input", h.over_budget_on_input}});
            j["ventriculomegaly"] = {{"hemispheres", hs},
                                     {"min_claimed_clearance", finite_or_null(v.min_claimed_clearance)},
                                     {"budget_ok", v.budget_ok},
                                     {"clearance_ok", v.clearance_ok}};
        }
        j["all_checks_pass"] = all_checks_pass();
        return j;
    }
};

} // namespace fnsynth::pathology
