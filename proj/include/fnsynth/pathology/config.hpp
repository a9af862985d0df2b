#pragma once

#include <cmath>
#include <optional>
#include <string>

#include <json.hpp>

#include "fnsynth/core/error.hpp"
#include "fnsynth/morphology/morphology.hpp"

namespace fnsynth::pathology {

/// How "20% of the brainstem" maps to a per-axis x-y factor.
enum class ShrinkReading {
    Linear,     ///< factor = 1 - max_shrink * severity
    Volumetric, ///< factor = sqrt(1 - max_shrink * severity), so x-y area shrinks by max_shrink
};

/// Tunable constants of the label synthesizers. Defaults reproduce the
/// published maxima (65% WM budget, 2-voxel clearance, 20% / 10% shrinkage).
struct SynthesisConfig {
    double vm_budget_fraction = 0.65;
    double vm_clearance = 2.0;
    morph::StructuringElement vm_element = morph::StructuringElement::face();
    /// Safety cap on the dilation search; growth normally saturates first.
    int vm_max_iterations = 256;
    /// In-plane angle (degrees) aligning the A-P axis with grid Y before hemisphere clustering.
    std::optional<double> hemisphere_rotation_degrees;

    double hypoplasia_max_shrink = 0.20;
    ShrinkReading hypoplasia_reading = ShrinkReading::Linear;
    int fourth_ventricle_dilations = 4;

    double microcephaly_max_shrink = 0.10;

    double hypoplasia_factor(double severity) const {
        const double linear = 1.0 - hypoplasia_max_shrink * severity;
        return hypoplasia_reading == ShrinkReading::Linear ? linear : std::sqrt(linear);
    }
    double microcephaly_factor(double severity) const { return 1.0 - microcephaly_max_shrink * severity; }

    void validate() const {
        if (!(vm_budget_fraction > 0.0 && vm_budget_fraction <= 1.0))
            throw ArgumentError("config: vm_budget_fraction must lie in (0, 1]");
        if (!(vm_clearance >= 0.0)) throw ArgumentError("config: vm_clearance must be >= 0");
        if (!(hypoplasia_max_shrink >= 0.0 && hypoplasia_max_shrink < 1.0))
            throw ArgumentError("config: hypoplasia_max_shrink must lie in [0, 1)");
        if (!(microcephaly_max_shrink >= 0.0 && microcephaly_max_shrink < 1.0))
            throw ArgumentError("config: microcephaly_max_shrink must lie in [0, 1)");
        if (fourth_ventricle_dilations < 0) throw ArgumentError("config: fourth_ventricle_dilations must be >= 0");
        vm_element.validate();
    }
};

inline std::string element_name(const morph::StructuringElement& e) {
    using C = morph::StructuringElement::Connectivity;
    if (e.connectivity == C::Full) return "full";
    if (!e.axes[2] && e.axes[0] && e.axes[1]) return "in-plane";
    return "face";
}

inline morph::StructuringElement parse_element(const std::string& s) {
    if (s == "face") return morph::StructuringElement::face();
    if (s == "full") return morph::StructuringElement::full();
    if (s == "in-plane") return morph::StructuringElement::in_plane();
    throw ArgumentError("unknown structuring element '" + s + "' (face | full | in-plane)");
}

inline nlohmann::json to_json(const SynthesisConfig& c) {
    nlohmann::json j;
    j["vm_budget_fraction"] = c.vm_budget_fraction;
    j["vm_clearance"] = c.vm_clearance;
    j["vm_element"] = element_name(c.vm_element);
    j["vm_max_iterations"] = c.vm_max_iterations;
    j["hemisphere_rotation_degrees"] =
        c.hemisphere_rotation_degrees ? nlohmann::json(*c.hemisphere_rotation_degrees) : nlohmann::json(nullptr);
    j["hypoplasia_max_shrink"] = c.hypoplasia_max_shrink;
    j["hypoplasia_reading"] = c.hypoplasia_reading == ShrinkReading::Linear ? "linear" : "volumetric";
    j["fourth_ventricle_dilations"] = c.fourth_ventricle_dilations;
    j["microcephaly_max_shrink"] = c.microcephaly_max_shrink;
    return j;
}

/// Missing keys keep their defaults.
inline SynthesisConfig synthesis_config_from_json(const nlohmann::json& j) {
    SynthesisConfig c;
    try {
        c.vm_budget_fraction = j.value("vm_budget_fraction", c.vm_budget_fraction);
        c.vm_clearance = j.value("vm_clearance", c.vm_clearance);
        if (j.contains("vm_element")) c.vm_element = parse_element(j.at("vm_element").get<std::string>());
        c.vm_max_iterations = j.value("vm_max_iterations", c.vm_max_iterations);
        if (j.contains("hemisphere_rotation_degrees") && !j.at("hemisphere_rotation_degrees").is_null())
            c.hemisphere_rotation_degrees = j.at("hemisphere_rotation_degrees").get<double>();
        c.hypoplasia_max_shrink = j.value("hypoplasia_max_shrink", c.hypoplasia_max_shrink);
        if (j.contains("hypoplasia_reading")) {
            const auto r = j.at("hypoplasia_reading").get<std::string>();
            if (r == "linear")
                c.hypoplasia_reading = ShrinkReading::Linear;
            else if (r == "volumetric")
                c.hypoplasia_reading = ShrinkReading::Volumetric;
            else
                throw ArgumentError("config: hypoplasia_reading must be 'linear' or 'volumetric'");
        }
        c.fourth_ventricle_dilations = j.value("fourth_ventricle_dilations", c.fourth_ventricle_dilations);
        c.microcephaly_max_shrink = j.value("microcephaly_max_shrink", c.microcephaly_max_shrink);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("synthesis config: ") + e.what());
    }
    c.validate();
    return c;
}

} // namespace fnsynth::pathology
