#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fnsynth/core/error.hpp"
#include "fnsynth/core/random.hpp"

namespace fnsynth::pathology {

enum class Pathology { Ventriculomegaly, CerebellarHypoplasia, PontocerebellarHypoplasia, Microcephaly };

inline constexpr std::array<Pathology, 4> kAllPathologies = {
    Pathology::Ventriculomegaly, Pathology::CerebellarHypoplasia, Pathology::PontocerebellarHypoplasia,
    Pathology::Microcephaly};

inline std::string_view pathology_name(Pathology p) {
    switch (p) {
    case Pathology::Ventriculomegaly: return "ventriculomegaly";
    case Pathology::CerebellarHypoplasia: return "cerebellar-hypoplasia";
    case Pathology::PontocerebellarHypoplasia: return "pontocerebellar-hypoplasia";
    case Pathology::Microcephaly: return "microcephaly";
    }
    return "unknown";
}

/// Accepts the full names and the short forms vm, ch, pch, mc.
inline Pathology parse_pathology(std::string_view s) {
    if (s == "vm" || s == "ventriculomegaly") return Pathology::Ventriculomegaly;
    if (s == "ch" || s == "cerebellar-hypoplasia") return Pathology::CerebellarHypoplasia;
    if (s == "pch" || s == "pontocerebellar-hypoplasia") return Pathology::PontocerebellarHypoplasia;
    if (s == "mc" || s == "microcephaly") return Pathology::Microcephaly;
    throw ArgumentError("unknown pathology '" + std::string(s) + "'");
}

enum class Symmetry { Symmetric, Asymmetric };

/// Which pathologies to simulate on one label image, and how strongly.
struct PathologyPlan {
    std::array<bool, 4> enabled{false, false, false, false};
    /// Severity in [0, 1] per pathology, indexed like `enabled`.
    std::array<double, 4> severity{0.0, 0.0, 0.0, 0.0};
    Symmetry vm_symmetry = Symmetry::Symmetric;
    /// Per-hemisphere (left, right) ventriculomegaly severity; equal when symmetric.
    std::array<double, 2> vm_hemisphere_severity{0.0, 0.0};
    /// Explicit per-hemisphere dilation counts; resolved from severity when unset.
    std::optional<std::array<int, 2>> vm_iterations;
    /// Pathology drawn first by sample_plan (unset for hand-built plans).
    std::optional<Pathology> first;
    std::uint64_t seed = 0;

    bool has(Pathology p) const { return enabled[static_cast<std::size_t>(p)]; }
    double severity_of(Pathology p) const { return severity[static_cast<std::size_t>(p)]; }
    void set(Pathology p, bool on) { enabled[static_cast<std::size_t>(p)] = on; }

    /// Throws ArgumentError when the co-occurrence rules or value ranges are violated.
    void validate() const {
        if (has(Pathology::CerebellarHypoplasia) && has(Pathology::PontocerebellarHypoplasia))
            throw ArgumentError("plan: cerebellar and pontocerebellar hypoplasia are mutually exclusive");
        if (has(Pathology::Microcephaly) && !has(Pathology::Ventriculomegaly))
            throw ArgumentError("plan: microcephaly requires ventriculomegaly");
        if (!has(Pathology::Ventriculomegaly) && !has(Pathology::CerebellarHypoplasia) &&
            !has(Pathology::PontocerebellarHypoplasia) && !has(Pathology::Microcephaly))
            throw ArgumentError("plan: at least one pathology must be set");
        for (double s : severity)
            if (!(s >= 0.0 && s <= 1.0)) throw ArgumentError("plan: severities must lie in [0, 1]");
        for (double s : vm_hemisphere_severity)
            if (!(s >= 0.0 && s <= 1.0)) throw ArgumentError("plan: hemisphere severities must lie in [0, 1]");
        if (vm_iterations && ((*vm_iterations)[0] < 0 || (*vm_iterations)[1] < 0))
            throw ArgumentError("plan: dilation counts must be >= 0");
    }

    std::vector<Pathology> pathologies() const {
        std::vector<Pathology> out;
        for (auto p : kAllPathologies)
            if (has(p)) out.push_back(p);
        return out;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["seed"] = seed;
        nlohmann::json list = nlohmann::json::array();
        nlohmann::json sev = nlohmann::json::object();
        for (auto p : kAllPathologies) {
            if (!has(p)) continue;
            list.push_back(std::string(pathology_name(p)));
            sev[std::string(pathology_name(p))] = severity_of(p);
        }
        j["pathologies"] = list;
        if (first) j["first"] = std::string(pathology_name(*first));
        j["severity"] = sev;
        if (has(Pathology::Ventriculomegaly)) {
            j["vm_symmetry"] = vm_symmetry == Symmetry::Symmetric ? "symmetric" : "asymmetric";
            j["vm_hemisphere_severity"] = vm_hemisphere_severity;
            if (vm_iterations) j["vm_iterations"] = *vm_iterations;
        }
        return j;
    }

    static PathologyPlan from_json(const nlohmann::json& j) {
        PathologyPlan plan;
        try {
            plan.seed = j.value("seed", std::uint64_t{0});
            if (j.contains("first")) plan.first = parse_pathology(j.at("first").get<std::string>());
            for (const auto& name : j.at("pathologies")) plan.set(parse_pathology(name.get<std::string>()), true);
            if (j.contains("severity"))
                for (const auto& [name, value] : j.at("severity").items())
                    plan.severity[static_cast<std::size_t>(parse_pathology(name))] = value.get<double>();
            if (j.contains("vm_symmetry"))
                plan.vm_symmetry = j.at("vm_symmetry").get<std::string>() == "asymmetric" ? Symmetry::Asymmetric
                                                                                          : Symmetry::Symmetric;
            const double vm = plan.severity_of(Pathology::Ventriculomegaly);
            plan.vm_hemisphere_severity =
                j.contains("vm_hemisphere_severity") ? j.at("vm_hemisphere_severity").get<std::array<double, 2>>()
                                                     : std::array<double, 2>{vm, vm};
            if (j.contains("vm_iterations")) plan.vm_iterations = j.at("vm_iterations").get<std::array<int, 2>>();
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(std::string("pathology plan: ") + e.what());
        }
        plan.validate();
        return plan;
    }
};

/// Builds and validates a plan from an explicit pathology set.
inline PathologyPlan make_plan(const std::vector<Pathology>& pathologies, double severity = 1.0,
                               Symmetry symmetry = Symmetry::Symmetric, std::uint64_t seed = 0) {
    PathologyPlan plan;
    for (auto p : pathologies) {
        plan.set(p, true);
        plan.severity[static_cast<std::size_t>(p)] = severity;
    }
    plan.vm_symmetry = symmetry;
    plan.vm_hemisphere_severity = {severity, severity};
    plan.seed = seed;
    plan.validate();
    return plan;
}

/// Optional constraints on sampled plans (CLI --override-pathology / --severity).
struct PlanOverrides {
    std::optional<std::vector<Pathology>> pathologies;
    std::optional<double> severity;
};

/// Draws a plan from `seed`.
///
/// The first pathology is uniform over the four; each remaining pathology is
/// then added with probability 1/2 in the fixed order (VM, CH, PCH, MC),
/// skipping CH/PCH when the other is present. Microcephaly forces VM. VM is
/// symmetric or asymmetric with probability 1/2; severities are U[0, 1]
/// (asymmetric VM draws one severity per hemisphere). The RNG consumption
/// order is fixed so the same seed always yields the same plan.
inline PathologyPlan sample_plan(std::uint64_t seed, const PlanOverrides& overrides = {}) {
    Rng rng(seed);
    PathologyPlan plan;
    plan.seed = seed;

    const auto first = kAllPathologies[rng.below(4)];
    plan.set(first, true);
    plan.first = first;
    for (auto p : kAllPathologies) {
        if (plan.has(p)) continue;
        const bool blocked = (p == Pathology::CerebellarHypoplasia && plan.has(Pathology::PontocerebellarHypoplasia)) ||
                             (p == Pathology::PontocerebellarHypoplasia && plan.has(Pathology::CerebellarHypoplasia));
        if (blocked) continue;
        if (rng.bernoulli(0.5)) plan.set(p, true);
    }
    if (plan.has(Pathology::Microcephaly)) plan.set(Pathology::Ventriculomegaly, true);
    const bool asymmetric = rng.bernoulli(0.5);
    for (auto& s : plan.severity) s = rng.uniform();
    const double second_hemisphere = rng.uniform();

    if (overrides.pathologies) {
        plan.enabled = {false, false, false, false};
        for (auto p : *overrides.pathologies) plan.set(p, true);
    }
    if (overrides.severity)
        for (auto& s : plan.severity) s = *overrides.severity;
    for (std::size_t i = 0; i < plan.severity.size(); ++i)
        if (!plan.enabled[i]) plan.severity[i] = 0.0;

    if (plan.has(Pathology::Ventriculomegaly)) {
        plan.vm_symmetry = asymmetric ? Symmetry::Asymmetric : Symmetry::Symmetric;
        const double vm = plan.severity_of(Pathology::Ventriculomegaly);
        const double other = overrides.severity ? *overrides.severity : second_hemisphere;
        plan.vm_hemisphere_severity = asymmetric ? std::array<double, 2>{vm, other} : std::array<double, 2>{vm, vm};
    }
    plan.validate();
    return plan;
}

} // namespace fnsynth::pathology
