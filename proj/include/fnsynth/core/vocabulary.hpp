#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fnsynth/core/error.hpp"

namespace fnsynth {

using label_t = std::uint16_t;

/// Anatomical meaning of a label code.
enum class Role {
    Background,
    ExternalCsf,
    GrayMatter,
    WhiteMatter,
    Ventricles,
    Cerebellum,
    DeepGrayMatter,
    Brainstem,
    // 4-class training vocabulary
    FluidClass,
    CortexClass,
    MiscClass,
};

/// Hemisphere qualifier. `Any` is only a query wildcard, never stored.
enum class Side { None, Left, Right, Any };

struct RoleName {
    Role role;
    std::string_view name;
};

inline constexpr RoleName kRoleNames[] = {
    {Role::Background, "background"},
    {Role::ExternalCsf, "external-csf"},
    {Role::GrayMatter, "gray-matter"},
    {Role::WhiteMatter, "white-matter"},
    {Role::Ventricles, "ventricles"},
    {Role::Cerebellum, "cerebellum"},
    {Role::DeepGrayMatter, "deep-gray-matter"},
    {Role::Brainstem, "brainstem"},
    {Role::FluidClass, "fluid-class"},
    {Role::CortexClass, "cortex-class"},
    {Role::MiscClass, "misc-class"},
};

inline std::string_view role_name(Role r) {
    for (const auto& rn : kRoleNames)
        if (rn.role == r) return rn.name;
    return "unknown";
}

inline std::optional<Role> parse_role_name(std::string_view s) {
    for (const auto& rn : kRoleNames)
        if (rn.name == s) return rn.role;
    return std::nullopt;
}

struct LabelInfo {
    Role role = Role::Background;
    Side side = Side::None;

    /// Role string with optional "-left"/"-right" suffix, as written in sidecars.
    std::string to_string() const {
        std::string s(role_name(role));
        if (side == Side::Left) s += "-left";
        if (side == Side::Right) s += "-right";
        return s;
    }

    static LabelInfo parse(std::string_view s) {
        LabelInfo info;
        auto strip = [&](std::string_view suffix) {
            if (s.size() > suffix.size() && s.substr(s.size() - suffix.size()) == suffix) {
                s.remove_suffix(suffix.size());
                return true;
            }
            return false;
        };
        if (strip("-left"))
            info.side = Side::Left;
        else if (strip("-right"))
            info.side = Side::Right;
        auto role = parse_role_name(s);
        if (!role) throw FormatError("unknown label role '" + std::string(s) + "'");
        info.role = *role;
        return info;
    }

    bool operator==(const LabelInfo&) const = default;
};

/// Map from label code to semantic role.
class Vocabulary {
public:
    Vocabulary() = default;

    Vocabulary& add(label_t code, Role role, Side side = Side::None) {
        if (side == Side::Any) throw ArgumentError("Side::Any cannot be stored in a vocabulary");
        entries_[code] = LabelInfo{role, side};
        return *this;
    }
    void erase(label_t code) { entries_.erase(code); }

    bool contains(label_t code) const { return entries_.count(code) != 0; }
    const LabelInfo& info(label_t code) const {
        auto it = entries_.find(code);
        if (it == entries_.end())
            throw UnmappedLabelError("label code " + std::to_string(code) + " not in vocabulary");
        return it->second;
    }
    Role role(label_t code) const { return info(code).role; }
    const std::map<label_t, LabelInfo>& entries() const noexcept { return entries_; }
    bool empty() const noexcept { return entries_.empty(); }

    label_t background_code() const {
        std::optional<label_t> bg;
        for (const auto& [code, info] : entries_) {
            if (info.role != Role::Background) continue;
            if (bg) throw FormatError("vocabulary has more than one background code");
            bg = code;
        }
        if (!bg) throw FormatError("vocabulary has no background code");
        return *bg;
    }

    /// Codes with the given role, ascending. Side::Any matches every side.
    std::vector<label_t> codes(Role role, Side side = Side::Any) const {
        std::vector<label_t> out;
        for (const auto& [code, info] : entries_)
            if (info.role == role && (side == Side::Any || info.side == side)) out.push_back(code);
        return out;
    }
    std::optional<label_t> first_code(Role role, Side side = Side::Any) const {
        auto c = codes(role, side);
        if (c.empty()) return std::nullopt;
        return c.front();
    }
    bool has_role(Role role, Side side = Side::Any) const { return first_code(role, side).has_value(); }

    label_t max_code() const { return entries_.empty() ? 0 : entries_.rbegin()->first; }

    nlohmann::json to_json() const {
        nlohmann::json j = nlohmann::json::object();
        for (const auto& [code, info] : entries_) j[std::to_string(code)] = info.to_string();
        return j;
    }

    static Vocabulary from_json(const nlohmann::json& j) {
        if (!j.is_object()) throw FormatError("vocabulary JSON must be an object {code: role}");
        Vocabulary v;
        for (const auto& [key, value] : j.items()) {
            std::size_t pos = 0;
            unsigned long code = 0;
            try {
                code = std::stoul(key, &pos);
            } catch (const std::exception&) {
                pos = 0;
            }
            if (pos != key.size() || key.empty() || code > 65535)
                throw FormatError("vocabulary key '" + key + "' is not a label code");
            if (!value.is_string()) throw FormatError("vocabulary role for " + key + " must be a string");
            auto info = LabelInfo::parse(value.get<std::string>());
            v.add(static_cast<label_t>(code), info.role, info.side);
        }
        return v;
    }

    static Vocabulary load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open vocabulary file " + path);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("vocabulary file " + path + ": " + e.what());
        }
        return from_json(j);
    }

    void save(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw IoError("cannot write vocabulary file " + path);
        out << to_json().dump(2) << '\n';
    }

    /// FeTA-style 7-tissue vocabulary (codes 1..7).
    static Vocabulary feta() {
        Vocabulary v;
        v.add(0, Role::Background)
            .add(1, Role::ExternalCsf)
            .add(2, Role::GrayMatter)
            .add(3, Role::WhiteMatter)
            .add(4, Role::Ventricles)
            .add(5, Role::Cerebellum)
            .add(6, Role::DeepGrayMatter)
            .add(7, Role::Brainstem);
        return v;
    }

    /// Diffusion conditioning vocabulary: 0 background, 1 fluid, 2 cortex, 3 misc.
    static Vocabulary four_class() {
        Vocabulary v;
        v.add(0, Role::Background).add(1, Role::FluidClass).add(2, Role::CortexClass).add(3, Role::MiscClass);
        return v;
    }

    bool operator==(const Vocabulary&) const = default;

private:
    std::map<label_t, LabelInfo> entries_;
};

} // namespace fnsynth
