#pragma once

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fnsynth/core/error.hpp"
#include "fnsynth/core/volume.hpp"

namespace fnsynth::eval {

/// 2|A & B| / (|A| + |B|); two empty masks score 1.
inline double dice(const BinaryMask& a, const BinaryMask& b) {
    require_same_dims(a.geometry(), b.geometry(), "dice");
    std::size_t na = 0, nb = 0, both = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        na += a[i] != 0;
        nb += b[i] != 0;
        both += (a[i] && b[i]);
    }
    if (na + nb == 0) return 1.0;
    return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

/// Dice of the indicator masks of each code in `codes`, computed in one pass.
inline std::vector<double> per_label_dice(const LabelVolume& pred, const LabelVolume& truth,
                                          const std::vector<label_t>& codes) {
    require_same_dims(pred.geometry(), truth.geometry(), "per_label_dice");
    for (auto c : codes)
        if (!truth.vocabulary().contains(c) || !pred.vocabulary().contains(c))
            throw UnmappedLabelError("per_label_dice: label " + std::to_string(c) + " not in vocabulary");
    std::vector<int> slot(65536, -1);
    for (std::size_t k = 0; k < codes.size(); ++k) slot[codes[k]] = static_cast<int>(k);
    std::vector<std::size_t> np(codes.size(), 0), nt(codes.size(), 0), both(codes.size(), 0);
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const int sp = slot[pred[i]], st = slot[truth[i]];
        if (sp >= 0) ++np[sp];
        if (st >= 0) ++nt[st];
        if (sp >= 0 && pred[i] == truth[i]) ++both[sp];
    }
    std::vector<double> out(codes.size());
    for (std::size_t k = 0; k < codes.size(); ++k)
        out[k] = np[k] + nt[k] == 0 ? 1.0 : 2.0 * static_cast<double>(both[k]) / static_cast<double>(np[k] + nt[k]);
    return out;
}

/// Median; even counts average the two middle values.
inline double median(std::vector<double> v) {
    if (v.empty()) throw ArgumentError("median of an empty sample");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct DiceReport {
    std::vector<std::string> labels;
    std::vector<std::string> subjects;
    std::vector<std::vector<double>> scores; // [subject][label]
    std::vector<double> medians;
    double summary = 0.0;

    nlohmann::json to_json() const {
        nlohmann::json per = nlohmann::json::object();
        for (std::size_t s = 0; s < subjects.size(); ++s) {
            nlohmann::json row = nlohmann::json::object();
            for (std::size_t l = 0; l < labels.size(); ++l) row[labels[l]] = scores[s][l];
            per[subjects[s]] = row;
        }
        nlohmann::json med = nlohmann::json::object();
        for (std::size_t l = 0; l < labels.size(); ++l) med[labels[l]] = medians[l];
        return {{"labels", labels}, {"per_subject", per}, {"medians", med}, {"summary", summary}};
    }

    std::string to_text() const {
        std::ostringstream os;
        std::size_t w = 7;
        for (const auto& l : labels) w = std::max(w, l.size());
        char buf[64];
        os << "label";
        for (std::size_t i = 5; i < w + 2; ++i) os << ' ';
        os << "median\n";
        for (std::size_t l = 0; l < labels.size(); ++l) {
            os << labels[l];
            for (std::size_t i = labels[l].size(); i < w + 2; ++i) os << ' ';
            std::snprintf(buf, sizeof buf, "%.4f\n", medians[l]);
            os << buf;
        }
        std::snprintf(buf, sizeof buf, "%.4f\n", summary);
        os << "mean of medians";
        for (std::size_t i = 15; i < w + 2; ++i) os << ' ';
        os << buf;
        return os.str();
    }

    /// One row per subject and label: subject,label,dice.
    std::string to_csv() const {
        std::ostringstream os;
        os.precision(17);
        os << "subject,label,dice\n";
        for (std::size_t s = 0; s < subjects.size(); ++s)
            for (std::size_t l = 0; l < labels.size(); ++l) os << subjects[s] << ',' << labels[l] << ',' << scores[s][l] << '\n';
        return os.str();
    }
};

/// Per-label medians over subjects, then their arithmetic mean.
inline DiceReport summarize(std::vector<std::vector<double>> scores, std::vector<std::string> labels,
                            std::vector<std::string> subjects = {}) {
    if (scores.empty()) throw ArgumentError("summarize: no subjects");
    const std::size_t nl = labels.size();
    if (nl == 0) throw ArgumentError("summarize: no labels");
    for (const auto& row : scores) {
        if (row.size() != nl) throw DimensionError("summarize: every subject needs one score per label");
        for (double d : row)
            if (!(d >= 0.0 && d <= 1.0)) throw ArgumentError("summarize: Dice scores must lie in [0, 1]");
    }
    if (subjects.empty())
        for (std::size_t s = 0; s < scores.size(); ++s) subjects.push_back("subject-" + std::to_string(s));
    if (subjects.size() != scores.size()) throw DimensionError("summarize: subject names do not match rows");
    DiceReport r{std::move(labels), std::move(subjects), std::move(scores), {}, 0.0};
    for (std::size_t l = 0; l < nl; ++l) {
        std::vector<double> col;
        for (const auto& row : r.scores) col.push_back(row[l]);
        r.medians.push_back(median(std::move(col)));
    }
    r.summary = std::accumulate(r.medians.begin(), r.medians.end(), 0.0) / static_cast<double>(nl);
    return r;
}

} // namespace fnsynth::eval
