#pragma once

#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/special_functions/beta.hpp>
#include <json.hpp>

#include "fnsynth/core/error.hpp"

namespace fnsynth::eval {

struct WelchResult {
    double t = 0.0;
    double df = 0.0;
    double p = 1.0; // two-sided
};

namespace detail {

inline std::pair<double, double> mean_var(const std::vector<double>& x) {
    double m = 0.0;
    for (double v : x) m += v;
    m /= static_cast<double>(x.size());
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return {m, ss / static_cast<double>(x.size() - 1)};
}

} // namespace detail

/// Unequal-variance two-sample t-test. Two-sided p from the exact Student t
/// CDF: p = I_{df / (df + t^2)}(df / 2, 1 / 2).
inline WelchResult welch_ttest(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() < 2 || b.size() < 2) throw ArgumentError("welch_ttest: each sample needs at least 2 values");
    const auto [ma, va] = detail::mean_var(a);
    const auto [mb, vb] = detail::mean_var(b);
    const double sa = va / static_cast<double>(a.size());
    const double sb = vb / static_cast<double>(b.size());
    if (sa + sb == 0.0) throw ArgumentError("welch_ttest: both samples have zero variance");
    WelchResult r;
    r.t = (ma - mb) / std::sqrt(sa + sb);
    r.df = (sa + sb) * (sa + sb) /
           (sa * sa / static_cast<double>(a.size() - 1) + sb * sb / static_cast<double>(b.size() - 1));
    r.p = r.t == 0.0 ? 1.0 : boost::math::ibeta(0.5 * r.df, 0.5, r.df / (r.df + r.t * r.t));
    return r;
}

/// Mean score for counts of scores 0..3.
inline double rater_mean(const std::array<double, 4>& counts) {
    double n = 0.0, s = 0.0;
    for (int k = 0; k < 4; ++k) {
        if (counts[k] < 0.0) throw ArgumentError("rater_mean: negative count");
        n += counts[k];
        s += k * counts[k];
    }
    if (n <= 0.0) throw ArgumentError("rater_mean: zero total count");
    return s / n;
}

enum class Arm { Real, Synthetic };

inline std::string arm_name(Arm a) { return a == Arm::Real ? "real" : "synthetic"; }

inline Arm parse_arm(const std::string& s) {
    if (s == "real") return Arm::Real;
    if (s == "synthetic") return Arm::Synthetic;
    throw FormatError("unknown arm '" + s + "' (real | synthetic)");
}

/// Score histograms (scores 0..3) per rater and arm, plus optional per-case scores.
struct RaterTable {
    struct Row {
        std::string rater;
        Arm arm;
        std::array<double, 4> counts;
    };
    struct CaseScore {
        std::string case_id;
        Arm arm;
        std::string rater;
        double score;
    };
    std::vector<Row> rows;
    std::vector<CaseScore> cases;

    /// Per-case mean over raters, per arm, ordered by case id.
    std::vector<double> case_means(Arm arm) const {
        std::map<std::string, std::pair<double, int>> acc;
        for (const auto& c : cases)
            if (c.arm == arm) {
                auto& [s, n] = acc[c.case_id];
                s += c.score;
                ++n;
            }
        std::vector<double> out;
        for (const auto& [id, sn] : acc) out.push_back(sn.first / sn.second);
        return out;
    }

    /// Individual ratings recovered from integer-count rows of one arm
    /// (rows with fractional counts, such as averages, are skipped).
    std::vector<double> expanded_ratings(Arm arm) const {
        std::vector<double> out;
        for (const auto& r : rows) {
            if (r.arm != arm) continue;
            bool integral = true;
            for (double c : r.counts) integral = integral && c == std::floor(c);
            if (!integral) continue;
            for (int k = 0; k < 4; ++k) out.insert(out.end(), static_cast<std::size_t>(r.counts[k]), double(k));
        }
        return out;
    }
};

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
        out.push_back(cell);
    }
    return out;
}

inline double parse_number(const std::string& s, const std::string& where) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw FormatError(where + ": '" + s + "' is not a number");
    }
}

} // namespace detail

/// Reads either layout, chosen by the header line:
///   rater,arm,s0,s1,s2,s3      (score histograms)
///   case,arm,rater,score       (per-case scores)
/// Blank lines and lines starting with '#' are skipped.
inline RaterTable parse_rater_table(std::istream& in, const std::string& name = "rater table") {
    RaterTable t;
    std::string line;
    std::vector<std::string> header;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#' || line == "\r") continue;
        const auto cells = detail::split_csv(line);
        if (header.empty()) {
            header = cells;
            const bool counts = header == std::vector<std::string>{"rater", "arm", "s0", "s1", "s2", "s3"};
            const bool per_case = header == std::vector<std::string>{"case", "arm", "rater", "score"};
            if (!counts && !per_case)
                throw FormatError(name + ": header must be 'rater,arm,s0,s1,s2,s3' or 'case,arm,rater,score'");
            continue;
        }
        const std::string where = name + ":" + std::to_string(lineno);
        if (cells.size() != header.size()) throw FormatError(where + ": expected " + std::to_string(header.size()) + " fields");
        if (header.size() == 6) {
            RaterTable::Row r{cells[0], parse_arm(cells[1]), {}};
            for (int k = 0; k < 4; ++k) {
                r.counts[k] = detail::parse_number(cells[2 + k], where);
                if (r.counts[k] < 0) throw FormatError(where + ": negative count");
            }
            t.rows.push_back(r);
        } else {
            const double s = detail::parse_number(cells[3], where);
            if (s < 0 || s > 3) throw FormatError(where + ": score must lie in [0, 3]");
            t.cases.push_back({cells[0], parse_arm(cells[1]), cells[2], s});
        }
    }
    if (header.empty()) throw FormatError(name + ": empty table");
    return t;
}

inline RaterTable load_rater_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    return parse_rater_table(in, path);
}

/// Per-rater and per-arm means for a histogram table; Welch test on per-case
/// means when per-case scores are present.
inline nlohmann::json rater_report(const RaterTable& t) {
    nlohmann::json j;
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : t.rows)
        rows.push_back({{"rater", r.rater}, {"arm", arm_name(r.arm)}, {"counts", r.counts}, {"mean", rater_mean(r.counts)}});
    j["raters"] = rows;
    const auto real_r = t.expanded_ratings(Arm::Real), synth_r = t.expanded_ratings(Arm::Synthetic);
    if (real_r.size() >= 2 && synth_r.size() >= 2) {
        const auto w = welch_ttest(synth_r, real_r);
        j["pooled_ratings"] = {{"n_real", real_r.size()},
                               {"n_synthetic", synth_r.size()},
                               {"welch", {{"t", w.t}, {"df", w.df}, {"p", w.p}, {"a", "synthetic"}, {"b", "real"}}}};
    }
    if (!t.cases.empty()) {
        const auto real = t.case_means(Arm::Real), synth = t.case_means(Arm::Synthetic);
        nlohmann::json pc = {{"n_real", real.size()}, {"n_synthetic", synth.size()}};
        auto avg = [](const std::vector<double>& v) {
            double s = 0;
            for (double x : v) s += x;
            return v.empty() ? 0.0 : s / static_cast<double>(v.size());
        };
        pc["mean_real"] = avg(real);
        pc["mean_synthetic"] = avg(synth);
        if (real.size() >= 2 && synth.size() >= 2) {
            const auto w = welch_ttest(synth, real);
            pc["welch"] = {{"t", w.t}, {"df", w.df}, {"p", w.p}, {"a", "synthetic"}, {"b", "real"}};
        }
        j["per_case"] = pc;
    }
    return j;
}

} // namespace fnsynth::eval
