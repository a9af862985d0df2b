#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "fnsynth/eval/dice.hpp"
#include "fnsynth/eval/stats.hpp"
#include "support/helpers.hpp"

using namespace fnsynth;
using namespace fnsynth::eval;

namespace {

// Two-sided Student-t p value by Simpson integration of the density.
double t_two_sided_oracle(double t, double df) {
    const double c = std::exp(std::lgamma((df + 1) / 2) - std::lgamma(df / 2)) / std::sqrt(df * std::numbers::pi);
    auto pdf = [&](double x) { return c * std::pow(1 + x * x / df, -(df + 1) / 2); };
    const double a = 0, b = std::abs(t);
    const int n = 200000;
    const double h = (b - a) / n;
    double s = pdf(a) + pdf(b);
    for (int i = 1; i < n; ++i) s += pdf(a + i * h) * (i % 2 ? 4 : 2);
    return 1.0 - 2.0 * s * h / 3.0;
}

} // namespace

TEST(Dice, WorkedExamples) {
    BinaryMask a(VolumeGeometry::make({4, 1, 1}), 0), b = a;
    a[0] = a[1] = 1;
    b[1] = b[2] = b[3] = 1;
    EXPECT_DOUBLE_EQ(dice(a, b), 2.0 / 5.0);
    EXPECT_DOUBLE_EQ(dice(a, a), 1.0);
    const BinaryMask empty(a.geometry(), 0);
    EXPECT_DOUBLE_EQ(dice(empty, empty), 1.0);
    EXPECT_DOUBLE_EQ(dice(a, empty), 0.0);
    EXPECT_THROW(dice(a, BinaryMask(VolumeGeometry::make({2, 1, 1}), 0)), DimensionError);
}

TEST(Dice, PerLabelMatchesMaskDice) {
    const auto vocab = Vocabulary::feta();
    for (std::uint64_t s = 0; s < 5; ++s) {
        const auto p = test_support::random_labels({10, 9, 8}, 8, s, vocab);
        const auto t = test_support::random_labels({10, 9, 8}, 6, s + 50, vocab);
        const std::vector<label_t> codes{1, 2, 3, 4, 5, 6, 7};
        const auto d = per_label_dice(p, t, codes);
        for (std::size_t k = 0; k < codes.size(); ++k) EXPECT_DOUBLE_EQ(d[k], dice(p.mask_of(codes[k]), t.mask_of(codes[k])));
    }
    const auto v = test_support::random_labels({3, 3, 3}, 3, 1, vocab);
    EXPECT_THROW(per_label_dice(v, v, {9}), UnmappedLabelError);
}

TEST(Dice, MedianAndSummary) {
    EXPECT_DOUBLE_EQ(median({3, 1, 2}), 2.0);
    EXPECT_DOUBLE_EQ(median({4, 1, 3, 2}), 2.5);
    EXPECT_THROW(median({}), ArgumentError);

    Rng rng(17);
    std::vector<std::vector<double>> scores(26, std::vector<double>(7));
    for (auto& row : scores)
        for (auto& v : row) v = rng.uniform();
    const auto r = summarize(scores, {"1", "2", "3", "4", "5", "6", "7"});
    double mean = 0;
    for (int l = 0; l < 7; ++l) {
        std::vector<double> col;
        for (const auto& row : scores) col.push_back(row[l]);
        std::nth_element(col.begin(), col.begin() + 12, col.end());
        const double lo = col[12];
        const double hi = *std::min_element(col.begin() + 13, col.end());
        EXPECT_DOUBLE_EQ(r.medians[l], 0.5 * (lo + hi));
        mean += 0.5 * (lo + hi);
    }
    EXPECT_NEAR(r.summary, mean / 7, 1e-15);
    EXPECT_EQ(r.subjects.size(), 26u);
    EXPECT_NE(r.to_csv().find("subject,label,dice"), std::string::npos);
    EXPECT_EQ(r.to_json().at("summary").get<double>(), r.summary);
    EXPECT_THROW(summarize({{1.2}}, {"1"}), ArgumentError);
    EXPECT_THROW(summarize({{0.5, 0.5}}, {"1"}), DimensionError);
}

TEST(Stats, WelchWorkedExample) {
    const auto w = welch_ttest({1, 2, 3, 4, 5}, {2, 3, 4, 5, 6});
    EXPECT_DOUBLE_EQ(w.t, -1.0);
    EXPECT_DOUBLE_EQ(w.df, 8.0);
    EXPECT_NEAR(w.p, 0.34659350708733416, 1e-12);
}

TEST(Stats, WelchAgainstIntegratedDensity) {
    Rng rng(3);
    for (int k = 0; k < 5; ++k) {
        std::vector<double> a(8 + k), b(12 - k);
        for (auto& x : a) x = rng.normal();
        for (auto& x : b) x = 0.5 + 2.0 * rng.normal();
        const auto w = welch_ttest(a, b);
        EXPECT_NEAR(w.p, t_two_sided_oracle(w.t, w.df), 1e-8);
        const auto r = welch_ttest(b, a);
        EXPECT_DOUBLE_EQ(r.t, -w.t);
        EXPECT_DOUBLE_EQ(r.df, w.df);
        EXPECT_NEAR(r.p, w.p, 1e-14);
        std::vector<double> a3 = a, b3 = b;
        for (auto& x : a3) x = 3 * x + 10;
        for (auto& x : b3) x = 3 * x + 10;
        const auto s = welch_ttest(a3, b3);
        EXPECT_NEAR(s.t, w.t, 1e-10);
        EXPECT_NEAR(s.p, w.p, 1e-10);
    }
    EXPECT_THROW(welch_ttest({1}, {1, 2}), ArgumentError);
    EXPECT_THROW(welch_ttest({1, 1}, {2, 2}), ArgumentError);
}

TEST(Stats, RaterMeans) {
    EXPECT_DOUBLE_EQ(rater_mean({10.75, 15.75, 15, 8.5}), 1.425);
    EXPECT_DOUBLE_EQ(rater_mean({1.25, 16, 23.5, 9.25}), 1.815);
    EXPECT_THROW(rater_mean({0, 0, 0, 0}), ArgumentError);
    EXPECT_THROW(rater_mean({-1, 2, 0, 0}), ArgumentError);
}

TEST(Stats, ShippedTableReport) {
    const auto t = load_rater_table(std::string(FNSYNTH_DATA_DIR) + "/rater_counts.csv");
    ASSERT_EQ(t.rows.size(), 10u);
    const auto j = rater_report(t);
    EXPECT_DOUBLE_EQ(j["raters"][8]["mean"].get<double>(), 1.425);
    EXPECT_DOUBLE_EQ(j["raters"][9]["mean"].get<double>(), 1.815);
    EXPECT_EQ(j["pooled_ratings"]["n_real"].get<int>(), 200);
    EXPECT_EQ(j["pooled_ratings"]["n_synthetic"].get<int>(), 200);
    EXPECT_GT(j["pooled_ratings"]["welch"]["t"].get<double>(), 0.0);
    EXPECT_FALSE(j.contains("per_case"));
}

TEST(Stats, PerCaseTable) {
    std::istringstream in("case,arm,rater,score\nc1,real,R1,1\nc1,real,R2,2\nc2,real,R1,0\nc3,synthetic,R1,3\n"
                          "c4,synthetic,R1,2\n# comment\n\n");
    const auto t = parse_rater_table(in);
    EXPECT_EQ(t.case_means(Arm::Real), (std::vector<double>{1.5, 0.0}));
    const auto j = rater_report(t);
    const auto w = welch_ttest({3, 2}, {1.5, 0});
    EXPECT_DOUBLE_EQ(j["per_case"]["welch"]["t"].get<double>(), w.t);
}

TEST(Stats, MalformedTables) {
    for (const char* text : {"", "a,b\n", "rater,arm,s0,s1,s2,s3\nR1,real,1,2\n", "rater,arm,s0,s1,s2,s3\nR1,fake,1,2,3,4\n",
                             "rater,arm,s0,s1,s2,s3\nR1,real,1,x,3,4\n", "case,arm,rater,score\nc,real,R,4\n"}) {
        std::istringstream in(text);
        EXPECT_THROW(parse_rater_table(in), FormatError) << text;
    }
}
