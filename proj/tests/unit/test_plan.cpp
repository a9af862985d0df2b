#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "fnsynth/pathology/plan.hpp"

using namespace fnsynth;
using namespace fnsynth::pathology;

namespace {

// Exact marginal inclusion probabilities from the sampling tree.
std::array<double, 4> exact_marginals() {
    std::array<double, 4> p{};
    std::function<void(std::array<bool, 4>, int, double)> walk = [&](std::array<bool, 4> on, int k, double prob) {
        if (k == 4) {
            if (on[3]) on[0] = true;
            for (int j = 0; j < 4; ++j) p[j] += on[j] ? prob : 0.0;
            return;
        }
        if (on[k] || (k == 1 && on[2]) || (k == 2 && on[1])) return walk(on, k + 1, prob);
        walk(on, k + 1, prob * 0.5);
        on[k] = true;
        walk(on, k + 1, prob * 0.5);
    };
    for (int first = 0; first < 4; ++first) {
        std::array<bool, 4> on{};
        on[first] = true;
        walk(on, 0, 0.25);
    }
    return p;
}

} // namespace

TEST(Plan, NamesRoundTrip) {
    for (auto p : kAllPathologies) EXPECT_EQ(parse_pathology(pathology_name(p)), p);
    EXPECT_THROW(parse_pathology("xyz"), ArgumentError);
}

TEST(Plan, ValidationRules) {
    EXPECT_THROW(make_plan({Pathology::CerebellarHypoplasia, Pathology::PontocerebellarHypoplasia}), ArgumentError);
    EXPECT_THROW(make_plan({Pathology::Microcephaly}), ArgumentError);
    EXPECT_THROW(make_plan({}), ArgumentError);
    EXPECT_THROW(make_plan({Pathology::Ventriculomegaly}, 1.5), ArgumentError);
    EXPECT_NO_THROW(make_plan({Pathology::Ventriculomegaly, Pathology::Microcephaly}));
}

TEST(Plan, SampledPlansObeyRules) {
    for (std::uint64_t s = 0; s < 5000; ++s) {
        const auto p = sample_plan(s);
        ASSERT_NO_THROW(p.validate());
        ASSERT_TRUE(p.first.has_value());
        ASSERT_TRUE(p.has(*p.first));
        if (p.has(Pathology::Ventriculomegaly) && p.vm_symmetry == Symmetry::Symmetric) {
            ASSERT_EQ(p.vm_hemisphere_severity[0], p.vm_hemisphere_severity[1]);
        }
        for (auto q : kAllPathologies)
            if (!p.has(q)) { ASSERT_EQ(p.severity_of(q), 0.0); }
    }
}

TEST(Plan, Deterministic) {
    for (std::uint64_t s : {0ull, 1ull, 42ull, 0xFFFFFFFFFFFFull})
        EXPECT_EQ(sample_plan(s).to_json(), sample_plan(s).to_json());
    EXPECT_NE(sample_plan(1).to_json(), sample_plan(2).to_json());
}

TEST(Plan, MarginalsMatchSamplingTree) {
    const auto exact = exact_marginals();
    const int n = 40000;
    std::array<int, 4> hits{};
    std::array<int, 4> first{};
    for (int s = 0; s < n; ++s) {
        const auto p = sample_plan(static_cast<std::uint64_t>(s) * 7919 + 3);
        for (int k = 0; k < 4; ++k) hits[k] += p.enabled[k];
        ++first[static_cast<int>(*p.first)];
    }
    for (int k = 0; k < 4; ++k) {
        const double se = std::sqrt(exact[k] * (1 - exact[k]) / n);
        EXPECT_NEAR(hits[k] / double(n), exact[k], 4 * se) << pathology_name(kAllPathologies[k]);
        EXPECT_NEAR(first[k] / double(n), 0.25, 4 * std::sqrt(0.25 * 0.75 / n));
    }
}

TEST(Plan, JsonRoundTrip) {
    for (std::uint64_t s = 0; s < 200; ++s) {
        const auto p = sample_plan(s);
        const auto back = PathologyPlan::from_json(p.to_json());
        ASSERT_EQ(back.to_json(), p.to_json());
        ASSERT_EQ(back.enabled, p.enabled);
    }
    EXPECT_THROW(PathologyPlan::from_json({{"pathologies", {"ch", "pch"}}}), ArgumentError);
    EXPECT_THROW(PathologyPlan::from_json({{"nothing", 1}}), FormatError);
}

TEST(Plan, Overrides) {
    PlanOverrides o;
    o.pathologies = std::vector{Pathology::PontocerebellarHypoplasia};
    o.severity = 0.5;
    for (std::uint64_t s = 0; s < 50; ++s) {
        const auto p = sample_plan(s, o);
        EXPECT_EQ(p.pathologies(), std::vector{Pathology::PontocerebellarHypoplasia});
        EXPECT_EQ(p.severity_of(Pathology::PontocerebellarHypoplasia), 0.5);
    }
    o.pathologies = std::vector{Pathology::Microcephaly};
    EXPECT_THROW(sample_plan(0, o), ArgumentError);
}
