#include <gtest/gtest.h>

#include <cmath>

#include "fnsynth/diffusion/sampler.hpp"
#include "fnsynth/diffusion/schedule.hpp"
#include "fnsynth/phantom.hpp"

using namespace fnsynth;
using namespace fnsynth::diffusion;

namespace {

long double alpha_bar_oracle(int t, int T, long double b0, long double b1) {
    long double p = 1.0L;
    for (int i = 1; i <= t; ++i) p *= 1.0L - (b0 + (b1 - b0) * (i - 1) / (T - 1));
    return p;
}

IntensityVolume planted_target(const Dims& d, std::uint64_t seed) {
    Rng rng(seed);
    IntensityVolume v(VolumeGeometry::make(d), 0.0);
    for (auto& x : v.voxels()) x = 2.0 * rng.uniform() - 1.0;
    return v;
}

double rmse(const IntensityVolume& a, const IntensityVolume& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s / double(a.size()));
}

class Recording : public Denoiser {
public:
    std::vector<int> steps;
    std::vector<float> first_cond;
    bool cond_changed = false;
    IntensityVolume predict(const IntensityVolume& x, const Condition& c, int t) override {
        if (steps.empty()) first_cond = c.channels;
        else if (c.channels != first_cond) cond_changed = true;
        steps.push_back(t);
        return IntensityVolume(x.geometry(), 0.0);
    }
};

class Poison : public Denoiser {
public:
    IntensityVolume predict(const IntensityVolume& x, const Condition&, int t) override {
        IntensityVolume e(x.geometry(), 0.0);
        if (t == 3) e[0] = std::nan("");
        return e;
    }
};

class WrongShape : public Denoiser {
public:
    IntensityVolume predict(const IntensityVolume&, const Condition&, int) override {
        return IntensityVolume(VolumeGeometry::make({1, 1, 1}), 0.0);
    }
};

Condition flat_condition(const Dims& d) {
    return one_hot_condition(Volume<label_t>(VolumeGeometry::make(d), label_t{2}));
}

} // namespace

TEST(Schedule, TwoStepExample) {
    const auto s = make_linear_schedule(2, 0.1, 0.3);
    EXPECT_DOUBLE_EQ(s.beta(1), 0.1);
    EXPECT_DOUBLE_EQ(s.beta(2), 0.3);
    EXPECT_DOUBLE_EQ(s.alpha_bar(1), 0.9);
    EXPECT_NEAR(s.alpha_bar(2), 0.63, 1e-15);
    EXPECT_THROW(s.beta(0), ArgumentError);
    EXPECT_THROW(s.alpha_bar(3), ArgumentError);
    EXPECT_DOUBLE_EQ(make_linear_schedule(1, 0.2, 0.4).beta(1), 0.2);
}

TEST(Schedule, DefaultAlphaBarAgainstLongDouble) {
    const auto s = make_linear_schedule();
    EXPECT_EQ(s.T(), 1000);
    for (int t : {1, 10, 250, 500, 999, 1000})
        EXPECT_NEAR(s.alpha_bar(t), double(alpha_bar_oracle(t, 1000, 1e-4L, 0.02L)), 1e-12 * s.alpha_bar(t) + 1e-300);
    EXPECT_NEAR(s.alpha_bar(1000), 4.0358297653756833e-5, 4.0358297653756833e-5 * 1e-6);
    EXPECT_NEAR(make_linear_schedule(50).alpha_bar(50), 0.60295159732971490, 1e-12);
    EXPECT_NEAR(make_linear_schedule(50).alpha_bar(50), double(alpha_bar_oracle(50, 50, 1e-4L, 0.02L)), 1e-14);
    for (int t = 2; t <= 1000; ++t) ASSERT_LT(s.alpha_bar(t), s.alpha_bar(t - 1));
}

TEST(Schedule, RejectsBadParameters) {
    EXPECT_THROW(make_linear_schedule(0), ArgumentError);
    EXPECT_THROW(make_linear_schedule(10, 0.0, 0.1), ArgumentError);
    EXPECT_THROW(make_linear_schedule(10, 0.2, 0.1), ArgumentError);
    EXPECT_THROW(make_linear_schedule(10, 0.1, 1.0), ArgumentError);
    EXPECT_THROW(ScheduleConfig::from_json({{"timesteps", -1}}), ArgumentError);
    ScheduleConfig c{20, 1e-3, 0.05};
    const auto back = ScheduleConfig::from_json(c.to_json());
    EXPECT_EQ(back.timesteps, 20);
    EXPECT_EQ(back.beta_end, 0.05);
}

TEST(ForwardDiffusion, WorkedExample) {
    const auto s = make_linear_schedule(2, 0.1, 0.3);
    IntensityVolume x0(VolumeGeometry::make({2, 1, 1}), 0.0), eps = x0;
    x0[0] = 1.0, x0[1] = -2.0;
    eps[0] = 0.5, eps[1] = 0.0;
    const auto xt = forward_diffuse(x0, 2, eps, s);
    EXPECT_NEAR(xt[0], std::sqrt(0.63) + std::sqrt(0.37) * 0.5, 1e-15);
    EXPECT_NEAR(xt[1], -2.0 * std::sqrt(0.63), 1e-15);
}

TEST(ForwardDiffusion, MomentsWithinThreeStandardErrors) {
    const auto s = make_linear_schedule();
    const std::size_t n = 10000;
    IntensityVolume x0(VolumeGeometry::make({100, 100, 1}), 0.7), eps = x0;
    Rng rng(99);
    for (int t : {1, 100, 500, 900, 1000}) {
        for (auto& e : eps.voxels()) e = rng.normal();
        const auto xt = forward_diffuse(x0, t, eps, s);
        double m = 0, v = 0;
        for (double x : xt.voxels()) m += x;
        m /= n;
        for (double x : xt.voxels()) v += (x - m) * (x - m);
        v /= (n - 1);
        const double mu = std::sqrt(s.alpha_bar(t)) * 0.7, var = 1 - s.alpha_bar(t);
        EXPECT_NEAR(m, mu, 3 * std::sqrt(var / n)) << "t=" << t;
        EXPECT_NEAR(v, var, 3 * var * std::sqrt(2.0 / (n - 1))) << "t=" << t;
    }
}

TEST(Condition, OneHotChannelMajor) {
    Volume<label_t> l(VolumeGeometry::make({2, 2, 1}), label_t{0});
    l[1] = 1, l[2] = 2, l[3] = 3;
    const auto c = one_hot_condition(l);
    ASSERT_EQ(c.channels.size(), 16u);
    for (int ch = 0; ch < 4; ++ch)
        for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(c.at(ch, i), float(l[i] == ch));
    l[0] = 4;
    EXPECT_THROW(one_hot_condition(l), UnmappedLabelError);
}

TEST(Sampler, OracleRecoversTarget) {
    const Dims d{6, 5, 4};
    const auto target = planted_target(d, 3);
    for (int T : {1, 50}) {
        const auto s = make_linear_schedule(T);
        OracleDenoiser oracle(target, s);
        Rng rng(7);
        const auto x = ddpm_sample(oracle, flat_condition(d), s, rng);
        EXPECT_LT(rmse(x, target), T == 1 ? 1e-5 : 1e-3) << "T=" << T;
    }
}

TEST(Sampler, DeterministicPerSeed) {
    const Dims d{4, 4, 4};
    const auto s = make_linear_schedule(30);
    ZeroDenoiser z;
    Rng a(5), b(5), c(6);
    const auto xa = ddpm_sample(z, flat_condition(d), s, a);
    EXPECT_EQ(xa, ddpm_sample(z, flat_condition(d), s, b));
    EXPECT_NE(xa, ddpm_sample(z, flat_condition(d), s, c));
}

TEST(Sampler, ZeroVarianceIsDeterministicMap) {
    // With sigma = 0 and a zero denoiser, x_0 = x_T / prod sqrt(alpha_t).
    const Dims d{3, 3, 3};
    const auto s = make_linear_schedule(40);
    ZeroDenoiser z;
    Rng rng(11), probe(11);
    const auto x = ddpm_sample(z, flat_condition(d), s, rng, VarianceMode::Zero);
    const double scale = 1.0 / std::sqrt(s.alpha_bar(40));
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(x[i], probe.normal() * scale, 1e-12);
}

TEST(Sampler, VisitsEveryStepOnceWithUnchangedCondition) {
    const Dims d{3, 2, 2};
    Volume<label_t> l(VolumeGeometry::make(d), label_t{0});
    l[3] = 3;
    const auto cond = one_hot_condition(l);
    const auto copy = cond.channels;
    Recording rec;
    Rng rng(1);
    ddpm_sample(rec, cond, make_linear_schedule(10), rng);
    EXPECT_EQ(rec.steps, (std::vector<int>{10, 9, 8, 7, 6, 5, 4, 3, 2, 1}));
    EXPECT_FALSE(rec.cond_changed);
    EXPECT_EQ(cond.channels, copy);
}

TEST(Sampler, RejectsNonFiniteAndWrongShape) {
    Rng rng(0);
    Poison p;
    EXPECT_THROW(ddpm_sample(p, flat_condition({2, 2, 2}), make_linear_schedule(5), rng), Error);
    WrongShape w;
    EXPECT_THROW(ddpm_sample(w, flat_condition({2, 2, 2}), make_linear_schedule(5), rng), DimensionError);
    Condition bad = flat_condition({2, 2, 2});
    bad.channels.pop_back();
    ZeroDenoiser z;
    EXPECT_THROW(ddpm_sample(z, bad, make_linear_schedule(5), rng), DimensionError);
}

TEST(Training, L1AndEma) {
    const std::vector<double> a{1, 2, 3}, b{2, 2, 1};
    EXPECT_DOUBLE_EQ(l1_loss(a, b), 1.0);
    EXPECT_DOUBLE_EQ(l1_loss(std::vector<double>{}, std::vector<double>{}), 0.0);
    EXPECT_THROW(l1_loss(a, std::vector<double>{1}), DimensionError);
    const auto e = ema_update(std::vector<double>{1.0, 0.0}, std::vector<double>{0.0, 1.0});
    EXPECT_NEAR(e[0], 0.995, 1e-15);
    EXPECT_NEAR(e[1], 0.005, 1e-15);
    EXPECT_THROW(ema_update(a, a, 1.5), ArgumentError);
    EXPECT_EQ(TrainingConstants::epochs, 500000);
}
