#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "fnsynth/core/error.hpp"
#include "fnsynth/core/random.hpp"
#include "fnsynth/core/volume.hpp"
#include "fnsynth/diffusion/schedule.hpp"

namespace fnsynth::diffusion {

inline constexpr int kConditionChannels = 4;
inline constexpr int kInputChannels = 1 + kConditionChannels;

/// One-hot label channels, channel-major: channels[c * N + i] = (label_i == c).
struct Condition {
    VolumeGeometry geometry;
    std::vector<float> channels;

    std::size_t voxel_count() const { return geometry.voxel_count(); }
    float at(int channel, std::size_t i) const { return channels[static_cast<std::size_t>(channel) * voxel_count() + i]; }
};

/// Labels must use codes 0..3 (the 4-class scheme).
inline Condition one_hot_condition(const Volume<label_t>& labels) {
    Condition c{labels.geometry(), std::vector<float>(kConditionChannels * labels.size(), 0.0f)};
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const label_t v = labels[i];
        if (v >= kConditionChannels)
            throw UnmappedLabelError("one_hot_condition: class " + std::to_string(v) + " outside 0..3");
        c.channels[v * labels.size() + i] = 1.0f;
    }
    return c;
}

/// Predicts the noise component of x_t. Implementations may be stateful
/// (plugin sessions) and are not shared across concurrent samples.
class Denoiser {
public:
    virtual ~Denoiser() = default;
    /// Called once by ddpm_sample before the first prediction.
    virtual void begin(const VolumeGeometry&, const NoiseSchedule&) {}
    virtual IntensityVolume predict(const IntensityVolume& x_t, const Condition& condition, int t) = 0;
};

class ZeroDenoiser final : public Denoiser {
public:
    IntensityVolume predict(const IntensityVolume& x_t, const Condition&, int) override {
        return IntensityVolume(x_t.geometry(), 0.0);
    }
};

/// Perfect epsilon predictor for a planted target: (x_t - sqrt(ab_t) x0) / sqrt(1 - ab_t).
class OracleDenoiser final : public Denoiser {
public:
    OracleDenoiser(IntensityVolume target, NoiseSchedule sched) : target_(std::move(target)), sched_(std::move(sched)) {}

    IntensityVolume predict(const IntensityVolume& x_t, const Condition&, int t) override {
        require_same_dims(x_t.geometry(), target_.geometry(), "oracle denoiser");
        const double ab = sched_.alpha_bar(t);
        const double a = std::sqrt(ab), b = std::sqrt(1.0 - ab);
        IntensityVolume eps(x_t.geometry(), 0.0);
        for (std::size_t i = 0; i < eps.size(); ++i) eps[i] = (x_t[i] - a * target_[i]) / b;
        return eps;
    }

private:
    IntensityVolume target_;
    NoiseSchedule sched_;
};

enum class VarianceMode { Stochastic, Zero };

/// Ancestral DDPM sampling from x_T ~ N(0, I):
/// x_{t-1} = (x_t - beta_t / sqrt(1 - ab_t) * eps) / sqrt(alpha_t) + sigma_t z,
/// sigma_t = sqrt(beta_t) (stochastic) or 0, and z = 0 at t = 1.
inline IntensityVolume ddpm_sample(Denoiser& denoiser, const Condition& condition, const NoiseSchedule& sched, Rng& rng,
                                   VarianceMode mode = VarianceMode::Stochastic) {
    if (condition.channels.size() != kConditionChannels * condition.voxel_count())
        throw DimensionError("ddpm_sample: condition must carry 4 channels per voxel");
    IntensityVolume x(condition.geometry, 0.0);
    for (auto& v : x.voxels()) v = rng.normal();
    denoiser.begin(condition.geometry, sched);
    for (int t = sched.T(); t >= 1; --t) {
        const IntensityVolume eps = denoiser.predict(x, condition, t);
        if (eps.dims() != x.dims()) throw DimensionError("ddpm_sample: denoiser output shape differs from input");
        const double inv_sqrt_alpha = 1.0 / std::sqrt(sched.alpha(t));
        const double coef = sched.beta(t) / std::sqrt(1.0 - sched.alpha_bar(t));
        const double sigma = (mode == VarianceMode::Stochastic && t > 1) ? std::sqrt(sched.beta(t)) : 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (!std::isfinite(eps[i])) throw Error("ddpm_sample: non-finite denoiser output at t=" + std::to_string(t));
            double next = inv_sqrt_alpha * (x[i] - coef * eps[i]);
            if (sigma > 0.0) next += sigma * rng.normal();
            if (!std::isfinite(next)) throw Error("ddpm_sample: non-finite sample at t=" + std::to_string(t));
            x[i] = next;
        }
    }
    return x;
}

} // namespace fnsynth::diffusion
