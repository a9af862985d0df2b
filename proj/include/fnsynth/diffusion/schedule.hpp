#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "fnsynth/core/error.hpp"
#include "fnsynth/core/volume.hpp"

namespace fnsynth::diffusion {

/// Linear-schedule defaults and the reference training setup. Training itself
/// happens outside this library; the values are kept for configs and reports.
struct ScheduleDefaults {
    static constexpr int timesteps = 1000;
    static constexpr double beta_start = 1e-4;
    static constexpr double beta_end = 0.02;
};

struct TrainingConstants {
    static constexpr std::int64_t epochs = 500000;
    static constexpr double learning_rate = 1e-5;
    static constexpr double learning_rate_late = 1e-6;
    static constexpr std::int64_t learning_rate_drop_epoch = 100000;
    static constexpr double ema_decay = 0.995;
};

/// Per-timestep beta, alpha = 1 - beta and alpha_bar = prod alpha. Public
/// accessors are 1-based (t = 1..T) like the usual DDPM notation.
class NoiseSchedule {
public:
    NoiseSchedule() = default;
    explicit NoiseSchedule(std::vector<double> betas) : beta_(std::move(betas)) {
        if (beta_.empty()) throw ArgumentError("schedule: T must be >= 1");
        alpha_.resize(beta_.size());
        alpha_bar_.resize(beta_.size());
        double prod = 1.0;
        for (std::size_t i = 0; i < beta_.size(); ++i) {
            if (!(beta_[i] > 0.0 && beta_[i] < 1.0)) throw ArgumentError("schedule: every beta must lie in (0, 1)");
            alpha_[i] = 1.0 - beta_[i];
            prod *= alpha_[i];
            alpha_bar_[i] = prod;
        }
    }

    int T() const noexcept { return static_cast<int>(beta_.size()); }
    double beta(int t) const { return beta_[slot(t)]; }
    double alpha(int t) const { return alpha_[slot(t)]; }
    double alpha_bar(int t) const { return alpha_bar_[slot(t)]; }

    const std::vector<double>& betas() const noexcept { return beta_; }
    const std::vector<double>& alphas() const noexcept { return alpha_; }
    const std::vector<double>& alpha_bars() const noexcept { return alpha_bar_; }

    double beta_start() const { return beta_.front(); }
    double beta_end() const { return beta_.back(); }

private:
    std::size_t slot(int t) const {
        if (t < 1 || t > T())
            throw ArgumentError("timestep " + std::to_string(t) + " outside [1, " + std::to_string(T()) + "]");
        return static_cast<std::size_t>(t - 1);
    }

    std::vector<double> beta_, alpha_, alpha_bar_;
};

/// beta_t = start + (end - start) * (t - 1) / (T - 1); T = 1 gives beta_1 = start.
inline NoiseSchedule make_linear_schedule(int T = ScheduleDefaults::timesteps,
                                          double beta_start = ScheduleDefaults::beta_start,
                                          double beta_end = ScheduleDefaults::beta_end) {
    if (T < 1) throw ArgumentError("schedule: T must be >= 1");
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
        throw ArgumentError("schedule: need 0 < beta_start <= beta_end < 1");
    std::vector<double> b(static_cast<std::size_t>(T));
    for (int i = 0; i < T; ++i)
        b[i] = T == 1 ? beta_start : beta_start + (beta_end - beta_start) * static_cast<double>(i) / (T - 1);
    return NoiseSchedule(std::move(b));
}

struct ScheduleConfig {
    int timesteps = ScheduleDefaults::timesteps;
    double beta_start = ScheduleDefaults::beta_start;
    double beta_end = ScheduleDefaults::beta_end;

    NoiseSchedule build() const { return make_linear_schedule(timesteps, beta_start, beta_end); }

    nlohmann::json to_json() const {
        return {{"timesteps", timesteps}, {"beta_start", beta_start}, {"beta_end", beta_end}};
    }
    static ScheduleConfig from_json(const nlohmann::json& j) {
        ScheduleConfig c;
        try {
            c.timesteps = j.value("timesteps", c.timesteps);
            c.beta_start = j.value("beta_start", c.beta_start);
            c.beta_end = j.value("beta_end", c.beta_end);
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(std::string("schedule config: ") + e.what());
        }
        c.build();
        return c;
    }
};

/// x_t = sqrt(alpha_bar_t) * x0 + sqrt(1 - alpha_bar_t) * eps.
inline IntensityVolume forward_diffuse(const IntensityVolume& x0, int t, const IntensityVolume& eps,
                                       const NoiseSchedule& sched) {
    require_same_dims(x0.geometry(), eps.geometry(), "forward_diffuse");
    const double ab = sched.alpha_bar(t);
    const double a = std::sqrt(ab), b = std::sqrt(1.0 - ab);
    IntensityVolume out(x0.geometry(), 0.0);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * x0[i] + b * eps[i];
    return out;
}

/// Mean absolute difference.
inline double l1_loss(std::span<const double> pred, std::span<const double> target) {
    if (pred.size() != target.size()) throw DimensionError("l1_loss: size mismatch");
    if (pred.empty()) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - target[i]);
    return s / static_cast<double>(pred.size());
}

inline double l1_loss(const IntensityVolume& pred, const IntensityVolume& target) {
    require_same_dims(pred.geometry(), target.geometry(), "l1_loss");
    return l1_loss(pred.voxels(), target.voxels());
}

/// decay * ema + (1 - decay) * param, elementwise.
inline std::vector<double> ema_update(std::span<const double> ema, std::span<const double> params,
                                      double decay = TrainingConstants::ema_decay) {
    if (ema.size() != params.size()) throw DimensionError("ema_update: length mismatch");
    if (!(decay >= 0.0 && decay <= 1.0)) throw ArgumentError("ema_update: decay must lie in [0, 1]");
    std::vector<double> out(ema.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = decay * ema[i] + (1.0 - decay) * params[i];
    return out;
}

} // namespace fnsynth::diffusion
