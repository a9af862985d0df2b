// Runs the ancestral sampler with the built-in oracle on a small phantom and
// reports how close the result is to the planted target for a few T.

#include <cmath>
#include <cstdio>

#include "fnsynth/core/resample.hpp"
#include "fnsynth/diffusion/sampler.hpp"
#include "fnsynth/labels/label_prep.hpp"
#include "fnsynth/phantom.hpp"

using namespace fnsynth;

int main() {
    const LabelVolume brain = phantom::fetal_brain(32, 1);
    const auto [target, range] = normalize_intensity(phantom::fetal_image(brain, 1));
    const auto cond = diffusion::one_hot_condition(labels::remap_classes(brain));
    for (int T : {1, 10, 50, 250, 1000}) {
        const auto sched = diffusion::make_linear_schedule(T);
        diffusion::OracleDenoiser oracle(target, sched);
        for (auto mode : {diffusion::VarianceMode::Zero, diffusion::VarianceMode::Stochastic}) {
            Rng rng(42);
            const auto x = diffusion::ddpm_sample(oracle, cond, sched, rng, mode);
            double se = 0;
            for (std::size_t i = 0; i < x.size(); ++i) se += (x[i] - target[i]) * (x[i] - target[i]);
            std::printf("T=%-5d %-10s alpha_bar_T=%.6e  rmse=%.3e\n", T,
                        mode == diffusion::VarianceMode::Zero ? "zero" : "stochastic", sched.alpha_bar(T),
                        std::sqrt(se / x.size()));
        }
    }
}
