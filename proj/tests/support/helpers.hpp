#pragma once

#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include "fnsynth/core/random.hpp"
#include "fnsynth/core/volume.hpp"

namespace fnsynth::test_support {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "fnsynth") {
        static std::uint64_t counter = 0;
        const auto base = std::filesystem::temp_directory_path();
        for (;;) {
            path_ = base / (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
            if (std::filesystem::create_directories(path_)) break;
        }
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string operator/(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

inline BinaryMask random_mask(const Dims& d, double p, std::uint64_t seed) {
    Rng rng(seed);
    BinaryMask m(VolumeGeometry::make(d), 0);
    for (auto& v : m.voxels()) v = rng.bernoulli(p) ? 1 : 0;
    return m;
}

inline LabelVolume random_labels(const Dims& d, int n_codes, std::uint64_t seed, const Vocabulary& vocab) {
    Rng rng(seed);
    LabelVolume v(VolumeGeometry::make(d), vocab, 0);
    for (auto& c : v.voxels()) c = static_cast<label_t>(rng.below(static_cast<std::uint64_t>(n_codes)));
    return v;
}

} // namespace fnsynth::test_support
