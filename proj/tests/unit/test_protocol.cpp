#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <limits>

#include "fnsynth/diffusion/plugin.hpp"
#include "fnsynth/diffusion/protocol.hpp"
#include "fnsynth/io/nifti.hpp"
#include "support/helpers.hpp"

using namespace fnsynth;
using namespace fnsynth::diffusion;
namespace proto = fnsynth::diffusion::protocol;

namespace {

const std::string kPlugin = FNSYNTH_TEST_PLUGIN;

Condition cond_for(const Dims& d) {
    return one_hot_condition(Volume<label_t>(VolumeGeometry::make(d), label_t{1}));
}

} // namespace

TEST(Protocol, HeaderLayoutIsLittleEndian) {
    const auto h = proto::encode_header(proto::Kind::StepResponse, 0x01020304);
    const std::uint8_t expected[16] = {'F', 'N', 'D', 'P', 1, 0, 0, 0, 3, 0, 0, 0, 4, 3, 2, 1};
    ASSERT_EQ(h.size(), 16u);
    EXPECT_EQ(std::memcmp(h.data(), expected, 16), 0);
    const auto back = proto::decode_header(h);
    EXPECT_EQ(back.kind, proto::Kind::StepResponse);
    EXPECT_EQ(back.length, 0x01020304u);
}

TEST(Protocol, MalformedHeadersRejected) {
    auto h = proto::encode_header(proto::Kind::Handshake, 4);
    auto bad = h;
    bad[0] = 'X';
    EXPECT_THROW(proto::decode_header(bad), PluginError);
    bad = h;
    bad[4] = 2;
    EXPECT_THROW(proto::decode_header(bad), PluginError);
    bad = h;
    bad[8] = 9;
    EXPECT_THROW(proto::decode_header(bad), PluginError);
    bad = h;
    bad[8] = 0;
    EXPECT_THROW(proto::decode_header(bad), PluginError);
    EXPECT_THROW(proto::decode_header(std::span(h.data(), 15)), PluginError);
}

TEST(Protocol, FloatsBitExact) {
    const std::vector<float> v{0.0f, -0.0f, 1.5f, -3.25e-30f, std::numeric_limits<float>::max(),
                               std::numeric_limits<float>::denorm_min()};
    std::vector<std::uint8_t> bytes;
    for (float f : v) proto::put_f32(bytes, f);
    EXPECT_EQ(bytes[8], 0x00);
    EXPECT_EQ(bytes[11], 0x3F); // 1.5f = 0x3FC00000
    EXPECT_EQ(bytes[10], 0xC0);
    const auto back = proto::decode_floats(bytes);
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(std::bit_cast<std::uint32_t>(back[i]), std::bit_cast<std::uint32_t>(v[i]));
    bytes.pop_back();
    EXPECT_THROW(proto::decode_floats(bytes), PluginError);
}

TEST(Protocol, StepRequestLayout) {
    const std::vector<double> img{1.0, 2.0};
    const std::vector<float> cond{1, 0, 0, 1, 0, 0, 0, 0};
    const auto f = proto::encode_step_request(17, img, cond);
    const auto h = proto::decode_header(std::span(f.data(), 16));
    EXPECT_EQ(h.kind, proto::Kind::StepRequest);
    ASSERT_EQ(h.length, 4u + 4u * 10u);
    EXPECT_EQ(proto::get_u32(f.data() + 16), 17u);
    EXPECT_EQ(proto::get_f32(f.data() + 20), 1.0f);
    EXPECT_EQ(proto::get_f32(f.data() + 24), 2.0f);
    EXPECT_EQ(proto::get_f32(f.data() + 28), 1.0f);
    EXPECT_EQ(proto::get_f32(f.data() + 40), 1.0f);
}

TEST(Plugin, ZeroModeMatchesInProcessZero) {
    const Dims d{4, 3, 2};
    const auto s = make_linear_schedule(8);
    PluginDenoiser p(kPlugin, {"zero"});
    ZeroDenoiser z;
    Rng a(3), b(3);
    EXPECT_EQ(ddpm_sample(p, cond_for(d), s, a), ddpm_sample(z, cond_for(d), s, b));
    EXPECT_EQ(p.close(), 0);
}

TEST(Plugin, EchoReturnsFloat32Input) {
    const Dims d{3, 3, 1};
    PluginDenoiser p(kPlugin, {"echo"});
    const auto s = make_linear_schedule(4);
    p.begin(VolumeGeometry::make(d), s);
    IntensityVolume x(VolumeGeometry::make(d), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.1 * double(i) - 0.3;
    const auto e = p.predict(x, cond_for(d), 4);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(e[i], double(float(x[i])));
}

TEST(Plugin, OracleOverSocketTracksInProcessOracle) {
    test_support::TempDir dir;
    const Dims d{5, 4, 3};
    IntensityVolume target(VolumeGeometry::make(d), 0.0);
    Rng r(8);
    for (auto& v : target.voxels()) v = r.uniform();
    io::write_volume(target, dir / "target.nii.gz");
    const auto reread = io::read_intensity_volume(dir / "target.nii.gz");
    const auto s = make_linear_schedule(20);
    PluginDenoiser p(kPlugin, {"oracle", dir / "target.nii.gz"});
    OracleDenoiser o(reread, s);
    Rng a(4), b(4);
    const auto xp = ddpm_sample(p, cond_for(d), s, a);
    const auto xo = ddpm_sample(o, cond_for(d), s, b);
    for (std::size_t i = 0; i < xp.size(); ++i) {
        EXPECT_NEAR(xp[i], xo[i], 1e-3);
        EXPECT_NEAR(xp[i], reread[i], 1e-3);
    }
}

TEST(Plugin, FailuresSurfaceAsPluginError) {
    const Dims d{2, 2, 2};
    const auto s = make_linear_schedule(3);
    for (const char* mode : {"error", "bad-size", "garbage", "die"}) {
        PluginDenoiser p(kPlugin, {mode});
        Rng rng(0);
        EXPECT_THROW(ddpm_sample(p, cond_for(d), s, rng), PluginError) << mode;
    }
    EXPECT_THROW(PluginDenoiser("/nonexistent/denoiser"), PluginError);
}

TEST(Plugin, HandshakeBindsSession) {
    PluginDenoiser p(kPlugin, {"zero"});
    const auto s = make_linear_schedule(3);
    p.begin(VolumeGeometry::make({2, 2, 2}), s);
    EXPECT_NO_THROW(p.begin(VolumeGeometry::make({2, 2, 2}), s));
    EXPECT_THROW(p.begin(VolumeGeometry::make({3, 2, 2}), s), PluginError);
    IntensityVolume x(VolumeGeometry::make({2, 2, 2}), 0.0);
    PluginDenoiser fresh(kPlugin, {"zero"});
    EXPECT_THROW(fresh.predict(x, cond_for({2, 2, 2}), 1), PluginError);
    EXPECT_EQ(p.close(), 0);
    EXPECT_EQ(p.close(), 0);
}
