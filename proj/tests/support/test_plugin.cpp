// Minimal denoiser plugin for exercising the host side of the protocol.
//
//   fnsynth_test_plugin MODE [TARGET.nii.gz]
//
// MODE: zero | oracle | echo | bad-size | error | die | garbage

#include <cmath>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include <unistd.h>

#include <json.hpp>

#include "fnsynth/diffusion/protocol.hpp"
#include "fnsynth/diffusion/schedule.hpp"
#include "fnsynth/io/nifti.hpp"

using namespace fnsynth;
namespace proto = fnsynth::diffusion::protocol;

namespace {

bool read_exact(std::uint8_t* p, std::size_t n) {
    while (n > 0) {
        const ssize_t r = ::read(STDIN_FILENO, p, n);
        if (r <= 0) return false;
        p += r;
        n -= static_cast<std::size_t>(r);
    }
    return true;
}

void write_exact(const std::vector<std::uint8_t>& b) {
    std::size_t off = 0;
    while (off < b.size()) {
        const ssize_t r = ::write(STDOUT_FILENO, b.data() + off, b.size() - off);
        if (r <= 0) std::_Exit(5);
        off += static_cast<std::size_t>(r);
    }
}

[[noreturn]] void fail(const std::string& msg, int code) {
    write_exact(proto::encode_text(proto::Kind::Error, msg));
    std::_Exit(code);
}

} // namespace

int main(int argc, char** argv) {
    const std::string mode = argc > 1 ? argv[1] : "zero";
    std::vector<double> target;
    if (mode == "oracle") {
        if (argc < 3) return 2;
        const auto t = io::read_intensity_volume(argv[2]);
        target.assign(t.voxels().begin(), t.voxels().end());
    }

    bool handshaken = false;
    std::size_t n = 0;
    diffusion::NoiseSchedule sched;
    for (;;) {
        std::vector<std::uint8_t> head(proto::kHeaderSize);
        if (!read_exact(head.data(), head.size())) return handshaken ? 0 : 6;
        proto::Header h{};
        try {
            h = proto::decode_header(head);
        } catch (const std::exception& e) {
            fail(e.what(), 4);
        }
        std::vector<std::uint8_t> payload(h.length);
        if (!read_exact(payload.data(), payload.size())) return 7;

        if (h.kind == proto::Kind::Shutdown) return 0;
        if (h.kind == proto::Kind::Handshake) {
            if (handshaken) fail("second handshake", 3);
            const auto j = nlohmann::json::parse(payload.begin(), payload.end());
            const auto dims = j.at("dims").get<std::array<std::int64_t, 3>>();
            if (j.at("channels").get<int>() != 5) fail("expected 5 channels", 3);
            n = static_cast<std::size_t>(dims[0] * dims[1] * dims[2]);
            sched = diffusion::make_linear_schedule(j.at("T").get<int>(), j.value("beta_start", 1e-4),
                                                    j.value("beta_end", 0.02));
            if (!target.empty() && target.size() != n) fail("target size differs from handshake dims", 3);
            handshaken = true;
            if (mode == "die") return 9;
            continue;
        }
        if (h.kind != proto::Kind::StepRequest) fail("unexpected frame " + proto::kind_name(h.kind), 3);
        if (!handshaken) fail("step request before handshake", 3);
        if (payload.size() != 4 + 4 * 5 * n) fail("step request has wrong size", 3);
        if (mode == "error") fail("boom", 8);
        if (mode == "garbage") {
            write_exact(std::vector<std::uint8_t>(16, 0xAB));
            continue;
        }

        const int t = static_cast<int>(proto::get_u32(payload.data()));
        std::vector<std::uint8_t> out;
        const std::size_t m = mode == "bad-size" ? n + 1 : n;
        out.reserve(4 * m);
        const double ab = sched.alpha_bar(t);
        for (std::size_t i = 0; i < m; ++i) {
            const float x = i < n ? proto::get_f32(payload.data() + 4 + 4 * i) : 0.0f;
            float eps = 0.0f;
            if (mode == "echo") eps = x;
            if (mode == "oracle") eps = static_cast<float>((x - std::sqrt(ab) * target[i]) / std::sqrt(1.0 - ab));
            proto::put_f32(out, eps);
        }
        write_exact(proto::encode_frame(proto::Kind::StepResponse, out));
    }
}
