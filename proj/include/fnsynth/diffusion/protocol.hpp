#pragma once

// Framed binary protocol spoken with external denoiser processes over their
// standard input/output. Every frame is a 16-byte little-endian header
// (magic "FNDP", u32 version, u32 kind, u32 payload length) plus payload.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "fnsynth/core/error.hpp"

namespace fnsynth::diffusion::protocol {

inline constexpr std::array<char, 4> kMagic{'F', 'N', 'D', 'P'};
inline constexpr std::uint32_t kVersion = 1;
inline constexpr std::size_t kHeaderSize = 16;
inline constexpr std::uint32_t kMaxPayload = 1u << 31;

enum class Kind : std::uint32_t { Handshake = 1, StepRequest = 2, StepResponse = 3, Shutdown = 4, Error = 5 };

inline std::string kind_name(Kind k) {
    switch (k) {
    case Kind::Handshake: return "HANDSHAKE";
    case Kind::StepRequest: return "STEP_REQUEST";
    case Kind::StepResponse: return "STEP_RESPONSE";
    case Kind::Shutdown: return "SHUTDOWN";
    case Kind::Error: return "ERROR";
    }
    return "UNKNOWN";
}

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::uint32_t get_u32(const std::uint8_t* p) {
    return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
}

inline void put_f32(std::vector<std::uint8_t>& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }
inline float get_f32(const std::uint8_t* p) { return std::bit_cast<float>(get_u32(p)); }

struct Header {
    Kind kind;
    std::uint32_t length;
};

inline std::vector<std::uint8_t> encode_header(Kind kind, std::uint32_t length) {
    std::vector<std::uint8_t> out(kMagic.begin(), kMagic.end());
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(kind));
    put_u32(out, length);
    return out;
}

inline Header decode_header(std::span<const std::uint8_t> b) {
    if (b.size() != kHeaderSize) throw PluginError("protocol: short header");
    if (std::memcmp(b.data(), kMagic.data(), 4) != 0) throw PluginError("protocol: bad magic");
    const auto version = get_u32(b.data() + 4);
    if (version != kVersion) throw PluginError("protocol: unsupported version " + std::to_string(version));
    const auto kind = get_u32(b.data() + 8);
    if (kind < 1 || kind > 5) throw PluginError("protocol: unknown frame kind " + std::to_string(kind));
    const auto length = get_u32(b.data() + 12);
    if (length > kMaxPayload) throw PluginError("protocol: payload too large");
    return {static_cast<Kind>(kind), length};
}

inline std::vector<std::uint8_t> encode_frame(Kind kind, std::span<const std::uint8_t> payload) {
    auto out = encode_header(kind, static_cast<std::uint32_t>(payload.size()));
    out.insert(out.end(), payload.begin(), payload.end());
    return out;
}

inline std::vector<std::uint8_t> encode_text(Kind kind, const std::string& text) {
    return encode_frame(kind, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

/// STEP_REQUEST payload: u32 t, then image voxels, then the condition channels, all float32.
inline std::vector<std::uint8_t> encode_step_request(std::uint32_t t, std::span<const double> image,
                                                     std::span<const float> condition) {
    std::vector<std::uint8_t> payload;
    payload.reserve(4 + 4 * (image.size() + condition.size()));
    put_u32(payload, t);
    for (double v : image) put_f32(payload, static_cast<float>(v));
    for (float v : condition) put_f32(payload, v);
    return encode_frame(Kind::StepRequest, payload);
}

inline std::vector<float> decode_floats(std::span<const std::uint8_t> payload) {
    if (payload.size() % 4 != 0) throw PluginError("protocol: float payload not a multiple of 4 bytes");
    std::vector<float> out(payload.size() / 4);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = get_f32(payload.data() + 4 * i);
    return out;
}

} // namespace fnsynth::diffusion::protocol
