#pragma once

// NIfTI-1 single-file (.nii / .nii.gz) reader and writer.
//
// Only 3D volumes are supported (dim[4..7] must be 1). The header is packed
// and unpacked field by field at fixed byte offsets so the code is
// independent of struct padding and host endianness.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <zlib.h>

#include "fnsynth/core/error.hpp"
#include "fnsynth/core/volume.hpp"

namespace fnsynth::io {

enum class NiftiType : std::int16_t {
    UInt8 = 2,
    Int16 = 4,
    Int32 = 8,
    Float32 = 16,
    Float64 = 64,
    Int8 = 256,
    UInt16 = 512,
    UInt32 = 768,
    Int64 = 1024,
    UInt64 = 1280,
};

inline int nifti_type_bytes(NiftiType t) {
    switch (t) {
    case NiftiType::UInt8:
    case NiftiType::Int8: return 1;
    case NiftiType::Int16:
    case NiftiType::UInt16: return 2;
    case NiftiType::Int32:
    case NiftiType::UInt32:
    case NiftiType::Float32: return 4;
    case NiftiType::Float64:
    case NiftiType::Int64:
    case NiftiType::UInt64: return 8;
    }
    return 0;
}

inline bool nifti_type_is_integer(NiftiType t) { return t != NiftiType::Float32 && t != NiftiType::Float64; }

/// Decoded header fields this library uses.
struct NiftiHeader {
    VolumeGeometry geometry;
    NiftiType datatype = NiftiType::Float32;
    float scl_slope = 0.0f;
    float scl_inter = 0.0f;
    std::size_t vox_offset = 352;
    bool swapped = false;
};

namespace detail {

constexpr std::size_t kHeaderSize = 348;
constexpr std::size_t kDataOffset = 352;

class ByteReader {
public:
    ByteReader(const std::vector<std::uint8_t>& bytes, bool swap) : bytes_(bytes), swap_(swap) {}

    template <class T>
    T get(std::size_t offset) const {
        if (offset + sizeof(T) > bytes_.size()) throw FormatError("NIfTI: truncated header");
        std::array<std::uint8_t, sizeof(T)> raw{};
        std::memcpy(raw.data(), bytes_.data() + offset, sizeof(T));
        if (swap_ != (std::endian::native == std::endian::big)) std::reverse(raw.begin(), raw.end());
        T out;
        std::memcpy(&out, raw.data(), sizeof(T));
        return out;
    }

private:
    const std::vector<std::uint8_t>& bytes_;
    bool swap_;
};

/// Little-endian field writer into a fixed buffer.
class ByteWriter {
public:
    explicit ByteWriter(std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

    template <class T>
    void put(std::size_t offset, T value) {
        std::array<std::uint8_t, sizeof(T)> raw{};
        std::memcpy(raw.data(), &value, sizeof(T));
        if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
        std::memcpy(bytes_.data() + offset, raw.data(), sizeof(T));
    }

private:
    std::vector<std::uint8_t>& bytes_;
};

inline std::vector<std::uint8_t> read_all(const std::string& path) {
    if (!std::filesystem::exists(path)) throw IoError("no such file: " + path);
    gzFile f = gzopen(path.c_str(), "rb");
    if (!f) throw IoError("cannot open " + path);
    std::vector<std::uint8_t> out;
    std::array<std::uint8_t, 1 << 16> chunk{};
    for (;;) {
        const int n = gzread(f, chunk.data(), static_cast<unsigned>(chunk.size()));
        if (n < 0) {
            gzclose(f);
            throw FormatError("corrupt compressed stream in " + path);
        }
        if (n == 0) break;
        out.insert(out.end(), chunk.begin(), chunk.begin() + n);
    }
    gzclose(f);
    return out;
}

inline bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

inline void write_all(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    if (ends_with(path, ".gz")) {
        gzFile f = gzopen(path.c_str(), "wb6");
        if (!f) throw IoError("cannot write " + path);
        std::size_t done = 0;
        while (done < bytes.size()) {
            const auto n = static_cast<unsigned>(std::min<std::size_t>(bytes.size() - done, 1u << 30));
            if (gzwrite(f, bytes.data() + done, n) != static_cast<int>(n)) {
                gzclose(f);
                throw IoError("write failed for " + path);
            }
            done += n;
        }
        if (gzclose(f) != Z_OK) throw IoError("write failed for " + path);
        return;
    }
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw IoError("cannot write " + path);
    const bool ok = std::fwrite(bytes.data(), 1, bytes.size(), f) == bytes.size();
    if (std::fclose(f) != 0 || !ok) throw IoError("write failed for " + path);
}

/// Rotation + offset from quaternion parameters (qform_code > 0).
inline Affine quaternion_affine(double b, double c, double d, const Vec3& offset, const Vec3& pixdim, double qfac) {
    double a = 1.0 - (b * b + c * c + d * d);
    if (a < 1e-7) {
        a = 1.0 / std::sqrt(b * b + c * c + d * d);
        b *= a;
        c *= a;
        d *= a;
        a = 0.0;
    } else {
        a = std::sqrt(a);
    }
    const double xd = pixdim[0], yd = pixdim[1], zd = qfac < 0 ? -pixdim[2] : pixdim[2];
    Affine m = identity_affine();
    m[0][0] = (a * a + b * b - c * c - d * d) * xd;
    m[0][1] = 2.0 * (b * c - a * d) * yd;
    m[0][2] = 2.0 * (b * d + a * c) * zd;
    m[1][0] = 2.0 * (b * c + a * d) * xd;
    m[1][1] = (a * a + c * c - b * b - d * d) * yd;
    m[1][2] = 2.0 * (c * d - a * b) * zd;
    m[2][0] = 2.0 * (b * d - a * c) * xd;
    m[2][1] = 2.0 * (c * d + a * b) * yd;
    m[2][2] = (a * a + d * d - c * c - b * b) * zd;
    m[0][3] = offset[0];
    m[1][3] = offset[1];
    m[2][3] = offset[2];
    return m;
}

struct Quaternion {
    double b, c, d, qfac;
};

/// Quaternion of the rotation part of an affine (column norms removed).
inline Quaternion affine_quaternion(const Affine& a) {
    double r[3][3];
    for (int col = 0; col < 3; ++col) {
        const double n = std::sqrt(a[0][col] * a[0][col] + a[1][col] * a[1][col] + a[2][col] * a[2][col]);
        for (int row = 0; row < 3; ++row) r[row][col] = n > 0 ? a[row][col] / n : (row == col ? 1.0 : 0.0);
    }
    double qfac = 1.0;
    const double det = r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1]) -
                       r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0]) +
                       r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
    if (det < 0) {
        qfac = -1.0;
        for (int row = 0; row < 3; ++row) r[row][2] = -r[row][2];
    }
    double qa = r[0][0] + r[1][1] + r[2][2] + 1.0, qb, qc, qd;
    if (qa > 0.5) {
        qa = 0.5 * std::sqrt(qa);
        qb = 0.25 * (r[2][1] - r[1][2]) / qa;
        qc = 0.25 * (r[0][2] - r[2][0]) / qa;
        qd = 0.25 * (r[1][0] - r[0][1]) / qa;
    } else {
        const double xd = 1.0 + r[0][0] - (r[1][1] + r[2][2]);
        const double yd = 1.0 + r[1][1] - (r[0][0] + r[2][2]);
        const double zd = 1.0 + r[2][2] - (r[0][0] + r[1][1]);
        if (xd > 1.0) {
            qb = 0.5 * std::sqrt(xd);
            qc = 0.25 * (r[0][1] + r[1][0]) / qb;
            qd = 0.25 * (r[0][2] + r[2][0]) / qb;
            qa = 0.25 * (r[2][1] - r[1][2]) / qb;
        } else if (yd > 1.0) {
            qc = 0.5 * std::sqrt(yd);
            qb = 0.25 * (r[0][1] + r[1][0]) / qc;
            qd = 0.25 * (r[1][2] + r[2][1]) / qc;
            qa = 0.25 * (r[0][2] - r[2][0]) / qc;
        } else {
            qd = 0.5 * std::sqrt(zd);
            qb = 0.25 * (r[0][2] + r[2][0]) / qd;
            qc = 0.25 * (r[1][2] + r[2][1]) / qd;
            qa = 0.25 * (r[1][0] - r[0][1]) / qd;
        }
        if (qa < 0.0) {
            qb = -qb;
            qc = -qc;
            qd = -qd;
        }
    }
    return {qb, qc, qd, qfac};
}

inline NiftiHeader parse_header(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < kHeaderSize) throw FormatError("NIfTI: file shorter than 348-byte header");
    NiftiHeader h;
    {
        ByteReader le(bytes, false);
        if (le.get<std::int32_t>(0) == 348)
            h.swapped = false;
        else if (ByteReader(bytes, true).get<std::int32_t>(0) == 348)
            h.swapped = true;
        else
            throw FormatError("NIfTI: sizeof_hdr is not 348");
    }
    ByteReader r(bytes, h.swapped);
    if (std::memcmp(bytes.data() + 344, "n+1\0", 4) != 0)
        throw FormatError("NIfTI: magic is not 'n+1' (only single-file NIfTI-1 is supported)");

    const auto ndim = r.get<std::int16_t>(40);
    if (ndim < 1 || ndim > 7) throw FormatError("NIfTI: dim[0] out of range");
    Dims dims{1, 1, 1};
    for (int i = 1; i <= 7; ++i) {
        const auto d = r.get<std::int16_t>(40 + 2 * i);
        if (i <= ndim && d < 1) throw FormatError("NIfTI: non-positive dimension");
        if (i <= 3 && i <= ndim) dims[i - 1] = d;
        if (i > 3 && i <= ndim && d != 1) throw FormatError("NIfTI: only 3D volumes are supported");
    }
    const auto dt = r.get<std::int16_t>(70);
    h.datatype = static_cast<NiftiType>(dt);
    if (nifti_type_bytes(h.datatype) == 0) throw FormatError("NIfTI: unsupported datatype " + std::to_string(dt));
    if (r.get<std::int16_t>(72) != nifti_type_bytes(h.datatype) * 8)
        throw FormatError("NIfTI: bitpix does not match datatype");

    Vec3 pixdim{};
    for (int i = 0; i < 3; ++i) {
        const double p = std::abs(r.get<float>(80 + 4 * i));
        pixdim[i] = (p > 0.0 && std::isfinite(p)) ? p : 1.0;
    }
    const double qfac = r.get<float>(76) < 0 ? -1.0 : 1.0;
    const float vox = r.get<float>(108);
    if (!(vox >= static_cast<float>(kHeaderSize))) throw FormatError("NIfTI: vox_offset below header size");
    h.vox_offset = static_cast<std::size_t>(vox);
    h.scl_slope = r.get<float>(112);
    h.scl_inter = r.get<float>(116);

    const auto qform_code = r.get<std::int16_t>(252);
    const auto sform_code = r.get<std::int16_t>(254);
    Affine affine = diagonal_affine(pixdim);
    if (sform_code > 0) {
        for (int row = 0; row < 3; ++row)
            for (int col = 0; col < 4; ++col) affine[row][col] = r.get<float>(280 + 16 * row + 4 * col);
    } else if (qform_code > 0) {
        affine = quaternion_affine(r.get<float>(256), r.get<float>(260), r.get<float>(264),
                                   {r.get<float>(268), r.get<float>(272), r.get<float>(276)}, pixdim, qfac);
    }
    h.geometry = VolumeGeometry{dims, pixdim, affine};
    try {
        h.geometry.validate();
    } catch (const Error& e) {
        throw FormatError(std::string("NIfTI: invalid geometry: ") + e.what());
    }
    return h;
}

inline std::vector<std::uint8_t> build_header(const VolumeGeometry& g, NiftiType type) {
    std::vector<std::uint8_t> bytes(kDataOffset, 0);
    ByteWriter w(bytes);
    w.put<std::int32_t>(0, 348);
    bytes[38] = 'r';
    w.put<std::int16_t>(40, 3);
    for (int i = 0; i < 3; ++i) {
        if (g.dims[i] > std::numeric_limits<std::int16_t>::max())
            throw ArgumentError("NIfTI-1 cannot store dims above 32767");
        w.put<std::int16_t>(42 + 2 * i, static_cast<std::int16_t>(g.dims[i]));
    }
    for (int i = 3; i < 7; ++i) w.put<std::int16_t>(42 + 2 * i, 1);
    w.put<std::int16_t>(70, static_cast<std::int16_t>(type));
    w.put<std::int16_t>(72, static_cast<std::int16_t>(nifti_type_bytes(type) * 8));

    const Quaternion q = affine_quaternion(g.affine);
    w.put<float>(76, static_cast<float>(q.qfac));
    for (int i = 0; i < 3; ++i) w.put<float>(80 + 4 * i, static_cast<float>(g.spacing[i]));
    for (int i = 3; i < 7; ++i) w.put<float>(80 + 4 * i, 1.0f);
    w.put<float>(108, static_cast<float>(kDataOffset));
    w.put<float>(112, 1.0f);
    w.put<float>(116, 0.0f);
    bytes[123] = 2; // xyzt_units: mm
    const char descrip[] = "fnsynth";
    std::memcpy(bytes.data() + 148, descrip, sizeof(descrip) - 1);
    w.put<std::int16_t>(252, 1);
    w.put<std::int16_t>(254, 1);
    w.put<float>(256, static_cast<float>(q.b));
    w.put<float>(260, static_cast<float>(q.c));
    w.put<float>(264, static_cast<float>(q.d));
    for (int i = 0; i < 3; ++i) w.put<float>(268 + 4 * i, static_cast<float>(g.affine[i][3]));
    for (int row = 0; row < 3; ++row)
        for (int col = 0; col < 4; ++col)
            w.put<float>(280 + 16 * row + 4 * col, static_cast<float>(g.affine[row][col]));
    std::memcpy(bytes.data() + 344, "n+1\0", 4);
    return bytes;
}

/// Decodes voxel i of the raw payload as double.
class VoxelDecoder {
public:
    VoxelDecoder(const std::vector<std::uint8_t>& bytes, const NiftiHeader& h)
        : reader_(bytes, h.swapped), base_(h.vox_offset), type_(h.datatype), width_(nifti_type_bytes(h.datatype)) {
        const std::size_t need = base_ + h.geometry.voxel_count() * static_cast<std::size_t>(width_);
        if (bytes.size() < need) throw FormatError("NIfTI: voxel data truncated");
    }

    double operator()(std::size_t i) const {
        const std::size_t off = base_ + i * static_cast<std::size_t>(width_);
        switch (type_) {
        case NiftiType::UInt8: return reader_.get<std::uint8_t>(off);
        case NiftiType::Int8: return reader_.get<std::int8_t>(off);
        case NiftiType::Int16: return reader_.get<std::int16_t>(off);
        case NiftiType::UInt16: return reader_.get<std::uint16_t>(off);
        case NiftiType::Int32: return reader_.get<std::int32_t>(off);
        case NiftiType::UInt32: return reader_.get<std::uint32_t>(off);
        case NiftiType::Int64: return static_cast<double>(reader_.get<std::int64_t>(off));
        case NiftiType::UInt64: return static_cast<double>(reader_.get<std::uint64_t>(off));
        case NiftiType::Float32: return reader_.get<float>(off);
        case NiftiType::Float64: return reader_.get<double>(off);
        }
        return 0.0;
    }

private:
    ByteReader reader_;
    std::size_t base_;
    NiftiType type_;
    int width_;
};

inline bool has_scaling(const NiftiHeader& h) {
    return h.scl_slope != 0.0f && std::isfinite(h.scl_slope) && !(h.scl_slope == 1.0f && h.scl_inter == 0.0f);
}

} // namespace detail

/// "<stem>.json" next to a .nii or .nii.gz file.
inline std::string sidecar_path(const std::string& volume_path) {
    std::string stem = volume_path;
    for (const char* ext : {".nii.gz", ".nii"})
        if (detail::ends_with(stem, ext)) {
            stem.resize(stem.size() - std::strlen(ext));
            break;
        }
    return stem + ".json";
}

inline NiftiHeader read_header(const std::string& path) { return detail::parse_header(detail::read_all(path)); }

inline IntensityVolume read_intensity_volume(const std::string& path) {
    const auto bytes = detail::read_all(path);
    const NiftiHeader h = detail::parse_header(bytes);
    const detail::VoxelDecoder decode(bytes, h);
    const bool scaled = detail::has_scaling(h);
    IntensityVolume vol(h.geometry, 0.0);
    for (std::size_t i = 0; i < vol.size(); ++i) {
        double v = decode(i);
        if (scaled) v = v * h.scl_slope + h.scl_inter;
        if (!std::isfinite(v)) throw FormatError("NIfTI: non-finite intensity in " + path);
        vol[i] = v;
    }
    return vol;
}

/// Reads a label volume. The vocabulary comes from `vocabulary` when given,
/// else from the JSON sidecar next to the file, else the FeTA 7-tissue default.
inline LabelVolume read_label_volume(const std::string& path, const std::optional<Vocabulary>& vocabulary = {}) {
    const auto bytes = detail::read_all(path);
    const NiftiHeader h = detail::parse_header(bytes);
    const detail::VoxelDecoder decode(bytes, h);
    const bool scaled = detail::has_scaling(h);
    Volume<label_t> grid(h.geometry, 0);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        double v = decode(i);
        if (scaled) v = v * h.scl_slope + h.scl_inter;
        if (!std::isfinite(v) || v != std::floor(v))
            throw TypeError("label volume " + path + " contains non-integer values");
        if (v < 0 || v > 65535) throw TypeError("label volume " + path + " contains codes outside [0, 65535]");
        grid[i] = static_cast<label_t>(v);
    }
    Vocabulary vocab;
    if (vocabulary)
        vocab = *vocabulary;
    else if (const auto side = sidecar_path(path); std::filesystem::exists(side))
        vocab = Vocabulary::load(side);
    else
        vocab = Vocabulary::feta();
    LabelVolume out(std::move(grid), std::move(vocab));
    out.validate();
    return out;
}

enum class VolumeKind { Label, Intensity };

inline std::variant<LabelVolume, IntensityVolume> read_volume(const std::string& path, VolumeKind kind,
                                                              const std::optional<Vocabulary>& vocabulary = {}) {
    if (kind == VolumeKind::Label) return read_label_volume(path, vocabulary);
    return read_intensity_volume(path);
}

/// Writes labels as UINT8 when every code fits, else UINT16. Also writes the
/// vocabulary sidecar unless `with_sidecar` is false.
inline void write_volume(const LabelVolume& vol, const std::string& path, bool with_sidecar = true) {
    const label_t top = vol.voxels().empty() ? 0 : *std::max_element(vol.voxels().begin(), vol.voxels().end());
    const NiftiType type = top < 256 ? NiftiType::UInt8 : NiftiType::UInt16;
    auto bytes = detail::build_header(vol.geometry(), type);
    const std::size_t width = static_cast<std::size_t>(nifti_type_bytes(type));
    bytes.resize(detail::kDataOffset + vol.size() * width);
    detail::ByteWriter w(bytes);
    for (std::size_t i = 0; i < vol.size(); ++i) {
        if (type == NiftiType::UInt8)
            bytes[detail::kDataOffset + i] = static_cast<std::uint8_t>(vol[i]);
        else
            w.put<std::uint16_t>(detail::kDataOffset + 2 * i, vol[i]);
    }
    detail::write_all(path, bytes);
    if (with_sidecar) vol.vocabulary().save(sidecar_path(path));
}

/// Writes FLOAT32 when every value is exactly representable, else FLOAT64,
/// so read(write(v)) reproduces v bit-exactly.
inline void write_volume(const IntensityVolume& vol, const std::string& path) {
    for (double v : vol.voxels())
        if (!std::isfinite(v)) throw ArgumentError("intensity volume contains non-finite values");
    const bool fits_float = std::all_of(vol.voxels().begin(), vol.voxels().end(),
                                        [](double v) { return static_cast<double>(static_cast<float>(v)) == v; });
    const NiftiType type = fits_float ? NiftiType::Float32 : NiftiType::Float64;
    auto bytes = detail::build_header(vol.geometry(), type);
    const std::size_t width = static_cast<std::size_t>(nifti_type_bytes(type));
    bytes.resize(detail::kDataOffset + vol.size() * width);
    detail::ByteWriter w(bytes);
    for (std::size_t i = 0; i < vol.size(); ++i) {
        if (fits_float)
            w.put<float>(detail::kDataOffset + 4 * i, static_cast<float>(vol[i]));
        else
            w.put<double>(detail::kDataOffset + 8 * i, vol[i]);
    }
    detail::write_all(path, bytes);
}

} // namespace fnsynth::io
