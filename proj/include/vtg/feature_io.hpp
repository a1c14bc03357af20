#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "vtg/errors.hpp"

namespace vtg {

enum class SequenceKind { Video, Query };

/// A dense sequence of d-dimensional float32 feature vectors: one row per
/// video frame, or (for queries) a [CLS] row followed by one row per token.
class FeatureSequence {
public:
    FeatureSequence() = default;
    FeatureSequence(std::size_t dim, std::size_t count)
        : dim_(dim), data_(dim * count, 0.0f) {}

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return dim_ == 0 ? 0 : data_.size() / dim_; }

    std::span<const float> row(std::size_t i) const {
        return {data_.data() + i * dim_, dim_};
    }
    std::span<float> row(std::size_t i) {
        return {data_.data() + i * dim_, dim_};
    }

    /// Query [CLS] feature (row 0).
    std::span<const float> cls() const { return row(0); }

    const std::vector<float>& data() const { return data_; }
    std::vector<float>& data() { return data_; }

    void l2_normalize_rows() {
        for (std::size_t r = 0; r < size(); ++r) {
            auto v = row(r);
            double sq = 0.0;
            for (float x : v) sq += static_cast<double>(x) * x;
            if (sq <= 0.0) continue;
            const double inv = 1.0 / std::sqrt(sq);
            for (float& x : v) x = static_cast<float>(x * inv);
        }
    }

    double fps = 1.0;
    SequenceKind kind = SequenceKind::Video;

private:
    std::size_t dim_ = 0;
    std::vector<float> data_;
};

namespace detail {

inline void put_u32le(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u64le(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline std::uint32_t get_u32le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline std::uint64_t get_u64le(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

inline std::string read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw TruncatedFile("cannot open " + path.string());
    }
    std::string bytes((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
    return bytes;
}

inline void write_file_bytes(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw TruncatedFile("cannot open " + path.string() + " for writing");
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw TruncatedFile("short write to " + path.string());
    }
}

}  // namespace detail

inline constexpr char kFeatureMagic[4] = {'C', 'F', 'V', '1'};

/// Serializes a CFV feature file: "CFV1" | u32 LE dim | u64 LE count |
/// count*dim float32 LE, row-major.
inline std::string encode_feature_file(const FeatureSequence& seq) {
    std::string out;
    out.reserve(16 + seq.data().size() * 4);
    out.append(kFeatureMagic, 4);
    detail::put_u32le(out, static_cast<std::uint32_t>(seq.dim()));
    detail::put_u64le(out, static_cast<std::uint64_t>(seq.size()));
    for (float f : seq.data()) {
        std::uint32_t bits = std::bit_cast<std::uint32_t>(f);
        detail::put_u32le(out, bits);
    }
    return out;
}

inline FeatureSequence decode_feature_file(const std::string& bytes,
                                           const std::string& origin = "<memory>") {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kFeatureMagic, 4) != 0) {
        throw BadMagic("not a CFV1 feature file: " + origin);
    }
    if (bytes.size() < 16) {
        throw TruncatedFile("header truncated: " + origin);
    }
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    const std::uint32_t dim = detail::get_u32le(p + 4);
    const std::uint64_t count = detail::get_u64le(p + 8);
    if (dim == 0) {
        throw ZeroDim("feature dimension is zero: " + origin);
    }
    const std::uint64_t need = 16 + count * dim * 4;
    if (bytes.size() < need) {
        throw TruncatedFile("payload truncated (" + std::to_string(bytes.size()) +
                            " of " + std::to_string(need) + " bytes): " + origin);
    }
    FeatureSequence seq(dim, count);
    for (std::uint64_t i = 0; i < count * dim; ++i) {
        const std::uint32_t bits = detail::get_u32le(p + 16 + i * 4);
        const float f = std::bit_cast<float>(bits);
        if (!std::isfinite(f)) {
            throw NonFiniteValue("non-finite value at flat index " +
                                 std::to_string(i) + ": " + origin);
        }
        seq.data()[i] = f;
    }
    return seq;
}

inline FeatureSequence read_feature_file(const std::filesystem::path& path) {
    return decode_feature_file(detail::read_file_bytes(path), path.string());
}

inline void write_feature_file(const std::filesystem::path& path,
                               const FeatureSequence& seq) {
    detail::write_file_bytes(path, encode_feature_file(seq));
}

/// Reads only dim and count from a CFV header (used for manifest validation).
inline std::pair<std::size_t, std::size_t> read_feature_header(
    const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw UnresolvedFeatureFile("cannot open " + path.string());
    }
    unsigned char hdr[16];
    in.read(reinterpret_cast<char*>(hdr), 16);
    if (in.gcount() < 16) {
        throw TruncatedFile("header truncated: " + path.string());
    }
    if (std::memcmp(hdr, kFeatureMagic, 4) != 0) {
        throw BadMagic("not a CFV1 feature file: " + path.string());
    }
    const std::uint32_t dim = detail::get_u32le(hdr + 4);
    if (dim == 0) {
        throw ZeroDim("feature dimension is zero: " + path.string());
    }
    return {dim, detail::get_u64le(hdr + 8)};
}

}  // namespace vtg
