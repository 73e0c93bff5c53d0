#pragma once

// Little-endian array codecs and the framed container used for profiles,
// field maps and checkpoints:
//
//   magic[8] | u64 header_len | header (JSON, UTF-8) | u64 payload_len | payload
//
// All integers and floats are little-endian regardless of host order.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "taa/error.hpp"

namespace taa::io {

using Json = nlohmann::json;

namespace detail {

template <class UInt>
UInt byteswap(UInt v) noexcept
{
    UInt out = 0;
    for (std::size_t i = 0; i < sizeof(UInt); ++i) {
        out = static_cast<UInt>((out << 8) | (v & 0xFF));
        v = static_cast<UInt>(v >> 8);
    }
    return out;
}

template <class UInt>
UInt to_le(UInt v) noexcept
{
    if constexpr (std::endian::native == std::endian::big) return byteswap(v);
    else return v;
}

} // namespace detail

inline void append_u64(std::string& out, std::uint64_t v)
{
    v = detail::to_le(v);
    char buf[8];
    std::memcpy(buf, &v, 8);
    out.append(buf, 8);
}

inline std::uint64_t load_u64(std::string_view bytes, std::size_t offset)
{
    require(offset + 8 <= bytes.size(), ErrorKind::format, "truncated integer field");
    std::uint64_t v;
    std::memcpy(&v, bytes.data() + offset, 8);
    return detail::to_le(v);
}

inline void append_f32(std::string& out, std::span<const float> values)
{
    const std::size_t base = out.size();
    out.resize(base + 4 * values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto bits = detail::to_le(std::bit_cast<std::uint32_t>(values[i]));
        std::memcpy(out.data() + base + 4 * i, &bits, 4);
    }
}

inline void append_f64(std::string& out, std::span<const double> values)
{
    const std::size_t base = out.size();
    out.resize(base + 8 * values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto bits = detail::to_le(std::bit_cast<std::uint64_t>(values[i]));
        std::memcpy(out.data() + base + 8 * i, &bits, 8);
    }
}

inline std::vector<float> load_f32(std::string_view bytes, std::size_t offset, std::size_t count)
{
    require(offset + 4 * count <= bytes.size(), ErrorKind::format, "truncated f32 block");
    std::vector<float> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::uint32_t bits;
        std::memcpy(&bits, bytes.data() + offset + 4 * i, 4);
        out[i] = std::bit_cast<float>(detail::to_le(bits));
    }
    return out;
}

inline std::vector<double> load_f64(std::string_view bytes, std::size_t offset, std::size_t count)
{
    require(offset + 8 * count <= bytes.size(), ErrorKind::format, "truncated f64 block");
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::uint64_t bits;
        std::memcpy(&bits, bytes.data() + offset + 8 * i, 8);
        out[i] = std::bit_cast<double>(detail::to_le(bits));
    }
    return out;
}

inline std::vector<float> to_f32(std::span<const double> values)
{
    std::vector<float> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = static_cast<float>(values[i]);
    return out;
}

inline std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes)
{
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) fail(ErrorKind::io, "cannot create directory " + path.parent_path().string());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::io, "cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorKind::io, "short write to " + path.string());
}

struct Framed {
    Json header;
    std::string payload;
};

inline std::string encode_framed(std::string_view magic, const Json& header, std::string_view payload)
{
    require(magic.size() == 8, ErrorKind::format, "magic must be 8 bytes");
    const std::string text = header.dump();
    std::string out;
    out.reserve(8 + 16 + text.size() + payload.size());
    out.append(magic);
    append_u64(out, text.size());
    out.append(text);
    append_u64(out, payload.size());
    out.append(payload);
    return out;
}

inline Framed decode_framed(std::string_view bytes, std::string_view magic)
{
    require(bytes.size() >= 16, ErrorKind::format, "file too short for framed header");
    require(bytes.substr(0, 8) == magic, ErrorKind::format,
            "bad magic: expected '" + std::string(magic) + "'");
    const std::uint64_t hlen = load_u64(bytes, 8);
    require(16 + hlen + 8 <= bytes.size(), ErrorKind::format, "truncated header");
    Framed f;
    try {
        f.header = Json::parse(bytes.substr(16, hlen));
    } catch (const Json::exception& e) {
        fail(ErrorKind::format, std::string("header is not valid JSON: ") + e.what());
    }
    const std::uint64_t plen = load_u64(bytes, 16 + hlen);
    const std::size_t pstart = 16 + hlen + 8;
    require(pstart + plen == bytes.size(), ErrorKind::format, "payload length does not match file size");
    f.payload = std::string(bytes.substr(pstart, plen));
    return f;
}

// 64-bit FNV-1a; used for config provenance hashes.
inline std::uint64_t fnv1a(std::string_view s) noexcept
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v)
{
    std::ostringstream ss;
    ss << std::hex << std::setw(16) << std::setfill('0') << v;
    return ss.str();
}

} // namespace taa::io
