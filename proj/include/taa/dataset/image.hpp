#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "taa/insult/grid.hpp"
#include "taa/io/binary.hpp"

namespace taa {

/// Row-major (z rows, θ columns) intensity map in [0,1].
struct GrayscaleImage {
    std::size_t width = 0;   // n_theta
    std::size_t height = 0;  // n_z
    std::vector<float> pixels;

    float at(std::size_t row, std::size_t col) const { return pixels[row * width + col]; }
};

/// Linear-interpolation percentile of unsorted data, p in [0, 100].
inline double percentile(std::span<const double> values, double p)
{
    require(!values.empty(), ErrorKind::parameter, "percentile of empty data");
    std::vector<double> s(values.begin(), values.end());
    std::sort(s.begin(), s.end());
    const double pos = p / 100.0 * static_cast<double>(s.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, s.size() - 1);
    return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

/// 1st/99th percentile contrast stretch. A flat map gives an all-zero image.
inline GrayscaleImage to_grayscale(std::span<const double> map, const CylindricalGrid& grid)
{
    require(map.size() == grid.size(), ErrorKind::parameter, "map size does not match grid");
    GrayscaleImage img{grid.n_theta, grid.n_z, std::vector<float>(map.size(), 0.0f)};
    const double q1 = percentile(map, 1.0), q99 = percentile(map, 99.0);
    const double range = q99 - q1;
    if (!(range > 0.0)) return img;
    for (std::size_t i = 0; i < map.size(); ++i)
        img.pixels[i] = static_cast<float>(std::clamp((map[i] - q1) / range, 0.0, 1.0));
    return img;
}

inline std::uint8_t quantize_pixel(float v)
{
    // round half up
    return static_cast<std::uint8_t>(std::floor(std::clamp(v, 0.0f, 1.0f) * 255.0 + 0.5));
}

inline std::string encode_pgm(const GrayscaleImage& img)
{
    std::ostringstream head;
    head << "P5\n" << img.width << ' ' << img.height << "\n255\n";
    std::string out = head.str();
    out.reserve(out.size() + img.pixels.size());
    for (float v : img.pixels) out.push_back(static_cast<char>(quantize_pixel(v)));
    return out;
}

inline GrayscaleImage decode_pgm(std::string_view bytes)
{
    std::istringstream in{std::string(bytes)};
    std::string magic;
    std::size_t w = 0, h = 0, maxval = 0;
    in >> magic >> w >> h >> maxval;
    require(in && magic == "P5" && maxval == 255 && w > 0 && h > 0, ErrorKind::format, "not an 8-bit P5 PGM");
    in.get();  // single whitespace before raster
    const auto start = static_cast<std::size_t>(in.tellg());
    require(bytes.size() == start + w * h, ErrorKind::format, "PGM raster size mismatch");
    GrayscaleImage img{w, h, std::vector<float>(w * h)};
    for (std::size_t i = 0; i < w * h; ++i)
        img.pixels[i] = static_cast<float>(static_cast<unsigned char>(bytes[start + i]) / 255.0);
    return img;
}

inline void write_pgm(const std::filesystem::path& path, const GrayscaleImage& img)
{
    io::write_file(path, encode_pgm(img));
}

inline GrayscaleImage read_pgm(const std::filesystem::path& path) { return decode_pgm(io::read_file(path)); }

} // namespace taa
