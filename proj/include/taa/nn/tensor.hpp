#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "taa/error.hpp"

namespace taa::nn {

/// Dense f64 array with up to four dimensions, row-major.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> values;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> s) : shape(std::move(s))
    {
        require(!shape.empty() && shape.size() <= 4, ErrorKind::structural, "tensor rank must be 1..4");
        values.assign(count(shape), 0.0);
    }

    static std::size_t count(const std::vector<std::size_t>& s)
    {
        return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
    }
    std::size_t size() const noexcept { return values.size(); }
};

/// Uniform [0,1) from the top 53 bits; identical on every standard library.
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Glorot fans: (out, in) for dense weights; (filters, channels, kh, kw)
/// for convolution kernels.
inline std::pair<std::size_t, std::size_t> glorot_fans(const std::vector<std::size_t>& shape)
{
    require(shape.size() == 2 || shape.size() == 4, ErrorKind::structural, "xavier_init needs a 2D or 4D shape");
    if (shape.size() == 2) return {shape[1], shape[0]};
    const std::size_t receptive = shape[2] * shape[3];
    return {shape[1] * receptive, shape[0] * receptive};
}

inline double xavier_bound(std::size_t fan_in, std::size_t fan_out)
{
    require(fan_in >= 1 && fan_out >= 1, ErrorKind::structural, "fans must be positive");
    return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

inline Tensor xavier_init(const std::vector<std::size_t>& shape, std::mt19937_64& rng)
{
    const auto [fi, fo] = glorot_fans(shape);
    const double a = xavier_bound(fi, fo);
    Tensor t(shape);
    for (double& v : t.values) v = a * (2.0 * uniform01(rng) - 1.0);
    return t;
}

} // namespace taa::nn
