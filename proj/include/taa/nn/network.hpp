#pragma once

// Feed-forward stacks over a flat f64 parameter vector. Activations are
// column-per-sample matrices; spatial data is stored HWC (channel fastest),
// which makes the im2col GEMM output already laid out for the next layer.

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "taa/io/binary.hpp"
#include "taa/nn/tensor.hpp"

namespace taa::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { identity, tanh };

inline std::string to_string(Activation a) { return a == Activation::tanh ? "tanh" : "identity"; }
inline Activation activation_from_string(const std::string& s)
{
    if (s == "tanh") return Activation::tanh;
    if (s == "identity") return Activation::identity;
    fail(ErrorKind::format, "unknown activation '" + s + "'");
}

struct Shape {
    std::size_t h = 1, w = 1, c = 1;
    std::size_t size() const noexcept { return h * w * c; }
    bool operator==(const Shape&) const = default;
};

struct LayerSpec {
    enum class Type { dense, conv2d, maxpool, flatten };
    Type type = Type::dense;
    std::size_t units = 0;    // dense outputs or conv filters
    std::size_t kernel = 3;   // square conv kernel
    std::size_t stride = 1;
    std::size_t pad = 0;
    std::size_t window = 2;   // pooling
    Activation act = Activation::identity;

    static LayerSpec dense(std::size_t out, Activation a) { return {Type::dense, out, 0, 1, 0, 0, a}; }
    static LayerSpec conv(std::size_t filters, std::size_t k, std::size_t pad, Activation a, std::size_t stride = 1)
    {
        return {Type::conv2d, filters, k, stride, pad, 0, a};
    }
    static LayerSpec maxpool(std::size_t window) { return {Type::maxpool, 0, 0, 1, 0, window, Activation::identity}; }
    static LayerSpec flatten() { return {Type::flatten, 0, 0, 1, 0, 0, Activation::identity}; }
};

inline const char* type_name(LayerSpec::Type t)
{
    switch (t) {
    case LayerSpec::Type::dense: return "dense";
    case LayerSpec::Type::conv2d: return "conv2d";
    case LayerSpec::Type::maxpool: return "maxpool";
    default: return "flatten";
    }
}

inline io::Json layer_to_json(const LayerSpec& s)
{
    io::Json j{{"type", type_name(s.type)}, {"activation", to_string(s.act)}};
    if (s.type == LayerSpec::Type::dense) j["units"] = s.units;
    if (s.type == LayerSpec::Type::conv2d) {
        j["filters"] = s.units;
        j["kernel"] = s.kernel;
        j["stride"] = s.stride;
        j["pad"] = s.pad;
    }
    if (s.type == LayerSpec::Type::maxpool) j["window"] = s.window;
    return j;
}

inline LayerSpec layer_from_json(const io::Json& j)
{
    const std::string t = j.at("type").get<std::string>();
    const Activation a = activation_from_string(j.value("activation", "identity"));
    if (t == "dense") return LayerSpec::dense(j.at("units").get<std::size_t>(), a);
    if (t == "conv2d")
        return LayerSpec::conv(j.at("filters").get<std::size_t>(), j.at("kernel").get<std::size_t>(),
                               j.at("pad").get<std::size_t>(), a, j.at("stride").get<std::size_t>());
    if (t == "maxpool") return LayerSpec::maxpool(j.at("window").get<std::size_t>());
    if (t == "flatten") return LayerSpec::flatten();
    fail(ErrorKind::format, "unknown layer type '" + t + "'");
}

/// Vectorized tanh. Eigen's double tanh is scalar; this goes through the
/// packet exp, with an odd Taylor polynomial near 0 to keep relative accuracy.
inline void tanh_inplace(double* p, std::size_t n)
{
    constexpr std::size_t block = 2048;
    alignas(64) double e[block];
    for (std::size_t s = 0; s < n; s += block) {
        const std::size_t m = std::min(block, n - s);
        double* x = p + s;
        Eigen::Map<Eigen::ArrayXd>(e, static_cast<Eigen::Index>(m)) =
            (2.0 * Eigen::Map<const Eigen::ArrayXd>(x, static_cast<Eigen::Index>(m))).exp();
        // branch-free so the loop vectorizes; exp overflow to inf still gives 1
        for (std::size_t i = 0; i < m; ++i) {
            const double v = x[i], q = v * v;
            const double poly = v * (1.0 + q * (-1.0 / 3 + q * (2.0 / 15 + q * (-17.0 / 315 + q * (62.0 / 2835)))));
            const double r = 1.0 - 2.0 / (1.0 + e[i]);
            const double w = q < 0.0025 ? 1.0 : 0.0;
            x[i] = r + w * (poly - r);
        }
    }
}

/// Per-layer forward state needed by backward().
struct LayerCache {
    Matrix output;  // post-activation
    std::vector<std::int32_t> argmax;
};

struct NetworkCache {
    Matrix input;
    std::vector<LayerCache> layers;
};

class Network {
public:
    Network() = default;

    Network(Shape input, std::vector<LayerSpec> specs) : input_(input), specs_(std::move(specs))
    {
        require(input.size() > 0, ErrorKind::structural, "network input must be non-empty");
        require(!specs_.empty(), ErrorKind::structural, "network needs at least one layer");
        Shape s = input;
        for (std::size_t i = 0; i < specs_.size(); ++i) {
            const auto& sp = specs_[i];
            Layer L{sp, s, s, params_, 0, {}};
            std::ostringstream where;
            where << "layer " << i << " (" << type_name(sp.type) << ") with input " << s.h << "x" << s.w << "x"
                  << s.c;
            switch (sp.type) {
            case LayerSpec::Type::dense:
                require(sp.units > 0, ErrorKind::structural, where.str() + ": zero units");
                L.out = {1, 1, sp.units};
                L.n_params = sp.units * s.size() + sp.units;
                break;
            case LayerSpec::Type::conv2d: {
                require(sp.units > 0 && sp.kernel > 0 && sp.stride > 0, ErrorKind::structural,
                        where.str() + ": bad conv geometry");
                require(s.h + 2 * sp.pad >= sp.kernel && s.w + 2 * sp.pad >= sp.kernel, ErrorKind::structural,
                        where.str() + ": kernel larger than padded input");
                L.out = {(s.h + 2 * sp.pad - sp.kernel) / sp.stride + 1, (s.w + 2 * sp.pad - sp.kernel) / sp.stride + 1,
                         sp.units};
                L.n_params = sp.units * sp.kernel * sp.kernel * s.c + sp.units;
                break;
            }
            case LayerSpec::Type::maxpool:
                require(sp.window > 0 && s.h >= sp.window && s.w >= sp.window, ErrorKind::structural,
                        where.str() + ": pooling window larger than input");
                L.out = {s.h / sp.window, s.w / sp.window, s.c};
                break;
            case LayerSpec::Type::flatten:
                L.out = {1, 1, s.size()};
                break;
            }
            if (sp.type == LayerSpec::Type::conv2d) build_taps(L);
            params_ += L.n_params;
            layers_.push_back(L);
            s = L.out;
        }
    }

    Shape input_shape() const noexcept { return input_; }
    Shape output_shape() const noexcept { return layers_.back().out; }
    std::size_t input_size() const noexcept { return input_.size(); }
    std::size_t output_size() const noexcept { return output_shape().size(); }
    std::size_t num_params() const noexcept { return params_; }
    const std::vector<LayerSpec>& specs() const noexcept { return specs_; }

    /// Parameter count per layer, in order.
    std::vector<std::size_t> layer_params() const
    {
        std::vector<std::size_t> out;
        for (const auto& L : layers_) out.push_back(L.n_params);
        return out;
    }

    io::Json to_json() const
    {
        io::Json layers = io::Json::array();
        for (const auto& s : specs_) layers.push_back(layer_to_json(s));
        return {{"input", {input_.h, input_.w, input_.c}}, {"layers", layers}};
    }

    static Network from_json(const io::Json& j)
    {
        const auto in = j.at("input").get<std::vector<std::size_t>>();
        require(in.size() == 3, ErrorKind::format, "network input shape must have 3 entries");
        std::vector<LayerSpec> specs;
        for (const auto& l : j.at("layers")) specs.push_back(layer_from_json(l));
        return Network({in[0], in[1], in[2]}, std::move(specs));
    }

    /// Xavier-uniform weights, zero biases, written into params[0, num_params).
    void init(double* params, std::mt19937_64& rng) const
    {
        for (const auto& L : layers_) {
            if (L.n_params == 0) continue;
            const std::size_t nb = L.spec.units;
            Tensor w;
            if (L.spec.type == LayerSpec::Type::dense)
                w = xavier_init({L.spec.units, L.in.size()}, rng);
            else
                w = xavier_init({L.spec.units, L.in.c, L.spec.kernel, L.spec.kernel}, rng);
            // Stored as a column-major (units × fan_in) matrix; draw order is irrelevant for i.i.d. entries.
            std::copy(w.values.begin(), w.values.end(), params + L.offset);
            std::fill(params + L.offset + w.size(), params + L.offset + w.size() + nb, 0.0);
        }
    }

    /// X is (input_size × batch). With a cache, keeps what backward() needs.
    Matrix forward(const double* params, const Matrix& X, NetworkCache* cache = nullptr) const
    {
        require(static_cast<std::size_t>(X.rows()) == input_size(), ErrorKind::structural,
                "network input has wrong feature count");
        if (!cache) {
            Matrix a, next;
            const Matrix* in = &X;
            for (const auto& L : layers_) {
                forward_layer(L, params, *in, nullptr, next);
                a.swap(next);
                in = &a;
            }
            return a;
        }
        cache->layers.resize(layers_.size());
        const auto first = layers_.front().spec.type;
        if (first == LayerSpec::Type::dense || first == LayerSpec::Type::conv2d) cache->input = X;
        const Matrix* in = &X;
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            auto& lc = cache->layers[i];
            forward_layer(layers_[i], params, *in, &lc, lc.output);
            in = &lc.output;
        }
        return cache->layers.back().output;
    }

    /// Accumulates dLoss/dparams into grad and returns dLoss/dX when asked.
    Matrix backward(const double* params, const NetworkCache& cache, Matrix dY, double* grad,
                    bool input_grad = false) const
    {
        require(cache.layers.size() == layers_.size(), ErrorKind::structural, "backward without forward cache");
        for (std::size_t k = layers_.size(); k-- > 0;) {
            const bool need_dx = input_grad || k > 0;
            const Matrix& in = k == 0 ? cache.input : cache.layers[k - 1].output;
            dY = backward_layer(layers_[k], params, cache.layers[k], in, std::move(dY), grad, need_dx);
        }
        return dY;
    }

private:
    struct Layer {
        LayerSpec spec;
        Shape in, out;
        std::size_t offset;
        std::size_t n_params;
        // conv gather table: (im2col offset, input offset) per in-bounds tap
        // of one sample, each covering C contiguous channels
        std::vector<std::uint32_t> taps;
    };

    static void activate(Matrix& z, Activation a)
    {
        if (a == Activation::tanh) tanh_inplace(z.data(), static_cast<std::size_t>(z.size()));
    }

    static void activation_grad(Matrix& d, const Matrix& out, Activation a)
    {
        if (a == Activation::tanh) d.array() *= 1.0 - out.array().square();
    }

    // Visits every in-bounds (patch row, input offset) pair of output pixel
    // (oy, ox); rows are ordered (ky, kx, c) in blocks of C.
    template <class Fn>
    static void for_each_tap(const Layer& L, std::size_t oy, std::size_t ox, Fn&& fn)
    {
        const auto& s = L.spec;
        const std::size_t k = s.kernel, C = L.in.c;
        for (std::size_t ky = 0; ky < k; ++ky) {
            const long iy = static_cast<long>(oy * s.stride + ky) - static_cast<long>(s.pad);
            if (iy < 0 || iy >= static_cast<long>(L.in.h)) continue;
            for (std::size_t kx = 0; kx < k; ++kx) {
                const long ix = static_cast<long>(ox * s.stride + kx) - static_cast<long>(s.pad);
                if (ix < 0 || ix >= static_cast<long>(L.in.w)) continue;
                fn((ky * k + kx) * C, (static_cast<std::size_t>(iy) * L.in.w + static_cast<std::size_t>(ix)) * C);
            }
        }
    }

    // Convolutions run over fixed-size sample chunks so the im2col buffer
    // stays cache resident. The chunk size is a constant: results never
    // depend on anything but the batch.
    static std::size_t conv_chunk(const Layer& L)
    {
        const std::size_t bytes = 8 * L.spec.kernel * L.spec.kernel * L.in.c * L.out.h * L.out.w;
        return std::max<std::size_t>(1, (std::size_t{384} << 10) / bytes);
    }

    static void build_taps(Layer& L)
    {
        const std::size_t ow = L.out.w, K = L.spec.kernel * L.spec.kernel * L.in.c;
        for (std::size_t p = 0; p < L.out.h * ow; ++p)
            for_each_tap(L, p / ow, p % ow, [&](std::size_t r, std::size_t i) {
                L.taps.push_back(static_cast<std::uint32_t>(p * K + r));
                L.taps.push_back(static_cast<std::uint32_t>(i));
            });
    }

    // im2col in HWC for samples [b0, b0+nb): column (b·P + p) holds the patch
    // of output pixel p.
    static void im2col(const Layer& L, const Matrix& X, std::size_t b0, std::size_t nb, Matrix& cols)
    {
        const std::size_t C = L.in.c, K = L.spec.kernel * L.spec.kernel * C, P = L.out.h * L.out.w;
        cols.resize(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(P * nb));
        if (L.spec.pad > 0) cols.setZero();
        const std::uint32_t* t = L.taps.data();
        const std::size_t n = L.taps.size();
        for (std::size_t b = 0; b < nb; ++b) {
            const double* x = X.col(static_cast<Eigen::Index>(b0 + b)).data();
            double* dst = cols.data() + b * P * K;
            if (C == 1)
                for (std::size_t j = 0; j < n; j += 2) dst[t[j]] = x[t[j + 1]];
            else
                for (std::size_t j = 0; j < n; j += 2)
                    for (std::size_t c = 0; c < C; ++c) dst[t[j] + c] = x[t[j + 1] + c];
        }
    }

    static void col2im(const Layer& L, const Matrix& dcols, std::size_t b0, std::size_t nb, Matrix& dX)
    {
        const std::size_t C = L.in.c, K = L.spec.kernel * L.spec.kernel * C, P = L.out.h * L.out.w;
        const std::uint32_t* t = L.taps.data();
        const std::size_t n = L.taps.size();
        for (std::size_t b = 0; b < nb; ++b) {
            double* x = dX.col(static_cast<Eigen::Index>(b0 + b)).data();
            const double* src = dcols.data() + b * P * K;
            for (std::size_t j = 0; j < n; j += 2)
                for (std::size_t c = 0; c < C; ++c) x[t[j + 1] + c] += src[t[j] + c];
        }
    }

    void forward_layer(const Layer& L, const double* params, const Matrix& X, LayerCache* lc, Matrix& out) const
    {
        const auto B = X.cols();
        switch (L.spec.type) {
        case LayerSpec::Type::dense: {
            const auto n_out = static_cast<Eigen::Index>(L.spec.units), in = static_cast<Eigen::Index>(L.in.size());
            Eigen::Map<const Matrix> W(params + L.offset, n_out, in);
            Eigen::Map<const Vector> bias(params + L.offset + n_out * in, n_out);
            out.resize(n_out, B);
            out.noalias() = W * X;
            out.colwise() += bias;
            activate(out, L.spec.act);
            return;
        }
        case LayerSpec::Type::conv2d: {
            const auto F = static_cast<Eigen::Index>(L.spec.units);
            const auto K = static_cast<Eigen::Index>(L.spec.kernel * L.spec.kernel * L.in.c);
            const auto P = static_cast<Eigen::Index>(L.out.h * L.out.w);
            Eigen::Map<const Matrix> W(params + L.offset, F, K);
            Eigen::Map<const Vector> bias(params + L.offset + F * K, F);
            out.resize(F * P, B);
            const std::size_t chunk = conv_chunk(L), nB = static_cast<std::size_t>(B);
            Matrix cols;
            for (std::size_t b0 = 0; b0 < nB; b0 += chunk) {
                const std::size_t nb = std::min(chunk, nB - b0);
                im2col(L, X, b0, nb, cols);
                Eigen::Map<Matrix> zv(out.data() + static_cast<Eigen::Index>(b0) * F * P, F,
                                      P * static_cast<Eigen::Index>(nb));
                zv.noalias() = W * cols;
                zv.colwise() += bias;
                if (L.spec.act == Activation::tanh) tanh_inplace(zv.data(), static_cast<std::size_t>(zv.size()));
            }
            return;
        }
        case LayerSpec::Type::maxpool: {
            const std::size_t win = L.spec.window, C = L.in.c, ow = L.out.w, W = L.in.w;
            const std::size_t O = L.out.size();
            out.resize(static_cast<Eigen::Index>(O), B);
            std::vector<std::int32_t> local;
            auto& arg = lc ? lc->argmax : local;
            arg.resize(O * static_cast<std::size_t>(B));
            for (Eigen::Index b = 0; b < B; ++b) {
                const double* x = X.col(b).data();
                double* y = out.col(b).data();
                std::int32_t* a = arg.data() + static_cast<std::size_t>(b) * O;
                for (std::size_t oy = 0; oy < L.out.h; ++oy)
                    for (std::size_t ox = 0; ox < ow; ++ox) {
                        const std::size_t o = (oy * ow + ox) * C;
                        for (std::size_t dy = 0; dy < win; ++dy)
                            for (std::size_t dx = 0; dx < win; ++dx) {
                                const std::size_t i = ((oy * win + dy) * W + ox * win + dx) * C;
                                const bool first = dy == 0 && dx == 0;
                                for (std::size_t c = 0; c < C; ++c)
                                    if (first || x[i + c] > y[o + c]) {  // first maximum wins ties
                                        y[o + c] = x[i + c];
                                        a[o + c] = static_cast<std::int32_t>(i + c);
                                    }
                            }
                    }
            }
            return;
        }
        default:
            out = X;
        }
    }

    Matrix backward_layer(const Layer& L, const double* params, const LayerCache& lc, const Matrix& input, Matrix dY,
                          double* grad, bool need_dx) const
    {
        const auto B = dY.cols();
        switch (L.spec.type) {
        case LayerSpec::Type::dense: {
            const auto out = static_cast<Eigen::Index>(L.spec.units), in = static_cast<Eigen::Index>(L.in.size());
            activation_grad(dY, lc.output, L.spec.act);
            Eigen::Map<Matrix> gW(grad + L.offset, out, in);
            Eigen::Map<Vector> gb(grad + L.offset + out * in, out);
            gW.noalias() += dY * input.transpose();
            gb += dY.rowwise().sum();
            if (!need_dx) return {};
            Eigen::Map<const Matrix> W(params + L.offset, out, in);
            return W.transpose() * dY;
        }
        case LayerSpec::Type::conv2d: {
            const auto F = static_cast<Eigen::Index>(L.spec.units);
            const auto K = static_cast<Eigen::Index>(L.spec.kernel * L.spec.kernel * L.in.c);
            const auto P = static_cast<Eigen::Index>(L.out.h * L.out.w);
            activation_grad(dY, lc.output, L.spec.act);
            Eigen::Map<Matrix> gW(grad + L.offset, F, K);
            Eigen::Map<Vector> gb(grad + L.offset + F * K, F);
            Eigen::Map<const Matrix> W(params + L.offset, F, K);
            Matrix dX;
            if (need_dx) dX = Matrix::Zero(static_cast<Eigen::Index>(L.in.size()), B);
            const std::size_t chunk = conv_chunk(L), nB = static_cast<std::size_t>(B);
            Matrix cols, dcols;
            for (std::size_t b0 = 0; b0 < nB; b0 += chunk) {
                const std::size_t nb = std::min(chunk, nB - b0);
                Eigen::Map<const Matrix> dz(dY.data() + static_cast<Eigen::Index>(b0) * F * P, F,
                                            P * static_cast<Eigen::Index>(nb));
                im2col(L, input, b0, nb, cols);
                gW.noalias() += dz * cols.transpose();
                gb += dz.rowwise().sum();
                if (!need_dx) continue;
                dcols.noalias() = W.transpose() * dz;
                col2im(L, dcols, b0, nb, dX);
            }
            return dX;
        }
        case LayerSpec::Type::maxpool: {
            if (!need_dx) return {};
            const auto O = static_cast<std::size_t>(dY.rows());
            Matrix dX = Matrix::Zero(static_cast<Eigen::Index>(L.in.size()), B);
            for (Eigen::Index b = 0; b < B; ++b) {
                const std::int32_t* a = lc.argmax.data() + static_cast<std::size_t>(b) * O;
                double* d = dX.col(b).data();
                const double* g = dY.col(b).data();
                for (std::size_t o = 0; o < O; ++o) d[a[o]] += g[o];
            }
            return dX;
        }
        default:
            return dY;
        }
    }

    Shape input_;
    std::vector<LayerSpec> specs_;
    std::vector<Layer> layers_;
    std::size_t params_ = 0;
};

/// Tanh FNN: `depth` dense layers, hidden width `width`, linear or tanh head.
inline std::vector<LayerSpec> fnn_layers(std::size_t depth, std::size_t width, std::size_t out, Activation head)
{
    require(depth >= 1, ErrorKind::structural, "FNN depth must be at least 1");
    std::vector<LayerSpec> l;
    for (std::size_t i = 0; i + 1 < depth; ++i) l.push_back(LayerSpec::dense(width, Activation::tanh));
    l.push_back(LayerSpec::dense(out, head));
    return l;
}

} // namespace taa::nn
