#pragma once

// Multi-branch DeepONet: branch outputs are multiplied elementwise into one
// q-vector b, then G(u)(y) = Σ_k b_k t_k(y) with t the trunk output.

#include <array>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "taa/dataset/dataset.hpp"
#include "taa/nn/network.hpp"

namespace taa {

struct ArchConfig {
    std::size_t q = 128;
    std::size_t fnn_depth = 4;   // dense layers per FNN, head included
    std::size_t fnn_width = 128;
    std::size_t conv1_filters = 16;
    std::size_t conv2_filters = 32;
    std::size_t kernel = 3;
    bool second_pool = true;     // pool after the second conv as well

    io::Json to_json() const
    {
        return {{"q", q},
                {"fnn_depth", fnn_depth},
                {"fnn_width", fnn_width},
                {"conv1_filters", conv1_filters},
                {"conv2_filters", conv2_filters},
                {"kernel", kernel},
                {"second_pool", second_pool}};
    }
    static ArchConfig from_json(const io::Json& j)
    {
        ArchConfig a;
        a.q = j.at("q").get<std::size_t>();
        a.fnn_depth = j.at("fnn_depth").get<std::size_t>();
        a.fnn_width = j.at("fnn_width").get<std::size_t>();
        a.conv1_filters = j.at("conv1_filters").get<std::size_t>();
        a.conv2_filters = j.at("conv2_filters").get<std::size_t>();
        a.kernel = j.at("kernel").get<std::size_t>();
        a.second_pool = j.at("second_pool").get<bool>();
        return a;
    }
};

inline std::vector<nn::LayerSpec> cnn_layers(const ArchConfig& a)
{
    using nn::Activation;
    using nn::LayerSpec;
    std::vector<LayerSpec> l{LayerSpec::conv(a.conv1_filters, a.kernel, a.kernel / 2, Activation::tanh),
                             LayerSpec::maxpool(2), LayerSpec::conv(a.conv2_filters, a.kernel, 0, Activation::tanh)};
    if (a.second_pool) l.push_back(LayerSpec::maxpool(2));
    l.push_back(LayerSpec::flatten());
    l.push_back(LayerSpec::dense(a.q, Activation::identity));
    return l;
}

/// Per-branch affine standardization (x − mean)/scale, fitted on training inputs.
struct BranchScaler {
    double mean = 0.0, scale = 1.0;
};

class DeepONet {
public:
    DeepONet() = default;

    /// Generic assembly; every branch and the trunk must output q features.
    DeepONet(std::vector<nn::Network> branches, nn::Network trunk)
        : branches_(std::move(branches)), trunk_(std::move(trunk))
    {
        require(!branches_.empty(), ErrorKind::structural, "DeepONet needs at least one branch");
        const std::size_t q = trunk_.output_size();
        for (std::size_t b = 0; b < branches_.size(); ++b)
            require(branches_[b].output_size() == q, ErrorKind::structural,
                    "branch " + std::to_string(b) + " outputs " + std::to_string(branches_[b].output_size()) +
                        " features, trunk outputs " + std::to_string(q));
        std::size_t off = 0;
        for (const auto& n : branches_) {
            offsets_.push_back(off);
            off += n.num_params();
        }
        offsets_.push_back(off);
        off += trunk_.num_params();
        params_ = nn::Vector::Zero(static_cast<Eigen::Index>(off));
        scalers_.assign(branches_.size(), {});
    }

    /// Default sensor or image architecture for a dataset layout.
    static DeepONet make(InputMode mode, const CylindricalGrid& grid, LocationEncoding enc, const ArchConfig& a = {})
    {
        using nn::Activation;
        std::vector<nn::Network> br;
        const auto dims = branch_dims(mode, grid, enc);
        for (std::size_t b = 0; b < dims.size(); ++b) {
            if (is_image_branch(mode, b))
                br.emplace_back(nn::Shape{grid.n_z, grid.n_theta, 1}, cnn_layers(a));
            else
                br.emplace_back(nn::Shape{1, 1, dims[b]},
                                nn::fnn_layers(a.fnn_depth, a.fnn_width, a.q, Activation::identity));
        }
        nn::Network trunk(nn::Shape{1, 1, 3}, nn::fnn_layers(a.fnn_depth, a.fnn_width, a.q, Activation::tanh));
        DeepONet m(std::move(br), std::move(trunk));
        m.mode_ = mode;
        m.location_ = enc;
        m.grid_ = grid;
        m.arch_ = a;
        return m;
    }

    std::size_t q() const noexcept { return trunk_.output_size(); }
    std::size_t num_branches() const noexcept { return branches_.size(); }
    std::size_t num_params() const noexcept { return static_cast<std::size_t>(params_.size()); }
    std::size_t branch_params(std::size_t b) const { return branches_.at(b).num_params(); }
    std::size_t trunk_params() const noexcept { return trunk_.num_params(); }
    const nn::Network& branch(std::size_t b) const { return branches_.at(b); }
    const nn::Network& trunk() const noexcept { return trunk_; }
    InputMode mode() const noexcept { return mode_; }
    LocationEncoding location() const noexcept { return location_; }
    const CylindricalGrid& grid() const noexcept { return grid_; }
    const ArchConfig& arch() const noexcept { return arch_; }

    nn::Vector& params() noexcept { return params_; }
    const nn::Vector& params() const noexcept { return params_; }
    std::vector<BranchScaler>& scalers() noexcept { return scalers_; }
    const std::vector<BranchScaler>& scalers() const noexcept { return scalers_; }

    /// Xavier weights and zero biases, branch by branch, then the trunk.
    void init(std::uint64_t seed)
    {
        std::mt19937_64 rng(seed);
        for (std::size_t b = 0; b < branches_.size(); ++b) branches_[b].init(params_.data() + offsets_[b], rng);
        trunk_.init(params_.data() + offsets_.back(), rng);
    }

    /// Mean and population std of each branch over the given samples. A
    /// constant branch (e.g. an all-normotensive flag) keeps scale 1.
    void fit_scalers(const std::vector<const BranchInputs*>& inputs)
    {
        require(!inputs.empty(), ErrorKind::parameter, "cannot fit scalers on no samples");
        for (std::size_t b = 0; b < branches_.size(); ++b) {
            double sum = 0.0, sq = 0.0, n = 0.0;
            for (const auto* s : inputs)
                for (float v : (*s)[b]) {
                    sum += v;
                    sq += double(v) * v;
                    n += 1.0;
                }
            const double mean = sum / n, var = std::max(0.0, sq / n - mean * mean);
            const double sd = std::sqrt(var);
            scalers_[b] = sd > 1e-12 ? BranchScaler{mean, sd} : BranchScaler{mean, 1.0};
        }
    }

    /// Standardized branch matrices (dim_b × N).
    std::vector<nn::Matrix> branch_matrices(const std::vector<const BranchInputs*>& inputs) const
    {
        std::vector<nn::Matrix> out;
        const auto N = static_cast<Eigen::Index>(inputs.size());
        for (std::size_t b = 0; b < branches_.size(); ++b) {
            const std::size_t d = branches_[b].input_size();
            nn::Matrix m(static_cast<Eigen::Index>(d), N);
            const double mu = scalers_[b].mean, inv = 1.0 / scalers_[b].scale;
            for (Eigen::Index i = 0; i < N; ++i) {
                const auto& v = (*inputs[static_cast<std::size_t>(i)]).at(b);
                require(v.size() == d, ErrorKind::structural,
                        "branch " + std::to_string(b) + " expects " + std::to_string(d) + " inputs, got " +
                            std::to_string(v.size()));
                for (std::size_t k = 0; k < d; ++k) m(static_cast<Eigen::Index>(k), i) = (v[k] - mu) * inv;
            }
            out.push_back(std::move(m));
        }
        return out;
    }

    void check_inputs(const std::vector<nn::Matrix>& x) const
    {
        require(x.size() == branches_.size(), ErrorKind::structural,
                "model has " + std::to_string(branches_.size()) + " branches, got " + std::to_string(x.size()) +
                    " inputs");
    }

    /// Predictions (P × N) for branch inputs x and trunk points y (3 × P).
    nn::Matrix forward(const double* theta, const std::vector<nn::Matrix>& x, const nn::Matrix& y) const
    {
        check_inputs(x);
        nn::Matrix b = branches_[0].forward(theta + offsets_[0], x[0]);
        for (std::size_t k = 1; k < branches_.size(); ++k)
            b.array() *= branches_[k].forward(theta + offsets_[k], x[k]).array();
        const nn::Matrix t = trunk_.forward(theta + offsets_.back(), y);
        return t.transpose() * b;
    }
    nn::Matrix forward(const std::vector<nn::Matrix>& x, const nn::Matrix& y) const
    {
        return forward(params_.data(), x, y);
    }

    /// Σ (prediction − target)² over samples and points; gradient optional.
    double loss(const double* theta, const std::vector<nn::Matrix>& x, const nn::Matrix& y,
                const nn::Matrix& target, double* grad = nullptr) const
    {
        check_inputs(x);
        const std::size_t nb = branches_.size();
        std::vector<nn::NetworkCache> caches(nb);
        std::vector<nn::Matrix> outs(nb);
        for (std::size_t k = 0; k < nb; ++k)
            outs[k] = branches_[k].forward(theta + offsets_[k], x[k], grad ? &caches[k] : nullptr);
        nn::NetworkCache tcache;
        const nn::Matrix t = trunk_.forward(theta + offsets_.back(), y, grad ? &tcache : nullptr);

        // prefix[k] = Π_{j<k} outs_j, so b = prefix[nb]
        std::vector<nn::Matrix> prefix(nb + 1);
        prefix[0] = nn::Matrix::Ones(outs[0].rows(), outs[0].cols());
        for (std::size_t k = 0; k < nb; ++k) prefix[k + 1] = prefix[k].cwiseProduct(outs[k]);
        const nn::Matrix& b = prefix[nb];

        require(target.rows() == t.cols() && target.cols() == b.cols(), ErrorKind::structural,
                "target must be (points × samples)");
        const nn::Matrix r = t.transpose() * b - target;
        const double L = r.squaredNorm();
        if (!grad) return L;

        const nn::Matrix dpred = 2.0 * r;
        const nn::Matrix db = t * dpred;
        trunk_.backward(theta + offsets_.back(), tcache, b * dpred.transpose(), grad + offsets_.back());
        nn::Matrix suffix = nn::Matrix::Ones(b.rows(), b.cols());
        for (std::size_t k = nb; k-- > 0;) {
            branches_[k].backward(theta + offsets_[k], caches[k], db.cwiseProduct(prefix[k]).cwiseProduct(suffix),
                                  grad + offsets_[k]);
            suffix.array() *= outs[k].array();
        }
        return L;
    }

    io::Json topology() const
    {
        io::Json br = io::Json::array();
        for (const auto& n : branches_) br.push_back(n.to_json());
        io::Json sc = io::Json::array();
        for (const auto& s : scalers_) sc.push_back({s.mean, s.scale});
        return {{"mode", to_string(mode_)},
                {"location_encoding", location_ == LocationEncoding::trig ? "trig" : "distance"},
                {"grid", grid_to_json(grid_)},
                {"arch", arch_.to_json()},
                {"q", q()},
                {"branches", br},
                {"trunk", trunk_.to_json()},
                {"scalers", sc},
                {"param_count", num_params()}};
    }

    static DeepONet from_topology(const io::Json& j)
    {
        std::vector<nn::Network> br;
        for (const auto& b : j.at("branches")) br.push_back(nn::Network::from_json(b));
        DeepONet m(std::move(br), nn::Network::from_json(j.at("trunk")));
        m.mode_ = input_mode_from_string(j.at("mode").get<std::string>());
        m.location_ = location_encoding_from_string(j.at("location_encoding").get<std::string>());
        m.grid_ = grid_from_json(j.at("grid"));
        m.arch_ = ArchConfig::from_json(j.at("arch"));
        const auto& sc = j.at("scalers");
        require(sc.size() == m.branches_.size(), ErrorKind::format, "scaler count does not match branches");
        for (std::size_t b = 0; b < sc.size(); ++b) m.scalers_[b] = {sc[b].at(0).get<double>(), sc[b].at(1).get<double>()};
        require(j.at("param_count").get<std::size_t>() == m.num_params(), ErrorKind::format,
                "checkpoint parameter count does not match topology");
        return m;
    }

private:
    std::vector<nn::Network> branches_;
    nn::Network trunk_;
    std::vector<std::size_t> offsets_;  // branch offsets, then the trunk
    nn::Vector params_;
    std::vector<BranchScaler> scalers_;
    InputMode mode_ = InputMode::image;
    LocationEncoding location_ = LocationEncoding::trig;
    CylindricalGrid grid_{};
    ArchConfig arch_{};
};

/// Trunk input (cos θ, sin θ, z/l_o) for arbitrary points.
inline nn::Matrix trunk_points(const std::vector<std::array<double, 3>>& pts)
{
    nn::Matrix y(3, static_cast<Eigen::Index>(pts.size()));
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (int r = 0; r < 3; ++r) y(r, static_cast<Eigen::Index>(i)) = pts[i][static_cast<std::size_t>(r)];
    return y;
}

inline std::array<double, 3> query_point(double theta, double z, double length)
{
    return {std::cos(theta), std::sin(theta), z / length};
}

/// Field predicted for one sample; clamped to [0,1] unless `raw`.
inline std::vector<double> predict_field(const DeepONet& m, const BranchInputs& inputs,
                                         const std::vector<std::array<double, 3>>& pts, bool raw = false)
{
    const nn::Matrix p = m.forward(m.branch_matrices({&inputs}), trunk_points(pts));
    std::vector<double> out(pts.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double v = p(static_cast<Eigen::Index>(i), 0);
        out[i] = raw ? v : std::clamp(v, 0.0, 1.0);
    }
    return out;
}

// ------------------------------------------------------------------ checkpoint

inline constexpr std::string_view checkpoint_magic = "TAACKPT1";

inline std::string encode_checkpoint(const DeepONet& m, const io::Json& extra = io::Json::object())
{
    io::Json h{{"format", "taa-checkpoint"}, {"version", 1}, {"topology", m.topology()}, {"info", extra}};
    std::string payload;
    io::append_f64(payload, std::span<const double>(m.params().data(), m.num_params()));
    return io::encode_framed(checkpoint_magic, h, payload);
}

inline DeepONet decode_checkpoint(std::string_view bytes, io::Json* info = nullptr)
{
    const auto f = io::decode_framed(bytes, checkpoint_magic);
    require(f.header.value("version", 0) == 1, ErrorKind::format, "unsupported checkpoint version");
    DeepONet m;
    try {
        m = DeepONet::from_topology(f.header.at("topology"));
    } catch (const io::Json::exception& e) {
        fail(ErrorKind::format, std::string("bad checkpoint topology: ") + e.what());
    }
    require(f.payload.size() == 8 * m.num_params(), ErrorKind::format, "checkpoint parameter block size mismatch");
    const auto v = io::load_f64(f.payload, 0, m.num_params());
    std::copy(v.begin(), v.end(), m.params().data());
    if (info) *info = f.header.value("info", io::Json::object());
    return m;
}

inline void write_checkpoint(const std::filesystem::path& p, const DeepONet& m, const io::Json& extra = io::Json::object())
{
    io::write_file(p, encode_checkpoint(m, extra));
}

inline DeepONet read_checkpoint(const std::filesystem::path& p, io::Json* info = nullptr)
{
    return decode_checkpoint(io::read_file(p), info);
}

} // namespace taa
