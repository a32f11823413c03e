#include "fedup/model.hpp"

#include <cmath>
#include <string>

#include "fedup/errors.hpp"
#include "fedup/rng.hpp"

namespace fedup {

namespace {

std::size_t shape_product(const std::vector<std::uint32_t>& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::size_t expected_bias_count(const LayerParams& l) {
    switch (l.kind) {
        case LayerKind::dense:
        case LayerKind::conv2d:
            return l.shape.empty() ? 0 : l.shape[0];
        case LayerKind::other:
            return l.shape.empty() ? 0 : l.shape[0];
    }
    return 0;
}

LayerParams glorot_dense(int in, int out, std::mt19937_64& rng) {
    LayerParams l;
    l.kind = LayerKind::dense;
    l.shape = {static_cast<std::uint32_t>(out), static_cast<std::uint32_t>(in)};
    l.weights.resize(static_cast<std::size_t>(out) * in);
    l.biases.assign(static_cast<std::size_t>(out), 0.0f);
    const double limit = std::sqrt(6.0 / (in + out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (auto& w : l.weights) w = static_cast<float>(dist(rng));
    return l;
}

}  // namespace

std::size_t ModelParams::total_weights() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weights.size();
    return n;
}

bool congruent(const ModelParams& a, const ModelParams& b) {
    if (a.layers.size() != b.layers.size()) return false;
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
        if (a.layers[i].kind != b.layers[i].kind) return false;
        if (a.layers[i].shape != b.layers[i].shape) return false;
    }
    return true;
}

void require_congruent(const ModelParams& a, const ModelParams& b, const char* where) {
    if (!congruent(a, b))
        throw IntegrityError(std::string(where) + ": models are not structurally congruent");
}

bool all_finite(const ModelParams& m) {
    for (const auto& l : m.layers) {
        for (float w : l.weights)
            if (!std::isfinite(w)) return false;
        for (float b : l.biases)
            if (!std::isfinite(b)) return false;
    }
    return true;
}

void validate_model(const ModelParams& m) {
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
        const auto& l = m.layers[i];
        const std::size_t expected_rank =
            l.kind == LayerKind::dense ? 2 : (l.kind == LayerKind::conv2d ? 4 : 1);
        if (l.shape.size() != expected_rank)
            throw IntegrityError("layer " + std::to_string(i) + ": bad shape rank");
        if (l.weights.size() != shape_product(l.shape))
            throw IntegrityError("layer " + std::to_string(i) +
                                 ": weight count does not match shape");
        if (l.biases.size() != expected_bias_count(l))
            throw IntegrityError("layer " + std::to_string(i) + ": bad bias count");
    }
}

ModelParams make_mlp(int input_dim, const std::vector<int>& hidden, int num_classes,
                     std::uint64_t seed) {
    if (input_dim < 1 || num_classes < 2) throw ConfigError("make_mlp: bad dimensions");
    auto rng = make_rng(seed);
    ModelParams m;
    int in = input_dim;
    for (int h : hidden) {
        if (h < 1) throw ConfigError("make_mlp: hidden size must be positive");
        m.layers.push_back(glorot_dense(in, h, rng));
        in = h;
    }
    m.layers.push_back(glorot_dense(in, num_classes, rng));
    return m;
}

ModelParams make_conv_net(int in_channels, int height, int width, int filters, int kernel,
                          int num_classes, std::uint64_t seed) {
    if (in_channels < 1 || filters < 1 || kernel < 1 || num_classes < 2)
        throw ConfigError("make_conv_net: bad dimensions");
    if (height < kernel || width < kernel)
        throw ConfigError("make_conv_net: kernel larger than input");
    auto rng = make_rng(seed);
    ModelParams m;

    LayerParams conv;
    conv.kind = LayerKind::conv2d;
    conv.shape = {static_cast<std::uint32_t>(filters), static_cast<std::uint32_t>(in_channels),
                  static_cast<std::uint32_t>(kernel), static_cast<std::uint32_t>(kernel)};
    conv.weights.resize(static_cast<std::size_t>(filters) * in_channels * kernel * kernel);
    conv.biases.assign(static_cast<std::size_t>(filters), 0.0f);
    const int fan_in = in_channels * kernel * kernel;
    const int fan_out = filters * kernel * kernel;
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (auto& w : conv.weights) w = static_cast<float>(dist(rng));
    m.layers.push_back(std::move(conv));

    const int oh = height - kernel + 1;
    const int ow = width - kernel + 1;
    m.layers.push_back(glorot_dense(filters * oh * ow, num_classes, rng));
    return m;
}

}  // namespace fedup
