#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace fedup {

enum class LayerKind : std::uint8_t { dense = 0, conv2d = 1, other = 2 };

// One layer's parameters. `shape` is the weight tensor shape:
//   dense   [out, in]                 biases sized out
//   conv2d  [out_ch, in_ch, kh, kw]   biases sized out_ch
//   other   [dim]                     elementwise affine, biases sized dim
// Weights are stored flat, row-major, as 32-bit floats. All math runs in
// 64-bit internally; float32 is only the at-rest representation.
struct LayerParams {
    LayerKind kind = LayerKind::dense;
    std::vector<std::uint32_t> shape;
    std::vector<float> weights;
    std::vector<float> biases;

    std::size_t weight_count() const { return weights.size(); }
    // Only dense and conv2d layers are ever pruned.
    bool prunable() const { return kind == LayerKind::dense || kind == LayerKind::conv2d; }
};

struct ModelParams {
    std::vector<LayerParams> layers;
    std::size_t total_weights() const;
};

// Structural congruence: same layer kinds, shapes and order. Models built
// from the same experiment config are always congruent.
bool congruent(const ModelParams& a, const ModelParams& b);
void require_congruent(const ModelParams& a, const ModelParams& b, const char* where);

bool all_finite(const ModelParams& m);

// Shape/size consistency; throws IntegrityError on violation.
void validate_model(const ModelParams& m);

// Builders. Weights are Glorot-uniform from the seed, biases zero.
ModelParams make_mlp(int input_dim, const std::vector<int>& hidden, int num_classes,
                     std::uint64_t seed);
ModelParams make_conv_net(int in_channels, int height, int width, int filters, int kernel,
                          int num_classes, std::uint64_t seed);

}  // namespace fedup
