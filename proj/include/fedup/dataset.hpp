#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace fedup {

enum class SampleTag : std::uint8_t { clean = 0, label_flipped = 1, backdoored = 2 };

// In-memory dataset. Inputs are flat row-major per sample; sample_shape is
// {dim} for vector tasks or {channels, height, width} for image tasks.
struct Dataset {
    std::vector<int> sample_shape;
    int num_classes = 0;
    std::vector<float> inputs;
    std::vector<int> labels;
    std::vector<SampleTag> tags;

    std::size_t size() const { return labels.size(); }
    std::size_t sample_size() const;
    const float* sample(std::size_t i) const { return inputs.data() + i * sample_size(); }
    float* sample(std::size_t i) { return inputs.data() + i * sample_size(); }
    Dataset subset(std::span<const std::size_t> indices) const;
    void append(const Dataset& other);
};

struct Batch {
    std::vector<int> sample_shape;
    int count = 0;
    std::vector<float> inputs;
    std::vector<int> labels;
};

void validate_dataset(const Dataset& d);
Batch make_batch(const Dataset& d, std::span<const std::size_t> indices);

// Gaussian class clusters: one mean per class drawn from the seed, then
// per-sample noise scaled by cluster_spread. Deterministic in (args, seed).
Dataset gen_synthetic(int num_classes, int dim, int per_class_count, double cluster_spread,
                      std::uint64_t seed);

// Image-shaped variant with pixel values clamped to [0, 1].
Dataset gen_synthetic_image(int num_classes, int channels, int height, int width,
                            int per_class_count, double cluster_spread, std::uint64_t seed);

// Appends class-uncorrelated N(0,1) features to every sample of a vector
// dataset. Backdoor triggers placed on these trailing dims mimic image
// triggers that sit outside the class-signal pixels.
Dataset with_noise_features(const Dataset& d, int noise_dims, std::uint64_t seed);

std::pair<Dataset, Dataset> train_test_split(const Dataset& d, double test_fraction,
                                             std::uint64_t seed);

// IDX binary image/label pair (big-endian header, u8 payload scaled to [0,1]).
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

}  // namespace fedup
