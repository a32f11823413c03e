#include "fedup/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "fedup/errors.hpp"
#include "fedup/rng.hpp"

namespace fedup {

std::size_t Dataset::sample_size() const {
    std::size_t n = 1;
    for (int d : sample_shape) n *= static_cast<std::size_t>(d);
    return n;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
    Dataset out;
    out.sample_shape = sample_shape;
    out.num_classes = num_classes;
    const std::size_t ss = sample_size();
    out.inputs.reserve(indices.size() * ss);
    out.labels.reserve(indices.size());
    out.tags.reserve(indices.size());
    for (std::size_t i : indices) {
        if (i >= size()) throw UsageError("subset: index out of range");
        out.inputs.insert(out.inputs.end(), sample(i), sample(i) + ss);
        out.labels.push_back(labels[i]);
        out.tags.push_back(tags[i]);
    }
    return out;
}

void Dataset::append(const Dataset& other) {
    if (size() == 0 && inputs.empty()) {
        sample_shape = other.sample_shape;
        num_classes = other.num_classes;
    }
    if (sample_shape != other.sample_shape || num_classes != other.num_classes)
        throw UsageError("append: incompatible datasets");
    inputs.insert(inputs.end(), other.inputs.begin(), other.inputs.end());
    labels.insert(labels.end(), other.labels.begin(), other.labels.end());
    tags.insert(tags.end(), other.tags.begin(), other.tags.end());
}

void validate_dataset(const Dataset& d) {
    if (d.num_classes < 2) throw ConfigError("dataset: num_classes must be >= 2");
    if (d.tags.size() != d.labels.size()) throw IntegrityError("dataset: tags not congruent");
    if (d.inputs.size() != d.size() * d.sample_size())
        throw IntegrityError("dataset: input buffer size mismatch");
    for (int l : d.labels)
        if (l < 0 || l >= d.num_classes) throw UsageError("dataset: label out of range");
}

Batch make_batch(const Dataset& d, std::span<const std::size_t> indices) {
    if (indices.empty()) throw UsageError("make_batch: empty batch");
    Batch b;
    b.sample_shape = d.sample_shape;
    b.count = static_cast<int>(indices.size());
    const std::size_t ss = d.sample_size();
    b.inputs.reserve(indices.size() * ss);
    for (std::size_t i : indices) {
        b.inputs.insert(b.inputs.end(), d.sample(i), d.sample(i) + ss);
        const int label = d.labels[i];
        if (label < 0 || label >= d.num_classes) throw UsageError("make_batch: label out of range");
        b.labels.push_back(label);
    }
    return b;
}

Dataset gen_synthetic(int num_classes, int dim, int per_class_count, double cluster_spread,
                      std::uint64_t seed) {
    if (num_classes < 2) throw UsageError("gen_synthetic: num_classes must be >= 2");
    if (dim < 2) throw UsageError("gen_synthetic: dim must be >= 2");
    if (per_class_count < 1) throw UsageError("gen_synthetic: per_class_count must be >= 1");
    if (cluster_spread <= 0.0) throw UsageError("gen_synthetic: cluster_spread must be > 0");

    auto rng = make_rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    // Class means first so the sample stream does not perturb them.
    std::vector<double> means(static_cast<std::size_t>(num_classes) * dim);
    for (auto& m : means) m = normal(rng);

    Dataset d;
    d.sample_shape = {dim};
    d.num_classes = num_classes;
    const std::size_t n = static_cast<std::size_t>(num_classes) * per_class_count;
    d.inputs.reserve(n * dim);
    d.labels.reserve(n);
    for (int c = 0; c < num_classes; ++c) {
        for (int k = 0; k < per_class_count; ++k) {
            for (int j = 0; j < dim; ++j) {
                const double x = means[static_cast<std::size_t>(c) * dim + j] +
                                 cluster_spread * normal(rng);
                d.inputs.push_back(static_cast<float>(x));
            }
            d.labels.push_back(c);
        }
    }
    d.tags.assign(n, SampleTag::clean);
    return d;
}

Dataset gen_synthetic_image(int num_classes, int channels, int height, int width,
                            int per_class_count, double cluster_spread, std::uint64_t seed) {
    if (num_classes < 2) throw UsageError("gen_synthetic_image: num_classes must be >= 2");
    if (channels < 1 || height < 2 || width < 2)
        throw UsageError("gen_synthetic_image: bad image shape");
    if (per_class_count < 1) throw UsageError("gen_synthetic_image: per_class_count must be >= 1");
    if (cluster_spread <= 0.0) throw UsageError("gen_synthetic_image: cluster_spread must be > 0");

    auto rng = make_rng(seed);
    const std::size_t ss = static_cast<std::size_t>(channels) * height * width;
    std::uniform_real_distribution<double> mean_dist(0.25, 0.75);
    std::normal_distribution<double> normal(0.0, 1.0);

    std::vector<double> means(static_cast<std::size_t>(num_classes) * ss);
    for (auto& m : means) m = mean_dist(rng);

    Dataset d;
    d.sample_shape = {channels, height, width};
    d.num_classes = num_classes;
    const std::size_t n = static_cast<std::size_t>(num_classes) * per_class_count;
    d.inputs.reserve(n * ss);
    d.labels.reserve(n);
    for (int c = 0; c < num_classes; ++c) {
        for (int k = 0; k < per_class_count; ++k) {
            for (std::size_t j = 0; j < ss; ++j) {
                double x = means[static_cast<std::size_t>(c) * ss + j] +
                           cluster_spread * normal(rng);
                x = std::clamp(x, 0.0, 1.0);
                d.inputs.push_back(static_cast<float>(x));
            }
            d.labels.push_back(c);
        }
    }
    d.tags.assign(n, SampleTag::clean);
    return d;
}

Dataset with_noise_features(const Dataset& d, int noise_dims, std::uint64_t seed) {
    if (d.sample_shape.size() != 1)
        throw UsageError("with_noise_features: vector datasets only");
    if (noise_dims < 1) throw UsageError("with_noise_features: noise_dims must be >= 1");
    auto rng = make_rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Dataset out;
    out.sample_shape = {d.sample_shape[0] + noise_dims};
    out.num_classes = d.num_classes;
    out.labels = d.labels;
    out.tags = d.tags;
    out.inputs.reserve(d.size() * out.sample_size());
    const std::size_t ss = d.sample_size();
    for (std::size_t i = 0; i < d.size(); ++i) {
        out.inputs.insert(out.inputs.end(), d.sample(i), d.sample(i) + ss);
        for (int j = 0; j < noise_dims; ++j)
            out.inputs.push_back(static_cast<float>(normal(rng)));
    }
    return out;
}

std::pair<Dataset, Dataset> train_test_split(const Dataset& d, double test_fraction,
                                             std::uint64_t seed) {
    if (test_fraction < 0.0 || test_fraction >= 1.0)
        throw UsageError("train_test_split: test_fraction must be in [0, 1)");
    std::vector<std::size_t> idx(d.size());
    std::iota(idx.begin(), idx.end(), 0);
    auto rng = make_rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    const std::size_t n_test = static_cast<std::size_t>(test_fraction * d.size());
    std::vector<std::size_t> test_idx(idx.begin(), idx.begin() + n_test);
    std::vector<std::size_t> train_idx(idx.begin() + n_test, idx.end());
    return {d.subset(train_idx), d.subset(test_idx)};
}

namespace {

std::uint32_t read_be_u32(std::ifstream& f, const std::string& path) {
    unsigned char b[4];
    if (!f.read(reinterpret_cast<char*>(b), 4))
        throw IoError("idx: truncated header in " + path);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream fi(images_path, std::ios::binary);
    if (!fi) throw IoError("idx: cannot open " + images_path);
    std::ifstream fl(labels_path, std::ios::binary);
    if (!fl) throw IoError("idx: cannot open " + labels_path);

    const std::uint32_t img_magic = read_be_u32(fi, images_path);
    if (img_magic != 0x00000803u) throw IntegrityError("idx: bad image magic in " + images_path);
    const std::uint32_t n = read_be_u32(fi, images_path);
    const std::uint32_t h = read_be_u32(fi, images_path);
    const std::uint32_t w = read_be_u32(fi, images_path);

    const std::uint32_t lbl_magic = read_be_u32(fl, labels_path);
    if (lbl_magic != 0x00000801u) throw IntegrityError("idx: bad label magic in " + labels_path);
    const std::uint32_t nl = read_be_u32(fl, labels_path);
    if (nl != n) throw IntegrityError("idx: image/label count mismatch");

    Dataset d;
    d.sample_shape = {1, static_cast<int>(h), static_cast<int>(w)};
    const std::size_t ss = static_cast<std::size_t>(h) * w;
    d.inputs.resize(static_cast<std::size_t>(n) * ss);
    d.labels.resize(n);
    d.tags.assign(n, SampleTag::clean);

    std::vector<unsigned char> row(ss);
    int max_label = 0;
    for (std::uint32_t i = 0; i < n; ++i) {
        if (!fi.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(ss)))
            throw IoError("idx: truncated image payload in " + images_path);
        for (std::size_t j = 0; j < ss; ++j)
            d.inputs[i * ss + j] = static_cast<float>(row[j]) / 255.0f;
        unsigned char lab = 0;
        if (!fl.read(reinterpret_cast<char*>(&lab), 1))
            throw IoError("idx: truncated label payload in " + labels_path);
        d.labels[i] = lab;
        max_label = std::max(max_label, static_cast<int>(lab));
    }
    d.num_classes = max_label + 1;
    return d;
}

}  // namespace fedup
