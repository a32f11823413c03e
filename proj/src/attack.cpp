#include "fedup/attack.hpp"

#include <algorithm>
#include <numeric>

#include "fedup/errors.hpp"
#include "fedup/rng.hpp"

namespace fedup {

namespace {

void stamp_trigger(Dataset& d, std::size_t i, const TriggerSpec& t) {
    float* x = d.sample(i);
    if (d.sample_shape.size() == 3) {
        const int c = d.sample_shape[0], h = d.sample_shape[1], w = d.sample_shape[2];
        if (t.block < 1 || t.block > h || t.block > w)
            throw ConfigError("backdoor: trigger block outside image shape");
        for (int ch = 0; ch < c; ++ch)
            for (int y = h - t.block; y < h; ++y)
                for (int xx = w - t.block; xx < w; ++xx)
                    x[(static_cast<std::size_t>(ch) * h + y) * w + xx] = t.sentinel;
        return;
    }
    const int dim = static_cast<int>(d.sample_size());
    if (!t.feature_indices.empty()) {
        for (int f : t.feature_indices) {
            if (f < 0 || f >= dim) throw ConfigError("backdoor: trigger feature out of range");
            x[f] = t.sentinel;
        }
        return;
    }
    if (t.feature_count < 1 || t.feature_count > dim)
        throw ConfigError("backdoor: trigger feature count outside input shape");
    for (int f = dim - t.feature_count; f < dim; ++f) x[f] = t.sentinel;
}

}  // namespace

void validate_attack(const AttackSpec& spec) {
    if (spec.kind == AttackKind::none) return;
    if (spec.poison_fraction <= 0.0 || spec.poison_fraction > 1.0)
        throw ConfigError("attack: poison_fraction must be in (0, 1]");
    if (spec.kind == AttackKind::label_flip && spec.source_class == spec.target_class)
        throw ConfigError("attack: source_class must differ from target_class");
}

Dataset apply_label_flip(const Dataset& client_dataset, const AttackSpec& spec,
                         std::uint64_t seed) {
    if (spec.kind != AttackKind::label_flip)
        throw UsageError("apply_label_flip: spec kind is not label_flip");
    validate_attack(spec);

    Dataset out = client_dataset;
    std::vector<std::size_t> source_idx;
    for (std::size_t i = 0; i < out.size(); ++i)
        if (out.labels[i] == spec.source_class) source_idx.push_back(i);
    if (source_idx.empty()) return out;  // warning case, unchanged

    // Budget is measured over the whole client dataset, capped at the
    // available source-class samples.
    const std::size_t budget =
        static_cast<std::size_t>(spec.poison_fraction * static_cast<double>(out.size()));
    const std::size_t m = std::min(budget, source_idx.size());

    auto rng = make_rng(seed);
    std::shuffle(source_idx.begin(), source_idx.end(), rng);
    for (std::size_t j = 0; j < m; ++j) {
        out.labels[source_idx[j]] = spec.target_class;
        out.tags[source_idx[j]] = SampleTag::label_flipped;
    }
    return out;
}

Dataset apply_backdoor(const Dataset& client_dataset, const AttackSpec& spec,
                       std::uint64_t seed) {
    if (spec.kind != AttackKind::backdoor)
        throw UsageError("apply_backdoor: spec kind is not backdoor");
    validate_attack(spec);

    Dataset out = client_dataset;
    std::vector<std::size_t> idx(out.size());
    std::iota(idx.begin(), idx.end(), 0);
    auto rng = make_rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    const std::size_t m =
        static_cast<std::size_t>(spec.poison_fraction * static_cast<double>(out.size()));
    for (std::size_t j = 0; j < m; ++j) {
        stamp_trigger(out, idx[j], spec.trigger);
        out.labels[idx[j]] = spec.target_class;
        out.tags[idx[j]] = SampleTag::backdoored;
    }
    return out;
}

Dataset make_triggered_testset(const Dataset& clean_testset, const AttackSpec& spec) {
    if (spec.kind != AttackKind::backdoor)
        throw UsageError("make_triggered_testset: spec kind is not backdoor");
    Dataset out = clean_testset;
    for (std::size_t i = 0; i < out.size(); ++i) {
        stamp_trigger(out, i, spec.trigger);
        out.labels[i] = spec.target_class;
        out.tags[i] = SampleTag::backdoored;
    }
    return out;
}

}  // namespace fedup
