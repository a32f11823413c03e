#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include "fedup/attack.hpp"
#include "fedup/errors.hpp"
#include "fedup/network.hpp"
#include "fedup/partition.hpp"
#include "fedup/rng.hpp"

using namespace fedup;

namespace {

bool same_dataset(const Dataset& a, const Dataset& b) {
    return a.sample_shape == b.sample_shape && a.num_classes == b.num_classes &&
           a.inputs == b.inputs && a.labels == b.labels && a.tags == b.tags;
}

std::size_t count_tag(const Dataset& d, SampleTag t) {
    std::size_t n = 0;
    for (auto tag : d.tags)
        if (tag == t) ++n;
    return n;
}

void check_plan_invariants(const PartitionPlan& plan, std::size_t n) {
    std::vector<char> seen(n, 0);
    std::size_t total = 0;
    for (const auto& client : plan.assignment) {
        CHECK_FALSE(client.empty());
        for (std::size_t i : client) {
            REQUIRE(i < n);
            CHECK(seen[i] == 0);  // disjoint
            seen[i] = 1;
            ++total;
        }
    }
    CHECK(total == n);  // full coverage
}

AttackSpec flip_spec(double fraction = 0.10, int source = 1, int target = 2) {
    AttackSpec s;
    s.kind = AttackKind::label_flip;
    s.poison_fraction = fraction;
    s.source_class = source;
    s.target_class = target;
    return s;
}

AttackSpec backdoor_spec(double fraction = 0.10, int target = 0) {
    AttackSpec s;
    s.kind = AttackKind::backdoor;
    s.poison_fraction = fraction;
    s.target_class = target;
    s.trigger.block = 3;
    s.trigger.feature_count = 3;
    s.trigger.sentinel = 1.0f;
    return s;
}

}  // namespace

TEST_CASE("gen_synthetic: deterministic in the seed") {
    const auto a = gen_synthetic(4, 8, 20, 0.5, 99);
    const auto b = gen_synthetic(4, 8, 20, 0.5, 99);
    CHECK(same_dataset(a, b));
    const auto c = gen_synthetic(4, 8, 20, 0.5, 100);
    CHECK_FALSE(same_dataset(a, c));
}

TEST_CASE("gen_synthetic: vanishing spread is linearly separable") {
    // With spread ~ 0 every sample sits on its class mean; a linear
    // classifier fit on the data reaches accuracy 1.0.
    const auto d = gen_synthetic(5, 8, 30, 1e-6, 7);
    auto model = make_mlp(8, {}, 5, 7);  // single dense layer: linear classifier
    auto opt = OptimizerState::init(model);
    std::vector<std::size_t> idx(d.size());
    std::iota(idx.begin(), idx.end(), 0);
    const Batch b = make_batch(d, idx);
    for (int step = 0; step < 400; ++step) {
        auto r = train_step(model, opt, b);
        model = std::move(r.model);
        opt = std::move(r.opt);
    }
    CHECK(evaluate(model, d) == 1.0);
}

TEST_CASE("gen_synthetic: argument validation") {
    CHECK_THROWS_AS(gen_synthetic(1, 8, 10, 0.5, 1), UsageError);
    CHECK_THROWS_AS(gen_synthetic(3, 1, 10, 0.5, 1), UsageError);
    CHECK_THROWS_AS(gen_synthetic(3, 8, 0, 0.5, 1), UsageError);
    CHECK_THROWS_AS(gen_synthetic(3, 8, 10, 0.0, 1), UsageError);
    CHECK_THROWS_AS(gen_synthetic(3, 8, 10, -1.0, 1), UsageError);
}

TEST_CASE("train_test_split: sizes and determinism") {
    const auto d = gen_synthetic(4, 6, 25, 0.5, 3);
    auto [train1, test1] = train_test_split(d, 0.2, 11);
    auto [train2, test2] = train_test_split(d, 0.2, 11);
    CHECK(test1.size() == 20);
    CHECK(train1.size() == 80);
    CHECK(same_dataset(train1, train2));
    CHECK(same_dataset(test1, test2));
}

TEST_CASE("partition: iid split is equal with remainder to low ids") {
    const auto d = gen_synthetic(2, 4, 50, 0.5, 5);  // 100 samples
    const auto plan = partition(d, PartitionScheme::iid, 10, 1.0, 17);
    for (const auto& client : plan.assignment) CHECK(client.size() == 10);
    check_plan_invariants(plan, d.size());

    const auto d2 = gen_synthetic(2, 4, 51, 0.5, 5);  // 102 samples over 10 clients
    const auto plan2 = partition(d2, PartitionScheme::iid, 10, 1.0, 17);
    CHECK(plan2.assignment[0].size() == 11);
    CHECK(plan2.assignment[1].size() == 11);
    for (std::size_t i = 2; i < 10; ++i) CHECK(plan2.assignment[i].size() == 10);
}

TEST_CASE("partition: disjointness and coverage over 100 seeds") {
    const auto d = gen_synthetic(5, 4, 37, 0.5, 1);  // 185 samples, awkward size
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto scheme = seed % 2 == 0 ? PartitionScheme::iid : PartitionScheme::dirichlet;
        const double alpha = 0.3 + static_cast<double>(seed % 5);
        const int clients = 2 + static_cast<int>(seed % 9);
        const auto plan = partition(d, scheme, clients, alpha, seed);
        check_plan_invariants(plan, d.size());
    }
}

TEST_CASE("partition: dirichlet with huge alpha approaches iid") {
    // chi-squared of per-(client, class) counts against the uniform
    // expectation; dof = 99, the 0.999 critical value is ~149.
    const int classes = 10, clients = 10;
    const auto d = gen_synthetic(classes, 4, 200, 0.5, 2);  // 200 per class
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto plan = partition(d, PartitionScheme::dirichlet, clients, 1000.0, seed);
        double chi2 = 0.0;
        const double expected = 200.0 / clients;
        for (const auto& client : plan.assignment) {
            std::vector<int> hist(classes, 0);
            for (std::size_t i : client) hist[d.labels[i]] += 1;
            for (int c = 0; c < classes; ++c) {
                const double diff = hist[c] - expected;
                chi2 += diff * diff / expected;
            }
        }
        CHECK(chi2 < 149.0);
    }
}

TEST_CASE("partition: dirichlet alpha=1 is visibly heterogeneous") {
    const int classes = 10, clients = 10;
    const auto d = gen_synthetic(classes, 4, 200, 0.5, 2);
    int skewed_seeds = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto plan = partition(d, PartitionScheme::dirichlet, clients, 1.0, seed);
        double max_share = 0.0;
        for (const auto& client : plan.assignment) {
            std::vector<int> hist(classes, 0);
            for (std::size_t i : client) hist[d.labels[i]] += 1;
            for (int c = 0; c < classes; ++c)
                max_share = std::max(
                    max_share, static_cast<double>(hist[c]) / static_cast<double>(client.size()));
        }
        if (max_share > 0.2) ++skewed_seeds;
    }
    CHECK(skewed_seeds >= 8);
}

TEST_CASE("partition: empty-client repair keeps every client nonempty") {
    // Tiny alpha concentrates whole classes on single clients; with few
    // samples some clients would start empty.
    const auto d = gen_synthetic(2, 4, 6, 0.5, 3);  // 12 samples
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        const auto plan = partition(d, PartitionScheme::dirichlet, 8, 0.05, seed);
        check_plan_invariants(plan, d.size());
    }
}

TEST_CASE("partition: argument validation") {
    const auto d = gen_synthetic(2, 4, 5, 0.5, 1);  // 10 samples
    CHECK_THROWS_AS(partition(d, PartitionScheme::iid, 1, 1.0, 1), UsageError);
    CHECK_THROWS_AS(partition(d, PartitionScheme::iid, 11, 1.0, 1), UsageError);
    CHECK_THROWS_AS(partition(d, PartitionScheme::dirichlet, 2, 0.0, 1), UsageError);
}

TEST_CASE("apply_label_flip: budget over the whole client dataset") {
    // 100 samples, 30 of the source class, fraction 0.10: exactly 10 flips.
    Dataset d;
    d.sample_shape = {4};
    d.num_classes = 3;
    for (int i = 0; i < 100; ++i) {
        d.inputs.insert(d.inputs.end(), {0.1f, 0.2f, 0.3f, 0.4f});
        d.labels.push_back(i < 30 ? 1 : 0);
    }
    d.tags.assign(100, SampleTag::clean);

    const auto flipped = apply_label_flip(d, flip_spec(0.10, 1, 2), 5);
    CHECK(flipped.size() == d.size());
    CHECK(count_tag(flipped, SampleTag::label_flipped) == 10);
    std::size_t relabeled = 0;
    for (std::size_t i = 0; i < flipped.size(); ++i) {
        if (flipped.tags[i] == SampleTag::label_flipped) {
            CHECK(d.labels[i] == 1);
            CHECK(flipped.labels[i] == 2);
            ++relabeled;
        } else {
            CHECK(flipped.labels[i] == d.labels[i]);
        }
    }
    CHECK(relabeled == 10);
    CHECK(flipped.inputs == d.inputs);  // label flip never touches inputs
}

TEST_CASE("apply_label_flip: capped at the available source samples") {
    Dataset d;
    d.sample_shape = {2};
    d.num_classes = 3;
    for (int i = 0; i < 100; ++i) {
        d.inputs.insert(d.inputs.end(), {0.0f, 1.0f});
        d.labels.push_back(i < 3 ? 1 : 0);
    }
    d.tags.assign(100, SampleTag::clean);
    const auto flipped = apply_label_flip(d, flip_spec(0.10, 1, 2), 9);
    CHECK(count_tag(flipped, SampleTag::label_flipped) == 3);
}

TEST_CASE("apply_label_flip: no source samples leaves the dataset unchanged") {
    Dataset d;
    d.sample_shape = {2};
    d.num_classes = 3;
    for (int i = 0; i < 10; ++i) {
        d.inputs.insert(d.inputs.end(), {0.0f, 1.0f});
        d.labels.push_back(0);
    }
    d.tags.assign(10, SampleTag::clean);
    const auto flipped = apply_label_flip(d, flip_spec(0.10, 1, 2), 9);
    CHECK(same_dataset(flipped, d));
}

TEST_CASE("apply_label_flip: same seed selects the same index set") {
    const auto d = gen_synthetic(4, 6, 50, 0.5, 8);
    const auto a = apply_label_flip(d, flip_spec(0.10, 2, 3), 77);
    const auto b = apply_label_flip(d, flip_spec(0.10, 2, 3), 77);
    CHECK(same_dataset(a, b));
    const auto c = apply_label_flip(d, flip_spec(0.10, 2, 3), 78);
    CHECK_FALSE(same_dataset(a, c));
}

TEST_CASE("apply_backdoor: image trigger stamps exactly block*block pixels") {
    // 8x8 single-channel images with values bounded away from 1.0.
    Dataset d;
    d.sample_shape = {1, 8, 8};
    d.num_classes = 3;
    auto rng = make_rng(4);
    std::uniform_real_distribution<double> u(0.0, 0.9);
    for (int i = 0; i < 40; ++i) {
        for (int j = 0; j < 64; ++j) d.inputs.push_back(static_cast<float>(u(rng)));
        d.labels.push_back(i % 3);
    }
    d.tags.assign(40, SampleTag::clean);

    const auto poisoned = apply_backdoor(d, backdoor_spec(0.25, 0), 6);
    CHECK(count_tag(poisoned, SampleTag::backdoored) == 10);
    for (std::size_t i = 0; i < poisoned.size(); ++i) {
        if (poisoned.tags[i] != SampleTag::backdoored) continue;
        int at_max = 0;
        for (std::size_t j = 0; j < 64; ++j)
            if (poisoned.sample(i)[j] == 1.0f) ++at_max;
        CHECK(at_max == 9);
        CHECK(poisoned.labels[i] == 0);
        // bottom-right corner pixel specifically
        CHECK(poisoned.sample(i)[63] == 1.0f);
        CHECK(poisoned.sample(i)[0] != 1.0f);
    }
}

TEST_CASE("apply_backdoor: poison budget is floor(fraction * n)") {
    const auto d = gen_synthetic(4, 8, 50, 0.5, 3);  // 200 samples
    const auto poisoned = apply_backdoor(d, backdoor_spec(0.10, 1), 9);
    CHECK(count_tag(poisoned, SampleTag::backdoored) == 20);
}

TEST_CASE("apply_backdoor: reapplication is idempotent on inputs and labels") {
    const auto d = gen_synthetic(4, 8, 25, 0.5, 12);
    const auto spec = backdoor_spec(0.2, 2);
    const auto once = apply_backdoor(d, spec, 31);
    const auto twice = apply_backdoor(once, spec, 31);
    CHECK(twice.inputs == once.inputs);
    CHECK(twice.labels == once.labels);
}

TEST_CASE("apply_backdoor: trigger outside the input shape is a config error") {
    Dataset d;
    d.sample_shape = {1, 2, 2};
    d.num_classes = 2;
    d.inputs = {0, 0, 0, 0};
    d.labels = {0};
    d.tags = {SampleTag::clean};
    auto spec = backdoor_spec(1.0, 1);
    spec.trigger.block = 3;
    CHECK_THROWS_AS(apply_backdoor(d, spec, 1), ConfigError);

    Dataset v = gen_synthetic(2, 4, 4, 0.5, 1);
    auto vspec = backdoor_spec(1.0, 1);
    vspec.trigger.feature_count = 5;
    CHECK_THROWS_AS(apply_backdoor(v, vspec, 1), ConfigError);
}

TEST_CASE("make_triggered_testset: full coverage with target labels") {
    const auto d = gen_synthetic(5, 8, 30, 0.5, 21);
    const auto spec = backdoor_spec(0.1, 3);
    const auto triggered = make_triggered_testset(d, spec);
    CHECK(triggered.size() == d.size());
    CHECK(count_tag(triggered, SampleTag::backdoored) == d.size());
    for (std::size_t i = 0; i < triggered.size(); ++i) {
        CHECK(triggered.labels[i] == 3);
        for (int f = 5; f < 8; ++f) CHECK(triggered.sample(i)[f] == 1.0f);
    }
}

TEST_CASE("make_triggered_testset: non-backdoor spec is a usage error") {
    const auto d = gen_synthetic(3, 6, 10, 0.5, 2);
    CHECK_THROWS_AS(make_triggered_testset(d, flip_spec()), UsageError);
    AttackSpec none;
    CHECK_THROWS_AS(make_triggered_testset(d, none), UsageError);
}

TEST_CASE("make_triggered_testset: untrained model predicts near the class prior") {
    const auto d = gen_synthetic(10, 16, 40, 0.5, 33);
    const auto spec = backdoor_spec(0.1, 0);
    const auto triggered = make_triggered_testset(d, spec);
    const auto fresh = make_mlp(16, {32}, 10, 5);
    const double asr = evaluate(fresh, triggered);
    CHECK(asr == doctest::Approx(0.1).epsilon(1.5));  // within [0, ~0.25]
    CHECK(asr <= 0.35);
}

TEST_CASE("poisoning transforms preserve the sample count") {
    const auto d = gen_synthetic(4, 8, 25, 0.5, 12);
    CHECK(apply_label_flip(d, flip_spec(0.2, 0, 1), 3).size() == d.size());
    CHECK(apply_backdoor(d, backdoor_spec(0.2, 1), 3).size() == d.size());
    CHECK(make_triggered_testset(d, backdoor_spec(0.2, 1)).size() == d.size());
}

TEST_CASE("idx loader: round trip through the on-disk format") {
    // Write a 3-image 4x4 IDX pair by hand, then load it back.
    const std::string img_path = "/tmp/fedup_idx_images.bin";
    const std::string lbl_path = "/tmp/fedup_idx_labels.bin";
    {
        std::ofstream f(img_path, std::ios::binary | std::ios::trunc);
        const unsigned char header[] = {0, 0, 8, 3, 0, 0, 0, 3, 0, 0, 0, 4, 0, 0, 0, 4};
        f.write(reinterpret_cast<const char*>(header), sizeof(header));
        for (int i = 0; i < 3 * 16; ++i) {
            const unsigned char v = static_cast<unsigned char>(i * 5);
            f.write(reinterpret_cast<const char*>(&v), 1);
        }
    }
    {
        std::ofstream f(lbl_path, std::ios::binary | std::ios::trunc);
        const unsigned char header[] = {0, 0, 8, 1, 0, 0, 0, 3};
        f.write(reinterpret_cast<const char*>(header), sizeof(header));
        const unsigned char labels[] = {0, 2, 1};
        f.write(reinterpret_cast<const char*>(labels), 3);
    }
    const auto d = load_idx(img_path, lbl_path);
    CHECK(d.size() == 3);
    CHECK(d.sample_shape == std::vector<int>{1, 4, 4});
    CHECK(d.num_classes == 3);
    CHECK(d.labels == std::vector<int>{0, 2, 1});
    CHECK(d.sample(0)[0] == 0.0f);
    CHECK(d.sample(0)[1] == doctest::Approx(5.0 / 255.0));
    CHECK(d.sample(2)[15] == doctest::Approx(235.0 / 255.0));

    CHECK_THROWS_AS(load_idx("/tmp/does_not_exist_images.bin", lbl_path), IoError);
    CHECK_THROWS_AS(load_idx(lbl_path, lbl_path), IntegrityError);  // wrong magic
}
