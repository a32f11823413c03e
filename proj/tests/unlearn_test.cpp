#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "fedup/checkpoint.hpp"
#include "fedup/errors.hpp"
#include "fedup/partition.hpp"
#include "fedup/rng.hpp"
#include "fedup/unlearn.hpp"
#include "oracles.hpp"

using namespace fedup;

namespace {

ModelParams weights_model(std::vector<float> w, LayerKind kind = LayerKind::dense) {
    ModelParams m;
    LayerParams l;
    l.kind = kind;
    if (kind == LayerKind::other) {
        l.shape = {static_cast<std::uint32_t>(w.size())};
        l.biases.assign(w.size(), 0.0f);
    } else {
        l.shape = {1, static_cast<std::uint32_t>(w.size())};
        l.biases = {0.0f};
    }
    l.weights = std::move(w);
    m.layers.push_back(std::move(l));
    return m;
}

ClientUpdate update_of(int id, std::vector<float> w) {
    return ClientUpdate{id, weights_model(std::move(w)), 10, false};
}

// Worked single-layer scenario: one malicious client (id 2) against two
// benign ones whose mean is avg_benign.
std::vector<ClientUpdate> worked_updates() {
    // benign mean [0.6, -2.0, 0.1, 1.1]
    std::vector<ClientUpdate> ups;
    ups.push_back(update_of(0, {0.5f, -2.0f, 0.1f, 1.0f}));
    ups.push_back(update_of(1, {0.7f, -2.0f, 0.1f, 1.2f}));
    ups.push_back(update_of(2, {0.6f, -1.0f, 0.5f, 1.1f}));  // malicious
    return ups;
}

const ModelParams kWorkedGlobal = weights_model({0.5f, -2.0f, 0.1f, 1.0f});

std::vector<std::uint32_t> mask_layer_indices(const UnlearnMask& mask, std::size_t layer) {
    for (const auto& l : mask.layers)
        if (l.layer_index == layer) return l.indices;
    return {};
}

}  // namespace

TEST_CASE("generate_mask: worked example, P = 0.25 selects the contested weight") {
    const auto mask = generate_mask(worked_updates(), {2}, kWorkedGlobal, 0.25);
    CHECK(mask.layers.size() == 1);
    CHECK(mask_layer_indices(mask, 0) == std::vector<std::uint32_t>{1});
}

TEST_CASE("generate_mask: worked example, P = 0.5 adds the runner-up") {
    const auto mask = generate_mask(worked_updates(), {2}, kWorkedGlobal, 0.5);
    CHECK(mask_layer_indices(mask, 0) == std::vector<std::uint32_t>{1, 2});
}

TEST_CASE("generate_mask: all-equal averages tie-break to the lowest indices") {
    std::vector<ClientUpdate> ups;
    ups.push_back(update_of(0, {1.0f, 2.0f, 3.0f, 4.0f}));
    ups.push_back(update_of(1, {1.0f, 2.0f, 3.0f, 4.0f}));
    ups.push_back(update_of(2, {1.0f, 2.0f, 3.0f, 4.0f}));  // identical malicious
    const auto mask = generate_mask(ups, {2}, kWorkedGlobal, 0.5);
    CHECK(mask_layer_indices(mask, 0) == std::vector<std::uint32_t>{0, 1});
}

TEST_CASE("generate_mask: exact per-layer sparsity, biases and other layers untouched") {
    auto rng = make_rng(3);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto rand_model = [&](std::uint64_t) {
        ModelParams m = make_conv_net(1, 6, 6, 2, 3, 4, rng());
        LayerParams aff;
        aff.kind = LayerKind::other;
        aff.shape = {4};
        aff.weights = {1, 1, 1, 1};
        aff.biases = {0, 0, 0, 0};
        m.layers.push_back(std::move(aff));
        return m;
    };
    const auto global = rand_model(0);
    std::vector<ClientUpdate> ups;
    for (int i = 0; i < 5; ++i) {
        ClientUpdate u{i, global, 10, false};
        for (auto& l : u.params.layers)
            for (auto& w : l.weights) w += static_cast<float>(0.1 * normal(rng));
        ups.push_back(std::move(u));
    }
    const double p = 0.3;
    const auto mask = generate_mask(ups, {1, 4}, global, p);
    CHECK(mask.layers.size() == 2);  // conv + dense head only, never the affine layer
    for (const auto& lm : mask.layers) {
        const auto& layer = global.layers[lm.layer_index];
        CHECK(layer.prunable());
        const auto expected =
            static_cast<std::size_t>(std::ceil(p * static_cast<double>(layer.weights.size())));
        CHECK(lm.indices.size() == expected);
        // sorted, unique, in bounds
        for (std::size_t k = 0; k < lm.indices.size(); ++k) {
            CHECK(lm.indices[k] < layer.weights.size());
            if (k > 0) CHECK(lm.indices[k] > lm.indices[k - 1]);
        }
    }
}

TEST_CASE("generate_mask: equals the full-sort oracle on 100 seeded layers") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        auto rng = make_rng(seed);
        std::uniform_int_distribution<int> size_dist(5, 10000);
        std::normal_distribution<double> normal(0.0, 1.0);
        const std::size_t n = static_cast<std::size_t>(size_dist(rng));
        std::vector<float> global(n), benign(n), malicious(n);
        for (std::size_t j = 0; j < n; ++j) {
            global[j] = static_cast<float>(normal(rng));
            benign[j] = static_cast<float>(normal(rng));
            malicious[j] = static_cast<float>(normal(rng));
        }
        std::uniform_real_distribution<double> p_dist(0.01, 1.0);
        const double p = p_dist(rng);

        std::vector<ClientUpdate> ups;
        ups.push_back(update_of(0, benign));
        ups.push_back(update_of(1, benign));
        ups.push_back(update_of(2, malicious));
        const auto mask = generate_mask(ups, {2}, weights_model(global), p);

        std::vector<double> rank(n);
        for (std::size_t j = 0; j < n; ++j) {
            const double diff = static_cast<double>(malicious[j]) - static_cast<double>(benign[j]);
            rank[j] = diff * diff * std::fabs(static_cast<double>(global[j]));
        }
        const std::size_t k =
            static_cast<std::size_t>(std::ceil(p * static_cast<double>(n)));
        CHECK(mask_layer_indices(mask, 0) == oracle::top_k_full_sort(rank, k));
    }
}

TEST_CASE("generate_mask: shift invariance of the benign/malicious difference") {
    auto rng = make_rng(17);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 24;
        std::vector<float> global(n), benign(n), malicious(n), benign_s(n), malicious_s(n);
        const float shift = static_cast<float>(normal(rng));
        for (std::size_t j = 0; j < n; ++j) {
            global[j] = static_cast<float>(normal(rng));
            benign[j] = static_cast<float>(normal(rng));
            malicious[j] = static_cast<float>(normal(rng));
            benign_s[j] = benign[j] + shift;
            malicious_s[j] = malicious[j] + shift;
        }
        std::vector<ClientUpdate> a{update_of(0, benign), update_of(1, benign),
                                    update_of(2, malicious)};
        std::vector<ClientUpdate> b{update_of(0, benign_s), update_of(1, benign_s),
                                    update_of(2, malicious_s)};
        const auto ma = generate_mask(a, {2}, weights_model(global), 0.25);
        const auto mb = generate_mask(b, {2}, weights_model(global), 0.25);
        CHECK(mask_layer_indices(ma, 0) == mask_layer_indices(mb, 0));
    }
}

TEST_CASE("generate_mask: positive scaling of ranks keeps the selected set") {
    // Scaling the previous global by c > 0 scales every rank by c as well;
    // the argmax set is invariant.
    auto rng = make_rng(23);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> scale_dist(0.01, 100.0);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 18;
        std::vector<float> global(n), scaled(n), benign(n), malicious(n);
        const float c = static_cast<float>(scale_dist(rng));
        for (std::size_t j = 0; j < n; ++j) {
            global[j] = static_cast<float>(normal(rng));
            scaled[j] = global[j] * c;
            benign[j] = static_cast<float>(normal(rng));
            malicious[j] = static_cast<float>(normal(rng));
        }
        std::vector<ClientUpdate> ups{update_of(0, benign), update_of(1, benign),
                                      update_of(2, malicious)};
        const auto ma = generate_mask(ups, {2}, weights_model(global), 0.3);
        const auto mb = generate_mask(ups, {2}, weights_model(scaled), 0.3);
        CHECK(mask_layer_indices(ma, 0) == mask_layer_indices(mb, 0));
    }
}

TEST_CASE("generate_mask: signed rank mode flips selection on negative weights") {
    // diff^2 identical everywhere; the signed product prefers positive
    // global weights while the magnitude form picks the largest |w|.
    std::vector<ClientUpdate> ups;
    ups.push_back(update_of(0, {0.0f, 0.0f}));
    ups.push_back(update_of(1, {0.0f, 0.0f}));
    ups.push_back(update_of(2, {1.0f, 1.0f}));
    const auto global = weights_model({0.5f, -3.0f});
    const auto magnitude = generate_mask(ups, {2}, global, 0.5, false);
    const auto signed_m = generate_mask(ups, {2}, global, 0.5, true);
    CHECK(mask_layer_indices(magnitude, 0) == std::vector<std::uint32_t>{1});
    CHECK(mask_layer_indices(signed_m, 0) == std::vector<std::uint32_t>{0});
}

TEST_CASE("generate_mask: refuses a malicious majority") {
    std::vector<ClientUpdate> ups{update_of(0, {1.0f}), update_of(1, {2.0f}),
                                  update_of(2, {3.0f}), update_of(3, {4.0f})};
    CHECK_THROWS_AS(generate_mask(ups, {0, 1}, weights_model({1.0f}), 0.5), UsageError);
    CHECK_THROWS_AS(generate_mask(ups, {0, 1, 2}, weights_model({1.0f}), 0.5), UsageError);
    CHECK_NOTHROW(generate_mask(ups, {0}, weights_model({1.0f}), 0.5));
}

TEST_CASE("generate_mask: argument validation") {
    auto ups = worked_updates();
    CHECK_THROWS_AS(generate_mask(ups, {}, kWorkedGlobal, 0.5), UsageError);
    CHECK_THROWS_AS(generate_mask(ups, {2}, kWorkedGlobal, 0.0), UsageError);
    CHECK_THROWS_AS(generate_mask(ups, {2}, kWorkedGlobal, 1.5), UsageError);
}

TEST_CASE("apply_mask: empty mask is the identity") {
    const auto m = make_mlp(6, {5}, 3, 77);
    const auto out = apply_mask(UnlearnMask{}, m);
    CHECK(serialize_model(out) == serialize_model(m));
}

TEST_CASE("apply_mask: zeroes exactly the masked entries") {
    const auto m = weights_model({0.6f, -2.0f, 0.1f, 1.1f});
    UnlearnMask mask;
    mask.layers.push_back({0, {1}});
    const auto out = apply_mask(mask, m);
    CHECK(out.layers[0].weights == std::vector<float>{0.6f, 0.0f, 0.1f, 1.1f});
    CHECK(out.layers[0].biases == m.layers[0].biases);
}

TEST_CASE("apply_mask: other-kind layers are never modified") {
    auto m = weights_model({0.5f, -0.5f, 0.25f}, LayerKind::other);
    UnlearnMask mask;
    mask.layers.push_back({0, {0, 1, 2}});
    const auto out = apply_mask(mask, m);
    CHECK(serialize_model(out) == serialize_model(m));
}

TEST_CASE("apply_mask: idempotent bit-exactly") {
    const auto m = make_mlp(8, {6}, 4, 5);
    std::vector<ClientUpdate> ups;
    for (int i = 0; i < 3; ++i) {
        ClientUpdate u{i, m, 10, false};
        auto rng = make_rng(static_cast<std::uint64_t>(i) + 40);
        std::normal_distribution<double> normal(0.0, 0.1);
        for (auto& l : u.params.layers)
            for (auto& w : l.weights) w += static_cast<float>(normal(rng));
        ups.push_back(std::move(u));
    }
    const auto mask = generate_mask(ups, {2}, m, 0.2);
    const auto once = apply_mask(mask, m);
    const auto twice = apply_mask(mask, once);
    CHECK(serialize_model(once) == serialize_model(twice));
}

TEST_CASE("apply_mask: out-of-bounds indices are an integrity error") {
    const auto m = weights_model({1.0f, 2.0f});
    UnlearnMask mask;
    mask.layers.push_back({0, {5}});
    CHECK_THROWS_AS(apply_mask(mask, m), IntegrityError);
    UnlearnMask bad_layer;
    bad_layer.layers.push_back({3, {0}});
    CHECK_THROWS_AS(apply_mask(bad_layer, m), IntegrityError);
}

TEST_CASE("normalize_similarity: paper operating points and clamping") {
    const PruningHeuristicConfig cfg;
    CHECK(normalize_similarity(0.99, cfg) == 0.98);
    CHECK(normalize_similarity(0.89, cfg) == 0.78);
    CHECK(normalize_similarity(0.5, cfg) == 0.0);
    CHECK(normalize_similarity(0.3, cfg) == 0.0);
    CHECK(normalize_similarity(1.0, cfg) == 1.0);
    CHECK(normalize_similarity(1.2, cfg) == 1.0);
}

TEST_CASE("pruning_rate: endpoints exact, operating points to 1e-8") {
    const PruningHeuristicConfig cfg;
    CHECK(pruning_rate(0.0, cfg) == 0.01);
    CHECK(pruning_rate(1.0, cfg) == 0.15);
    CHECK(std::fabs(pruning_rate(0.78, cfg) - 0.05042044) <= 1e-8);
    CHECK(std::fabs(pruning_rate(0.98, cfg) - 0.13654891) <= 1e-8);
}

TEST_CASE("pruning_rate: monotone nondecreasing and bounded on a 1000-point grid") {
    const PruningHeuristicConfig cfg;
    double prev = 0.0;
    for (int i = 0; i <= 1000; ++i) {
        const double z = static_cast<double>(i) / 1000.0;
        const double p = pruning_rate(z, cfg);
        CHECK(p >= cfg.p_min);
        CHECK(p <= cfg.p_max);
        if (i > 0) CHECK(p >= prev);
        prev = p;
    }
}

TEST_CASE("pruning_rate: config validation") {
    PruningHeuristicConfig bad;
    bad.p_min = 0.2;
    bad.p_max = 0.1;
    CHECK_THROWS_AS(pruning_rate(0.5, bad), ConfigError);
    PruningHeuristicConfig bad2;
    bad2.gamma = 0.5;
    CHECK_THROWS_AS(pruning_rate(0.5, bad2), ConfigError);
    const PruningHeuristicConfig cfg;
    CHECK_THROWS_AS(pruning_rate(-0.1, cfg), UsageError);
    CHECK_THROWS_AS(pruning_rate(1.1, cfg), UsageError);
}

TEST_CASE("estimate_similarity: trivial and oracle cases") {
    const auto base = make_mlp(6, {5}, 3, 11);
    std::vector<ClientUpdate> same{{0, base, 10, false}, {1, base, 10, false},
                                   {2, base, 10, false}};
    CHECK(estimate_similarity(same) == doctest::Approx(1.0));

    std::vector<ClientUpdate> ortho{update_of(0, {1.0f, 0.0f}), update_of(1, {0.0f, 1.0f})};
    CHECK(estimate_similarity(ortho) == doctest::Approx(0.0));

    // Three distinct updates: mean of the three pairwise cosines.
    std::vector<ClientUpdate> three{update_of(0, {1.0f, 0.2f}), update_of(1, {0.4f, 1.0f}),
                                    update_of(2, {-0.3f, 0.9f})};
    double expected = 0.0;
    int pairs = 0;
    for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j) {
            expected += last_layer_cosine_similarity(three[static_cast<std::size_t>(i)].params,
                                                     three[static_cast<std::size_t>(j)].params);
            ++pairs;
        }
    expected /= pairs;
    CHECK(estimate_similarity(three) == doctest::Approx(expected));

    std::vector<ClientUpdate> one{update_of(0, {1.0f})};
    CHECK_THROWS_AS(estimate_similarity(one), UsageError);
}

TEST_CASE("rate_limiter: first detection fires immediately") {
    RateLimiter rl;
    const auto step = rate_limiter_step(rl, 7, {3});
    CHECK(step.fire);
    CHECK(step.to_unlearn == std::set<int>{3});
    CHECK(step.limiter.pending.empty());
    CHECK(step.limiter.last_unlearn_round == 7);
}

TEST_CASE("rate_limiter: accumulates within the window, fires at the threshold") {
    RateLimiter rl;
    rl.threshold_rounds = 10;
    rl.last_unlearn_round = 5;
    auto s9 = rate_limiter_step(rl, 9, {1});
    CHECK_FALSE(s9.fire);
    auto s12 = rate_limiter_step(s9.limiter, 12, {2});
    CHECK_FALSE(s12.fire);
    auto s14 = rate_limiter_step(s12.limiter, 14, {});
    CHECK_FALSE(s14.fire);
    auto s15 = rate_limiter_step(s14.limiter, 15, {});
    CHECK(s15.fire);
    CHECK(s15.to_unlearn == std::set<int>{1, 2});
    CHECK(s15.limiter.last_unlearn_round == 15);
}

TEST_CASE("rate_limiter: empty pending never fires") {
    RateLimiter rl;
    for (int round = 1; round <= 50; ++round) {
        auto s = rate_limiter_step(rl, round, {});
        CHECK_FALSE(s.fire);
        rl = std::move(s.limiter);
    }
}

TEST_CASE("rate_limiter: 100-round saturation, gaps >= T and no drops") {
    RateLimiter rl;
    rl.threshold_rounds = 10;
    std::set<int> injected, unlearned;
    std::vector<int> fire_rounds;
    for (int round = 1; round <= 100; ++round) {
        std::set<int> det{round};  // one fresh detection per round
        injected.insert(round);
        auto s = rate_limiter_step(rl, round, det);
        rl = std::move(s.limiter);
        if (s.fire) {
            fire_rounds.push_back(round);
            unlearned.insert(s.to_unlearn.begin(), s.to_unlearn.end());
        }
    }
    // Drain the tail after injections stop.
    for (int round = 101; round <= 120 && !rl.pending.empty(); ++round) {
        auto s = rate_limiter_step(rl, round, {});
        rl = std::move(s.limiter);
        if (s.fire) {
            fire_rounds.push_back(round);
            unlearned.insert(s.to_unlearn.begin(), s.to_unlearn.end());
        }
    }
    for (std::size_t i = 1; i < fire_rounds.size(); ++i)
        CHECK(fire_rounds[i] - fire_rounds[i - 1] >= 10);
    CHECK(unlearned == injected);
    CHECK(rl.pending.empty());
}

TEST_CASE("recovery_bound: table operating points and degenerate full prune") {
    CHECK(recovery_bound(24, 0.10) == 3);
    CHECK(recovery_bound(37, 0.04) == 2);
    CHECK(recovery_bound(24, 1.0) == 24);
    CHECK_THROWS_AS(recovery_bound(0, 0.5), UsageError);
    CHECK_THROWS_AS(recovery_bound(10, 0.0), UsageError);
}

TEST_CASE("recovery_plan: bound is recomputed, not cached") {
    RecoveryPlan plan;
    plan.r_star = 24;
    plan.p = 0.10;
    CHECK(plan.bound() == 3);
    plan.p = 0.5;
    CHECK(plan.bound() == 12);
}

namespace {

struct UnlearnFixture {
    std::vector<Client> clients;
    ServerState st;
    Dataset test;

    explicit UnlearnFixture(std::uint64_t seed, int client_count = 5) {
        const auto data = gen_synthetic(4, 8, 40 * client_count, 0.5, seed);
        auto [train, test_set] = train_test_split(data, 0.2, seed + 1);
        test = std::move(test_set);
        const auto plan = partition(train, PartitionScheme::iid, client_count, 1.0, seed + 2);
        for (int i = 0; i < client_count; ++i) {
            Client c;
            c.id = i;
            c.dataset = train.subset(plan.assignment[static_cast<std::size_t>(i)]);
            c.local_epochs = 1;
            clients.push_back(std::move(c));
        }
        st.global_model = make_mlp(8, {10}, 4, seed + 3);
        st.last_round_start_global = st.global_model;
        for (int r = 0; r < 3; ++r) st = run_round(std::move(st), clients, seed + 10 + r);
    }
};

}  // namespace

TEST_CASE("unlearn_and_recover: empty set only logs") {
    UnlearnFixture fx(41);
    const auto before = serialize_model(fx.st.global_model);
    UnlearnConfig cfg;
    auto out = unlearn_and_recover(std::move(fx.st), fx.clients, {}, cfg);
    CHECK_FALSE(out.executed);
    CHECK(serialize_model(out.state.global_model) == before);
}

TEST_CASE("unlearn_and_recover: prunes exactly the per-layer quota into avg_benign") {
    UnlearnFixture fx(43);
    UnlearnConfig cfg;
    cfg.p_override = 0.2;
    cfg.r_star = 10;
    cfg.recovery_rounds_override = 0;  // stop before recovery to inspect the pruned model
    cfg.seed = 9;

    std::vector<ClientUpdate> eligible;
    for (const auto& u : fx.st.last_round_updates)
        if (!u.diverged) eligible.push_back(u);
    const auto avg_benign = avg_models(eligible, {0, 1, 2, 3});

    auto out = unlearn_and_recover(std::move(fx.st), fx.clients, {4}, cfg);
    CHECK(out.executed);
    CHECK(out.p_used == 0.2);
    for (const auto& lm : out.mask.layers) {
        const auto& pruned_layer = out.state.global_model.layers[lm.layer_index];
        const auto& source_layer = avg_benign.layers[lm.layer_index];
        const auto expected = static_cast<std::size_t>(
            std::ceil(0.2 * static_cast<double>(source_layer.weights.size())));
        CHECK(lm.indices.size() == expected);
        std::size_t zeros_added = 0;
        for (std::size_t j = 0; j < pruned_layer.weights.size(); ++j) {
            const bool masked =
                std::binary_search(lm.indices.begin(), lm.indices.end(),
                                   static_cast<std::uint32_t>(j));
            if (masked) {
                CHECK(pruned_layer.weights[j] == 0.0f);
                ++zeros_added;
            } else {
                CHECK(pruned_layer.weights[j] == source_layer.weights[j]);
            }
        }
        CHECK(zeros_added == expected);
    }
    CHECK(out.state.last_unlearn_round == 3);
}

TEST_CASE("unlearn_and_recover: recovery stops within the bound") {
    UnlearnFixture fx(47);
    UnlearnConfig cfg;
    cfg.p_override = 0.1;
    cfg.r_star = 20;  // bound = 2
    cfg.test_set = &fx.test;
    cfg.pre_unlearn_test_acc = evaluate(fx.st.global_model, fx.test);
    cfg.seed = 5;
    int observed = 0;
    cfg.on_recovery_round = [&observed](const ServerState&) { ++observed; };
    auto out = unlearn_and_recover(std::move(fx.st), fx.clients, {4}, cfg);
    CHECK(out.executed);
    CHECK(out.plan.bound() == 2);
    CHECK(out.plan.actual_rounds_used <= 2);
    CHECK(out.plan.actual_rounds_used == observed);
    CHECK(out.state.round_index == 3 + out.plan.actual_rounds_used);
}

TEST_CASE("unlearn_and_recover: unlearn log record carries the pinned fields") {
    UnlearnFixture fx(53);
    UnlearnConfig cfg;
    cfg.p_override = 0.25;
    cfg.r_star = 8;
    cfg.recovery_rounds_override = 0;
    auto out = unlearn_and_recover(std::move(fx.st), fx.clients, {3, 4}, cfg);
    bool found = false;
    for (const auto& line : out.state.log.lines) {
        if (line.find("event=unlearn") == std::string::npos) continue;
        found = true;
        CHECK(line.find("round=3") != std::string::npos);
        CHECK(line.find("P=0.25") != std::string::npos);
        CHECK(line.find("layers=2") != std::string::npos);
        CHECK(line.find("clients=3+4") != std::string::npos);
        CHECK(line.find("bound=2") != std::string::npos);
        CHECK(line.find("pruned=") != std::string::npos);
    }
    CHECK(found);
}

TEST_CASE("unlearn_and_recover: refuses when benign majority is lost") {
    UnlearnFixture fx(59, 4);
    UnlearnConfig cfg;
    cfg.p_override = 0.1;
    CHECK_THROWS_AS(unlearn_and_recover(std::move(fx.st), fx.clients, {0, 1}, cfg), UsageError);
}

TEST_CASE("unlearn_and_recover: missing last-round updates is a state error") {
    UnlearnFixture fx(61);
    fx.st.last_round_updates.clear();
    UnlearnConfig cfg;
    CHECK_THROWS_AS(unlearn_and_recover(std::move(fx.st), fx.clients, {4}, cfg), StateError);
}
