#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <vector>

#include "fedup/fl.hpp"

namespace fedup {

// Per-layer sets of flat weight indices to zero. Only dense and conv2d
// layers ever carry entries; indices are sorted and unique, exactly
// ceil(P * layer_weight_count) of them per prunable layer.
struct UnlearnMask {
    struct LayerMask {
        std::size_t layer_index = 0;
        std::vector<std::uint32_t> indices;
    };
    std::vector<LayerMask> layers;
    std::size_t total_indices() const;
};

struct PruningHeuristicConfig {
    double p_min = 0.01;
    double p_max = 0.15;
    double gamma = 5.0;
    double sim_min = 0.5;
    double sim_max = 1.0;
    void validate() const;
};

// Minimum round gap between consecutive unlearning executions. Detections
// arriving while disabled accumulate and fire together.
struct RateLimiter {
    int threshold_rounds = 10;
    std::optional<int> last_unlearn_round;
    std::set<int> pending;
};

struct RateLimiterStep {
    RateLimiter limiter;
    bool fire = false;
    std::set<int> to_unlearn;
};

RateLimiterStep rate_limiter_step(RateLimiter limiter, int round,
                                  const std::set<int>& new_detections);

struct RecoveryPlan {
    int r_star = 0;
    double p = 0.0;
    int actual_rounds_used = 0;
    int bound() const;  // ceil(r_star * p), recomputed on each call
};

int recovery_bound(int r_star, double p);

// Ranks each prunable layer's weights by squared benign/malicious mean
// difference scaled by the magnitude of the previous global weight, then
// selects the top ceil(P * n) per layer, ties to the lower flat index.
// signed_rank keeps the raw signed product instead of the magnitude.
UnlearnMask generate_mask(const std::vector<ClientUpdate>& local_updates,
                          const std::set<int>& malicious_ids, const ModelParams& global_prev,
                          double p, bool signed_rank = false);

// Copy of avg_benign with masked weights set to exactly 0.0; biases and
// non-prunable layers are untouched.
ModelParams apply_mask(const UnlearnMask& mask, const ModelParams& avg_benign);

// Affine map of the raw cosine similarity into [0, 1], clamped.
double normalize_similarity(double sim, const PruningHeuristicConfig& cfg);

// Pruning-rate curve: P(z) = p_max * z^gamma + p_min * (1 - z^gamma).
double pruning_rate(double z, const PruningHeuristicConfig& cfg);

// Mean pairwise last-layer cosine similarity over unordered benign pairs.
double estimate_similarity(const std::vector<ClientUpdate>& benign_updates);

struct UnlearnConfig {
    PruningHeuristicConfig heuristic;
    std::optional<double> p_override;  // wins over the similarity heuristic
    bool signed_rank = false;
    int r_star = 1;
    std::optional<int> recovery_rounds_override;  // exact budget, no early stop
    int max_recovery_rounds = 50;
    double epsilon_rec = 0.01;
    double pre_unlearn_test_acc = 0.0;
    const Dataset* test_set = nullptr;  // enables the early-stop rule
    std::uint64_t seed = 0;
    std::function<void(const ServerState&)> on_pruned;  // after mask application
    std::function<void(const ServerState&)> on_recovery_round;
};

struct UnlearnOutcome {
    ServerState state;
    RecoveryPlan plan;
    UnlearnMask mask;
    double p_used = 0.0;
    double similarity = 0.0;
    bool executed = false;
};

// Full unlearning step: averages the last round's benign and malicious
// updates, prunes avg_benign with the generated mask, then runs recovery
// rounds with the remaining clients until the test accuracy is back within
// epsilon_rec of the pre-unlearn level or the recovery bound is spent.
// Callers drop the unlearned clients from their roster afterwards.
UnlearnOutcome unlearn_and_recover(ServerState state, const std::vector<Client>& clients,
                                   const std::set<int>& to_unlearn, const UnlearnConfig& cfg);

}  // namespace fedup
