#pragma once

#include <cstdint>
#include <functional>

#include "fedup/unlearn.hpp"

namespace fedup {

struct RetrainConfig {
    std::uint64_t seed = 0;
    int max_rounds = 100;
    double target_test_acc = 1.0;  // reference accuracy the retrain must reach
    double epsilon = 0.01;
    Weighting weighting = Weighting::uniform;
    const Dataset* test_set = nullptr;
};

struct RetrainResult {
    ModelParams model;
    int r_star = 0;
    bool converged = false;
    double final_test_acc = 0.0;
};

// Reference baseline: fresh model trained with the remaining clients until
// the test accuracy is within epsilon of target_test_acc, capped at
// max_rounds. r_star is the round count used.
RetrainResult retrain_from_scratch(const std::vector<Client>& clients,
                                   const ModelParams& fresh_init, const RetrainConfig& cfg);

// Uniform random mask with the same per-layer quota as the unlearning mask.
UnlearnMask random_mask(const ModelParams& model, double p, std::uint64_t seed);

// Top ceil(p*n) weights per prunable layer by |avg_malicious| magnitude.
UnlearnMask malicious_magnitude_mask(const ModelParams& avg_malicious, double p);

// Negates the first prunable layer's weights; everything else bit-identical.
ModelParams negate_first_layer(const ModelParams& model);

// Keeps training without the removed clients and without any pruning.
ServerState natural_forgetting(ServerState state, const std::vector<Client>& remaining,
                               int rounds, std::uint64_t seed,
                               const std::function<void(const ServerState&)>& on_round = {});

}  // namespace fedup
