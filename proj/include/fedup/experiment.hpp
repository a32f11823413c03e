#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedup/config.hpp"

namespace fedup {

struct RoundMetrics {
    int round = 0;
    double test_acc = 0.0;
    double malicious_acc = 0.0;
    std::string event;
    std::uint64_t storage_bytes = 0;
};

struct StorageModel {
    std::uint64_t model_bytes = 0;
    std::uint64_t fedup_bytes = 0;       // (client_count + 1) * model_bytes
    std::uint64_t historical_bytes = 0;  // rounds * client_count * model_bytes
};

struct UnlearnSummary {
    int unlearn_round = 0;
    std::vector<int> clients;
    double p_used = 0.0;
    double similarity = 0.0;
    int r_star = 0;
    bool r_star_converged = false;
    double baseline_b = 0.0;
    int r_rec = 0;
    int bound = 0;
    std::size_t pruned_indices = 0;
    double post_prune_test_acc = 0.0;
    double post_prune_malicious_acc = 0.0;
};

struct RunSummary {
    double test_acc_before = 0.0;
    double test_acc_after = 0.0;
    double malicious_acc_before = 0.0;
    double malicious_acc_after = 0.0;
    bool unlearning_performed = false;
    std::vector<UnlearnSummary> unlearns;
    StorageModel storage;
};

struct MetricsReport {
    std::string run_id;
    std::uint64_t seed = 0;
    std::string strategy;
    std::vector<RoundMetrics> rounds;
    RunSummary summary;
    std::vector<std::string> event_log;
    ModelParams final_model;
};

// Executes the whole timeline: poisoned training rounds, oracle detection
// injections, rate-limited unlearning, recovery. Row count equals the
// scheduled rounds plus any recovery rounds.
MetricsReport run_experiment(const ExperimentConfig& cfg);

// Fraction of the evaluation set predicted as its (malicious) label.
double compute_attack_success(const ModelParams& model, const Dataset& eval_set);

// Closed-form storage accounting from the config; never measured.
StorageModel storage_report(const ExperimentConfig& cfg);
StorageModel storage_from(std::uint64_t model_bytes, int client_count, int rounds);

}  // namespace fedup
