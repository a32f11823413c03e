#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fedup/attack.hpp"
#include "fedup/model.hpp"
#include "fedup/partition.hpp"
#include "fedup/unlearn.hpp"

namespace fedup {

struct ModelSpec {
    enum class Arch { mlp, conv };
    Arch arch = Arch::mlp;
    std::vector<int> hidden = {64};  // mlp
    int filters = 8;                 // conv
    int kernel = 3;
};

struct DatasetSpec {
    enum class Kind { synthetic, synthetic_image, idx };
    Kind kind = Kind::synthetic;
    int classes = 10;
    int dim = 16;           // synthetic: total dims, noise_dims of them trailing noise
    int noise_dims = 0;
    int channels = 1;       // synthetic_image
    int height = 8;
    int width = 8;
    int per_class = 200;
    double spread = 0.5;
    double test_fraction = 0.2;
    std::string idx_images;  // idx
    std::string idx_labels;
};

struct PartitionSpec {
    PartitionScheme scheme = PartitionScheme::iid;
    double alpha = 1.0;
};

struct TrainingSpec {
    double learning_rate = 1e-3;
    int batch_size = 32;
    int local_epochs = 1;
    Weighting weighting = Weighting::uniform;
};

struct RetrainSpec {
    int max_rounds = 100;
    double epsilon = 0.01;
};

enum class Strategy {
    fedup,
    retrain,
    natural_forgetting,
    random_prune,
    malicious_magnitude_prune,
    weight_negation,
};

std::string strategy_name(Strategy s);
Strategy parse_strategy(const std::string& name);

// Full declarative description of one run. One seed determines every bit
// of the experiment.
struct ExperimentConfig {
    std::string name = "run";
    std::uint64_t seed = 1;
    int client_count = 10;
    std::vector<int> malicious_ids;  // resolved from malicious_fraction when empty
    std::optional<double> malicious_fraction;
    int total_rounds = 20;
    ModelSpec model;
    DatasetSpec dataset;
    PartitionSpec partition;
    AttackSpec attack;
    std::vector<std::pair<int, int>> detections;  // (round, client id), oracle schedule
    Strategy strategy = Strategy::fedup;
    PruningHeuristicConfig heuristic;
    std::optional<double> p_opt;
    bool signed_rank = false;
    int rate_limit_t = 10;
    int max_recovery_rounds = 50;
    std::optional<int> recovery_rounds_override;
    double epsilon_rec = 0.01;
    TrainingSpec training;
    RetrainSpec retrain;
    bool allow_majority_violation = false;

    std::vector<int> resolved_malicious_ids() const;
};

// Rejects invalid configs before any compute. Enforces the benign-majority
// bound on the malicious count unless allow_majority_violation is set.
void validate_config(const ExperimentConfig& cfg);

ExperimentConfig config_from_json_text(const std::string& text);
std::string config_to_json_text(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::string& path);

// Dotted-path override, e.g. "attack.poison_fraction=0.2".
void apply_override(ExperimentConfig& cfg, const std::string& key_equals_value);

ModelParams build_model(const ModelSpec& spec, const std::vector<int>& sample_shape,
                        int num_classes, std::uint64_t seed);
Dataset build_dataset(const DatasetSpec& spec, std::uint64_t seed);

}  // namespace fedup
