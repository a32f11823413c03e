#pragma once

#include <cstdint>
#include <vector>

#include "fedup/dataset.hpp"

namespace fedup {

// Trigger stamped onto poisoned inputs. Image datasets get a block x block
// square of sentinel values in the bottom-right corner (all channels);
// vector datasets get the trailing feature_count features set to the
// sentinel, unless explicit feature_indices are given.
struct TriggerSpec {
    int block = 3;
    int feature_count = 3;
    std::vector<int> feature_indices;
    float sentinel = 1.0f;
};

enum class AttackKind { none, label_flip, backdoor };

struct AttackSpec {
    AttackKind kind = AttackKind::none;
    double poison_fraction = 0.10;
    int source_class = 0;  // label_flip only
    int target_class = 1;
    TriggerSpec trigger;  // backdoor only
};

void validate_attack(const AttackSpec& spec);

// Relabels floor(poison_fraction * n) seeded source-class samples to the
// target class (all of them when fewer exist). No source samples: returns
// the dataset unchanged; callers emit the warning event.
Dataset apply_label_flip(const Dataset& client_dataset, const AttackSpec& spec,
                         std::uint64_t seed);

// Stamps the trigger on floor(poison_fraction * n) seeded samples and
// relabels them to the target class.
Dataset apply_backdoor(const Dataset& client_dataset, const AttackSpec& spec,
                       std::uint64_t seed);

// Every sample triggered and relabeled; used only for attack-success
// evaluation.
Dataset make_triggered_testset(const Dataset& clean_testset, const AttackSpec& spec);

}  // namespace fedup
