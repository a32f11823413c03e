#pragma once

#include <cstdint>
#include <vector>

#include "fedup/dataset.hpp"

namespace fedup {

enum class PartitionScheme { iid, dirichlet };

struct PartitionPlan {
    int client_count = 0;
    PartitionScheme scheme = PartitionScheme::iid;
    double alpha = 1.0;
    std::uint64_t seed = 0;
    std::vector<std::vector<std::size_t>> assignment;
};

// IID: uniform shuffle, equal split, remainder to the lowest client ids.
// Dirichlet: per class, proportions ~ Dir(alpha) over clients; any emptied
// client is repaired by stealing one sample from the largest client.
PartitionPlan partition(const Dataset& d, PartitionScheme scheme, int client_count, double alpha,
                        std::uint64_t seed);

}  // namespace fedup
