#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fedup/dataset.hpp"
#include "fedup/model.hpp"
#include "fedup/network.hpp"

namespace fedup {

struct Client {
    int id = 0;
    Dataset dataset;
    bool is_malicious = false;  // ground truth; read only by the oracle detector and metrics
    int local_epochs = 1;
    AdamConfig opt;
    int batch_size = 32;
};

struct ClientUpdate {
    int client_id = 0;
    ModelParams params;
    std::size_t sample_count = 0;
    bool diverged = false;  // excluded from aggregation when set
};

// Structured text log: one line per event,
// `round=<n> event=<name> detail=<k=v,...>`.
struct EventLog {
    std::vector<std::string> lines;
    void append(int round, const std::string& event, const std::string& detail = "");
    void append_raw(std::string line) { lines.push_back(std::move(line)); }
};

enum class Weighting { uniform, by_sample_count };

// Server-side state. Only ever holds the most recent round of client
// updates plus the global model that round started from; that pair is the
// entire storage footprint of the unlearning scheme.
struct ServerState {
    ModelParams global_model;
    ModelParams last_round_start_global;
    int round_index = 0;
    std::vector<ClientUpdate> last_round_updates;
    std::set<int> pending_detections;  // detected, excluded from aggregation
    std::optional<int> last_unlearn_round;
    std::uint64_t storage_bytes = 0;
    Weighting weighting = Weighting::uniform;
    EventLog log;
};

// Local training: a copy of the global model trained for local_epochs over
// seeded mini-batches. Numerical divergence flags the update instead of
// throwing.
ClientUpdate local_train(const Client& client, const ModelParams& global, std::uint64_t seed);

// Per-weight weighted mean, accumulated in ascending client-id order.
ModelParams fedavg(const std::vector<ClientUpdate>& updates, Weighting weighting);

// Uniform per-weight mean over a subset of client ids.
ModelParams avg_models(const std::vector<ClientUpdate>& updates, const std::set<int>& subset);

// One full round: train every client, retain exactly that round's updates,
// aggregate the eligible ones, bump the round index. Aborts (state
// unchanged except the log) when no eligible update remains.
ServerState run_round(ServerState state, const std::vector<Client>& clients,
                      std::uint64_t seed);

}  // namespace fedup
