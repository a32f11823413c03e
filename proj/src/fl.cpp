#include "fedup/fl.hpp"

#include <algorithm>
#include <numeric>

#include "fedup/checkpoint.hpp"
#include "fedup/errors.hpp"
#include "fedup/rng.hpp"

namespace fedup {

void EventLog::append(int round, const std::string& event, const std::string& detail) {
    std::string line = "round=" + std::to_string(round) + " event=" + event;
    if (!detail.empty()) line += " detail=" + detail;
    lines.push_back(std::move(line));
}

ClientUpdate local_train(const Client& client, const ModelParams& global, std::uint64_t seed) {
    if (client.dataset.size() == 0) throw UsageError("local_train: client dataset is empty");
    ClientUpdate update{client.id, global, client.dataset.size(), false};
    if (client.local_epochs <= 0) return update;

    ModelParams model = global;
    OptimizerState opt = OptimizerState::init(global, client.opt);
    auto rng = make_rng(seed);
    std::vector<std::size_t> idx(client.dataset.size());
    std::iota(idx.begin(), idx.end(), 0);
    const std::size_t bs = static_cast<std::size_t>(std::max(1, client.batch_size));

    try {
        for (int e = 0; e < client.local_epochs; ++e) {
            std::shuffle(idx.begin(), idx.end(), rng);
            for (std::size_t at = 0; at < idx.size(); at += bs) {
                const std::size_t take = std::min(bs, idx.size() - at);
                const Batch b =
                    make_batch(client.dataset, std::span<const std::size_t>(idx).subspan(at, take));
                auto r = train_step(model, opt, b);
                model = std::move(r.model);
                opt = std::move(r.opt);
            }
        }
    } catch (const NumericalError&) {
        update.diverged = true;
        return update;  // params stay at the global snapshot
    }
    update.params = std::move(model);
    return update;
}

namespace {

// Sorted view over updates, ascending client id; fixes the summation order.
std::vector<const ClientUpdate*> sorted_by_id(const std::vector<ClientUpdate>& updates) {
    std::vector<const ClientUpdate*> v;
    v.reserve(updates.size());
    for (const auto& u : updates) v.push_back(&u);
    std::sort(v.begin(), v.end(),
              [](const ClientUpdate* a, const ClientUpdate* b) { return a->client_id < b->client_id; });
    return v;
}

ModelParams weighted_mean(const std::vector<const ClientUpdate*>& sorted,
                          const std::vector<double>& weights) {
    const ModelParams& first = sorted.front()->params;
    ModelParams out = first;
    for (std::size_t li = 0; li < out.layers.size(); ++li) {
        auto& layer = out.layers[li];
        std::vector<double> wacc(layer.weights.size(), 0.0);
        std::vector<double> bacc(layer.biases.size(), 0.0);
        for (std::size_t ui = 0; ui < sorted.size(); ++ui) {
            const auto& src = sorted[ui]->params.layers[li];
            const double w = weights[ui];
            for (std::size_t j = 0; j < wacc.size(); ++j)
                wacc[j] += w * static_cast<double>(src.weights[j]);
            for (std::size_t j = 0; j < bacc.size(); ++j)
                bacc[j] += w * static_cast<double>(src.biases[j]);
        }
        for (std::size_t j = 0; j < wacc.size(); ++j) layer.weights[j] = static_cast<float>(wacc[j]);
        for (std::size_t j = 0; j < bacc.size(); ++j) layer.biases[j] = static_cast<float>(bacc[j]);
    }
    return out;
}

ModelParams uniform_mean(const std::vector<const ClientUpdate*>& sorted) {
    // Sum first, divide once: keeps subset means exactly recombinable for
    // power-of-two subset sizes.
    const ModelParams& first = sorted.front()->params;
    ModelParams out = first;
    const double inv = 1.0 / static_cast<double>(sorted.size());
    for (std::size_t li = 0; li < out.layers.size(); ++li) {
        auto& layer = out.layers[li];
        std::vector<double> wacc(layer.weights.size(), 0.0);
        std::vector<double> bacc(layer.biases.size(), 0.0);
        for (const ClientUpdate* u : sorted) {
            const auto& src = u->params.layers[li];
            for (std::size_t j = 0; j < wacc.size(); ++j)
                wacc[j] += static_cast<double>(src.weights[j]);
            for (std::size_t j = 0; j < bacc.size(); ++j)
                bacc[j] += static_cast<double>(src.biases[j]);
        }
        for (std::size_t j = 0; j < wacc.size(); ++j)
            layer.weights[j] = static_cast<float>(wacc[j] * inv);
        for (std::size_t j = 0; j < bacc.size(); ++j)
            layer.biases[j] = static_cast<float>(bacc[j] * inv);
    }
    return out;
}

void require_congruent_updates(const std::vector<const ClientUpdate*>& sorted) {
    for (std::size_t i = 1; i < sorted.size(); ++i)
        require_congruent(sorted[0]->params, sorted[i]->params, "aggregate");
}

}  // namespace

ModelParams fedavg(const std::vector<ClientUpdate>& updates, Weighting weighting) {
    if (updates.empty()) throw UsageError("fedavg: no updates");
    auto sorted = sorted_by_id(updates);
    require_congruent_updates(sorted);
    if (weighting == Weighting::uniform) return uniform_mean(sorted);

    double total = 0.0;
    for (const auto* u : sorted) total += static_cast<double>(u->sample_count);
    if (total <= 0.0) throw UsageError("fedavg: zero total sample count");
    std::vector<double> w;
    w.reserve(sorted.size());
    for (const auto* u : sorted) w.push_back(static_cast<double>(u->sample_count) / total);
    return weighted_mean(sorted, w);
}

ModelParams avg_models(const std::vector<ClientUpdate>& updates, const std::set<int>& subset) {
    if (subset.empty()) throw UsageError("avg_models: empty subset");
    std::vector<ClientUpdate> picked;
    for (const auto& u : updates)
        if (subset.count(u.client_id)) picked.push_back(u);
    if (picked.size() != subset.size())
        throw UsageError("avg_models: subset contains ids with no update");
    auto sorted = sorted_by_id(picked);
    require_congruent_updates(sorted);
    return uniform_mean(sorted);
}

ServerState run_round(ServerState state, const std::vector<Client>& clients,
                      std::uint64_t seed) {
    if (clients.size() < 2) throw UsageError("run_round: need at least 2 clients");
    const int round = state.round_index + 1;

    std::vector<const Client*> order;
    order.reserve(clients.size());
    for (const auto& c : clients) order.push_back(&c);
    std::sort(order.begin(), order.end(),
              [](const Client* a, const Client* b) { return a->id < b->id; });

    std::vector<ClientUpdate> updates;
    updates.reserve(order.size());
    for (const Client* c : order) {
        updates.push_back(local_train(*c, state.global_model, mix_seed(seed, round, c->id)));
        if (updates.back().diverged)
            state.log.append(round, "divergent_update", "client=" + std::to_string(c->id));
    }

    std::vector<ClientUpdate> eligible;
    std::string agg_ids;
    for (const auto& u : updates) {
        if (u.diverged || state.pending_detections.count(u.client_id)) continue;
        eligible.push_back(u);
        if (!agg_ids.empty()) agg_ids += '+';
        agg_ids += std::to_string(u.client_id);
    }
    if (eligible.empty()) {
        state.log.append(round, "round_aborted", "reason=no_eligible_updates");
        return state;
    }

    state.last_round_start_global = state.global_model;
    state.global_model = fedavg(eligible, state.weighting);
    state.last_round_updates = std::move(updates);
    state.round_index = round;
    state.storage_bytes = (state.last_round_updates.size() + 1) *
                          static_cast<std::uint64_t>(checkpoint_bytes(state.global_model));
    state.log.append(round, "aggregate", "clients=" + agg_ids);
    return state;
}

}  // namespace fedup
