#include "fedup/unlearn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fedup/errors.hpp"
#include "fedup/rng.hpp"

namespace fedup {

std::size_t UnlearnMask::total_indices() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.indices.size();
    return n;
}

void PruningHeuristicConfig::validate() const {
    if (!(0.0 < p_min && p_min < p_max && p_max <= 1.0))
        throw ConfigError("pruning heuristic: require 0 < p_min < p_max <= 1");
    if (gamma < 1.0) throw ConfigError("pruning heuristic: gamma must be >= 1");
    if (!(sim_min < sim_max)) throw ConfigError("pruning heuristic: sim_min must be < sim_max");
}

RateLimiterStep rate_limiter_step(RateLimiter limiter, int round,
                                  const std::set<int>& new_detections) {
    limiter.pending.insert(new_detections.begin(), new_detections.end());
    RateLimiterStep out;
    const bool window_open = !limiter.last_unlearn_round.has_value() ||
                             round - *limiter.last_unlearn_round >= limiter.threshold_rounds;
    if (!limiter.pending.empty() && window_open) {
        out.fire = true;
        out.to_unlearn = std::move(limiter.pending);
        limiter.pending.clear();
        limiter.last_unlearn_round = round;
    }
    out.limiter = std::move(limiter);
    return out;
}

int recovery_bound(int r_star, double p) {
    if (r_star < 1) throw UsageError("recovery_bound: r_star must be >= 1");
    if (!(p > 0.0 && p <= 1.0)) throw UsageError("recovery_bound: p must be in (0, 1]");
    return static_cast<int>(std::ceil(static_cast<double>(r_star) * p));
}

int RecoveryPlan::bound() const { return recovery_bound(r_star, p); }

namespace {

std::size_t per_layer_quota(double p, std::size_t n) {
    if (n == 0) return 0;
    return static_cast<std::size_t>(std::ceil(p * static_cast<double>(n)));
}

// Top-k indices by rank, ties to the lower flat index, returned sorted.
std::vector<std::uint32_t> select_top(const std::vector<double>& rank, std::size_t k) {
    std::vector<std::uint32_t> idx(rank.size());
    std::iota(idx.begin(), idx.end(), 0u);
    auto better = [&rank](std::uint32_t a, std::uint32_t b) {
        if (rank[a] != rank[b]) return rank[a] > rank[b];
        return a < b;
    };
    std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k) - 1, idx.end(),
                     better);
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

}  // namespace

UnlearnMask generate_mask(const std::vector<ClientUpdate>& local_updates,
                          const std::set<int>& malicious_ids, const ModelParams& global_prev,
                          double p, bool signed_rank) {
    if (malicious_ids.empty()) throw UsageError("generate_mask: no malicious ids");
    if (!(p > 0.0 && p <= 1.0)) throw UsageError("generate_mask: p must be in (0, 1]");
    if (2 * malicious_ids.size() >= local_updates.size())
        throw UsageError(
            "generate_mask: benign-majority precondition violated (malicious clients must be "
            "strictly fewer than half)");

    std::set<int> benign_ids;
    for (const auto& u : local_updates)
        if (!malicious_ids.count(u.client_id)) benign_ids.insert(u.client_id);

    const ModelParams avg_malicious = avg_models(local_updates, malicious_ids);
    const ModelParams avg_benign = avg_models(local_updates, benign_ids);
    require_congruent(avg_benign, global_prev, "generate_mask");

    UnlearnMask mask;
    for (std::size_t li = 0; li < global_prev.layers.size(); ++li) {
        const auto& layer = global_prev.layers[li];
        if (!layer.prunable() || layer.weights.empty()) continue;
        const std::size_t n = layer.weights.size();
        std::vector<double> rank(n);
        for (std::size_t j = 0; j < n; ++j) {
            const double diff = static_cast<double>(avg_malicious.layers[li].weights[j]) -
                                static_cast<double>(avg_benign.layers[li].weights[j]);
            const double g = static_cast<double>(layer.weights[j]);
            rank[j] = diff * diff * (signed_rank ? g : std::abs(g));
        }
        const std::size_t k = per_layer_quota(p, n);
        mask.layers.push_back({li, select_top(rank, k)});
    }
    return mask;
}

ModelParams apply_mask(const UnlearnMask& mask, const ModelParams& avg_benign) {
    ModelParams out = avg_benign;
    for (const auto& lm : mask.layers) {
        if (lm.layer_index >= out.layers.size())
            throw IntegrityError("apply_mask: layer index out of bounds");
        auto& layer = out.layers[lm.layer_index];
        if (!layer.prunable()) continue;  // mask never touches other-kind layers
        for (std::uint32_t j : lm.indices) {
            if (j >= layer.weights.size())
                throw IntegrityError("apply_mask: weight index out of bounds");
            layer.weights[j] = 0.0f;
        }
    }
    return out;
}

double normalize_similarity(double sim, const PruningHeuristicConfig& cfg) {
    cfg.validate();
    const double z = (sim - cfg.sim_min) / (cfg.sim_max - cfg.sim_min);
    return std::clamp(z, 0.0, 1.0);
}

double pruning_rate(double z, const PruningHeuristicConfig& cfg) {
    cfg.validate();
    if (z < 0.0 || z > 1.0) throw UsageError("pruning_rate: z must be in [0, 1]");
    // Convex-combination form of (p_max - p_min) * z^gamma + p_min; the
    // endpoints evaluate to exactly p_min and p_max.
    const double t = std::pow(z, cfg.gamma);
    return cfg.p_max * t + cfg.p_min * (1.0 - t);
}

double estimate_similarity(const std::vector<ClientUpdate>& benign_updates) {
    if (benign_updates.size() < 2)
        throw UsageError("estimate_similarity: need at least 2 benign updates");
    double total = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < benign_updates.size(); ++i) {
        for (std::size_t j = i + 1; j < benign_updates.size(); ++j) {
            total += last_layer_cosine_similarity(benign_updates[i].params,
                                                  benign_updates[j].params);
            ++pairs;
        }
    }
    return total / static_cast<double>(pairs);
}

namespace {

std::string join_ids(const std::set<int>& ids) {
    std::string s;
    for (int id : ids) {
        if (!s.empty()) s += '+';
        s += std::to_string(id);
    }
    return s;
}

}  // namespace

UnlearnOutcome unlearn_and_recover(ServerState state, const std::vector<Client>& clients,
                                   const std::set<int>& to_unlearn, const UnlearnConfig& cfg) {
    UnlearnOutcome out;
    if (to_unlearn.empty()) {
        state.log.append(state.round_index, "unlearn_skipped", "reason=empty_set");
        out.state = std::move(state);
        return out;
    }
    if (state.last_round_updates.empty())
        throw StateError("unlearn_and_recover: no updates retained from the last round");

    std::vector<ClientUpdate> updates;
    for (const auto& u : state.last_round_updates)
        if (!u.diverged) updates.push_back(u);

    std::set<int> benign_ids;
    std::size_t malicious_found = 0;
    for (const auto& u : updates) {
        if (to_unlearn.count(u.client_id))
            ++malicious_found;
        else
            benign_ids.insert(u.client_id);
    }
    if (malicious_found != to_unlearn.size())
        throw StateError("unlearn_and_recover: some clients to unlearn have no retained update");
    if (benign_ids.size() <= to_unlearn.size())
        throw UsageError("unlearn_and_recover: benign-majority precondition violated");

    std::vector<ClientUpdate> benign_updates;
    for (const auto& u : updates)
        if (benign_ids.count(u.client_id)) benign_updates.push_back(u);

    out.similarity = estimate_similarity(benign_updates);
    out.p_used = cfg.p_override
                     ? *cfg.p_override
                     : pruning_rate(normalize_similarity(out.similarity, cfg.heuristic),
                                    cfg.heuristic);

    out.mask = generate_mask(updates, to_unlearn, state.last_round_start_global, out.p_used,
                             cfg.signed_rank);
    const ModelParams avg_benign = avg_models(updates, benign_ids);
    state.global_model = apply_mask(out.mask, avg_benign);
    state.last_unlearn_round = state.round_index;
    for (int id : to_unlearn) state.pending_detections.erase(id);

    out.plan.r_star = cfg.r_star;
    out.plan.p = out.p_used;
    out.executed = true;

    state.log.append_raw("round=" + std::to_string(state.round_index) +
                         " event=unlearn P=" + std::to_string(out.p_used) +
                         " layers=" + std::to_string(out.mask.layers.size()) +
                         " pruned=" + std::to_string(out.mask.total_indices()) +
                         " clients=" + join_ids(to_unlearn) +
                         " bound=" + std::to_string(out.plan.bound()));
    if (cfg.on_pruned) cfg.on_pruned(state);

    std::vector<Client> remaining;
    for (const auto& c : clients)
        if (!to_unlearn.count(c.id)) remaining.push_back(c);

    const int budget = cfg.recovery_rounds_override
                           ? *cfg.recovery_rounds_override
                           : std::min(out.plan.bound(), cfg.max_recovery_rounds);
    if (remaining.size() < 2) {
        state.log.append(state.round_index, "recovery_skipped", "reason=too_few_clients");
        out.state = std::move(state);
        return out;
    }

    for (int r = 0; r < budget; ++r) {
        state = run_round(std::move(state), remaining,
                          mix_seed(cfg.seed, stream::recovery, state.round_index + 1));
        out.plan.actual_rounds_used += 1;
        if (cfg.on_recovery_round) cfg.on_recovery_round(state);
        if (!cfg.recovery_rounds_override && cfg.test_set) {
            const double acc = evaluate(state.global_model, *cfg.test_set);
            if (acc >= cfg.pre_unlearn_test_acc - cfg.epsilon_rec) break;
        }
    }
    state.log.append(state.round_index, "recovery_done",
                     "rounds=" + std::to_string(out.plan.actual_rounds_used));
    out.state = std::move(state);
    return out;
}

}  // namespace fedup
