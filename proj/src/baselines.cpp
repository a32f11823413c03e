#include "fedup/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedup/errors.hpp"
#include "fedup/rng.hpp"

namespace fedup {

RetrainResult retrain_from_scratch(const std::vector<Client>& clients,
                                   const ModelParams& fresh_init, const RetrainConfig& cfg) {
    if (clients.size() < 2) throw UsageError("retrain_from_scratch: need at least 2 clients");
    if (!cfg.test_set) throw UsageError("retrain_from_scratch: test set required");

    ServerState st;
    st.global_model = fresh_init;
    st.last_round_start_global = fresh_init;
    st.weighting = cfg.weighting;

    RetrainResult out;
    for (int r = 0; r < cfg.max_rounds; ++r) {
        st = run_round(std::move(st), clients, mix_seed(cfg.seed, stream::retrain, r + 1));
        out.r_star = st.round_index;
        out.final_test_acc = evaluate(st.global_model, *cfg.test_set);
        if (out.final_test_acc >= cfg.target_test_acc - cfg.epsilon) {
            out.converged = true;
            break;
        }
    }
    out.model = std::move(st.global_model);
    return out;
}

UnlearnMask random_mask(const ModelParams& model, double p, std::uint64_t seed) {
    if (!(p > 0.0 && p <= 1.0)) throw UsageError("random_mask: p must be in (0, 1]");
    auto rng = make_rng(seed);
    UnlearnMask mask;
    for (std::size_t li = 0; li < model.layers.size(); ++li) {
        const auto& layer = model.layers[li];
        if (!layer.prunable() || layer.weights.empty()) continue;
        const std::size_t n = layer.weights.size();
        const std::size_t k = static_cast<std::size_t>(std::ceil(p * static_cast<double>(n)));
        std::vector<std::uint32_t> idx(n);
        std::iota(idx.begin(), idx.end(), 0u);
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(k);
        std::sort(idx.begin(), idx.end());
        mask.layers.push_back({li, std::move(idx)});
    }
    return mask;
}

UnlearnMask malicious_magnitude_mask(const ModelParams& avg_malicious, double p) {
    if (!(p > 0.0 && p <= 1.0)) throw UsageError("malicious_magnitude_mask: p must be in (0, 1]");
    UnlearnMask mask;
    for (std::size_t li = 0; li < avg_malicious.layers.size(); ++li) {
        const auto& layer = avg_malicious.layers[li];
        if (!layer.prunable() || layer.weights.empty()) continue;
        const std::size_t n = layer.weights.size();
        const std::size_t k = static_cast<std::size_t>(std::ceil(p * static_cast<double>(n)));
        std::vector<std::uint32_t> idx(n);
        std::iota(idx.begin(), idx.end(), 0u);
        std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k) - 1, idx.end(),
                         [&layer](std::uint32_t a, std::uint32_t b) {
                             const double ma = std::abs(static_cast<double>(layer.weights[a]));
                             const double mb = std::abs(static_cast<double>(layer.weights[b]));
                             if (ma != mb) return ma > mb;
                             return a < b;
                         });
        idx.resize(k);
        std::sort(idx.begin(), idx.end());
        mask.layers.push_back({li, std::move(idx)});
    }
    return mask;
}

ModelParams negate_first_layer(const ModelParams& model) {
    ModelParams out = model;
    for (auto& layer : out.layers) {
        if (!layer.prunable()) continue;
        for (auto& w : layer.weights) w = -w;
        return out;
    }
    throw UsageError("negate_first_layer: model has no prunable layer");
}

ServerState natural_forgetting(ServerState state, const std::vector<Client>& remaining,
                               int rounds, std::uint64_t seed,
                               const std::function<void(const ServerState&)>& on_round) {
    for (int r = 0; r < rounds; ++r) {
        state = run_round(std::move(state), remaining,
                          mix_seed(seed, stream::recovery, state.round_index + 1));
        if (on_round) on_round(state);
    }
    return state;
}

}  // namespace fedup
