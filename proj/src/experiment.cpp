#include "fedup/experiment.hpp"

#include <algorithm>
#include <numeric>

#include "fedup/baselines.hpp"
#include "fedup/checkpoint.hpp"
#include "fedup/errors.hpp"
#include "fedup/rng.hpp"

namespace fedup {

double compute_attack_success(const ModelParams& model, const Dataset& eval_set) {
    if (eval_set.size() == 0) throw UsageError("compute_attack_success: empty evaluation set");
    return evaluate(model, eval_set);
}

StorageModel storage_from(std::uint64_t model_bytes, int client_count, int rounds) {
    StorageModel s;
    s.model_bytes = model_bytes;
    s.fedup_bytes = (static_cast<std::uint64_t>(client_count) + 1) * model_bytes;
    s.historical_bytes =
        static_cast<std::uint64_t>(rounds) * static_cast<std::uint64_t>(client_count) * model_bytes;
    return s;
}

StorageModel storage_report(const ExperimentConfig& cfg) {
    std::vector<int> shape;
    int classes = cfg.dataset.classes;
    switch (cfg.dataset.kind) {
        case DatasetSpec::Kind::synthetic: shape = {cfg.dataset.dim}; break;
        case DatasetSpec::Kind::synthetic_image:
            shape = {cfg.dataset.channels, cfg.dataset.height, cfg.dataset.width};
            break;
        case DatasetSpec::Kind::idx:
            shape = {cfg.dataset.channels, cfg.dataset.height, cfg.dataset.width};
            break;
    }
    const ModelParams m = build_model(cfg.model, shape, classes, 0);
    return storage_from(checkpoint_bytes(m), cfg.client_count, cfg.total_rounds);
}

namespace {

struct Timeline {
    ExperimentConfig cfg;
    Dataset test;
    Dataset malicious_eval;  // triggered testset, flipped samples, or forgetting set
    std::vector<Client> roster;
    ServerState st;
    RateLimiter limiter;
    MetricsReport report;
    std::vector<std::pair<int, int>> schedule;  // sorted detections
    std::size_t next_detection = 0;
};

Dataset build_malicious_eval(const ExperimentConfig& cfg, const std::vector<Client>& roster,
                             const Dataset& test) {
    Dataset eval;
    if (cfg.attack.kind == AttackKind::backdoor) {
        return make_triggered_testset(test, cfg.attack);
    }
    if (cfg.attack.kind == AttackKind::label_flip) {
        // The poisoned samples themselves, labeled with the flipped target.
        for (const auto& c : roster) {
            if (!c.is_malicious) continue;
            std::vector<std::size_t> idx;
            for (std::size_t i = 0; i < c.dataset.size(); ++i)
                if (c.dataset.tags[i] == SampleTag::label_flipped) idx.push_back(i);
            if (!idx.empty()) eval.append(c.dataset.subset(idx));
        }
        return eval;
    }
    // No attack: track the data of clients scheduled for (false-positive)
    // detection so the forgetting accuracy is observable.
    std::set<int> flagged;
    for (const auto& [round, client] : cfg.detections) flagged.insert(client);
    for (const auto& c : roster)
        if (flagged.count(c.id)) eval.append(c.dataset);
    return eval;
}

Timeline prepare(const ExperimentConfig& cfg) {
    validate_config(cfg);
    Timeline t;
    t.cfg = cfg;
    const std::uint64_t seed = cfg.seed;

    Dataset full = build_dataset(cfg.dataset, mix_seed(seed, stream::dataset));
    validate_dataset(full);
    auto [train, test] =
        train_test_split(full, cfg.dataset.test_fraction, mix_seed(seed, stream::split));
    t.test = std::move(test);

    const PartitionPlan plan = partition(train, cfg.partition.scheme, cfg.client_count,
                                         cfg.partition.alpha, mix_seed(seed, stream::partition));

    const auto malicious = cfg.resolved_malicious_ids();
    for (int i = 0; i < cfg.client_count; ++i) {
        Client c;
        c.id = i;
        c.dataset = train.subset(plan.assignment[static_cast<std::size_t>(i)]);
        c.is_malicious = std::find(malicious.begin(), malicious.end(), i) != malicious.end();
        c.local_epochs = cfg.training.local_epochs;
        c.opt.learning_rate = cfg.training.learning_rate;
        c.batch_size = cfg.training.batch_size;
        if (c.is_malicious && cfg.attack.kind == AttackKind::label_flip)
            c.dataset = apply_label_flip(c.dataset, cfg.attack, mix_seed(seed, stream::attack, i));
        else if (c.is_malicious && cfg.attack.kind == AttackKind::backdoor)
            c.dataset = apply_backdoor(c.dataset, cfg.attack, mix_seed(seed, stream::attack, i));
        t.roster.push_back(std::move(c));
    }

    t.malicious_eval = build_malicious_eval(cfg, t.roster, t.test);

    t.st.global_model = build_model(cfg.model, train.sample_shape, train.num_classes,
                                    mix_seed(seed, stream::model_init));
    t.st.last_round_start_global = t.st.global_model;
    t.st.weighting = cfg.training.weighting;

    t.limiter.threshold_rounds = cfg.rate_limit_t;

    t.report.run_id = cfg.name + "-s" + std::to_string(cfg.seed);
    t.report.seed = cfg.seed;
    t.report.strategy = strategy_name(cfg.strategy);

    t.schedule = cfg.detections;
    std::sort(t.schedule.begin(), t.schedule.end());
    return t;
}

RoundMetrics snapshot(const Timeline& t, const std::string& event) {
    RoundMetrics r;
    r.round = t.st.round_index;
    r.test_acc = evaluate(t.st.global_model, t.test);
    r.malicious_acc =
        t.malicious_eval.size() ? compute_attack_success(t.st.global_model, t.malicious_eval) : 0.0;
    r.event = event;
    r.storage_bytes = t.st.storage_bytes;
    return r;
}

std::string append_event(std::string base, const std::string& extra) {
    if (base.empty()) return extra;
    return base + ";" + extra;
}

// One unlearning execution: retrain reference, strategy dispatch, recovery
// rounds, summary entry. The unlearned clients leave the roster.
void execute_unlearn(Timeline& t, const std::set<int>& to_unlearn) {
    const ExperimentConfig& cfg = t.cfg;
    UnlearnSummary us;
    us.unlearn_round = t.st.round_index;
    us.clients.assign(to_unlearn.begin(), to_unlearn.end());

    const RoundMetrics& before = t.report.rounds.back();

    std::vector<Client> remaining;
    for (const auto& c : t.roster)
        if (!to_unlearn.count(c.id)) remaining.push_back(c);
    if (remaining.size() < 2)
        throw StateError("unlearn: fewer than 2 clients would remain");

    // Retrain-from-scratch reference on the post-unlearn enrollment; gives
    // both the baseline model and the round budget reference.
    RetrainConfig rc;
    rc.seed = mix_seed(cfg.seed, stream::retrain);
    rc.max_rounds = cfg.retrain.max_rounds;
    rc.target_test_acc = before.test_acc;
    rc.epsilon = cfg.retrain.epsilon;
    rc.weighting = cfg.training.weighting;
    rc.test_set = &t.test;
    const ModelParams fresh = build_model(cfg.model, t.test.sample_shape, t.test.num_classes,
                                          mix_seed(cfg.seed, stream::retrain, 0xF));
    const RetrainResult rr = retrain_from_scratch(remaining, fresh, rc);
    us.r_star = rr.r_star;
    us.r_star_converged = rr.converged;
    us.baseline_b =
        t.malicious_eval.size() ? compute_attack_success(rr.model, t.malicious_eval) : 0.0;

    // P selection is shared by every pruning strategy.
    std::vector<ClientUpdate> updates;
    for (const auto& u : t.st.last_round_updates)
        if (!u.diverged) updates.push_back(u);
    std::set<int> benign_ids;
    for (const auto& u : updates)
        if (!to_unlearn.count(u.client_id)) benign_ids.insert(u.client_id);
    std::vector<ClientUpdate> benign_updates;
    for (const auto& u : updates)
        if (benign_ids.count(u.client_id)) benign_updates.push_back(u);
    double p_used = 0.0;
    double similarity = 0.0;
    if (benign_updates.size() >= 2) {
        similarity = estimate_similarity(benign_updates);
        p_used = cfg.p_opt ? *cfg.p_opt
                           : pruning_rate(normalize_similarity(similarity, cfg.heuristic),
                                          cfg.heuristic);
    } else if (cfg.p_opt) {
        p_used = *cfg.p_opt;
    }

    auto on_recovery = [&t](const ServerState& st2) {
        RoundMetrics r;
        r.round = st2.round_index;
        r.test_acc = evaluate(st2.global_model, t.test);
        r.malicious_acc = t.malicious_eval.size()
                              ? compute_attack_success(st2.global_model, t.malicious_eval)
                              : 0.0;
        r.event = "recovery";
        r.storage_bytes = st2.storage_bytes;
        t.report.rounds.push_back(r);
    };

    auto record_post_prune = [&](const ModelParams& pruned) {
        us.post_prune_test_acc = evaluate(pruned, t.test);
        us.post_prune_malicious_acc =
            t.malicious_eval.size() ? compute_attack_success(pruned, t.malicious_eval) : 0.0;
    };

    switch (cfg.strategy) {
        case Strategy::fedup: {
            UnlearnConfig uc;
            uc.heuristic = cfg.heuristic;
            uc.p_override = cfg.p_opt;
            uc.signed_rank = cfg.signed_rank;
            uc.r_star = std::max(1, rr.r_star);
            uc.recovery_rounds_override = cfg.recovery_rounds_override;
            uc.max_recovery_rounds = cfg.max_recovery_rounds;
            uc.epsilon_rec = cfg.epsilon_rec;
            uc.pre_unlearn_test_acc = before.test_acc;
            uc.test_set = &t.test;
            uc.seed = cfg.seed;
            uc.on_pruned = [&](const ServerState& st2) { record_post_prune(st2.global_model); };
            uc.on_recovery_round = on_recovery;
            UnlearnOutcome outcome = unlearn_and_recover(std::move(t.st), t.roster, to_unlearn, uc);
            us.p_used = outcome.p_used;
            us.similarity = outcome.similarity;
            us.r_rec = outcome.plan.actual_rounds_used;
            us.bound = outcome.plan.bound();
            us.pruned_indices = outcome.mask.total_indices();
            t.st = std::move(outcome.state);
            break;
        }
        case Strategy::retrain: {
            t.st.global_model = rr.model;
            t.st.last_unlearn_round = t.st.round_index;
            for (int id : to_unlearn) t.st.pending_detections.erase(id);
            us.r_rec = 0;
            us.bound = 0;
            t.st.log.append(t.st.round_index, "retrain_swap",
                            "r_star=" + std::to_string(rr.r_star));
            record_post_prune(t.st.global_model);
            break;
        }
        case Strategy::natural_forgetting:
        case Strategy::random_prune:
        case Strategy::malicious_magnitude_prune:
        case Strategy::weight_negation: {
            const bool prunes = cfg.strategy == Strategy::random_prune ||
                                cfg.strategy == Strategy::malicious_magnitude_prune;
            ModelParams next = t.st.global_model;
            std::size_t pruned = 0;
            if (cfg.strategy == Strategy::random_prune) {
                if (p_used <= 0.0) throw ConfigError("random_prune: no pruning rate available");
                const ModelParams avg_benign = avg_models(updates, benign_ids);
                const UnlearnMask mask =
                    random_mask(avg_benign, p_used, mix_seed(cfg.seed, stream::mask));
                next = apply_mask(mask, avg_benign);
                pruned = mask.total_indices();
            } else if (cfg.strategy == Strategy::malicious_magnitude_prune) {
                if (p_used <= 0.0)
                    throw ConfigError("malicious_magnitude_prune: no pruning rate available");
                const ModelParams avg_benign = avg_models(updates, benign_ids);
                const ModelParams avg_malicious = avg_models(updates, to_unlearn);
                const UnlearnMask mask = malicious_magnitude_mask(avg_malicious, p_used);
                next = apply_mask(mask, avg_benign);
                pruned = mask.total_indices();
            } else if (cfg.strategy == Strategy::weight_negation) {
                next = negate_first_layer(t.st.global_model);
            }
            t.st.global_model = std::move(next);
            t.st.last_unlearn_round = t.st.round_index;
            for (int id : to_unlearn) t.st.pending_detections.erase(id);
            us.p_used = prunes ? p_used : 0.0;
            us.similarity = similarity;
            us.pruned_indices = pruned;
            us.bound = (prunes && p_used > 0.0) ? recovery_bound(std::max(1, rr.r_star), p_used)
                                                : 0;
            t.st.log.append(t.st.round_index, "baseline_" + strategy_name(cfg.strategy),
                            "pruned=" + std::to_string(pruned));
            record_post_prune(t.st.global_model);

            int budget = 0;
            bool early_stop = false;
            if (cfg.recovery_rounds_override) {
                budget = *cfg.recovery_rounds_override;
            } else if (cfg.strategy == Strategy::natural_forgetting) {
                budget = cfg.max_recovery_rounds;
            } else if (prunes) {
                budget = std::min(us.bound, cfg.max_recovery_rounds);
                early_stop = true;
            } else {  // weight_negation
                budget = cfg.max_recovery_rounds;
                early_stop = true;
            }
            for (int r = 0; r < budget; ++r) {
                t.st = run_round(std::move(t.st), remaining,
                                 mix_seed(cfg.seed, stream::recovery, t.st.round_index + 1));
                us.r_rec += 1;
                on_recovery(t.st);
                if (early_stop &&
                    t.report.rounds.back().test_acc >= before.test_acc - cfg.epsilon_rec)
                    break;
            }
            break;
        }
    }

    // Drop the unlearned clients from enrollment.
    std::vector<Client> kept;
    for (auto& c : t.roster)
        if (!to_unlearn.count(c.id)) kept.push_back(std::move(c));
    t.roster = std::move(kept);

    t.report.summary.unlearning_performed = true;
    t.report.summary.unlearns.push_back(std::move(us));
}

}  // namespace

MetricsReport run_experiment(const ExperimentConfig& cfg) {
    Timeline t = prepare(cfg);

    for (int step = 0; step < cfg.total_rounds; ++step) {
        const int upcoming = t.st.round_index + 1;
        std::set<int> new_detections;
        while (t.next_detection < t.schedule.size() &&
               t.schedule[t.next_detection].first <= upcoming) {
            const int client = t.schedule[t.next_detection].second;
            new_detections.insert(client);
            t.st.pending_detections.insert(client);
            t.st.log.append(upcoming, "detect", "client=" + std::to_string(client));
            ++t.next_detection;
        }

        t.st = run_round(std::move(t.st), t.roster, mix_seed(cfg.seed, stream::round, upcoming));

        std::string event = new_detections.empty() ? "" : "detect";
        auto step_result = rate_limiter_step(std::move(t.limiter), t.st.round_index,
                                             new_detections);
        t.limiter = std::move(step_result.limiter);

        if (step_result.fire) {
            t.report.rounds.push_back(snapshot(t, append_event(event, "unlearn")));
            execute_unlearn(t, step_result.to_unlearn);
        } else {
            t.report.rounds.push_back(snapshot(t, event));
        }
    }

    // Summary anchors: before = last row before the first unlearn event,
    // after = the final row.
    RunSummary& s = t.report.summary;
    if (!t.report.rounds.empty()) {
        const RoundMetrics* before = &t.report.rounds.back();
        if (s.unlearning_performed) {
            for (const auto& r : t.report.rounds) {
                if (r.event.find("unlearn") != std::string::npos) {
                    before = &r;
                    break;
                }
            }
        }
        s.test_acc_before = before->test_acc;
        s.malicious_acc_before = before->malicious_acc;
        s.test_acc_after = t.report.rounds.back().test_acc;
        s.malicious_acc_after = t.report.rounds.back().malicious_acc;
    }
    s.storage = storage_report(cfg);
    t.report.event_log = t.st.log.lines;
    t.report.final_model = std::move(t.st.global_model);
    return std::move(t.report);
}

}  // namespace fedup
