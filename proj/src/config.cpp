#include "fedup/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <json.hpp>

#include "fedup/errors.hpp"
#include "fedup/rng.hpp"

namespace fedup {

using nlohmann::json;

std::string strategy_name(Strategy s) {
    switch (s) {
        case Strategy::fedup: return "fedup";
        case Strategy::retrain: return "retrain";
        case Strategy::natural_forgetting: return "natural_forgetting";
        case Strategy::random_prune: return "random_prune";
        case Strategy::malicious_magnitude_prune: return "malicious_magnitude_prune";
        case Strategy::weight_negation: return "weight_negation";
    }
    return "fedup";
}

Strategy parse_strategy(const std::string& name) {
    if (name == "fedup") return Strategy::fedup;
    if (name == "retrain") return Strategy::retrain;
    if (name == "natural_forgetting") return Strategy::natural_forgetting;
    if (name == "random_prune") return Strategy::random_prune;
    if (name == "malicious_magnitude_prune") return Strategy::malicious_magnitude_prune;
    if (name == "weight_negation") return Strategy::weight_negation;
    throw ConfigError("unknown strategy: " + name);
}

std::vector<int> ExperimentConfig::resolved_malicious_ids() const {
    if (!malicious_ids.empty() || !malicious_fraction.has_value()) return malicious_ids;
    const int k = static_cast<int>(*malicious_fraction * client_count);
    std::vector<int> ids(static_cast<std::size_t>(std::max(0, k)));
    for (int i = 0; i < k; ++i) ids[static_cast<std::size_t>(i)] = i;
    return ids;
}

void validate_config(const ExperimentConfig& cfg) {
    if (cfg.client_count < 2) throw ConfigError("config: client_count must be >= 2");
    if (cfg.total_rounds < 1) throw ConfigError("config: total_rounds must be >= 1");
    if (cfg.rate_limit_t < 1) throw ConfigError("config: rate_limit_t must be >= 1");
    if (cfg.max_recovery_rounds < 0) throw ConfigError("config: max_recovery_rounds must be >= 0");
    cfg.heuristic.validate();
    if (cfg.p_opt && !(*cfg.p_opt > 0.0 && *cfg.p_opt <= 1.0))
        throw ConfigError("config: p_opt must be in (0, 1]");
    validate_attack(cfg.attack);

    const auto malicious = cfg.resolved_malicious_ids();
    std::set<int> seen;
    for (int id : malicious) {
        if (id < 0 || id >= cfg.client_count)
            throw ConfigError("config: malicious id out of range");
        if (!seen.insert(id).second) throw ConfigError("config: duplicate malicious id");
    }
    // Benign strict majority: at most floor((N-1)/2) malicious clients.
    const int max_malicious = (cfg.client_count - 1) / 2;
    if (static_cast<int>(malicious.size()) > max_malicious && !cfg.allow_majority_violation)
        throw ConfigError(
            "config: malicious clients must be a strict minority (at most " +
            std::to_string(max_malicious) + " of " + std::to_string(cfg.client_count) +
            "); set allow_majority_violation to proceed anyway");

    for (const auto& [round, client] : cfg.detections) {
        if (round < 1 || round > cfg.total_rounds)
            throw ConfigError("config: detection round outside total_rounds");
        if (client < 0 || client >= cfg.client_count)
            throw ConfigError("config: detection client id out of range");
    }
    if (cfg.dataset.test_fraction < 0.0 || cfg.dataset.test_fraction >= 1.0)
        throw ConfigError("config: test_fraction must be in [0, 1)");
}

namespace {

template <typename T>
void maybe_get(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

ModelSpec model_from_json(const json& j) {
    ModelSpec m;
    std::string arch = "mlp";
    maybe_get(j, "arch", arch);
    if (arch == "mlp")
        m.arch = ModelSpec::Arch::mlp;
    else if (arch == "conv")
        m.arch = ModelSpec::Arch::conv;
    else
        throw ConfigError("config: unknown model arch: " + arch);
    maybe_get(j, "hidden", m.hidden);
    maybe_get(j, "filters", m.filters);
    maybe_get(j, "kernel", m.kernel);
    return m;
}

json model_to_json(const ModelSpec& m) {
    return json{{"arch", m.arch == ModelSpec::Arch::mlp ? "mlp" : "conv"},
                {"hidden", m.hidden},
                {"filters", m.filters},
                {"kernel", m.kernel}};
}

DatasetSpec dataset_from_json(const json& j) {
    DatasetSpec d;
    std::string kind = "synthetic";
    maybe_get(j, "kind", kind);
    if (kind == "synthetic")
        d.kind = DatasetSpec::Kind::synthetic;
    else if (kind == "synthetic_image")
        d.kind = DatasetSpec::Kind::synthetic_image;
    else if (kind == "idx")
        d.kind = DatasetSpec::Kind::idx;
    else
        throw ConfigError("config: unknown dataset kind: " + kind);
    maybe_get(j, "classes", d.classes);
    maybe_get(j, "dim", d.dim);
    maybe_get(j, "noise_dims", d.noise_dims);
    maybe_get(j, "channels", d.channels);
    maybe_get(j, "height", d.height);
    maybe_get(j, "width", d.width);
    maybe_get(j, "per_class", d.per_class);
    maybe_get(j, "spread", d.spread);
    maybe_get(j, "test_fraction", d.test_fraction);
    maybe_get(j, "idx_images", d.idx_images);
    maybe_get(j, "idx_labels", d.idx_labels);
    return d;
}

json dataset_to_json(const DatasetSpec& d) {
    const char* kind = d.kind == DatasetSpec::Kind::synthetic
                           ? "synthetic"
                           : (d.kind == DatasetSpec::Kind::synthetic_image ? "synthetic_image"
                                                                           : "idx");
    return json{{"kind", kind},
                {"classes", d.classes},
                {"dim", d.dim},
                {"noise_dims", d.noise_dims},
                {"channels", d.channels},
                {"height", d.height},
                {"width", d.width},
                {"per_class", d.per_class},
                {"spread", d.spread},
                {"test_fraction", d.test_fraction},
                {"idx_images", d.idx_images},
                {"idx_labels", d.idx_labels}};
}

AttackSpec attack_from_json(const json& j) {
    AttackSpec a;
    std::string kind = "none";
    maybe_get(j, "kind", kind);
    if (kind == "none")
        a.kind = AttackKind::none;
    else if (kind == "label_flip")
        a.kind = AttackKind::label_flip;
    else if (kind == "backdoor")
        a.kind = AttackKind::backdoor;
    else
        throw ConfigError("config: unknown attack kind: " + kind);
    maybe_get(j, "poison_fraction", a.poison_fraction);
    maybe_get(j, "source_class", a.source_class);
    maybe_get(j, "target_class", a.target_class);
    if (j.contains("trigger")) {
        const auto& t = j.at("trigger");
        maybe_get(t, "block", a.trigger.block);
        maybe_get(t, "feature_count", a.trigger.feature_count);
        maybe_get(t, "feature_indices", a.trigger.feature_indices);
        maybe_get(t, "sentinel", a.trigger.sentinel);
    }
    return a;
}

json attack_to_json(const AttackSpec& a) {
    const char* kind = a.kind == AttackKind::none
                           ? "none"
                           : (a.kind == AttackKind::label_flip ? "label_flip" : "backdoor");
    return json{{"kind", kind},
                {"poison_fraction", a.poison_fraction},
                {"source_class", a.source_class},
                {"target_class", a.target_class},
                {"trigger",
                 {{"block", a.trigger.block},
                  {"feature_count", a.trigger.feature_count},
                  {"feature_indices", a.trigger.feature_indices},
                  {"sentinel", a.trigger.sentinel}}}};
}

ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig c;
    maybe_get(j, "name", c.name);
    maybe_get(j, "seed", c.seed);
    maybe_get(j, "clients", c.client_count);
    maybe_get(j, "malicious", c.malicious_ids);
    if (j.contains("malicious_fraction") && !j.at("malicious_fraction").is_null())
        c.malicious_fraction = j.at("malicious_fraction").get<double>();
    maybe_get(j, "total_rounds", c.total_rounds);
    if (j.contains("model")) c.model = model_from_json(j.at("model"));
    if (j.contains("dataset")) c.dataset = dataset_from_json(j.at("dataset"));
    if (j.contains("partition")) {
        const auto& p = j.at("partition");
        std::string scheme = "iid";
        maybe_get(p, "scheme", scheme);
        if (scheme == "iid")
            c.partition.scheme = PartitionScheme::iid;
        else if (scheme == "dirichlet")
            c.partition.scheme = PartitionScheme::dirichlet;
        else
            throw ConfigError("config: unknown partition scheme: " + scheme);
        maybe_get(p, "alpha", c.partition.alpha);
    }
    if (j.contains("attack")) c.attack = attack_from_json(j.at("attack"));
    if (j.contains("detections")) {
        for (const auto& d : j.at("detections"))
            c.detections.emplace_back(d.at(0).get<int>(), d.at(1).get<int>());
    }
    if (j.contains("strategy")) c.strategy = parse_strategy(j.at("strategy").get<std::string>());
    if (j.contains("unlearning")) {
        const auto& u = j.at("unlearning");
        if (u.contains("heuristic")) {
            const auto& h = u.at("heuristic");
            maybe_get(h, "p_min", c.heuristic.p_min);
            maybe_get(h, "p_max", c.heuristic.p_max);
            maybe_get(h, "gamma", c.heuristic.gamma);
            maybe_get(h, "sim_min", c.heuristic.sim_min);
            maybe_get(h, "sim_max", c.heuristic.sim_max);
        }
        if (u.contains("p_opt") && !u.at("p_opt").is_null())
            c.p_opt = u.at("p_opt").get<double>();
        maybe_get(u, "signed_rank", c.signed_rank);
        maybe_get(u, "rate_limit_t", c.rate_limit_t);
        maybe_get(u, "max_recovery_rounds", c.max_recovery_rounds);
        if (u.contains("recovery_rounds_override") && !u.at("recovery_rounds_override").is_null())
            c.recovery_rounds_override = u.at("recovery_rounds_override").get<int>();
        maybe_get(u, "epsilon_rec", c.epsilon_rec);
    }
    if (j.contains("training")) {
        const auto& t = j.at("training");
        maybe_get(t, "learning_rate", c.training.learning_rate);
        maybe_get(t, "batch_size", c.training.batch_size);
        maybe_get(t, "local_epochs", c.training.local_epochs);
        std::string w = "uniform";
        maybe_get(t, "weighting", w);
        if (w == "uniform")
            c.training.weighting = Weighting::uniform;
        else if (w == "by_sample_count")
            c.training.weighting = Weighting::by_sample_count;
        else
            throw ConfigError("config: unknown weighting: " + w);
    }
    if (j.contains("retrain")) {
        const auto& r = j.at("retrain");
        maybe_get(r, "max_rounds", c.retrain.max_rounds);
        maybe_get(r, "epsilon", c.retrain.epsilon);
    }
    maybe_get(j, "allow_majority_violation", c.allow_majority_violation);
    return c;
}

json config_to_json(const ExperimentConfig& c) {
    json j;
    j["name"] = c.name;
    j["seed"] = c.seed;
    j["clients"] = c.client_count;
    j["malicious"] = c.malicious_ids;
    if (c.malicious_fraction)
        j["malicious_fraction"] = *c.malicious_fraction;
    else
        j["malicious_fraction"] = nullptr;
    j["total_rounds"] = c.total_rounds;
    j["model"] = model_to_json(c.model);
    j["dataset"] = dataset_to_json(c.dataset);
    j["partition"] = {
        {"scheme", c.partition.scheme == PartitionScheme::iid ? "iid" : "dirichlet"},
        {"alpha", c.partition.alpha}};
    j["attack"] = attack_to_json(c.attack);
    json det = json::array();
    for (const auto& [round, client] : c.detections) det.push_back({round, client});
    j["detections"] = det;
    j["strategy"] = strategy_name(c.strategy);
    j["unlearning"] = {{"heuristic",
                        {{"p_min", c.heuristic.p_min},
                         {"p_max", c.heuristic.p_max},
                         {"gamma", c.heuristic.gamma},
                         {"sim_min", c.heuristic.sim_min},
                         {"sim_max", c.heuristic.sim_max}}},
                       {"p_opt", c.p_opt ? json(*c.p_opt) : json(nullptr)},
                       {"signed_rank", c.signed_rank},
                       {"rate_limit_t", c.rate_limit_t},
                       {"max_recovery_rounds", c.max_recovery_rounds},
                       {"recovery_rounds_override",
                        c.recovery_rounds_override ? json(*c.recovery_rounds_override)
                                                   : json(nullptr)},
                       {"epsilon_rec", c.epsilon_rec}};
    j["training"] = {{"learning_rate", c.training.learning_rate},
                     {"batch_size", c.training.batch_size},
                     {"local_epochs", c.training.local_epochs},
                     {"weighting", c.training.weighting == Weighting::uniform
                                       ? "uniform"
                                       : "by_sample_count"}};
    j["retrain"] = {{"max_rounds", c.retrain.max_rounds}, {"epsilon", c.retrain.epsilon}};
    j["allow_majority_violation"] = c.allow_majority_violation;
    return j;
}

}  // namespace

ExperimentConfig config_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    try {
        return config_from_json(j);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: bad field: ") + e.what());
    }
}

std::string config_to_json_text(const ExperimentConfig& cfg) {
    return config_to_json(cfg).dump(2);
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("config: cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return config_from_json_text(text);
}

void apply_override(ExperimentConfig& cfg, const std::string& key_equals_value) {
    const auto eq = key_equals_value.find('=');
    if (eq == std::string::npos)
        throw UsageError("override must look like key.path=value: " + key_equals_value);
    std::string path = key_equals_value.substr(0, eq);
    const std::string value = key_equals_value.substr(eq + 1);
    std::replace(path.begin(), path.end(), '.', '/');

    json j = json::parse(config_to_json_text(cfg));
    json parsed;
    try {
        parsed = json::parse(value);
    } catch (const json::exception&) {
        parsed = value;  // plain string
    }
    try {
        j[json::json_pointer("/" + path)] = parsed;
    } catch (const json::exception& e) {
        throw UsageError(std::string("override path invalid: ") + e.what());
    }
    cfg = config_from_json_text(j.dump());
}

ModelParams build_model(const ModelSpec& spec, const std::vector<int>& sample_shape,
                        int num_classes, std::uint64_t seed) {
    if (spec.arch == ModelSpec::Arch::mlp) {
        int dim = 1;
        for (int d : sample_shape) dim *= d;
        return make_mlp(dim, spec.hidden, num_classes, seed);
    }
    if (sample_shape.size() != 3)
        throw ConfigError("config: conv model requires an image-shaped dataset");
    return make_conv_net(sample_shape[0], sample_shape[1], sample_shape[2], spec.filters,
                         spec.kernel, num_classes, seed);
}

Dataset build_dataset(const DatasetSpec& spec, std::uint64_t seed) {
    switch (spec.kind) {
        case DatasetSpec::Kind::synthetic: {
            if (spec.noise_dims <= 0)
                return gen_synthetic(spec.classes, spec.dim, spec.per_class, spec.spread, seed);
            if (spec.noise_dims >= spec.dim - 1)
                throw ConfigError("config: noise_dims must leave at least 2 informative dims");
            const Dataset base = gen_synthetic(spec.classes, spec.dim - spec.noise_dims,
                                               spec.per_class, spec.spread, seed);
            return with_noise_features(base, spec.noise_dims, splitmix64(seed ^ 0xBADD));
        }
        case DatasetSpec::Kind::synthetic_image:
            return gen_synthetic_image(spec.classes, spec.channels, spec.height, spec.width,
                                       spec.per_class, spec.spread, seed);
        case DatasetSpec::Kind::idx:
            return load_idx(spec.idx_images, spec.idx_labels);
    }
    throw ConfigError("config: unknown dataset kind");
}

}  // namespace fedup
