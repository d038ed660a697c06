#include "polarbench/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <vector>

namespace polarbench {

using nlohmann::json;

namespace {

class Problems {
public:
    void add(std::string msg) { list_.push_back(std::move(msg)); }
    bool empty() const { return list_.empty(); }
    [[noreturn]] void raise(const std::string& origin) const {
        std::string msg = (origin.empty() ? std::string("config") : origin) + ": invalid configuration";
        for (const auto& p : list_) msg += "\n  - " + p;
        throw ConfigError(msg);
    }
    void throw_if_any(const std::string& origin) const {
        if (!empty()) raise(origin);
    }

private:
    std::vector<std::string> list_;
};

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& where,
                    Problems& probs) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!known.count(it.key())) probs.add("unknown key '" + where + it.key() + "'");
    }
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& where, Problems& probs) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception&) {
        probs.add("'" + where + key + "' has the wrong type");
    }
}

template <typename T>
void read_number(const json& obj, const char* key, T& out, const std::string& where, Problems& probs) {
    if (!obj.contains(key)) return;
    if (!obj.at(key).is_number()) {
        probs.add("'" + where + key + "' must be a number");
        return;
    }
    if constexpr (std::is_integral_v<T>) {
        if (!obj.at(key).is_number_integer()) {
            probs.add("'" + where + key + "' must be an integer");
            return;
        }
        if constexpr (std::is_unsigned_v<T>) {
            if (obj.at(key).is_number_unsigned()) {
                out = obj.at(key).get<T>();
            } else if (obj.at(key).get<long long>() < 0) {
                probs.add("'" + where + key + "' must be non-negative");
                return;
            }
        }
    }
    out = obj.at(key).get<T>();
}

void check_ranges(const RunConfig& c, Problems& probs) {
    const auto& [model, optimizer, schedule_spec, fallback, steps, batch_size, seed, snapshot_every,
                 dataset, eps_target, eval_size] = c;
    (void)schedule_spec;
    (void)seed;
    if (steps < 1) probs.add("steps must be >= 1");
    if (batch_size < 1) probs.add("batch_size must be >= 1");
    if (snapshot_every < 1) {
        probs.add("snapshot_every must be >= 1");
    } else if (steps >= 1 && steps % snapshot_every != 0) {
        probs.add("snapshot_every must divide steps");
    }
    if (!(eps_target > 0 && eps_target < 1)) probs.add("eps_target must be in (0, 1)");
    if (eval_size < 1) probs.add("eval_size must be >= 1");
    if (dataset.empty()) probs.add("dataset must be set");
    if (!(optimizer.epsilon > 0)) probs.add("optimizer.epsilon must be > 0");
    try {
        optimizer.validate();
    } catch (const ConfigError& e) {
        probs.add(e.what());
    }
    if (!(fallback.eta > 0)) probs.add("fallback.eta must be > 0");
    if (!(fallback.beta1 >= 0 && fallback.beta1 < 1)) probs.add("fallback.beta1 must be in [0, 1)");
    if (!(fallback.beta2 >= 0 && fallback.beta2 < 1)) probs.add("fallback.beta2 must be in [0, 1)");
    if (!(fallback.epsilon > 0)) probs.add("fallback.epsilon must be > 0");
    if (model.layer_widths.empty()) probs.add("model.layer_widths needs at least one hidden width");
    for (int w : model.layer_widths) {
        if (w < 1) probs.add("model.layer_widths entries must be positive");
    }
    if (model.kind == ModelKind::char_lm) {
        if (model.context_length < 1) probs.add("model.context_length must be >= 1");
        if (model.embedding_dim < 1) probs.add("model.embedding_dim must be >= 1");
    }
}

}  // namespace

void RunConfig::validate() const {
    Problems probs;
    check_ranges(*this, probs);
    probs.throw_if_any("");
}

RunConfig parse_run_config(const json& doc) {
    Problems probs;
    RunConfig cfg;
    if (!doc.is_object()) throw ConfigError("config: expected a JSON object");
    reject_unknown(doc,
                   {"model", "optimizer", "fallback", "steps", "batch_size", "seed",
                    "snapshot_every", "dataset", "eps_target", "eval_size"},
                   "", probs);
    if (!doc.contains("model")) probs.add("missing 'model'");
    if (!doc.contains("optimizer")) probs.add("missing 'optimizer'");

    if (doc.contains("model")) {
        const json& m = doc["model"];
        if (!m.is_object()) {
            probs.add("'model' must be an object");
        } else {
            reject_unknown(m, {"kind", "layer_widths", "activation", "context_length", "embedding_dim"},
                           "model.", probs);
            std::string kind = "mlp_classifier";
            std::string act = "relu";
            read(m, "kind", kind, "model.", probs);
            read(m, "activation", act, "model.", probs);
            try {
                cfg.model.kind = parse_model_kind(kind);
            } catch (const ConfigError& e) {
                probs.add(e.what());
            }
            try {
                cfg.model.activation = parse_activation(act);
            } catch (const ConfigError& e) {
                probs.add(e.what());
            }
            if (!m.contains("layer_widths")) probs.add("missing 'model.layer_widths'");
            read(m, "layer_widths", cfg.model.layer_widths, "model.", probs);
            read_number(m, "context_length", cfg.model.context_length, "model.", probs);
            read_number(m, "embedding_dim", cfg.model.embedding_dim, "model.", probs);
        }
    }

    if (doc.contains("optimizer")) {
        const json& o = doc["optimizer"];
        if (!o.is_object()) {
            probs.add("'optimizer' must be an object");
        } else {
            reject_unknown(o,
                           {"variant", "eta", "beta1", "beta2", "epsilon", "ns_steps", "schedule",
                            "nesterov", "bias_correction"},
                           "optimizer.", probs);
            std::string variant = "muon2";
            read(o, "variant", variant, "optimizer.", probs);
            try {
                cfg.optimizer.variant = parse_variant(variant);
            } catch (const ConfigError& e) {
                probs.add(e.what());
            }
            read_number(o, "eta", cfg.optimizer.eta, "optimizer.", probs);
            read_number(o, "beta1", cfg.optimizer.beta1, "optimizer.", probs);
            read_number(o, "beta2", cfg.optimizer.beta2, "optimizer.", probs);
            read_number(o, "epsilon", cfg.optimizer.epsilon, "optimizer.", probs);
            read_number(o, "ns_steps", cfg.optimizer.ns_steps, "optimizer.", probs);
            read(o, "nesterov", cfg.optimizer.nesterov, "optimizer.", probs);
            read(o, "bias_correction", cfg.optimizer.bias_correction, "optimizer.", probs);
            read(o, "schedule", cfg.schedule_spec, "optimizer.", probs);
            try {
                cfg.optimizer.schedule = resolve_schedule(cfg.schedule_spec);
            } catch (const ConfigError& e) {
                probs.add(e.what());
            }
        }
    }

    if (doc.contains("fallback")) {
        const json& f = doc["fallback"];
        if (!f.is_object()) {
            probs.add("'fallback' must be an object");
        } else {
            reject_unknown(f, {"eta", "beta1", "beta2", "epsilon", "weight_decay"}, "fallback.", probs);
            read_number(f, "eta", cfg.fallback.eta, "fallback.", probs);
            read_number(f, "beta1", cfg.fallback.beta1, "fallback.", probs);
            read_number(f, "beta2", cfg.fallback.beta2, "fallback.", probs);
            read_number(f, "epsilon", cfg.fallback.epsilon, "fallback.", probs);
            read_number(f, "weight_decay", cfg.fallback.weight_decay, "fallback.", probs);
        }
    }

    read_number(doc, "steps", cfg.steps, "", probs);
    read_number(doc, "batch_size", cfg.batch_size, "", probs);
    read_number(doc, "seed", cfg.seed, "", probs);
    read_number(doc, "snapshot_every", cfg.snapshot_every, "", probs);
    read(doc, "dataset", cfg.dataset, "", probs);
    read_number(doc, "eps_target", cfg.eps_target, "", probs);
    read_number(doc, "eval_size", cfg.eval_size, "", probs);
    // Range checks run on whatever could be read, so one message lists
    // structural and value problems together.
    check_ranges(cfg, probs);
    probs.throw_if_any("");
    return cfg;
}

RunConfig parse_run_config_text(const std::string& text, const std::string& origin) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError((origin.empty() ? std::string("config") : origin) + ": " + e.what());
    }
    try {
        return parse_run_config(doc);
    } catch (const ConfigError& e) {
        if (origin.empty()) throw;
        throw ConfigError(origin + ": " + e.what());
    }
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open config file " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_run_config_text(ss.str(), path.string());
}

json to_json(const RunConfig& cfg) {
    json model{{"kind", to_string(cfg.model.kind)},
               {"layer_widths", cfg.model.layer_widths},
               {"activation", to_string(cfg.model.activation)}};
    if (cfg.model.kind == ModelKind::char_lm) {
        model["context_length"] = cfg.model.context_length;
        model["embedding_dim"] = cfg.model.embedding_dim;
    }
    const auto& o = cfg.optimizer;
    return json{{"model", model},
                {"optimizer",
                 {{"variant", to_string(o.variant)},
                  {"eta", o.eta},
                  {"beta1", o.beta1},
                  {"beta2", o.beta2},
                  {"epsilon", o.epsilon},
                  {"ns_steps", o.ns_steps},
                  {"schedule", cfg.schedule_spec},
                  {"nesterov", o.nesterov},
                  {"bias_correction", o.bias_correction}}},
                {"fallback",
                 {{"eta", cfg.fallback.eta},
                  {"beta1", cfg.fallback.beta1},
                  {"beta2", cfg.fallback.beta2},
                  {"epsilon", cfg.fallback.epsilon},
                  {"weight_decay", cfg.fallback.weight_decay}}},
                {"steps", cfg.steps},
                {"batch_size", cfg.batch_size},
                {"seed", cfg.seed},
                {"snapshot_every", cfg.snapshot_every},
                {"dataset", cfg.dataset},
                {"eps_target", cfg.eps_target},
                {"eval_size", cfg.eval_size}};
}

std::optional<std::uint64_t> seed_from_environment() {
    const char* v = std::getenv("POLARBENCH_SEED");
    if (!v || !*v) return std::nullopt;
    char* end = nullptr;
    const unsigned long long s = std::strtoull(v, &end, 10);
    if (*end != '\0') throw ConfigError("POLARBENCH_SEED is not an unsigned integer");
    return static_cast<std::uint64_t>(s);
}

}  // namespace polarbench
