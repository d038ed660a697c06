#include "polarbench/train.hpp"

#include <cmath>
#include <sstream>

#include "polarbench/dataset.hpp"
#include "polarbench/model.hpp"

namespace polarbench {

using nlohmann::json;

namespace {

// Keeps batch order independent of the init stream while deriving both
// from the one run seed.
constexpr std::uint64_t kSamplerSalt = 0x9e3779b97f4a7c15ULL;

DenseVector flatten(const DenseMatrix& m) {
    return Eigen::Map<const DenseVector>(m.data(), m.size());
}

DenseMatrix unflatten(const DenseVector& v, Index rows, Index cols) {
    return Eigen::Map<const DenseMatrix>(v.data(), rows, cols);
}

}  // namespace

std::optional<SpectrumReport> snapshot_spectrum(const OptimizerState& state,
                                                const OptimizerConfig& cfg,
                                                const ZoneBoundaries& bounds) {
    if (state.step_count < 1 || state.m.norm() == 0.0) return std::nullopt;
    try {
        return spectrum_report(ns_input(state, cfg), bounds, cfg.schedule, cfg.ns_steps);
    } catch (const DegenerateInputError&) {
        return std::nullopt;
    }
}

double RunLog::mean_dead_fraction() const {
    double total = 0;
    int n = 0;
    for (const auto& s : snapshots) {
        if (!s.report) continue;
        total += s.report->zones.dead;
        ++n;
    }
    return n ? total / n : 0.0;
}

double RunLog::mean_effective_rank() const {
    double total = 0;
    int n = 0;
    for (const auto& s : snapshots) {
        if (!s.report) continue;
        total += s.report->effective_rank;
        ++n;
    }
    return n ? total / n : 0.0;
}

std::string RunLog::to_jsonl() const {
    std::string out;
    auto emit = [&out](const json& j) {
        out += j.dump();
        out += '\n';
    };
    emit(json{{"type", "header"},
              {"config", to_json(config)},
              {"parameter_count", parameter_count},
              {"zones", to_json(zones)}});
    std::size_t snap = 0;
    for (const auto& r : steps) {
        emit(json{{"type", "step"},
                  {"step", r.step},
                  {"loss", r.loss},
                  {"grad_norm", r.grad_norm},
                  {"ns_steps", r.ns_steps}});
        for (; snap < snapshots.size() && snapshots[snap].step <= r.step; ++snap) {
            const auto& s = snapshots[snap];
            json rec{{"type", "snapshot"}, {"step", s.step}, {"layer", s.layer},
                     {"skipped", !s.report.has_value()}};
            if (s.report) rec["report"] = to_json(*s.report);
            emit(rec);
        }
    }
    json summary{{"type", "summary"},
                 {"status", diverged ? "diverged" : "ok"},
                 {"steps_completed", steps.empty() ? 0L : steps.back().step},
                 {"final_loss", diverged ? json(nullptr) : json(final_loss)},
                 {"mean_dead_fraction", mean_dead_fraction()},
                 {"mean_effective_rank", mean_effective_rank()}};
    if (diverged) {
        summary["diverged_step"] = diverged_step;
        summary["failure"] = failure;
    }
    emit(summary);
    return out;
}

RunLog train(const RunConfig& config) {
    config.validate();
    RunLog log;
    log.config = config;
    const OptimizerConfig& opt = config.optimizer;

    const Dataset data = load_dataset(config.dataset, config.model.context_length);
    const ModelSpec spec = bind_to_dataset(config.model, data);
    Parameters params = init_parameters(spec, config.seed);
    log.parameter_count = params.count();
    log.zones = zone_boundaries(opt.schedule, opt.ns_steps, config.eps_target);

    // Hidden matrices take the Muon-family rule; the output head, like biases
    // and the embedding table, is updated coordinate-wise.
    const std::size_t hidden = params.weights.size() - 1;
    std::vector<OptimizerState> matrix_state;
    for (std::size_t l = 0; l < hidden; ++l) {
        const auto& w = params.weights[l];
        matrix_state.push_back(OptimizerState::zeros(w.rows(), w.cols(), opt.variant));
    }
    AdamState head_state = AdamState::zeros(params.weights.back().size());
    std::vector<AdamState> bias_state;
    for (const auto& b : params.biases) bias_state.push_back(AdamState::zeros(b.size()));
    AdamState embed_state = AdamState::zeros(params.embedding.size());

    BatchSampler sampler(data, config.batch_size, config.seed ^ kSamplerSalt);
    const Batch held_out = eval_batch(data, config.eval_size);
    const std::vector<int> ns_counts(hidden, opt.ns_steps);

    auto fail = [&log](long step, const std::string& why) {
        log.diverged = true;
        log.diverged_step = step;
        log.failure = why;
        log.final_loss = std::nan("");
        return log;
    };

    for (long step = 1; step <= config.steps; ++step) {
        const Batch batch = sampler.next();
        LossAndGrads lg;
        try {
            lg = forward_backward(spec, params, batch);
        } catch (const DivergedError& e) {
            return fail(step, e.what());
        }
        if (!lg.grads.finite()) return fail(step, "non-finite gradient");

        for (std::size_t l = 0; l < hidden; ++l) {
            try {
                StepResult res = optimizer_step(params.weights[l], lg.grads.weights[l],
                                                matrix_state[l], opt);
                params.weights[l] = std::move(res.w);
                matrix_state[l] = std::move(res.state);
            } catch (const DegenerateInputError&) {
                // Zero momentum (e.g. a layer with no active units): no update this step.
            } catch (const NumericError& e) {
                return fail(step, e.what());
            }
        }
        {
            DenseMatrix& head = params.weights.back();
            AdamStepResult res = adamw_fallback_step(flatten(head), flatten(lg.grads.weights.back()),
                                                     head_state, config.fallback);
            head = unflatten(res.w, head.rows(), head.cols());
            head_state = std::move(res.state);
        }
        for (std::size_t l = 0; l < params.biases.size(); ++l) {
            AdamStepResult res =
                adamw_fallback_step(params.biases[l], lg.grads.biases[l], bias_state[l], config.fallback);
            params.biases[l] = std::move(res.w);
            bias_state[l] = std::move(res.state);
        }
        if (params.embedding.size() > 0) {
            AdamStepResult res = adamw_fallback_step(flatten(params.embedding),
                                                     flatten(lg.grads.embedding), embed_state,
                                                     config.fallback);
            params.embedding = unflatten(res.w, params.embedding.rows(), params.embedding.cols());
            embed_state = std::move(res.state);
        }

        log.steps.push_back({step, lg.loss, std::sqrt(lg.grads.squared_norm()), ns_counts});
        if (!params.finite()) return fail(step, "non-finite parameters");

        if (step % config.snapshot_every == 0) {
            for (std::size_t l = 0; l < matrix_state.size(); ++l) {
                log.snapshots.push_back(
                    {step, static_cast<int>(l), snapshot_spectrum(matrix_state[l], opt, log.zones)});
            }
        }
    }

    log.final_loss = evaluate_loss(spec, params, held_out);
    if (!std::isfinite(log.final_loss)) return fail(config.steps, "non-finite held-out loss");
    return log;
}

RunSummary summarize_jsonl(const std::string& text, const std::string& origin) {
    const std::string where = origin.empty() ? "runlog" : origin;
    std::istringstream in(text);
    std::string line;
    RunSummary s;
    bool have_header = false;
    bool have_summary = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ConfigError(where + ": malformed record: " + e.what());
        }
        const std::string type = rec.value("type", "");
        if (type == "header") {
            const json& o = rec.at("config").at("optimizer");
            s.variant = o.at("variant").get<std::string>();
            s.ns_steps = o.at("ns_steps").get<int>();
            s.eta = o.at("eta").get<double>();
            s.seed = rec.at("config").at("seed").get<std::uint64_t>();
            have_header = true;
        } else if (type == "summary") {
            s.diverged = rec.at("status").get<std::string>() != "ok";
            s.final_loss = rec.at("final_loss").is_null() ? std::nan("")
                                                          : rec.at("final_loss").get<double>();
            s.mean_dead_fraction = rec.at("mean_dead_fraction").get<double>();
            have_summary = true;
        }
    }
    if (!have_header || !have_summary) {
        throw ConfigError(where + ": run log is missing its header or summary record");
    }
    return s;
}

}  // namespace polarbench
