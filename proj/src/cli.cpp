#include "polarbench/cli.hpp"

#include <glob.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>
#include <tuple>

#include <CLI11.hpp>

#include "polarbench/diagnostics.hpp"

namespace polarbench {

using nlohmann::json;

namespace {

std::string fmt17(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

std::string fmt_short(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 6);
    return std::string(buf, res.ptr);
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    if (!f) throw ConfigError("cannot read " + p.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& p, const std::string& text) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    if (!f) throw ConfigError("cannot write " + p.string());
    f << text;
}

void emit(const std::string& text, const std::string& out_path, std::ostream& out) {
    if (out_path.empty() || out_path == "-") {
        out << text;
    } else {
        write_file(out_path, text);
    }
}

}  // namespace

std::string polar_map_csv(const CoefficientSchedule& schedule, int k, int grid) {
    if (k < 1) throw ConfigError("polar-map: --steps must be >= 1");
    if (grid < 1) throw ConfigError("polar-map: --grid must be >= 1");
    schedule.require_steps(k);
    std::string csv = "sigma";
    for (int j = 1; j <= k; ++j) csv += ",phi_" + std::to_string(j);
    csv += '\n';
    for (int i = 0; i < grid; ++i) {
        double sigma = grid == 1 ? 1.0 : static_cast<double>(i) / (grid - 1);
        csv += fmt17(sigma);
        for (int j = 0; j < k; ++j) {
            sigma = phi_scalar(sigma, schedule.at(static_cast<std::size_t>(j)));
            csv += ',' + fmt17(sigma);
        }
        csv += '\n';
    }
    return csv;
}

json grid_study(const std::vector<CoefficientSchedule>& schedules, int k, int grid) {
    if (k < 0) throw ConfigError("grid-study: --steps must be >= 0");
    const std::vector<double> sigmas = uniform_grid(grid);
    json doc{{"grid", grid}, {"k", k}, {"grid_kind", "midpoint"}, {"schedules", json::array()}};
    for (const auto& s : schedules) {
        s.require_steps(k);
        std::vector<double> mapped;
        mapped.reserve(sigmas.size());
        for (double x : sigmas) mapped.push_back(phi_iterate(x, s, k));
        json errors = json::object();
        for (OrthNorm n : {OrthNorm::normalized_nuclear, OrthNorm::normalized_frobenius,
                           OrthNorm::raw_frobenius, OrthNorm::max_abs}) {
            errors[std::string(to_string(n))] = orthogonality_error_from_spectrum(mapped, n);
        }
        doc["schedules"].push_back(
            json{{"schedule", s.name()},
                 {"orthogonality_error", orthogonality_error_from_spectrum(mapped)},
                 {"orthogonality_errors", errors},
                 {"cosine", cosine_from_spectrum(sigmas, s, k)},
                 {"phi_at_one", s.phi_at_one()}});
    }
    return doc;
}

std::vector<SweepEntry> parse_sweep_entries(const std::string& spec) {
    std::vector<SweepEntry> out;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        const auto colon = item.find(':');
        if (colon == std::string::npos) throw ConfigError("sweep entry '" + item + "' is not variant:k");
        SweepEntry e;
        e.variant = parse_variant(item.substr(0, colon));
        const std::string k = item.substr(colon + 1);
        auto res = std::from_chars(k.data(), k.data() + k.size(), e.ns_steps);
        if (res.ec != std::errc() || res.ptr != k.data() + k.size() || e.ns_steps < 1) {
            throw ConfigError("sweep entry '" + item + "' has a bad step count");
        }
        out.push_back(e);
    }
    if (out.empty()) throw ConfigError("no sweep entries given");
    return out;
}

std::vector<double> parse_number_list(const std::string& spec) {
    std::vector<double> out;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        double v = 0;
        auto res = std::from_chars(item.data(), item.data() + item.size(), v);
        if (res.ec != std::errc() || res.ptr != item.data() + item.size()) {
            throw ConfigError("'" + item + "' is not a number");
        }
        out.push_back(v);
    }
    if (out.empty()) throw ConfigError("empty number list");
    return out;
}

std::vector<SweepRun> run_sweep(const RunConfig& base, const std::vector<SweepEntry>& entries,
                                const std::vector<double>& etas,
                                const std::filesystem::path& out_dir, int jobs) {
    std::vector<RunConfig> configs;
    std::vector<SweepRun> runs;
    for (const auto& e : entries) {
        for (double eta : etas) {
            RunConfig c = base;
            c.optimizer.variant = e.variant;
            c.optimizer.ns_steps = e.ns_steps;
            c.optimizer.eta = eta;
            c.validate();
            SweepRun r;
            r.file = out_dir / (std::string(to_string(e.variant)) + "_k" + std::to_string(e.ns_steps) +
                                "_lr" + fmt_short(eta) + "_seed" + std::to_string(c.seed) + ".jsonl");
            configs.push_back(std::move(c));
            runs.push_back(std::move(r));
        }
    }
    std::filesystem::create_directories(out_dir);

    std::atomic<std::size_t> next{0};
    std::mutex err_mu;
    std::exception_ptr first_error;
    auto worker = [&]() {
        for (std::size_t i = next++; i < configs.size(); i = next++) {
            try {
                const RunLog log = train(configs[i]);
                const std::string text = log.to_jsonl();
                write_file(runs[i].file, text);
                runs[i].summary = summarize_jsonl(text, runs[i].file.string());
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mu);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };
    const int n_workers = std::clamp(jobs, 1, static_cast<int>(configs.size()));
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (first_error) std::rethrow_exception(first_error);
    return runs;
}

json sweep_summary(const std::vector<SweepRun>& runs) {
    json doc{{"runs", json::array()}, {"best", json::array()}};
    std::map<std::tuple<std::string, int, std::uint64_t>, const SweepRun*> best;
    for (const auto& r : runs) {
        const auto& s = r.summary;
        doc["runs"].push_back(json{{"file", r.file.filename().string()},
                                   {"variant", s.variant},
                                   {"ns_steps", s.ns_steps},
                                   {"eta", s.eta},
                                   {"seed", s.seed},
                                   {"diverged", s.diverged},
                                   {"final_loss", s.diverged ? json(nullptr) : json(s.final_loss)},
                                   {"mean_dead_fraction", s.mean_dead_fraction}});
        if (s.diverged) continue;
        auto& slot = best[{s.variant, s.ns_steps, s.seed}];
        if (!slot || s.final_loss < slot->summary.final_loss) slot = &r;
    }
    for (const auto& [key, r] : best) {
        doc["best"].push_back(json{{"variant", std::get<0>(key)},
                                   {"ns_steps", std::get<1>(key)},
                                   {"seed", std::get<2>(key)},
                                   {"eta", r->summary.eta},
                                   {"final_loss", r->summary.final_loss},
                                   {"file", r->file.filename().string()}});
    }
    return doc;
}

std::string render_report(const std::vector<RunSummary>& runs) {
    struct Row {
        double best_loss = 0;
        double best_eta = 0;
        int count = 0;
        int diverged = 0;
        bool any = false;
    };
    std::map<std::pair<std::string, int>, Row> rows;
    for (const auto& r : runs) {
        Row& row = rows[{r.variant, r.ns_steps}];
        ++row.count;
        if (r.diverged) {
            ++row.diverged;
            continue;
        }
        if (!row.any || r.final_loss < row.best_loss) {
            row.best_loss = r.final_loss;
            row.best_eta = r.eta;
            row.any = true;
        }
    }
    std::string md = "| variant | ns_steps | best_eta | best_final_loss | runs | diverged |\n";
    md += "|---|---|---|---|---|---|\n";
    for (const auto& [key, row] : rows) {
        md += "| " + key.first + " | " + std::to_string(key.second) + " | " +
              (row.any ? fmt_short(row.best_eta) : "-") + " | " +
              (row.any ? fmt_short(row.best_loss) : "diverged") + " | " +
              std::to_string(row.count) + " | " + std::to_string(row.diverged) + " |\n";
    }
    return md;
}

namespace {

std::vector<std::string> expand_glob(const std::string& pattern) {
    glob_t g{};
    std::vector<std::string> out;
    const int rc = ::glob(pattern.c_str(), 0, nullptr, &g);
    if (rc == 0) {
        for (std::size_t i = 0; i < g.gl_pathc; ++i) out.emplace_back(g.gl_pathv[i]);
    }
    globfree(&g);
    std::sort(out.begin(), out.end());
    return out;
}

RunConfig apply_seed_override(RunConfig cfg) {
    if (auto s = seed_from_environment()) cfg.seed = *s;
    return cfg;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Muon-family optimizer diagnostics and desk-scale training"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");

    std::string schedule = "keller";
    int steps = 5;
    int grid = 101;
    std::string out_path;

    auto* pm = app.add_subcommand("polar-map", "Tabulate φ¹..φᵏ on an inclusive [0, 1] grid");
    pm->add_option("--schedule", schedule, "keller, exact or schedule JSON file");
    pm->add_option("--steps", steps, "NS steps k")->check(CLI::PositiveNumber);
    pm->add_option("--grid", grid, "grid points")->check(CLI::PositiveNumber);
    pm->add_option("--out", out_path, "CSV output path (default stdout)");

    double eps = kDefaultEpsTarget;
    bool zones_json = false;
    auto* zn = app.add_subcommand("zones", "Dead / convergent zone boundaries");
    zn->add_option("--schedule", schedule, "keller, exact or schedule JSON file");
    zn->add_option("--steps", steps, "NS steps k")->check(CLI::PositiveNumber);
    zn->add_option("--eps", eps, "target band half-width ε");
    zn->add_flag("--json", zones_json, "emit JSON");
    zn->add_option("--out", out_path, "output path (default stdout)");

    std::string schedules = "exact,keller";
    int study_grid = 1024;
    bool study_json = false;
    std::string study_csv;
    auto* gs = app.add_subcommand("grid-study", "Metrics on a uniform singular-value grid");
    gs->add_option("--schedules", schedules, "comma-separated schedule names or files");
    gs->add_option("--steps", steps, "NS steps k (0 allowed)")->check(CLI::NonNegativeNumber);
    gs->add_option("--grid", study_grid, "grid points")->check(CLI::PositiveNumber);
    auto* gs_json = gs->add_flag("--json", study_json, "emit JSON summary");
    auto* gs_csv = gs->add_option("--csv", study_csv, "write sigma,phi_k_sigma columns per schedule");
    gs_json->excludes(gs_csv);
    gs->add_option("--out", out_path, "output path for --json (default stdout)");

    std::string config_path;
    auto* tr = app.add_subcommand("train", "Run one training configuration");
    tr->add_option("--config", config_path, "run config JSON")->required();
    tr->add_option("--out", out_path, "RunLog path (default stdout)");

    std::string lrs;
    std::string variants;
    std::string sweep_dir = "sweep_out";
    int jobs = 1;
    auto* sw = app.add_subcommand("sweep", "Learning-rate sweep over optimizer variants");
    sw->add_option("--config", config_path, "run config JSON (may contain a 'sweep' block)")->required();
    sw->add_option("--lrs", lrs, "comma-separated learning rates");
    sw->add_option("--variants", variants, "comma-separated variant:k list, e.g. muon:5,muon2:3");
    sw->add_option("--out", sweep_dir, "output directory");
    sw->add_option("--jobs", jobs, "concurrent runs")->check(CLI::PositiveNumber);

    std::string runs_glob;
    auto* rp = app.add_subcommand("report", "Markdown table of best loss per variant and k");
    rp->add_option("--runs", runs_glob, "glob of RunLog files")->required();
    rp->add_option("--out", out_path, "markdown output path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    }

    try {
        if (pm->parsed()) {
            emit(polar_map_csv(resolve_schedule(schedule), steps, grid), out_path, out);
        } else if (zn->parsed()) {
            const ZoneBoundaries b = zone_boundaries(resolve_schedule(schedule), steps, eps);
            if (zones_json) {
                emit(to_json(b).dump(2) + "\n", out_path, out);
            } else {
                std::ostringstream s;
                s << "schedule " << b.schedule << ", k=" << b.k << ", eps=" << b.eps_target << "\n"
                  << "dead        [0, " << fmt17(b.dead_hi) << ")\n"
                  << "transition  [" << fmt17(b.dead_hi) << ", " << fmt17(b.conv_lo) << ")\n"
                  << "convergent  [" << fmt17(b.conv_lo) << ", 1]\n";
                emit(s.str(), out_path, out);
            }
        } else if (gs->parsed()) {
            std::vector<CoefficientSchedule> list;
            std::stringstream ss(schedules);
            std::string item;
            while (std::getline(ss, item, ',')) {
                if (!item.empty()) list.push_back(resolve_schedule(item));
            }
            if (list.empty()) throw ConfigError("grid-study: no schedules given");
            if (!study_csv.empty()) {
                const std::vector<double> sigmas = uniform_grid(study_grid);
                std::string csv = "sigma";
                for (const auto& s : list) csv += ",phi_k_" + s.name();
                csv += '\n';
                for (double x : sigmas) {
                    csv += fmt17(x);
                    for (const auto& s : list) csv += ',' + fmt17(phi_iterate(x, s, steps));
                    csv += '\n';
                }
                write_file(study_csv, csv);
            } else {
                const json doc = grid_study(list, steps, study_grid);
                if (study_json) {
                    emit(doc.dump(2) + "\n", out_path, out);
                } else {
                    std::ostringstream s;
                    for (const auto& e : doc["schedules"]) {
                        s << e["schedule"].get<std::string>()
                          << ": orthogonality_error=" << fmt17(e["orthogonality_error"].get<double>())
                          << " cosine=" << fmt17(e["cosine"].get<double>()) << "\n";
                    }
                    emit(s.str(), out_path, out);
                }
            }
        } else if (tr->parsed()) {
            const RunConfig cfg = apply_seed_override(load_run_config(config_path));
            const auto t0 = std::chrono::steady_clock::now();
            const RunLog log = train(cfg);
            const double secs =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            emit(log.to_jsonl(), out_path, out);
            err << "train: " << log.steps.size() << " steps in " << fmt_short(secs) << " s, final_loss "
                << (log.diverged ? std::string("diverged") : fmt17(log.final_loss)) << "\n";
            if (log.diverged) {
                err << "diverged at step " << log.diverged_step << ": " << log.failure << "\n";
                return kExitDiverged;
            }
        } else if (sw->parsed()) {
            const json raw = [&] {
                try {
                    return json::parse(read_file(config_path));
                } catch (const json::parse_error& e) {
                    throw ConfigError(config_path + ": " + e.what());
                }
            }();
            json base_doc = raw;
            json sweep_block = json::object();
            if (base_doc.is_object() && base_doc.contains("sweep")) {
                sweep_block = base_doc["sweep"];
                base_doc.erase("sweep");
            }
            const RunConfig base = apply_seed_override(parse_run_config(base_doc));
            std::vector<double> etas;
            if (!lrs.empty()) {
                etas = parse_number_list(lrs);
            } else if (sweep_block.contains("lrs")) {
                etas = sweep_block["lrs"].get<std::vector<double>>();
            } else {
                throw ConfigError("sweep: no learning rates (--lrs or sweep.lrs)");
            }
            std::vector<SweepEntry> entries;
            if (!variants.empty()) {
                entries = parse_sweep_entries(variants);
            } else if (sweep_block.contains("variants")) {
                std::string joined;
                for (const auto& v : sweep_block["variants"]) {
                    if (!joined.empty()) joined += ',';
                    joined += v.get<std::string>();
                }
                entries = parse_sweep_entries(joined);
            } else {
                entries.push_back({base.optimizer.variant, base.optimizer.ns_steps});
            }
            std::vector<std::uint64_t> seeds{base.seed};
            if (!seed_from_environment() && sweep_block.contains("seeds")) {
                seeds = sweep_block["seeds"].get<std::vector<std::uint64_t>>();
                if (seeds.empty()) throw ConfigError("sweep.seeds is empty");
            }
            std::vector<SweepRun> runs;
            for (std::uint64_t seed : seeds) {
                RunConfig c = base;
                c.seed = seed;
                auto batch = run_sweep(c, entries, etas, sweep_dir, jobs);
                runs.insert(runs.end(), batch.begin(), batch.end());
            }
            const json summary = sweep_summary(runs);
            write_file(std::filesystem::path(sweep_dir) / "summary.json", summary.dump(2) + "\n");
            out << summary.dump(2) << "\n";
        } else if (rp->parsed()) {
            const auto files = expand_glob(runs_glob);
            if (files.empty()) throw ConfigError("report: no run files match '" + runs_glob + "'");
            std::vector<RunSummary> summaries;
            for (const auto& f : files) summaries.push_back(summarize_jsonl(read_file(f), f));
            emit(render_report(summaries), out_path, out);
        }
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DivergedError& e) {
        err << "diverged: " << e.what() << "\n";
        return kExitDiverged;
    } catch (const AnalysisError& e) {
        err << "analysis error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const NumericError& e) {
        err << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const DegenerateInputError& e) {
        err << "degenerate input: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const DimensionError& e) {
        err << "dimension error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const nlohmann::json::exception& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitOk;
}

}  // namespace polarbench
