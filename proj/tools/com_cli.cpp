// Command-line front end: database building, clustering, sampling, the
// loss-weight stream, scene composition and the synthetic experiment.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "com/clustering.hpp"
#include "com/comloss.hpp"
#include "com/config.hpp"
#include "com/difficulty_tracker.hpp"
#include "com/error.hpp"
#include "com/gt_database.hpp"
#include "com/harness.hpp"
#include "com/sampler.hpp"
#include "com/scene_composer.hpp"

namespace fs = std::filesystem;
using namespace com;

namespace {

struct GlobalOptions {
    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> workers;
};

RunConfig effective_config(const GlobalOptions& g) {
    RunConfig cfg;
    if (!g.config_path.empty()) cfg = load_config(g.config_path);
    for (const auto& kv : g.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
        set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (g.seed) cfg.run.seed = *g.seed;
    if (g.workers) cfg.run.workers = *g.workers;
    cfg.validate();
    return cfg;
}

std::string pick(const std::string& flag, const std::string& fallback, const char* what) {
    if (!flag.empty()) return flag;
    if (!fallback.empty()) return fallback;
    throw ConfigError(std::string("no ") + what + " given (flag or config path key)");
}

/// Writes to `path`, or stdout when the path is empty or "-".
template <typename Fn>
void emit(const std::string& path, Fn&& fn) {
    if (path.empty() || path == "-") {
        fn(std::cout);
        std::cout.flush();
        return;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    fn(out);
    if (!out) throw IoError("write to '" + path + "' failed");
}

std::string escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        if (c == '\n') {
            out += "\\n";
            continue;
        }
        out += c;
    }
    return out;
}

int fail(int code, std::string_view kind, std::string_view msg) {
    std::cerr << "error code=" << code << " kind=" << kind << " msg=\"" << escape(msg) << "\"\n";
    return code;
}

GroupRegistry registry_for(const GtDatabase& db, ObjectClass cls, const RunConfig& cfg, const std::string& path) {
    if (path.empty()) return build_registry(db, cls, cfg.run.clustering.rule(cls));
    GroupRegistry reg = load_registry(path);
    if (reg.cls != cls) throw ValidationError("registry is for class " + std::string(class_name(reg.cls)));
    for (const auto& [id, g] : reg.group_of) {
        (void)g;
        if (!db.find(id)) throw ValidationError("registry object " + std::to_string(id) + " not in database");
    }
    return reg;
}

GroupScores scores_for(int G, const std::string& path) {
    if (path.empty()) return init_scores(G);
    std::ifstream in(path);
    if (!in) throw IoError("cannot open score log '" + path + "'");
    return parse_scores(in, G);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Curriculum object sampling for LiDAR ground-truth augmentation"};
    app.require_subcommand(1);
    app.fallthrough();
    app.footer(config_help());

    GlobalOptions global;
    app.add_option("--config", global.config_path, "config file (key = value)");
    app.add_option("--set", global.overrides, "override a config key: --set key=value (repeatable)");
    app.add_option("--seed", global.seed, "random seed (overrides config)");
    app.add_option("--workers", global.workers, "worker threads, 0 = all cores (overrides config)");

    // build-db
    std::string manifest, db_out;
    auto* build = app.add_subcommand("build-db", "crop labeled objects from a frame manifest into a database");
    build->add_option("--manifest", manifest, "JSON Lines frame manifest");
    build->add_option("--out", db_out, "database file to write");

    // cluster
    std::string cluster_db, cluster_class = "vehicle", registry_out;
    auto* cluster = app.add_subcommand("cluster", "group database objects and print G and the n_g histogram");
    cluster->add_option("--db", cluster_db, "database file");
    cluster->add_option("--class", cluster_class, "vehicle | pedestrian | cyclist");
    cluster->add_option("--out", registry_out, "registry file to write");

    // sample
    std::string sample_db, sample_registry, sample_scores, sample_class = "vehicle", sample_out;
    double sample_epoch = 1.0;
    std::size_t sample_k = 1;
    bool sample_unique = false;
    auto* sample = app.add_subcommand("sample", "plan one epoch and draw objects");
    sample->add_option("--db", sample_db, "database file");
    sample->add_option("--registry", sample_registry, "registry file (default: cluster the database)");
    sample->add_option("--scores", sample_scores, "group score log (default: initial scores)");
    sample->add_option("--class", sample_class, "vehicle | pedestrian | cyclist");
    sample->add_option("--epoch,-t", sample_epoch, "epoch t");
    sample->add_option("--k", sample_k, "number of draws");
    sample->add_flag("--unique", sample_unique, "draw without repeating an object");
    sample->add_option("--out", sample_out, "output JSON file (default stdout)");

    // weights
    auto* weights = app.add_subcommand("weights", "loss-weight stream: JSON records on stdin, replies on stdout");

    // compose
    std::string compose_manifest, compose_db, compose_scores, compose_out;
    double compose_epoch = 1.0;
    auto* compose_cmd = app.add_subcommand("compose", "augment every frame of a manifest");
    compose_cmd->add_option("--manifest", compose_manifest, "JSON Lines frame manifest");
    compose_cmd->add_option("--db", compose_db, "database file");
    compose_cmd->add_option("--scores", compose_scores, "score log for the target class (default: initial scores)");
    compose_cmd->add_option("--epoch,-t", compose_epoch, "epoch t");
    compose_cmd->add_option("--out", compose_out, "output directory");

    // synth
    std::string synth_out;
    auto* synth = app.add_subcommand("synth", "write a synthetic labeled world as a frame manifest");
    synth->add_option("--out", synth_out, "output directory");

    // simulate
    std::string csv_out, svg_out;
    int seeds = 1;
    std::string sweep_lambdas, sweep_sigmas, sweep_modes;
    auto* simulate = app.add_subcommand("simulate", "run the closed-loop synthetic experiment");
    simulate->add_option("--csv", csv_out, "trend table (default stdout)");
    simulate->add_option("--svg", svg_out, "tertile plot");
    simulate->add_option("--seeds", seeds, "number of seeds, starting at --seed");
    simulate->add_option("--lambdas", sweep_lambdas, "sweep: comma-separated lambda values");
    simulate->add_option("--sigmas", sweep_sigmas, "sweep: comma-separated sigma values");
    simulate->add_option("--modes", sweep_modes, "sweep: comma-separated modes");

    // config
    std::string config_out;
    auto* config = app.add_subcommand("config", "print the effective configuration");
    config->add_option("--out", config_out, "file to write (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail(static_cast<int>(ErrorKind::config), "config", e.what());
    }

    try {
        const RunConfig cfg = effective_config(global);
        const unsigned workers = cfg.run.workers;

        if (*build) {
            const fs::path m = pick(manifest, cfg.paths.manifest, "manifest");
            const auto frames = load_frames(m, workers);
            const auto db = build_database(frames, m.filename().string(), cfg.run.clustering.voxels, workers);
            save_database(db, pick(db_out, cfg.paths.db, "output database"));
            std::cout << "frames=" << frames.size() << " objects=" << db.size();
            for (auto c : all_classes) std::cout << ' ' << class_name(c) << '=' << db.objects(c).size();
            std::cout << '\n';
        } else if (*cluster) {
            const auto db = load_database(pick(cluster_db, cfg.paths.db, "database"));
            const auto cls = parse_class(cluster_class);
            const auto reg = build_registry(db, cls, cfg.run.clustering.rule(cls));
            std::cout << "G=" << reg.G() << '\n' << "class=" << class_name(cls) << " objects=" << reg.object_count()
                      << '\n';
            std::cout << "group distance size angle occupancy n sampleable\n";
            for (int g = 0; g < reg.G(); ++g) {
                std::cout << g;
                for (int b : reg.keys[static_cast<std::size_t>(g)]) std::cout << ' ' << b;
                std::cout << ' ' << reg.members[static_cast<std::size_t>(g)].size() << ' '
                          << reg.sampleable[static_cast<std::size_t>(g)].size() << '\n';
            }
            const std::string out = registry_out.empty() ? cfg.paths.registry : registry_out;
            if (!out.empty()) save_registry(reg, out);
        } else if (*sample) {
            const auto db = load_database(pick(sample_db, cfg.paths.db, "database"));
            const auto cls = parse_class(sample_class);
            const auto reg = registry_for(db, cls, cfg, sample_registry.empty() ? cfg.paths.registry : sample_registry);
            const auto scores = scores_for(reg.G(), sample_scores.empty() ? cfg.paths.scores : sample_scores);
            const CurriculumState state{sample_epoch, static_cast<double>(cfg.run.total_epochs), cfg.run.lambda,
                                        cfg.run.sigma, cfg.run.mode};
            const auto p = plan(scores, reg.sampleable_counts(), state);
            CounterRng rng(derive_seed(cfg.run.seed, static_cast<std::uint64_t>(sample_epoch)));
            const auto draws = sample_unique ? draw_unique(p, reg, rng, sample_k) : draw(p, reg, rng, sample_k);
            nlohmann::ordered_json j;
            j["class"] = std::string(class_name(cls));
            j["epoch"] = sample_epoch;
            j["seed"] = cfg.run.seed;
            j["plan"] = plan_to_json(p);
            j["draws"] = nlohmann::ordered_json::array();
            for (const auto& d : draws) j["draws"].push_back({{"id", d.id}, {"group", d.group}});
            emit(sample_out.empty() ? cfg.paths.output : sample_out, [&](std::ostream& o) { o << j.dump() << '\n'; });
        } else if (*weights) {
            WeightStream stream(cfg.run.loss);
            stream.run(std::cin, std::cout);
        } else if (*compose_cmd) {
            const fs::path m = pick(compose_manifest, cfg.paths.manifest, "manifest");
            const fs::path out_dir = pick(compose_out, cfg.paths.output, "output directory");
            const auto frames = load_frames(m, workers);
            const auto db = load_database(pick(compose_db, cfg.paths.db, "database"));
            const DatabaseIndex index(db);
            std::array<std::optional<GroupRegistry>, class_count> regs;
            std::array<std::optional<SamplingPlan>, class_count> plans;
            ClassSamplings samplings{};
            for (auto c : all_classes) {
                auto reg = build_registry(db, c, cfg.run.clustering.rule(c));
                const auto counts = reg.sampleable_counts();
                if (std::none_of(counts.begin(), counts.end(), [](double n) { return n > 0.0; })) continue;
                const auto scores = c == cfg.run.target ? scores_for(reg.G(), compose_scores.empty() ? cfg.paths.scores
                                                                                                    : compose_scores)
                                                        : init_scores(reg.G());
                const CurriculumState state{compose_epoch, static_cast<double>(cfg.run.total_epochs), cfg.run.lambda,
                                            cfg.run.sigma, cfg.run.mode};
                plans[class_index(c)] = plan(scores, counts, state);
                regs[class_index(c)] = std::move(reg);
                samplings[class_index(c)] = ClassSampling{&*regs[class_index(c)], &*plans[class_index(c)]};
            }
            std::vector<AugmentedFrame> out(frames.size());
            const auto epoch_seed = derive_seed(cfg.run.seed, static_cast<std::uint64_t>(compose_epoch));
            parallel_for(frames.size(), workers, [&](std::size_t i) {
                CounterRng rng(derive_seed(epoch_seed, i));
                out[i] = compose(frames[i], index, samplings, cfg.run.composer, rng);
            });
            fs::create_directories(out_dir);
            std::vector<Frame> augmented;
            augmented.reserve(out.size());
            for (const auto& af : out) augmented.push_back(af.frame);
            write_manifest(out_dir / "manifest.jsonl", augmented);
            emit((out_dir / "provenance.jsonl").string(), [&](std::ostream& o) {
                for (const auto& af : out) o << provenance_line(af) << '\n';
            });
            std::size_t inserted = 0, skipped = 0;
            for (const auto& af : out) {
                inserted += af.inserted_count();
                skipped += af.provenance.size() - af.inserted_count();
            }
            std::cout << "frames=" << out.size() << " inserted=" << inserted << " skipped=" << skipped << '\n';
        } else if (*synth) {
            const fs::path out_dir = pick(synth_out, cfg.paths.output, "output directory");
            const auto world = generate_synthetic_db(cfg.run.world, cfg.run.seed, cfg.run.clustering);
            fs::create_directories(out_dir);
            write_manifest(out_dir / "manifest.jsonl", world.frames);
            std::cout << "frames=" << world.frames.size() << " objects=" << world.db.size() << '\n';
        } else if (*simulate) {
            if (seeds < 1) throw ConfigError("--seeds must be >= 1");
            const bool is_sweep = !sweep_lambdas.empty() || !sweep_sigmas.empty() || !sweep_modes.empty();
            if (is_sweep) {
                const auto lambdas = sweep_lambdas.empty() ? std::vector<double>{cfg.run.lambda}
                                                           : parse_double_list(sweep_lambdas, "--lambdas");
                const auto sigmas = sweep_sigmas.empty() ? std::vector<double>{cfg.run.sigma}
                                                         : parse_double_list(sweep_sigmas, "--sigmas");
                std::vector<CurriculumMode> modes;
                if (sweep_modes.empty()) modes.push_back(cfg.run.mode);
                for (const auto& m : sweep_modes.empty() ? std::vector<std::string>{} : split(sweep_modes, ','))
                    modes.push_back(parse_mode(m));
                std::vector<SweepCell> grid;
                for (auto m : modes)
                    for (double l : lambdas)
                        for (double s : sigmas) grid.push_back({l, s, m});
                const auto rows = sweep(cfg.run, grid, seeds);
                emit(csv_out.empty() ? cfg.paths.output : csv_out, [&](std::ostream& o) { write_sweep_csv(o, rows); });
            } else {
                std::vector<TrendReport> reports;
                for (int s = 0; s < seeds; ++s) {
                    HarnessConfig run = cfg.run;
                    run.seed = cfg.run.seed + static_cast<std::uint64_t>(s);
                    reports.push_back(run_experiment(run));
                }
                emit(csv_out.empty() ? cfg.paths.output : csv_out, [&](std::ostream& o) {
                    for (const auto& r : reports) write_trend_csv(o, r);
                });
                if (!svg_out.empty())
                    emit(svg_out, [&](std::ostream& o) { o << trend_svg(average_tertiles(reports)); });
            }
        } else if (*config) {
            emit(config_out, [&](std::ostream& o) { dump_config(o, cfg); });
        }
    } catch (const Error& e) {
        return fail(e.exit_code(), error_kind_name(e.kind()), e.what());
    } catch (const fs::filesystem_error& e) {
        return fail(static_cast<int>(ErrorKind::io), "io", e.what());
    } catch (const std::exception& e) {
        return fail(1, "internal", e.what());
    }
    return 0;
}
