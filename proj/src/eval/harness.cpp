#include "atc/eval/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "atc/agent/http_backend.hpp"
#include "atc/agent/runtime.hpp"
#include "atc/agent/scripted.hpp"
#include "atc/conflict/metrics.hpp"
#include "atc/errors.hpp"
#include "atc/eval/rate_limit.hpp"
#include "atc/experience/library.hpp"
#include "atc/sim/command.hpp"

namespace atc::eval {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

double wall_now_s() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(Errc::config_error, fmt::format("cannot write {}", path.string()));
    out << text;
}

std::string read_text_file(const fs::path& path, Errc missing_code) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(missing_code, fmt::format("cannot read {}", path.string()));
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

json stats_to_json(const BracketStats& b) {
    return json{{"total", b.total},
                {"collision", b.collision},
                {"los", b.los},
                {"resolved", b.resolved},
                {"success_rate", b.success_rate()}};
}

BracketStats stats_from_json(const json& j) {
    BracketStats b;
    b.total = j.at("total").get<int>();
    b.collision = j.at("collision").get<int>();
    b.los = j.at("los").get<int>();
    b.resolved = j.at("resolved").get<int>();
    return b;
}

} // namespace

void RunConfig::validate() const {
    if (mode != "single" && mode != "multi") {
        raise(Errc::config_error, fmt::format("mode must be single or multi, got \"{}\"", mode));
    }
    if (backend_spec.empty()) raise(Errc::config_error, "backend spec must not be empty");
    if (temperature < 0.0 || temperature > 2.0) {
        raise(Errc::config_error, fmt::format("temperature {} out of [0, 2]", temperature));
    }
    if (parallelism < 1) raise(Errc::config_error, "parallelism must be at least 1");
    if (max_iterations < 1) raise(Errc::config_error, "max_iterations must be at least 1");
    if (replan_limit < 0) raise(Errc::config_error, "replan_limit must not be negative");
    if (scenario_timeout_s < 0.0) {
        raise(Errc::config_error, "scenario timeout must not be negative");
    }
    if (!experience && !experience_library_path.empty()) {
        raise(Errc::config_error, "experience library path set but experience is off");
    }
    if (experience && embedder_spec.empty()) {
        raise(Errc::config_error, "experience needs an embedder spec");
    }
    if (standard.horizontal_nm <= 0.0 || standard.vertical_ft <= 0.0 ||
        standard.near_miss_horizontal_nm <= 0.0 || standard.near_miss_vertical_ft <= 0.0 ||
        standard.lookahead_s <= 0.0) {
        raise(Errc::config_error, "separation standard values must be positive");
    }
}

json RunConfig::to_json() const {
    return json{{"mode", mode},
                {"experience", experience},
                {"backend", backend_spec},
                {"temperature", temperature},
                {"dataset", dataset_path},
                {"parallelism", parallelism},
                {"token_budget_per_min", token_budget_per_min},
                {"scenario_timeout_s", scenario_timeout_s},
                {"max_iterations", max_iterations},
                {"replan_limit", replan_limit},
                {"experience_library", experience_library_path},
                {"embedder", embedder_spec},
                {"standard",
                 {{"horizontal_nm", standard.horizontal_nm},
                  {"vertical_ft", standard.vertical_ft},
                  {"near_miss_horizontal_nm", standard.near_miss_horizontal_nm},
                  {"near_miss_vertical_ft", standard.near_miss_vertical_ft},
                  {"lookahead_s", standard.lookahead_s}}},
                {"output_dir", output_dir}};
}

json ResultRecord::to_json() const {
    return json{{"scenario_id", scenario_id},
                {"conflict_type", conflict_type},
                {"n_aircraft", n_aircraft},
                {"score", score},
                {"completed", completed},
                {"failure", failure},
                {"command_count", command_count},
                {"iterations", iterations},
                {"prompt_tokens", prompt_tokens},
                {"completion_tokens", completion_tokens},
                {"flags", flags},
                {"transcript_path", transcript_path}};
}

ResultRecord ResultRecord::from_json(const json& j) {
    ResultRecord r;
    try {
        r.scenario_id = j.at("scenario_id").get<std::string>();
        r.conflict_type = j.at("conflict_type").get<std::string>();
        r.n_aircraft = j.at("n_aircraft").get<int>();
        r.score = j.at("score").get<int>();
        r.completed = j.at("completed").get<bool>();
        r.failure = j.at("failure").get<std::string>();
        r.command_count = j.at("command_count").get<int>();
        r.iterations = j.at("iterations").get<int>();
        r.prompt_tokens = j.at("prompt_tokens").get<std::size_t>();
        r.completion_tokens = j.at("completion_tokens").get<std::size_t>();
        r.flags = j.at("flags").get<std::vector<std::string>>();
        r.transcript_path = j.at("transcript_path").get<std::string>();
    } catch (const json::exception& e) {
        raise(Errc::parse_error, fmt::format("bad result record: {}", e.what()));
    }
    if (r.score < -1 || r.score > 1) {
        raise(Errc::parse_error, fmt::format("result score {} out of range", r.score));
    }
    return r;
}

json AggregateReport::to_json() const {
    json by_count = json::object();
    for (const auto& [count, stats] : by_aircraft) {
        by_count[fmt::format("{}", count)] = stats_to_json(stats);
    }
    json by_kind = json::object();
    for (const auto& [kind, stats] : by_type) by_kind[kind] = stats_to_json(stats);
    return json{{"version", 1},
                {"config", config},
                {"overall", stats_to_json(overall)},
                {"by_aircraft", by_count},
                {"by_type", by_kind},
                {"total_tokens", total_tokens},
                {"failed_runs", failed_runs}};
}

std::string AggregateReport::to_csv() const {
    std::string out = "bracket,total,collision,los,resolved,success_rate\n";
    auto row = [&](const std::string& name, const BracketStats& b) {
        out += fmt::format("{},{},{},{},{},{:.4f}\n", name, b.total, b.collision, b.los,
                           b.resolved, b.success_rate());
    };
    row("overall", overall);
    for (const auto& [count, stats] : by_aircraft) row(fmt::format("aircraft:{}", count), stats);
    for (const auto& [kind, stats] : by_type) row(fmt::format("type:{}", kind), stats);
    return out;
}

std::unique_ptr<agent::Backend> make_backend(const std::string& spec) {
    if (spec == "scripted:noop") return std::make_unique<agent::NoopBackend>();
    if (spec == "scripted:layering") return std::make_unique<agent::LayeringBackend>();
    if (spec.rfind("http:", 0) == 0) {
        return std::make_unique<agent::HttpBackend>(agent::parse_http_backend_spec(spec));
    }
    raise(Errc::config_error, fmt::format("unknown backend spec \"{}\"", spec));
}

std::unique_ptr<experience::Embedder> make_embedder(const std::string& spec) {
    if (spec == "hashing") return std::make_unique<experience::HashingEmbedder>();
    if (spec.rfind("hashing:", 0) == 0) {
        const std::string digits = spec.substr(8);
        std::size_t used = 0;
        int dim = 0;
        try {
            dim = std::stoi(digits, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != digits.size() || digits.empty()) {
            raise(Errc::config_error,
                  fmt::format("embedder spec needs a numeric dimension, got \"{}\"", spec));
        }
        return std::make_unique<experience::HashingEmbedder>(dim);
    }
    if (spec.rfind("embed:", 0) == 0) {
        const std::string rest = spec.substr(6);
        auto at = rest.find('@');
        if (at == std::string::npos || at == 0 || at + 1 >= rest.size()) {
            raise(Errc::config_error,
                  fmt::format("embedder spec must look like embed:<model>@<base_url>, got \"{}\"",
                              spec));
        }
        experience::RemoteEmbedderConfig cfg;
        cfg.model = rest.substr(0, at);
        std::string url = rest.substr(at + 1);
        auto scheme = url.find("://");
        if (scheme == std::string::npos) {
            raise(Errc::config_error,
                  fmt::format("embedder base URL needs a scheme, got \"{}\"", url));
        }
        auto slash = url.find('/', scheme + 3);
        if (slash != std::string::npos) {
            cfg.path = url.substr(slash);
            cfg.base_url = url.substr(0, slash);
        } else {
            cfg.base_url = url;
        }
        return std::make_unique<experience::RemoteEmbedder>(cfg);
    }
    raise(Errc::config_error, fmt::format("unknown embedder spec \"{}\"", spec));
}

void write_dataset(const std::string& dir, const std::vector<scenario::Scenario>& scenarios,
                   std::uint64_t master_seed) {
    if (scenarios.empty()) raise(Errc::dataset_invalid, "refusing to write an empty dataset");
    std::set<std::string> seen;
    fs::create_directories(dir);
    json entries = json::array();
    for (const auto& s : scenarios) {
        if (!seen.insert(s.id).second) {
            raise(Errc::dataset_invalid, fmt::format("duplicate scenario id {}", s.id));
        }
        const std::string fname = s.id + ".json";
        write_text_file(fs::path(dir) / fname, scenario::serialize(s));
        entries.push_back(json{{"id", s.id},
                               {"file", fname},
                               {"conflict_type", scenario::conflict_type_name(s.conflict_type)},
                               {"n_aircraft", s.n_aircraft},
                               {"seed", s.seed}});
    }
    json manifest{{"version", 1},
                  {"master_seed", master_seed},
                  {"count", scenarios.size()},
                  {"scenarios", std::move(entries)}};
    write_text_file(fs::path(dir) / "manifest.json", manifest.dump(2) + "\n");
}

std::vector<scenario::Scenario> load_dataset(const std::string& path) {
    fs::path manifest_path(path);
    if (fs::is_directory(manifest_path)) manifest_path /= "manifest.json";
    const std::string text = read_text_file(manifest_path, Errc::dataset_invalid);
    json manifest = json::parse(text, nullptr, false);
    if (manifest.is_discarded() || !manifest.is_object()) {
        raise(Errc::dataset_invalid,
              fmt::format("{} is not a valid manifest", manifest_path.string()));
    }
    if (!manifest.contains("scenarios") || !manifest["scenarios"].is_array()) {
        raise(Errc::dataset_invalid,
              fmt::format("{} has no scenarios list", manifest_path.string()));
    }
    const fs::path base = manifest_path.parent_path();
    std::vector<scenario::Scenario> out;
    std::set<std::string> seen;
    for (const auto& entry : manifest["scenarios"]) {
        if (!entry.is_object() || !entry.contains("id") || !entry.contains("file")) {
            raise(Errc::dataset_invalid, "manifest entries need id and file fields");
        }
        const std::string id = entry["id"].get<std::string>();
        const std::string file = entry["file"].get<std::string>();
        if (!seen.insert(id).second) {
            raise(Errc::dataset_invalid, fmt::format("duplicate scenario id {}", id));
        }
        scenario::Scenario s;
        try {
            s = scenario::parse(read_text_file(base / file, Errc::dataset_invalid));
        } catch (const AtcError& e) {
            if (e.code() == Errc::dataset_invalid) throw;
            raise(Errc::dataset_invalid, fmt::format("{}: {}", file, e.what()));
        }
        if (s.id != id) {
            raise(Errc::dataset_invalid,
                  fmt::format("{} holds scenario {} but the manifest says {}", file, s.id, id));
        }
        out.push_back(std::move(s));
    }
    if (manifest.contains("count") &&
        manifest["count"].get<std::size_t>() != out.size()) {
        raise(Errc::dataset_invalid,
              fmt::format("manifest count {} but {} scenarios listed",
                          manifest["count"].get<std::size_t>(), out.size()));
    }
    if (out.empty()) raise(Errc::dataset_invalid, "dataset is empty");
    return out;
}

int score_scenario(const agent::Transcript& t, const conflict::SeparationStandard& standard) {
    if (!t.scored) raise(Errc::incomplete_simulation, "transcript was never scored");
    auto world = scenario::world_from(t.scenario);
    for (const auto& ev : t.events) {
        if (ev.kind != "command") continue;
        if (ev.clock_s > world.clock_s()) world.run_until(ev.clock_s);
        world.apply_command(sim::Command::parse(ev.data.at("command").get<std::string>()));
    }
    if (t.final_clock_s > world.clock_s()) world.run_until(t.final_clock_s);
    return conflict::classify_outcome(world.min_sep_log(), standard);
}

AggregateReport aggregate(const std::vector<ResultRecord>& results, json config) {
    if (results.empty()) raise(Errc::empty_results, "no results to aggregate");
    AggregateReport report;
    report.config = std::move(config);
    for (const auto& rec : results) {
        auto add = [&](BracketStats& b) {
            b.total += 1;
            if (rec.score < 0) {
                b.collision += 1;
            } else if (rec.score == 0) {
                b.los += 1;
            } else {
                b.resolved += 1;
            }
        };
        add(report.overall);
        add(report.by_aircraft[rec.n_aircraft]);
        add(report.by_type[rec.conflict_type]);
        report.total_tokens += rec.token_usage();
        if (!rec.completed) report.failed_runs += 1;
    }
    return report;
}

namespace {

// Fallback scoring for a run that died before producing a transcript: the
// scenario plays out unmanaged over the same horizon the runtime would have
// used with no commands on the books.
int score_unmanaged(const scenario::Scenario& s, const conflict::SeparationStandard& standard) {
    auto world = scenario::world_from(s);
    double horizon = s.planned_collision_time_s + standard.lookahead_s;
    if (s.evaluation_horizon_s > horizon) horizon = s.evaluation_horizon_s;
    world.run_until(horizon);
    return conflict::classify_outcome(world.min_sep_log(), standard);
}

} // namespace

AggregateReport run_batch(const RunConfig& config,
                          const std::vector<scenario::Scenario>& dataset) {
    config.validate();
    if (dataset.empty()) raise(Errc::dataset_invalid, "dataset is empty");

    std::vector<scenario::Scenario> scenarios = dataset;
    std::sort(scenarios.begin(), scenarios.end(),
              [](const scenario::Scenario& a, const scenario::Scenario& b) { return a.id < b.id; });
    for (std::size_t i = 1; i < scenarios.size(); ++i) {
        if (scenarios[i].id == scenarios[i - 1].id) {
            raise(Errc::dataset_invalid,
                  fmt::format("duplicate scenario id {}", scenarios[i].id));
        }
    }

    std::shared_ptr<experience::Library> library;
    std::shared_ptr<const experience::Embedder> embedder;
    if (config.experience) {
        embedder = std::shared_ptr<const experience::Embedder>(make_embedder(config.embedder_spec));
        if (!config.experience_library_path.empty()) {
            library = std::make_shared<experience::Library>(
                experience::Library::load(config.experience_library_path));
        } else {
            library = std::make_shared<experience::Library>(embedder->dimension());
        }
        if (library->dimension() != embedder->dimension()) {
            raise(Errc::config_error,
                  fmt::format("library dimension {} does not match embedder dimension {}",
                              library->dimension(), embedder->dimension()));
        }
    }

    std::unique_ptr<TokenBucket> bucket;
    if (config.token_budget_per_min > 0) {
        bucket = std::make_unique<TokenBucket>(config.token_budget_per_min);
    }

    fs::path out_dir;
    const bool writing = !config.output_dir.empty();
    if (writing) {
        out_dir = config.output_dir;
        fs::create_directories(out_dir / "transcripts");
    }

    std::vector<ResultRecord> records(scenarios.size());
    std::atomic<std::size_t> cursor{0};

    auto run_one = [&](const scenario::Scenario& s, ResultRecord& rec) {
        rec.scenario_id = s.id;
        rec.conflict_type = scenario::conflict_type_name(s.conflict_type);
        rec.n_aircraft = s.n_aircraft;

        const double deadline =
            config.scenario_timeout_s > 0.0 ? wall_now_s() + config.scenario_timeout_s : 0.0;
        agent::RunHooks hooks;
        hooks.rate_admit = [&, deadline](std::size_t tokens) {
            if (deadline > 0.0 && wall_now_s() > deadline) {
                raise(Errc::backend_error,
                      fmt::format("scenario exceeded its {:.0f} s wall-clock budget",
                                  config.scenario_timeout_s));
            }
            if (bucket) bucket->acquire(tokens);
        };
        if (bucket) {
            hooks.rate_reconcile = [&](long long delta) { bucket->reconcile(delta); };
        }
        if (library) hooks.experience_search = experience::make_search_tool(library, embedder);

        try {
            agent::Transcript t;
            if (config.mode == "single") {
                auto backend = make_backend(config.backend_spec);
                agent::AgentConfig ac;
                ac.role = agent::AgentRole::single;
                ac.backend_id = backend->id();
                ac.temperature = config.temperature;
                ac.max_iterations = config.max_iterations;
                ac.experience_enabled = config.experience;
                t = agent::run_single_agent(s, ac, *backend, config.standard, hooks);
            } else {
                auto planner = make_backend(config.backend_spec);
                auto executor = make_backend(config.backend_spec);
                auto verifier = make_backend(config.backend_spec);
                agent::MultiAgentConfig mc;
                mc.planner.backend_id = planner->id();
                mc.executor.backend_id = executor->id();
                mc.verifier.backend_id = verifier->id();
                for (agent::AgentConfig* ac : {&mc.planner, &mc.executor, &mc.verifier}) {
                    ac->temperature = config.temperature;
                    ac->max_iterations = config.max_iterations;
                }
                mc.planner.experience_enabled = config.experience;
                mc.verifier.experience_enabled = config.experience;
                mc.replan_limit = config.replan_limit;
                t = agent::run_multi_agent(s, mc, *planner, *executor, *verifier, config.standard,
                                           hooks);
            }
            rec.completed = true;
            rec.score = t.score;
            rec.command_count = t.command_count;
            rec.iterations = t.iterations;
            rec.prompt_tokens = t.prompt_tokens;
            rec.completion_tokens = t.completion_tokens;
            rec.flags = t.flags;
            if (writing) {
                const std::string rel = "transcripts/" + s.id + ".jsonl";
                write_text_file(out_dir / rel, agent::to_jsonl(t));
                rec.transcript_path = rel;
            }
        } catch (const std::exception& e) {
            rec.completed = false;
            rec.failure = e.what();
            rec.flags.push_back("RunAborted");
            rec.score = score_unmanaged(s, config.standard);
        }
    };

    const int workers =
        std::max(1, std::min<int>(config.parallelism, static_cast<int>(scenarios.size())));
    if (workers == 1) {
        for (std::size_t i = 0; i < scenarios.size(); ++i) run_one(scenarios[i], records[i]);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (;;) {
                    const std::size_t i = cursor.fetch_add(1);
                    if (i >= scenarios.size()) return;
                    run_one(scenarios[i], records[i]);
                }
            });
        }
        for (auto& th : pool) th.join();
    }

    AggregateReport report = aggregate(records, config.to_json());
    if (writing) {
        std::string lines;
        for (const auto& rec : records) lines += rec.to_json().dump() + "\n";
        write_text_file(out_dir / "results.jsonl", lines);
        write_text_file(out_dir / "report.json", report.to_json().dump(2) + "\n");
        write_text_file(out_dir / "report.csv", report.to_csv());
    }
    return report;
}

} // namespace atc::eval
