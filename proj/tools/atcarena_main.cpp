#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "atc/agent/runtime.hpp"
#include "atc/agent/transcript.hpp"
#include "atc/errors.hpp"
#include "atc/eval/harness.hpp"
#include "atc/experience/library.hpp"
#include "atc/experience/pipeline.hpp"
#include "atc/scenario/scenario.hpp"

namespace fs = std::filesystem;
using namespace atc;

namespace {

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(Errc::parse_error, fmt::format("cannot read {}", path.string()));
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void spill(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(Errc::config_error, fmt::format("cannot write {}", path.string()));
    out << text;
}

void print_report(const eval::AggregateReport& report) {
    const auto& o = report.overall;
    fmt::print("scenarios: {}  collision: {}  LoS: {}  resolved: {}  success rate: {:.2f}\n",
               o.total, o.collision, o.los, o.resolved, o.success_rate());
    for (const auto& [count, stats] : report.by_aircraft) {
        fmt::print("  {} aircraft: {}/{} resolved ({:.2f})\n", count, stats.resolved, stats.total,
                   stats.success_rate());
    }
    if (report.failed_runs > 0) {
        fmt::print("  {} run(s) failed and were scored from the unmanaged world\n",
                   report.failed_runs);
    }
    fmt::print("  tokens used: {}\n", report.total_tokens);
}

std::vector<eval::ResultRecord> read_results(const fs::path& path) {
    std::istringstream lines(slurp(path));
    std::vector<eval::ResultRecord> records;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(lines, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            raise(Errc::parse_error,
                  fmt::format("{}:{} is not valid JSON", path.string(), lineno));
        }
        records.push_back(eval::ResultRecord::from_json(j));
    }
    return records;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Air-traffic conflict resolution arena"};
    app.require_subcommand(1);

    // gen
    auto* gen = app.add_subcommand("gen", "Generate the evaluation dataset");
    std::string gen_out;
    std::uint64_t gen_seed = 7;
    gen->add_option("--out", gen_out, "Directory for scenario files and manifest")->required();
    gen->add_option("--seed", gen_seed, "Master seed for dataset derivation");
    gen->callback([&] {
        auto scenarios = scenario::build_dataset(gen_seed);
        eval::write_dataset(gen_out, scenarios, gen_seed);
        fmt::print("wrote {} scenarios and manifest.json to {}\n", scenarios.size(), gen_out);
    });

    // run
    auto* run = app.add_subcommand("run", "Run an agent configuration over a dataset");
    eval::RunConfig cfg;
    run->add_option("--mode", cfg.mode, "Agent mode")
        ->check(CLI::IsMember({"single", "multi"}));
    run->add_option("--backend", cfg.backend_spec,
                    "scripted:noop, scripted:layering or http:<model>@<base_url>");
    run->add_option("--dataset", cfg.dataset_path, "Dataset directory or manifest path")
        ->required();
    run->add_flag("--experience", cfg.experience, "Expose the experience library tool");
    run->add_option("--library", cfg.experience_library_path,
                    "Experience store to load (requires --experience)");
    run->add_option("--embedder", cfg.embedder_spec,
                    "hashing, hashing:<dim> or embed:<model>@<base_url>");
    run->add_option("--temperature", cfg.temperature, "Sampling temperature");
    run->add_option("--parallelism", cfg.parallelism, "Worker pool width");
    run->add_option("--budget", cfg.token_budget_per_min, "Token budget per minute, 0 = unlimited");
    run->add_option("--timeout", cfg.scenario_timeout_s, "Per-scenario wall-clock budget (s)");
    run->add_option("--max-iterations", cfg.max_iterations, "Tool-loop iteration cap per agent");
    run->add_option("--replan-limit", cfg.replan_limit, "Verifier-triggered replans before giving up");
    run->add_option("--out", cfg.output_dir, "Directory for transcripts, results and reports");
    run->callback([&] {
        auto dataset = eval::load_dataset(cfg.dataset_path);
        auto report = eval::run_batch(cfg, dataset);
        print_report(report);
        if (!cfg.output_dir.empty()) fmt::print("results written to {}\n", cfg.output_dir);
    });

    // replay
    auto* replay = app.add_subcommand("replay", "Re-execute a recorded transcript and verify it");
    std::string replay_path;
    replay->add_option("--transcript", replay_path, "Transcript .jsonl file")->required();
    replay->callback([&] {
        auto t = agent::from_jsonl(slurp(replay_path));
        auto result = agent::replay_transcript(t, conflict::SeparationStandard{});
        fmt::print("replay verified: score {}, {} command(s), final clock {:.0f} s\n", result.score,
                   result.commands_applied, result.final_clock_s);
    });

    // report
    auto* report_cmd = app.add_subcommand("report", "Aggregate a results.jsonl into a report");
    std::string report_results, report_json, report_csv;
    report_cmd->add_option("--results", report_results, "results.jsonl produced by run")
        ->required();
    report_cmd->add_option("--json", report_json, "Write the JSON report here instead of stdout");
    report_cmd->add_option("--csv", report_csv, "Also write the CSV report here");
    report_cmd->callback([&] {
        auto records = read_results(report_results);
        auto report = eval::aggregate(records);
        if (!report_json.empty()) {
            spill(report_json, report.to_json().dump(2) + "\n");
            fmt::print("wrote {}\n", report_json);
        } else {
            fmt::print("{}\n", report.to_json().dump(2));
        }
        if (!report_csv.empty()) {
            spill(report_csv, report.to_csv());
            fmt::print("wrote {}\n", report_csv);
        }
    });

    // library
    auto* library = app.add_subcommand("library", "Build or inspect the experience store");
    library->require_subcommand(1);

    auto* build = library->add_subcommand("build", "Index experience documents from transcripts");
    std::string build_transcripts, build_out;
    std::string build_embedder = "hashing";
    std::string build_summarizer = "template";
    std::vector<std::string> build_trusted;
    build->add_option("--transcripts", build_transcripts, "Directory of transcript .jsonl files")
        ->required();
    build->add_option("--out", build_out, "Directory for the experience store")->required();
    build->add_option("--embedder", build_embedder,
                      "hashing, hashing:<dim> or embed:<model>@<base_url>");
    build->add_option("--summarizer", build_summarizer,
                      "template or a backend spec used to write summaries");
    build->add_option("--trusted", build_trusted,
                      "Summarizer ids allowed to produce documents (default: all)");
    build->callback([&] {
        auto embedder = eval::make_embedder(build_embedder);
        std::unique_ptr<agent::Backend> backend;
        std::unique_ptr<experience::Summarizer> summarizer;
        if (build_summarizer == "template") {
            summarizer = std::make_unique<experience::TemplateSummarizer>();
        } else {
            backend = eval::make_backend(build_summarizer);
            summarizer = std::make_unique<experience::BackendSummarizer>(*backend);
        }
        experience::DocumentOptions options;
        options.trusted_backends = build_trusted;

        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(build_transcripts)) {
            if (entry.path().extension() == ".jsonl") files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        if (files.empty()) {
            raise(Errc::config_error,
                  fmt::format("no transcript files in {}", build_transcripts));
        }

        experience::Library lib(embedder->dimension());
        std::size_t skipped = 0;
        for (const auto& file : files) {
            try {
                auto t = agent::from_jsonl(slurp(file));
                auto doc = experience::build_experience_document(t, *summarizer, *embedder, options);
                if (doc) {
                    lib.upsert(*doc);
                } else {
                    ++skipped;
                }
            } catch (const AtcError& e) {
                fmt::print(stderr, "skipping {}: {}\n", file.filename().string(), e.what());
                ++skipped;
            }
        }
        lib.save(build_out);
        fmt::print("indexed {} document(s) ({} skipped) into {}\n", lib.size(), skipped, build_out);
    });

    auto* inspect = library->add_subcommand("inspect", "List or dump stored experience documents");
    std::string inspect_store, inspect_id;
    inspect->add_option("--store", inspect_store, "Experience store directory")->required();
    inspect->add_option("--id", inspect_id, "Dump one document as JSON");
    inspect->callback([&] {
        auto lib = experience::Library::load(inspect_store);
        if (!inspect_id.empty()) {
            auto doc = lib.get(inspect_id);
            if (!doc) {
                raise(Errc::config_error,
                      fmt::format("no document {} in {}", inspect_id, inspect_store));
            }
            fmt::print("{}\n", doc->to_json().dump(2));
            return;
        }
        fmt::print("{} document(s), dimension {}\n", lib.size(), lib.dimension());
        for (const auto& id : lib.ids()) {
            auto doc = lib.get(id);
            fmt::print("  {}  {} aircraft, {}, {} command(s), summarizer {}\n", id,
                       doc->num_aircraft, scenario::conflict_type_name(doc->conflict_formation),
                       doc->commands.size(), doc->source_backend);
        }
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const AtcError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
