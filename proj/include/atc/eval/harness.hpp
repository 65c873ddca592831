#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "atc/agent/backend.hpp"
#include "atc/agent/transcript.hpp"
#include "atc/conflict/standard.hpp"
#include "atc/experience/embed.hpp"
#include "atc/scenario/scenario.hpp"

namespace atc::eval {

struct RunConfig {
    std::string mode = "single"; // single | multi
    bool experience = false;
    std::string backend_spec = "scripted:noop";
    double temperature = 0.3;
    std::string dataset_path;
    int parallelism = 1;
    std::size_t token_budget_per_min = 0; // 0 = unlimited
    double scenario_timeout_s = 600.0;
    int max_iterations = 20;
    int replan_limit = 3;
    std::string experience_library_path; // empty = start from an empty store
    std::string embedder_spec = "hashing";
    conflict::SeparationStandard standard;
    std::string output_dir; // empty = keep everything in memory

    void validate() const; // ConfigError
    nlohmann::json to_json() const;
};

struct ResultRecord {
    std::string scenario_id;
    std::string conflict_type;
    int n_aircraft = 0;
    int score = 0;
    bool completed = false; // false when the run itself failed
    std::string failure;    // diagnostic when !completed
    int command_count = 0;
    int iterations = 0;
    std::size_t prompt_tokens = 0;
    std::size_t completion_tokens = 0;
    std::vector<std::string> flags;
    std::string transcript_path;

    std::size_t token_usage() const { return prompt_tokens + completion_tokens; }

    bool operator==(const ResultRecord&) const = default;

    nlohmann::json to_json() const;
    static ResultRecord from_json(const nlohmann::json& j); // ParseError
};

struct BracketStats {
    int total = 0;
    int collision = 0; // score -1
    int los = 0;       // score 0
    int resolved = 0;  // score 1

    double success_rate() const { return total == 0 ? 0.0 : double(resolved) / total; }
    bool operator==(const BracketStats&) const = default;
};

struct AggregateReport {
    nlohmann::json config = nlohmann::json::object();
    BracketStats overall;
    std::map<int, BracketStats> by_aircraft;
    std::map<std::string, BracketStats> by_type;
    std::size_t total_tokens = 0;
    int failed_runs = 0;

    bool operator==(const AggregateReport&) const = default;

    nlohmann::json to_json() const;
    std::string to_csv() const;
};

// "scripted:noop", "scripted:layering" or "http:<model>@<base_url>".
std::unique_ptr<agent::Backend> make_backend(const std::string& spec); // ConfigError

// "hashing", "hashing:<dim>" or "embed:<model>@<base_url>".
std::unique_ptr<experience::Embedder> make_embedder(const std::string& spec); // ConfigError

// One file per scenario plus manifest.json. load accepts the directory or
// the manifest path and cross-checks ids, counts and per-file contents.
void write_dataset(const std::string& dir, const std::vector<scenario::Scenario>& scenarios,
                   std::uint64_t master_seed);
std::vector<scenario::Scenario> load_dataset(const std::string& path); // DatasetInvalid

// Re-simulates the recorded command stream over the recorded horizon and
// classifies the separation log. Throws IncompleteSimulation on a transcript
// whose run never finished scoring.
int score_scenario(const agent::Transcript& t,
                   const conflict::SeparationStandard& standard = {});

// Counts per score tier overall, per aircraft count and per conflict type.
// Throws EmptyResults on an empty list.
AggregateReport aggregate(const std::vector<ResultRecord>& results,
                          nlohmann::json config = nlohmann::json::object());

// Runs every scenario exactly once through the configured agent stack,
// isolating per-scenario failures, then writes transcripts, results.jsonl
// and report.{json,csv} under output_dir (when set) and returns the report.
AggregateReport run_batch(const RunConfig& config,
                          const std::vector<scenario::Scenario>& dataset);

} // namespace atc::eval
