#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "atc/agent/backend.hpp"
#include "atc/agent/transcript.hpp"
#include "atc/conflict/standard.hpp"
#include "atc/experience/document.hpp"
#include "atc/experience/embed.hpp"
#include "atc/scenario/scenario.hpp"

namespace atc::experience {

struct CategorizedCommand {
    std::string command;
    bool helpful = false;

    bool operator==(const CategorizedCommand&) const = default;
};

// Applies the helpfulness rule over the transcript's command timeline: a
// command is helpful iff at least one conflict pair present in the last
// observation before it is gone in the first observation after it.
// Observations are the recorded GETCONFLICTINFO pair sets and the
// CONTINUEMONITORING persisting+new sets; gaps (a command with no
// observation before it, or trailing commands) are filled by replaying the
// scenario, with a synthetic look 60 s past the last recorded activity.
// Throws ReplayMismatch when the recorded commands cannot be re-applied.
std::vector<CategorizedCommand> categorize_commands(const agent::Transcript& transcript,
                                                    const conflict::SeparationStandard& standard);

// "ALT FLIGHT3 22800" with FLIGHT3 initially at 23328.64 ft becomes
// "FLIGHT3: descend ~500 ft": deltas against the scenario's initial states,
// altitudes to the nearest 100 ft, headings as signed turns to the nearest
// 5 degrees, speeds to the nearest 10 kt. Throws UnknownCallsign.
std::vector<std::string> relativize(const std::vector<std::string>& commands,
                                    const std::vector<sim::AircraftState>& initial_states);

// Callsign -> AC1..ACn in initial-state order.
std::vector<std::pair<std::string, std::string>>
anonymization_map(const std::vector<sim::AircraftState>& initial_states);

// Replaces every mapped callsign occurrence; longer callsigns first, through
// placeholders, so one replacement can never corrupt another.
std::string anonymize(const std::string& text,
                      const std::vector<std::pair<std::string, std::string>>& mapping);

struct SummaryMaterial {
    const scenario::Scenario* scenario = nullptr;
    std::string conflict_info_text;          // rendered at the initial state
    std::vector<std::string> conflict_pairs; // "A - B" keys at the initial state
    std::string description;                 // filled once generated, for insight calls
};

class Summarizer {
public:
    virtual ~Summarizer() = default;
    virtual std::string id() const = 0;
    virtual std::string describe_conflict(const SummaryMaterial& material) = 0;
    virtual std::string command_insight(const SummaryMaterial& material,
                                        const std::string& relative_command, bool helpful) = 0;
};

// Deterministic wording assembled from the material; keeps the whole
// pipeline runnable offline.
class TemplateSummarizer : public Summarizer {
public:
    std::string id() const override { return "template"; }
    std::string describe_conflict(const SummaryMaterial& material) override;
    std::string command_insight(const SummaryMaterial& material,
                                const std::string& relative_command, bool helpful) override;
};

// Asks a chat backend for the description and the per-command insights.
// Empty or non-text replies, and transport failures that survive the retry
// policy, surface as SummarizerError.
class BackendSummarizer : public Summarizer {
public:
    explicit BackendSummarizer(agent::Backend& backend, double temperature = 0.3,
                               agent::SleepFn sleep = {});

    std::string id() const override;
    std::string describe_conflict(const SummaryMaterial& material) override;
    std::string command_insight(const SummaryMaterial& material,
                                const std::string& relative_command, bool helpful) override;

private:
    std::string ask(const std::string& instruction, const std::string& input);

    agent::Backend& backend_;
    double temperature_;
    agent::SleepFn sleep_;
};

struct DocumentOptions {
    // Non-empty: only these summarizer ids may produce retained documents.
    std::vector<std::string> trusted_backends;
    conflict::SeparationStandard standard{};
    std::string created_at = "1970-01-01T00:00:00Z";
};

// Full pipeline: categorize, relativize, summarize, anonymize, embed.
// Returns nullopt when the quality gate rejects the summarizer (the caller
// logs and moves on). Requires a scored transcript.
std::optional<ExperienceDocument> build_experience_document(const agent::Transcript& transcript,
                                                            Summarizer& summarizer,
                                                            const Embedder& embedder,
                                                            const DocumentOptions& options = {});

} // namespace atc::experience
