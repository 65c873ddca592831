#include "atc/errors.hpp"

namespace atc {

const char* errc_name(Errc code) {
    switch (code) {
        case Errc::duplicate_callsign: return "DuplicateCallsign";
        case Errc::field_out_of_range: return "FieldOutOfRange";
        case Errc::unknown_callsign: return "UnknownCallsign";
        case Errc::parse_error: return "ParseError";
        case Errc::time_reversal: return "TimeReversal";
        case Errc::duration_out_of_range: return "DurationOutOfRange";
        case Errc::library_unavailable: return "LibraryUnavailable";
        case Errc::generation_exhausted: return "GenerationExhausted";
        case Errc::empty_log: return "EmptyLog";
        case Errc::dimension_mismatch: return "DimensionMismatch";
        case Errc::backend_error: return "BackendError";
        case Errc::plan_extraction_error: return "PlanExtractionError";
        case Errc::malformed_tool_call: return "MalformedToolCall";
        case Errc::context_overflow: return "ContextOverflow";
        case Errc::config_error: return "ConfigError";
        case Errc::summarizer_error: return "SummarizerError";
        case Errc::replay_mismatch: return "ReplayMismatch";
        case Errc::dataset_invalid: return "DatasetInvalid";
        case Errc::empty_results: return "EmptyResults";
        case Errc::incomplete_simulation: return "IncompleteSimulation";
    }
    return "UnknownError";
}

} // namespace atc
