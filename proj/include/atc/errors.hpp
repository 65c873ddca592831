#pragma once

#include <stdexcept>
#include <string>

namespace atc {

enum class Errc {
    duplicate_callsign,
    field_out_of_range,
    unknown_callsign,
    parse_error,
    time_reversal,
    duration_out_of_range,
    library_unavailable,
    generation_exhausted,
    empty_log,
    dimension_mismatch,
    backend_error,
    plan_extraction_error,
    malformed_tool_call,
    context_overflow,
    config_error,
    summarizer_error,
    replay_mismatch,
    dataset_invalid,
    empty_results,
    incomplete_simulation,
};

const char* errc_name(Errc code);

class AtcError : public std::runtime_error {
public:
    AtcError(Errc code, const std::string& message)
        : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

    Errc code() const { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& message) {
    throw AtcError(code, message);
}

} // namespace atc
