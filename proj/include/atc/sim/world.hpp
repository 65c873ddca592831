#pragma once

#include <string>
#include <vector>

#include "atc/sim/aircraft.hpp"
#include "atc/sim/command.hpp"

namespace atc::sim {

// One per-pair separation sample, appended after every integration step.
// Callsigns are stored in lexicographic order so a pair has one identity.
struct SeparationSample {
    double t_s = 0.0;
    std::string callsign_a;
    std::string callsign_b;
    double horizontal_nm = 0.0;
    double vertical_ft = 0.0;
};

// Deterministic point-mass simulation with a command surface. A World is a
// plain value: copy it to snapshot, move it across threads freely.
class World {
public:
    explicit World(KinematicLimits limits = {});

    double clock_s() const { return clock_s_; }
    const KinematicLimits& limits() const { return limits_; }
    const std::vector<AircraftState>& aircraft() const { return aircraft_; }
    const std::vector<SeparationSample>& min_sep_log() const { return min_sep_log_; }

    const AircraftState* find(const std::string& callsign) const;

    // Adds an aircraft; targets are initialized to the current values.
    // Throws DuplicateCallsign / FieldOutOfRange.
    void create_aircraft(AircraftState spec);

    // Adds an aircraft keeping the given targets and vertical speed verbatim.
    // Scenario ingestion path; same validation as create_aircraft.
    void spawn(AircraftState state);

    // Updates the target field for the commanded verb; current kinematic
    // state is untouched until the next step. Throws UnknownCallsign /
    // FieldOutOfRange.
    void apply_command(const Command& cmd);

    // Advances every aircraft by dt_s: rate-limited turn, climb/descent with
    // capture, speed change, then translation along the updated heading at
    // the updated speed. Appends separation samples. dt_s must be > 0.
    void step(double dt_s);

    // Repeated step() at the internal dt until the clock reaches t_s, with a
    // final partial step for any remainder. Throws TimeReversal if t_s is in
    // the past.
    void run_until(double t_s);

    double internal_dt_s = 1.0;

private:
    void validate_state(const AircraftState& s) const;
    void record_separation_samples();

    KinematicLimits limits_;
    double clock_s_ = 0.0;
    std::vector<AircraftState> aircraft_; // sorted by callsign
    std::vector<SeparationSample> min_sep_log_;
};

} // namespace atc::sim
