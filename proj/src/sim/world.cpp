#include "atc/sim/world.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/core.h>

#include "atc/errors.hpp"

namespace atc::sim {

const char* tendency_name(AltitudeTendency t) {
    switch (t) {
        case AltitudeTendency::level: return "level";
        case AltitudeTendency::climbing: return "climbing";
        case AltitudeTendency::descending: return "descending";
    }
    return "?";
}

AltitudeTendency altitude_tendency(const AircraftState& a) {
    double delta = a.target_altitude_ft - a.altitude_ft;
    if (delta > 1.0) return AltitudeTendency::climbing;
    if (delta < -1.0) return AltitudeTendency::descending;
    return AltitudeTendency::level;
}

World::World(KinematicLimits limits) : limits_(limits) {}

const AircraftState* World::find(const std::string& callsign) const {
    auto it = std::lower_bound(aircraft_.begin(), aircraft_.end(), callsign,
                               [](const AircraftState& a, const std::string& cs) { return a.callsign < cs; });
    if (it == aircraft_.end() || it->callsign != callsign) return nullptr;
    return &*it;
}

void World::validate_state(const AircraftState& s) const {
    if (s.callsign.empty() ||
        !std::all_of(s.callsign.begin(), s.callsign.end(),
                     [](unsigned char c) { return std::isupper(c) || std::isdigit(c); })) {
        raise(Errc::field_out_of_range,
              fmt::format("callsign '{}' must be uppercase alphanumeric", s.callsign));
    }
    auto check = [&](const char* field, double v, double lo, double hi) {
        if (!std::isfinite(v) || v < lo || v > hi) {
            raise(Errc::field_out_of_range,
                  fmt::format("{} {}={} outside [{}, {}]", s.callsign, field, v, lo, hi));
        }
    };
    check("ground_speed_kt", s.ground_speed_kt, limits_.min_speed_kt, limits_.max_speed_kt);
    check("target_speed_kt", s.target_speed_kt, limits_.min_speed_kt, limits_.max_speed_kt);
    check("altitude_ft", s.altitude_ft, limits_.min_altitude_ft, limits_.max_altitude_ft);
    check("target_altitude_ft", s.target_altitude_ft, limits_.min_altitude_ft, limits_.max_altitude_ft);
    check("vertical_speed_fpm", s.vertical_speed_fpm, -limits_.max_vertical_speed_fpm,
          limits_.max_vertical_speed_fpm);
    if (!std::isfinite(s.heading_deg) || !std::isfinite(s.target_heading_deg) ||
        !std::isfinite(s.x_nm) || !std::isfinite(s.y_nm)) {
        raise(Errc::field_out_of_range, fmt::format("{} has a non-finite field", s.callsign));
    }
}

void World::spawn(AircraftState state) {
    state.heading_deg = normalize_heading(state.heading_deg);
    state.target_heading_deg = normalize_heading(state.target_heading_deg);
    validate_state(state);
    if (find(state.callsign) != nullptr) {
        raise(Errc::duplicate_callsign, fmt::format("callsign '{}' already in world", state.callsign));
    }
    auto it = std::lower_bound(aircraft_.begin(), aircraft_.end(), state.callsign,
                               [](const AircraftState& a, const std::string& cs) { return a.callsign < cs; });
    aircraft_.insert(it, std::move(state));
}

void World::create_aircraft(AircraftState spec) {
    spec.target_heading_deg = spec.heading_deg;
    spec.target_altitude_ft = spec.altitude_ft;
    spec.target_speed_kt = spec.ground_speed_kt;
    spawn(std::move(spec));
}

void World::apply_command(const Command& cmd) {
    auto it = std::find_if(aircraft_.begin(), aircraft_.end(),
                           [&](const AircraftState& a) { return a.callsign == cmd.callsign; });
    if (it == aircraft_.end()) {
        raise(Errc::unknown_callsign, fmt::format("no aircraft '{}'", cmd.callsign));
    }
    switch (cmd.verb) {
        case CommandVerb::heading:
            if (!std::isfinite(cmd.value)) {
                raise(Errc::field_out_of_range, "heading must be finite");
            }
            it->target_heading_deg = normalize_heading(cmd.value);
            break;
        case CommandVerb::altitude:
            if (!std::isfinite(cmd.value) || cmd.value < limits_.min_altitude_ft ||
                cmd.value > limits_.max_altitude_ft) {
                raise(Errc::field_out_of_range,
                      fmt::format("altitude {} outside [{}, {}]", cmd.value, limits_.min_altitude_ft,
                                  limits_.max_altitude_ft));
            }
            it->target_altitude_ft = cmd.value;
            break;
        case CommandVerb::speed:
            if (!std::isfinite(cmd.value) || cmd.value < limits_.min_speed_kt ||
                cmd.value > limits_.max_speed_kt) {
                raise(Errc::field_out_of_range,
                      fmt::format("speed {} outside [{}, {}]", cmd.value, limits_.min_speed_kt,
                                  limits_.max_speed_kt));
            }
            it->target_speed_kt = cmd.value;
            break;
    }
}

void World::step(double dt_s) {
    if (!(dt_s > 0.0) || !std::isfinite(dt_s)) {
        raise(Errc::field_out_of_range, fmt::format("step dt {} must be > 0", dt_s));
    }
    for (AircraftState& a : aircraft_) {
        // Turn toward the target heading, shortest way, rate limited.
        double turn = signed_turn(a.heading_deg, a.target_heading_deg);
        double max_turn = limits_.turn_rate_deg_s * dt_s;
        if (std::fabs(turn) <= max_turn) {
            a.heading_deg = a.target_heading_deg;
        } else {
            a.heading_deg = normalize_heading(a.heading_deg + std::copysign(max_turn, turn));
        }

        // Speed change, rate limited.
        double dv = a.target_speed_kt - a.ground_speed_kt;
        double max_dv = limits_.accel_kt_s * dt_s;
        a.ground_speed_kt = std::fabs(dv) <= max_dv ? a.target_speed_kt
                                                    : a.ground_speed_kt + std::copysign(max_dv, dv);

        // Altitude toward the target with capture; vertical speed reflects
        // the rate actually flown this step, 0 once captured.
        double da = a.target_altitude_ft - a.altitude_ft;
        double max_da = limits_.climb_rate_fpm / 60.0 * dt_s;
        if (std::fabs(da) <= max_da) {
            a.altitude_ft = a.target_altitude_ft;
            a.vertical_speed_fpm = 0.0;
        } else {
            a.altitude_ft += std::copysign(max_da, da);
            a.vertical_speed_fpm = std::copysign(limits_.climb_rate_fpm, da);
        }

        // Translate along the updated heading at the updated speed.
        Vec2 v = heading_unit(a.heading_deg) * kt_to_nm_s(a.ground_speed_kt);
        a.x_nm += v.x * dt_s;
        a.y_nm += v.y * dt_s;
    }
    clock_s_ += dt_s;
    record_separation_samples();
}

void World::run_until(double t_s) {
    if (t_s < clock_s_ - 1e-9) {
        raise(Errc::time_reversal, fmt::format("target time {} is before clock {}", t_s, clock_s_));
    }
    double span = t_s - clock_s_;
    if (span <= 1e-9) return;
    long full_steps = static_cast<long>(std::floor(span / internal_dt_s + 1e-9));
    for (long i = 0; i < full_steps; ++i) step(internal_dt_s);
    double rest = t_s - clock_s_;
    if (rest > 1e-9) step(rest);
}

void World::record_separation_samples() {
    for (std::size_t i = 0; i < aircraft_.size(); ++i) {
        for (std::size_t j = i + 1; j < aircraft_.size(); ++j) {
            const AircraftState& a = aircraft_[i];
            const AircraftState& b = aircraft_[j];
            min_sep_log_.push_back({clock_s_, a.callsign, b.callsign,
                                    (a.position() - b.position()).norm(),
                                    std::fabs(a.altitude_ft - b.altitude_ft)});
        }
    }
}

} // namespace atc::sim
