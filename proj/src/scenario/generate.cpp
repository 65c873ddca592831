#include "atc/scenario/scenario.hpp"

#include <cmath>
#include <set>

#include <fmt/format.h>

#include "atc/conflict/metrics.hpp"
#include "atc/errors.hpp"
#include "atc/geom.hpp"
#include "atc/scenario/rng.hpp"

namespace atc::scenario {

const char* conflict_type_name(ConflictType t) {
    switch (t) {
        case ConflictType::head_on: return "HeadOn";
        case ConflictType::parallel: return "Parallel";
        case ConflictType::t_formation: return "TFormation";
        case ConflictType::converging: return "Converging";
    }
    return "?";
}

const char* conflict_type_slug(ConflictType t) {
    switch (t) {
        case ConflictType::head_on: return "headon";
        case ConflictType::parallel: return "parallel";
        case ConflictType::t_formation: return "tformation";
        case ConflictType::converging: return "converging";
    }
    return "?";
}

ConflictType conflict_type_from(const std::string& text) {
    for (ConflictType t : kConflictTypes) {
        if (text == conflict_type_name(t) || text == conflict_type_slug(t)) return t;
    }
    raise(Errc::parse_error, fmt::format("unknown conflict type '{}'", text));
}

namespace {

constexpr double kCollisionTimeMin = 120.0;
constexpr double kCollisionTimeMax = 300.0;
constexpr double kSpeedMin = 250.0;
constexpr double kSpeedMax = 480.0;
constexpr double kBandMin = 21000.0;
constexpr double kBandMax = 33000.0;
constexpr double kAltJitter = 80.0;
constexpr double kLateralOffsetMax = 0.2;
constexpr double kClimbRate = 2000.0;

// Initial altitudes are staggered on this ladder above/below the shared
// band, so no pair starts anywhere near vertical conflict; every non-level
// tier captures the band within 120 s, ahead of the conjunction.
constexpr double kTierLadder[4] = {0.0, 2000.0, -2000.0, 4000.0};

std::vector<double> draw_headings(ConflictType type, int n, Rng& rng) {
    std::vector<double> h(static_cast<std::size_t>(n));
    double base = rng.uniform(0.0, 360.0);
    switch (type) {
        case ConflictType::head_on:
            for (int i = 0; i < n; ++i) {
                h[i] = base + (i % 2 ? 180.0 : 0.0) + rng.uniform(-2.5, 2.5);
            }
            break;
        case ConflictType::parallel:
            for (int i = 0; i < n; ++i) h[i] = base + rng.uniform(-5.0, 5.0);
            break;
        case ConflictType::t_formation:
            for (int i = 0; i < n; ++i) h[i] = base + 90.0 * i + rng.uniform(-3.0, 3.0);
            break;
        case ConflictType::converging:
            if (n == 2) {
                h[0] = base;
                h[1] = base + rng.uniform(35.0, 145.0);
            } else {
                double spread = n == 3 ? 60.0 : 45.0;
                double jitter = n == 3 ? 10.0 : 7.0;
                for (int i = 0; i < n; ++i) h[i] = base + spread * i + rng.uniform(-jitter, jitter);
            }
            break;
    }
    for (double& x : h) x = normalize_heading(x);
    return h;
}

std::vector<double> draw_speeds(ConflictType type, int n, Rng& rng) {
    std::vector<double> s(static_cast<std::size_t>(n));
    switch (type) {
        case ConflictType::head_on:
        case ConflictType::parallel:
            // Same-track aircraft meet the conjunction by overtaking, so
            // speed bands 70 kt apart keep them well separated at start.
            for (int i = 0; i < n; ++i) {
                double lo = kSpeedMin + 70.0 * i;
                s[i] = rng.uniform(lo, lo + 10.0);
            }
            break;
        case ConflictType::t_formation:
        case ConflictType::converging:
            for (int i = 0; i < n; ++i) s[i] = rng.uniform(kSpeedMin, kSpeedMax);
            break;
    }
    return s;
}

std::string draw_callsign(Rng& rng) {
    std::string cs;
    cs += static_cast<char>('A' + rng.uniform_int(0, 25));
    cs += static_cast<char>('A' + rng.uniform_int(0, 25));
    cs += fmt::format("{}", rng.uniform_int(100, 999));
    return cs;
}

Scenario draw_scenario(ConflictType type, int n, std::uint64_t seed, Rng& rng) {
    Scenario s;
    s.conflict_type = type;
    s.n_aircraft = n;
    s.seed = seed;
    s.planned_collision_time_s = rng.uniform(kCollisionTimeMin, kCollisionTimeMax);
    s.evaluation_horizon_s = s.planned_collision_time_s + 300.0;
    double band = rng.uniform(kBandMin, kBandMax);
    Vec2 conjunction{rng.uniform(-10.0, 10.0), rng.uniform(-10.0, 10.0)};

    auto headings = draw_headings(type, n, rng);
    auto speeds = draw_speeds(type, n, rng);
    std::vector<double> tiers(kTierLadder, kTierLadder + n);
    rng.shuffle(tiers);

    std::set<std::string> used;
    for (int i = 0; i < n; ++i) {
        std::string cs = draw_callsign(rng);
        while (!used.insert(cs).second) cs = draw_callsign(rng);
        double lateral = rng.uniform(-kLateralOffsetMax, kLateralOffsetMax);
        double dalt = rng.uniform(-kAltJitter, kAltJitter);

        sim::AircraftState a;
        a.callsign = cs;
        a.heading_deg = headings[i];
        a.target_heading_deg = headings[i];
        a.ground_speed_kt = speeds[i];
        a.target_speed_kt = speeds[i];
        a.target_altitude_ft = band + dalt;
        a.altitude_ft = band + dalt + tiers[i];
        a.vertical_speed_fpm = tiers[i] > 0.0 ? -kClimbRate : tiers[i] < 0.0 ? kClimbRate : 0.0;

        Vec2 u = heading_unit(a.heading_deg);
        Vec2 pos = conjunction + Vec2{u.y, -u.x} * lateral -
                   u * (kt_to_nm_s(a.ground_speed_kt) * s.planned_collision_time_s);
        a.x_nm = pos.x;
        a.y_nm = pos.y;
        s.initial_states.push_back(std::move(a));
    }
    return s;
}

bool geometry_ok(const Scenario& s) {
    const auto& acs = s.initial_states;
    bool has_opposing = false;
    bool has_crossing = false;
    for (std::size_t i = 0; i < acs.size(); ++i) {
        for (std::size_t j = i + 1; j < acs.size(); ++j) {
            double d = heading_difference(acs[i].heading_deg, acs[j].heading_deg);
            double dv = std::fabs(acs[i].ground_speed_kt - acs[j].ground_speed_kt);
            switch (s.conflict_type) {
                case ConflictType::head_on:
                    if (d > 5.0 && d < 175.0) return false;
                    if (d >= 175.0) has_opposing = true;
                    break;
                case ConflictType::parallel:
                    if (d > 10.0 || dv < 60.0 - 1e-9) return false;
                    break;
                case ConflictType::t_formation:
                    if (std::fabs(d - 90.0) > 6.5 && d < 173.5) return false;
                    if (std::fabs(d - 90.0) <= 6.5) has_crossing = true;
                    break;
                case ConflictType::converging:
                    if (d < 30.0 || d > 150.0) return false;
                    break;
            }
        }
    }
    if (s.conflict_type == ConflictType::head_on && !has_opposing) return false;
    if (s.conflict_type == ConflictType::t_formation && !has_crossing) return false;
    return true;
}

bool initial_separation_ok(const Scenario& s) {
    const auto& acs = s.initial_states;
    for (std::size_t i = 0; i < acs.size(); ++i) {
        for (std::size_t j = i + 1; j < acs.size(); ++j) {
            double h = (acs[i].position() - acs[j].position()).norm();
            double v = std::fabs(acs[i].altitude_ft - acs[j].altitude_ft);
            if (h < 5.5 && v < 1100.0) return false;
        }
    }
    return true;
}

} // namespace

Scenario generate(ConflictType type, int n_aircraft, std::uint64_t seed) {
    if (n_aircraft < 2 || n_aircraft > 4) {
        raise(Errc::field_out_of_range,
              fmt::format("n_aircraft {} outside [2, 4]", n_aircraft));
    }
    Rng rng(seed);
    for (int attempt = 0; attempt < 100; ++attempt) {
        Scenario s = draw_scenario(type, n_aircraft, seed, rng);
        if (!geometry_ok(s) || !initial_separation_ok(s)) continue;
        if (!validate_inevitable_collision(s, conflict::SeparationStandard{})) continue;
        s.validated = true;
        s.id = fmt::format("{}-{}-{:016x}", conflict_type_slug(type), n_aircraft, seed);
        return s;
    }
    raise(Errc::generation_exhausted,
          fmt::format("no valid {} draw with {} aircraft after 100 attempts (seed {})",
                      conflict_type_name(type), n_aircraft, seed));
}

sim::World world_from(const Scenario& s) {
    if (s.n_aircraft != static_cast<int>(s.initial_states.size())) {
        raise(Errc::dataset_invalid,
              fmt::format("scenario '{}' declares {} aircraft but lists {}", s.id, s.n_aircraft,
                          s.initial_states.size()));
    }
    sim::World w;
    try {
        for (const auto& a : s.initial_states) w.spawn(a);
    } catch (const AtcError& e) {
        raise(Errc::dataset_invalid, fmt::format("scenario '{}': {}", s.id, e.what()));
    }
    return w;
}

bool validate_inevitable_collision(const Scenario& s, const conflict::SeparationStandard& std) {
    std.validate();
    if (!(s.evaluation_horizon_s > 0.0)) return false;
    sim::World w = world_from(s);
    w.run_until(s.evaluation_horizon_s);
    return conflict::classify_outcome(w.min_sep_log(), std) == -1;
}

std::vector<Scenario> build_dataset(std::uint64_t master_seed) {
    std::vector<Scenario> out;
    out.reserve(120);
    std::uint64_t type_idx = 0;
    for (ConflictType type : kConflictTypes) {
        for (int n = 2; n <= 4; ++n) {
            for (int k = 0; k < 10; ++k) {
                std::uint64_t slot = type_idx * 64 + static_cast<std::uint64_t>(n) * 16 +
                                     static_cast<std::uint64_t>(k);
                out.push_back(generate(type, n, mix_seed(master_seed, slot)));
            }
        }
        ++type_idx;
    }
    return out;
}

} // namespace atc::scenario
