#include <doctest.h>

#include <cmath>

#include "atc/conflict/metrics.hpp"
#include "atc/errors.hpp"
#include "atc/scenario/rng.hpp"
#include "oracle.hpp"

using namespace atc;
using conflict::SeparationStandard;
using sim::AircraftState;

namespace {

AircraftState make(const std::string& cs, double x, double y, double hdg, double spd, double alt,
                   double vs = 0.0, double target_alt = -1.0) {
    AircraftState a;
    a.callsign = cs;
    a.x_nm = x;
    a.y_nm = y;
    a.heading_deg = hdg;
    a.ground_speed_kt = spd;
    a.altitude_ft = alt;
    a.vertical_speed_fpm = vs;
    a.target_altitude_ft = target_alt < 0.0 ? alt : target_alt;
    a.target_heading_deg = hdg;
    a.target_speed_kt = spd;
    return a;
}

// Random pair with a guaranteed healthy relative speed, so brute-force scans
// see sharp minima. Degenerate grazing geometries are a measure-zero family
// the random suite deliberately avoids; the interval math handles them and
// dedicated cases below pin those branches.
struct PairDraw {
    AircraftState a;
    AircraftState b;
};

PairDraw draw_pair(scenario::Rng& rng, bool vertical_motion) {
    for (;;) {
        AircraftState a = make("AAA11", rng.uniform(-15, 15), rng.uniform(-15, 15),
                               rng.uniform(0, 360), rng.uniform(100, 600), 20000.0);
        AircraftState b = make("BBB22", rng.uniform(-15, 15), rng.uniform(-15, 15),
                               rng.uniform(0, 360), rng.uniform(100, 600), 20000.0);
        if (vertical_motion) {
            auto profile = [&](AircraftState& s) {
                int kind = rng.uniform_int(0, 2);
                s.altitude_ft = 20000.0 + rng.uniform(-2500.0, 2500.0);
                s.target_altitude_ft = s.altitude_ft;
                if (kind == 1) {
                    s.target_altitude_ft = s.altitude_ft + rng.uniform(500.0, 6000.0);
                    s.vertical_speed_fpm = 2000.0;
                } else if (kind == 2) {
                    s.target_altitude_ft = s.altitude_ft - rng.uniform(500.0, 6000.0);
                    s.vertical_speed_fpm = -2000.0;
                }
            };
            profile(a);
            profile(b);
        }
        if ((b.velocity_nm_s() - a.velocity_nm_s()).norm() < kt_to_nm_s(60.0)) continue;
        return {a, b};
    }
}

} // namespace

TEST_CASE("cpa closed forms") {
    // Head-on, 20 NM apart, both 480 kt: closure 960 kt = 4/15 NM/s.
    AircraftState a = make("AAA11", 0, 0, 90, 480, 22500);
    AircraftState b = make("BBB22", 20, 0, 270, 480, 22500);
    auto r = conflict::cpa(a, b);
    CHECK(r.tcpa_s == doctest::Approx(75.0));
    CHECK(r.dcpa_nm == doctest::Approx(0.0).epsilon(1e-9));

    // Identical velocity vectors: frozen geometry.
    AircraftState c = make("CCC33", 0, 7, 45, 300, 22500);
    AircraftState d = make("DDD44", 3, 3, 45, 300, 22500);
    r = conflict::cpa(c, d);
    CHECK(r.tcpa_s == 0.0);
    CHECK(r.dcpa_nm == doctest::Approx(5.0));

    // Symmetric 90-degree convergence onto the origin.
    AircraftState e = make("EEE55", -10, 0, 90, 300, 22500);
    AircraftState f = make("FFF66", 0, -10, 0, 300, 22500);
    r = conflict::cpa(e, f);
    CHECK(r.tcpa_s == doctest::Approx(120.0));
    CHECK(r.dcpa_nm == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("cpa is symmetric and never negative") {
    scenario::Rng rng(4242);
    for (int i = 0; i < 200; ++i) {
        auto [a, b] = draw_pair(rng, false);
        auto ab = conflict::cpa(a, b);
        auto ba = conflict::cpa(b, a);
        CHECK(ab.tcpa_s == doctest::Approx(ba.tcpa_s).epsilon(1e-12));
        CHECK(ab.dcpa_nm == doctest::Approx(ba.dcpa_nm).epsilon(1e-12));
        CHECK(ab.tcpa_s >= 0.0);
        CHECK(ab.dcpa_nm >= 0.0);
    }
}

TEST_CASE("cpa and tlos match the brute-force scan") {
    scenario::Rng rng(777);
    SeparationStandard std_;
    for (int i = 0; i < 250; ++i) {
        auto [a, b] = draw_pair(rng, true);
        auto analytic = conflict::cpa(a, b);
        auto ref = oracle::brute_cpa(a, b);
        CHECK(std::fabs(analytic.tcpa_s - ref.tcpa_s) < 0.5);
        CHECK(std::fabs(analytic.dcpa_nm - ref.dcpa_nm) < 0.05);

        auto t = conflict::tlos(a, b, std_);
        auto tref = oracle::brute_tlos(a, b, std_);
        if (t && tref) {
            CHECK(std::fabs(*t - *tref) < 0.5);
        } else if (t.has_value() != tref.has_value()) {
            // A window thinner than the scan step is the only legal cause.
            double entered = t ? *t : *tref;
            INFO("presence mismatch at t=", entered);
            CHECK(t.has_value());
            double h = ((b.position() + b.velocity_nm_s() * *t) -
                        (a.position() + a.velocity_nm_s() * *t))
                           .norm();
            CHECK(h <= std_.horizontal_nm + 1e-6);
        }
    }
}

TEST_CASE("tlos closed cases") {
    SeparationStandard std_;
    AircraftState a = make("AAA11", 0, 0, 90, 480, 22500);
    AircraftState b = make("BBB22", 20, 0, 270, 480, 22500);
    auto t = conflict::tlos(a, b, std_);
    REQUIRE(t.has_value());
    CHECK(*t == doctest::Approx(56.25)); // (20 - 5) / (4/15)

    // Co-located horizontally but 5000 ft apart and level: never.
    AircraftState c = make("CCC33", 0, 0, 90, 300, 20000);
    AircraftState d = make("DDD44", 0, 0, 90, 300, 25000);
    CHECK(!conflict::tlos(c, d, std_).has_value());

    // Descent into the band makes the conjunction; level it never happens.
    AircraftState e = make("EEE55", 0, 0, 90, 300, 20000);
    AircraftState f = make("FFF66", 2, 0, 90, 300, 26000, -2000.0, 20300.0);
    t = conflict::tlos(e, f, std_);
    REQUIRE(t.has_value());
    // Vertical gap 6000 ft shrinks at 2000 fpm; below 1000 ft after 150 s.
    CHECK(*t == doctest::Approx(150.0).epsilon(0.01));
    f.vertical_speed_fpm = 0.0;
    f.target_altitude_ft = f.altitude_ft;
    CHECK(!conflict::tlos(e, f, std_).has_value());

    // Already in violation: tlos is now.
    AircraftState g = make("GGG77", 0, 0, 90, 300, 20000);
    AircraftState h = make("HHH88", 1, 0, 90, 310, 20100);
    t = conflict::tlos(g, h, std_);
    REQUIRE(t.has_value());
    CHECK(*t == 0.0);
}

TEST_CASE("separation minima are exclusive boundaries") {
    SeparationStandard std_;

    // Head-on crossing with exactly 1000 ft between levels: separated.
    AircraftState a = make("AAA11", -20, 0, 90, 300, 23000);
    AircraftState b = make("BBB22", 20, 0, 270, 300, 24000);
    CHECK(!conflict::tlos(a, b, std_).has_value());
    b.altitude_ft = 23999.0;
    b.target_altitude_ft = 23999.0;
    CHECK(conflict::tlos(a, b, std_).has_value());

    // A descent that lands exactly on the 1000 ft offset never violates.
    AircraftState c = make("CCC33", -20, 0, 90, 300, 23000);
    AircraftState d = make("DDD44", 20, 0, 270, 300, 25000, -2000.0, 24000.0);
    CHECK(!conflict::tlos(c, d, std_).has_value());
    d.target_altitude_ft = 23900.0;
    CHECK(conflict::tlos(c, d, std_).has_value());

    // Same-track pair holding exactly the horizontal minimum abreast.
    AircraftState e = make("EEE55", 0, 5, 90, 300, 23000);
    AircraftState f = make("FFF66", 0, 0, 90, 300, 23000);
    CHECK(!conflict::tlos(e, f, std_).has_value());
    e.y_nm = 4.9;
    auto t2 = conflict::tlos(e, f, std_);
    REQUIRE(t2.has_value());
    CHECK(*t2 == 0.0);
}

TEST_CASE("tlos marks a real boundary") {
    scenario::Rng rng(31337);
    SeparationStandard std_;
    int checked = 0;
    for (int i = 0; i < 8000 && checked < 60; ++i) {
        auto [a, b] = draw_pair(rng, true);
        auto t = conflict::tlos(a, b, std_);
        if (!t || *t < 1.0) continue;
        ++checked;
        auto sep_at = [&](double time) {
            double h = ((b.position() + b.velocity_nm_s() * time) -
                        (a.position() + a.velocity_nm_s() * time))
                           .norm();
            double v = std::fabs(conflict::extrapolated_altitude_ft(a, time) -
                                 conflict::extrapolated_altitude_ft(b, time));
            return std::make_pair(h, v);
        };
        auto [h_at, v_at] = sep_at(*t + 1e-6);
        CHECK(h_at < std_.horizontal_nm + 1e-6);
        CHECK(v_at < std_.vertical_ft + 1e-3);
        auto [h_before, v_before] = sep_at(*t - 1.0);
        bool some_condition_held = h_before >= std_.horizontal_nm || v_before >= std_.vertical_ft;
        CHECK(some_condition_held);
    }
    CHECK(checked == 60);
}

TEST_CASE("geometry invariance under translation and rotation") {
    scenario::Rng rng(2024);
    SeparationStandard std_;
    for (int i = 0; i < 100; ++i) {
        auto [a, b] = draw_pair(rng, true);
        auto base_cpa = conflict::cpa(a, b);
        auto base_tlos = conflict::tlos(a, b, std_);

        double dx = rng.uniform(-50, 50);
        double dy = rng.uniform(-50, 50);
        double rot = rng.uniform(0, 360);
        auto moved = [&](AircraftState s) {
            double rad = deg_to_rad(rot);
            double x = s.x_nm * std::cos(rad) + s.y_nm * std::sin(rad);
            double y = -s.x_nm * std::sin(rad) + s.y_nm * std::cos(rad);
            s.x_nm = x + dx;
            s.y_nm = y + dy;
            s.heading_deg = normalize_heading(s.heading_deg + rot);
            s.target_heading_deg = s.heading_deg;
            return s;
        };
        AircraftState a2 = moved(a);
        AircraftState b2 = moved(b);
        auto moved_cpa = conflict::cpa(a2, b2);
        CHECK(moved_cpa.tcpa_s == doctest::Approx(base_cpa.tcpa_s).epsilon(1e-6));
        CHECK(moved_cpa.dcpa_nm == doctest::Approx(base_cpa.dcpa_nm).epsilon(1e-6));
        auto moved_tlos = conflict::tlos(a2, b2, std_);
        REQUIRE(moved_tlos.has_value() == base_tlos.has_value());
        if (base_tlos) CHECK(*moved_tlos == doctest::Approx(*base_tlos).epsilon(1e-6));
    }
}

TEST_CASE("detect_conflicts") {
    sim::World w;
    w.create_aircraft(make("SOLO1", 0, 0, 90, 300, 22500));
    CHECK(conflict::detect_conflicts(w, SeparationStandard{}).empty());

    // Two diverging aircraft beyond 5 NM: nothing.
    sim::World w2;
    w2.create_aircraft(make("DIV1", 0, 0, 270, 300, 22500));
    w2.create_aircraft(make("DIV2", 10, 0, 90, 300, 22500));
    CHECK(conflict::detect_conflicts(w2, SeparationStandard{}).empty());

    // Two converging pairs, ordered by time to loss of separation.
    sim::World w3;
    w3.create_aircraft(make("NEAR1", 0, 0, 90, 480, 22500));
    w3.create_aircraft(make("NEAR2", 12, 0, 270, 480, 22500));
    w3.create_aircraft(make("FAR1", 0, 30, 90, 480, 25000));
    w3.create_aircraft(make("FAR2", 30, 30, 270, 480, 25000));
    auto pairs = conflict::detect_conflicts(w3, SeparationStandard{});
    REQUIRE(pairs.size() == 2);
    CHECK(pairs[0].callsign_a == "NEAR1");
    CHECK(pairs[0].callsign_b == "NEAR2");
    CHECK(pairs[1].callsign_a == "FAR1");
    REQUIRE(pairs[0].tlos_s.has_value());
    REQUIRE(pairs[1].tlos_s.has_value());
    CHECK(*pairs[0].tlos_s < *pairs[1].tlos_s);
    CHECK(pairs[0].heading_difference_deg == doctest::Approx(180.0));
    CHECK(pairs[0].horizontal_sep_nm == doctest::Approx(12.0));
    CHECK(pairs[0].vertical_sep_ft == doctest::Approx(0.0));
    CHECK(pairs[0].total_sep_nm == doctest::Approx(12.0));
    CHECK(pairs[0].altitude_a.tendency == sim::AltitudeTendency::level);

    // total separation folds the vertical gap in at 6076.12 ft per NM;
    // the faster trailer runs down a descending leader inside the window
    sim::World w4;
    w4.create_aircraft(make("TOT1", 0, 0, 90, 480, 22500));
    w4.spawn(make("TOT2", 3, 0, 90, 250, 22500 + 6076.12, -4000.0, 22500.0));
    auto p4 = conflict::detect_conflicts(w4, SeparationStandard{});
    REQUIRE(p4.size() == 1);
    CHECK(p4[0].total_sep_nm == doctest::Approx(std::sqrt(9.0 + 1.0)));
}

TEST_CASE("classify_outcome tiers and monotonicity") {
    SeparationStandard std_;
    using sim::SeparationSample;
    std::vector<SeparationSample> log;
    CHECK_THROWS_AS(conflict::classify_outcome(log, std_), AtcError);

    log.push_back({1.0, "A", "B", 0.3, 50.0});
    CHECK(conflict::classify_outcome(log, std_) == -1);
    log[0] = {1.0, "A", "B", 3.0, 400.0};
    CHECK(conflict::classify_outcome(log, std_) == 0);
    log[0] = {1.0, "A", "B", 6.0, 0.0};
    CHECK(conflict::classify_outcome(log, std_) == 1);
    log[0] = {1.0, "A", "B", 0.5, 400.0}; // near-miss horizontally only: LoS tier
    CHECK(conflict::classify_outcome(log, std_) == 0);

    // Tightening any entry can only keep or lower the score.
    scenario::Rng rng(55);
    for (int i = 0; i < 100; ++i) {
        std::vector<SeparationSample> samples;
        int n = rng.uniform_int(1, 20);
        for (int k = 0; k < n; ++k) {
            samples.push_back({static_cast<double>(k), "A", "B", rng.uniform(0.0, 8.0),
                               rng.uniform(0.0, 2000.0)});
        }
        int before = conflict::classify_outcome(samples, std_);
        int idx = rng.uniform_int(0, n - 1);
        samples[idx].horizontal_nm *= rng.uniform(0.0, 1.0);
        samples[idx].vertical_ft *= rng.uniform(0.0, 1.0);
        CHECK(conflict::classify_outcome(samples, std_) <= before);
    }
}

TEST_CASE("separation standard validation") {
    SeparationStandard ok;
    CHECK_NOTHROW(ok.validate());
    SeparationStandard bad = ok;
    bad.near_miss_horizontal_nm = 5.0; // must stay strictly below the minimum
    CHECK_THROWS_AS(bad.validate(), AtcError);
    bad = ok;
    bad.vertical_ft = -1.0;
    CHECK_THROWS_AS(bad.validate(), AtcError);
    bad = ok;
    bad.lookahead_s = 0.0;
    CHECK_THROWS_AS(bad.validate(), AtcError);
}
