#include "atc/conflict/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "atc/errors.hpp"
#include "atc/geom.hpp"

namespace atc::conflict {
namespace {

constexpr double kTinySpeedSq = 1e-12;

// Violation windows carry open-interval semantics: separation equal to the
// minimum is still separated, so zero-width windows (tangency, capture
// landing exactly on the limit) never count.
struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    bool empty() const { return lo >= hi; }
};

Interval clip(Interval i, double lo, double hi) {
    return {std::max(i.lo, lo), std::min(i.hi, hi)};
}

// Times where |p + v t| <= limit, unclipped. Whole line when the pair is
// relatively stationary inside the limit.
Interval horizontal_violation(const Vec2& p, const Vec2& v, double limit,
                              double horizon) {
    double v2 = v.dot(v);
    if (v2 < kTinySpeedSq) {
        if (p.norm() < limit) return {0.0, horizon};
        return {1.0, 0.0};
    }
    double b = p.dot(v);
    double c = p.dot(p) - limit * limit;
    double disc = b * b - v2 * c;
    if (disc < 0.0) return {1.0, 0.0};
    double root = std::sqrt(disc);
    return {(-b - root) / v2, (-b + root) / v2};
}

struct VerticalProfile {
    double alt0 = 0.0;
    double rate_fps = 0.0; // 0 after capture_s
    double capture_s = 0.0;

    double at(double t) const { return alt0 + rate_fps * std::min(t, capture_s); }
};

VerticalProfile vertical_profile(const sim::AircraftState& a) {
    VerticalProfile p;
    p.alt0 = a.altitude_ft;
    if (a.vertical_speed_fpm == 0.0) return p;
    double rate = a.vertical_speed_fpm / 60.0;
    double tc = (a.target_altitude_ft - a.altitude_ft) / rate;
    if (tc <= 0.0) return p;
    p.rate_fps = rate;
    p.capture_s = tc;
    return p;
}

// Times in [seg_lo, seg_hi] where |d0 + m (t - seg_lo)| <= limit.
Interval linear_violation(double seg_lo, double seg_hi, double d0, double m, double limit) {
    if (m == 0.0) {
        if (std::fabs(d0) < limit) return {seg_lo, seg_hi};
        return {1.0, 0.0};
    }
    double t1 = seg_lo + (-limit - d0) / m;
    double t2 = seg_lo + (limit - d0) / m;
    if (t1 > t2) std::swap(t1, t2);
    return clip({t1, t2}, seg_lo, seg_hi);
}

} // namespace

CpaResult cpa(const sim::AircraftState& a, const sim::AircraftState& b) {
    Vec2 p = b.position() - a.position();
    Vec2 v = b.velocity_nm_s() - a.velocity_nm_s();
    double v2 = v.dot(v);
    CpaResult r;
    r.tcpa_s = v2 < kTinySpeedSq ? 0.0 : std::max(0.0, -p.dot(v) / v2);
    r.dcpa_nm = (p + v * r.tcpa_s).norm();
    return r;
}

double extrapolated_altitude_ft(const sim::AircraftState& a, double t_s) {
    return vertical_profile(a).at(t_s);
}

std::optional<double> tlos(const sim::AircraftState& a, const sim::AircraftState& b,
                           const SeparationStandard& std_) {
    double horizon = std_.lookahead_s;
    Vec2 p = b.position() - a.position();
    Vec2 v = b.velocity_nm_s() - a.velocity_nm_s();
    Interval h = clip(horizontal_violation(p, v, std_.horizontal_nm, horizon), 0.0, horizon);
    if (h.empty()) return std::nullopt;

    VerticalProfile pa = vertical_profile(a);
    VerticalProfile pb = vertical_profile(b);
    double knots[4] = {0.0, horizon, 0.0, 0.0};
    int n = 2;
    if (pa.rate_fps != 0.0 && pa.capture_s < horizon) knots[n++] = pa.capture_s;
    if (pb.rate_fps != 0.0 && pb.capture_s < horizon) knots[n++] = pb.capture_s;
    std::sort(knots, knots + n);

    std::optional<double> best;
    for (int i = 0; i + 1 < n; ++i) {
        double s0 = knots[i];
        double s1 = knots[i + 1];
        if (s1 - s0 <= 0.0) continue;
        double d0 = pb.at(s0) - pa.at(s0);
        double d1 = pb.at(s1) - pa.at(s1);
        double m = (d1 - d0) / (s1 - s0);
        Interval vi = linear_violation(s0, s1, d0, m, std_.vertical_ft);
        Interval both = clip(vi, h.lo, h.hi);
        if (!both.empty() && (!best || both.lo < *best)) best = both.lo;
    }
    return best;
}

std::vector<ConflictPair> detect_conflicts(const sim::World& world,
                                           const SeparationStandard& std_) {
    std_.validate();
    const auto& acs = world.aircraft();
    std::vector<ConflictPair> out;
    for (std::size_t i = 0; i < acs.size(); ++i) {
        for (std::size_t j = i + 1; j < acs.size(); ++j) {
            const sim::AircraftState& a = acs[i];
            const sim::AircraftState& b = acs[j];
            auto t = tlos(a, b, std_);
            if (!t) continue;
            ConflictPair cp;
            cp.callsign_a = a.callsign;
            cp.callsign_b = b.callsign;
            CpaResult c = cpa(a, b);
            cp.tcpa_s = c.tcpa_s;
            cp.dcpa_nm = c.dcpa_nm;
            cp.tlos_s = *t;
            cp.heading_difference_deg = heading_difference(a.heading_deg, b.heading_deg);
            cp.horizontal_sep_nm = (a.position() - b.position()).norm();
            cp.vertical_sep_ft = std::fabs(a.altitude_ft - b.altitude_ft);
            cp.total_sep_nm = std::hypot(cp.horizontal_sep_nm, cp.vertical_sep_ft / kFeetPerNm);
            cp.altitude_a = {a.altitude_ft, a.target_altitude_ft, sim::altitude_tendency(a)};
            cp.altitude_b = {b.altitude_ft, b.target_altitude_ft, sim::altitude_tendency(b)};
            out.push_back(std::move(cp));
        }
    }
    std::sort(out.begin(), out.end(), [](const ConflictPair& x, const ConflictPair& y) {
        if (*x.tlos_s != *y.tlos_s) return *x.tlos_s < *y.tlos_s;
        if (x.callsign_a != y.callsign_a) return x.callsign_a < y.callsign_a;
        return x.callsign_b < y.callsign_b;
    });
    return out;
}

int classify_outcome(const std::vector<sim::SeparationSample>& min_sep_log,
                     const SeparationStandard& std_) {
    if (min_sep_log.empty()) {
        raise(Errc::empty_log, "no separation samples recorded");
    }
    int score = 1;
    for (const sim::SeparationSample& s : min_sep_log) {
        if (s.horizontal_nm < std_.near_miss_horizontal_nm &&
            s.vertical_ft < std_.near_miss_vertical_ft) {
            return -1;
        }
        if (s.horizontal_nm < std_.horizontal_nm && s.vertical_ft < std_.vertical_ft) {
            score = 0;
        }
    }
    return score;
}

} // namespace atc::conflict
