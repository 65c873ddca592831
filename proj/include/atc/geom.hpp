#pragma once

#include <cmath>

namespace atc {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kFeetPerNm = 6076.12;

// East-north plane, nautical miles.
struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    double dot(const Vec2& o) const { return x * o.x + y * o.y; }
    double norm() const { return std::hypot(x, y); }
};

inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }

// Heading is degrees true, clockwise from north; 090 points east.
inline Vec2 heading_unit(double heading_deg) {
    double r = deg_to_rad(heading_deg);
    return {std::sin(r), std::cos(r)};
}

inline double normalize_heading(double deg) {
    double h = std::fmod(deg, 360.0);
    if (h < 0.0) h += 360.0;
    if (h >= 360.0) h = 0.0;
    return h;
}

// Unsigned difference between two headings, in [0, 180].
inline double heading_difference(double a_deg, double b_deg) {
    double d = std::fabs(normalize_heading(a_deg) - normalize_heading(b_deg));
    return d > 180.0 ? 360.0 - d : d;
}

// Shortest signed turn from one heading to another, in (-180, 180].
// An exact 180-degree split resolves to +180 (clockwise).
inline double signed_turn(double from_deg, double to_deg) {
    double d = normalize_heading(to_deg) - normalize_heading(from_deg);
    if (d > 180.0) d -= 360.0;
    if (d <= -180.0) d += 360.0;
    return d;
}

inline double kt_to_nm_s(double kt) { return kt / 3600.0; }

inline double bearing_deg(const Vec2& from, const Vec2& to) {
    return normalize_heading(std::atan2(to.x - from.x, to.y - from.y) * 180.0 / kPi);
}

} // namespace atc
