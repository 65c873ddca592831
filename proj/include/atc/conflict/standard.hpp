#pragma once

namespace atc::conflict {

// En-route separation minima plus the much tighter near-miss tier used for
// scoring. Near-miss thresholds must stay strictly below the minima.
struct SeparationStandard {
    double horizontal_nm = 5.0;
    double vertical_ft = 1000.0;
    double near_miss_horizontal_nm = 1.0;
    double near_miss_vertical_ft = 200.0;
    double lookahead_s = 300.0;

    void validate() const;

    bool operator==(const SeparationStandard&) const = default;
};

} // namespace atc::conflict
