#include "atc/conflict/standard.hpp"

#include <cmath>

#include <fmt/format.h>

#include "atc/errors.hpp"

namespace atc::conflict {

void SeparationStandard::validate() const {
    auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
    if (!positive(horizontal_nm) || !positive(vertical_ft) || !positive(near_miss_horizontal_nm) ||
        !positive(near_miss_vertical_ft) || !positive(lookahead_s)) {
        raise(Errc::field_out_of_range, "separation standard fields must be positive and finite");
    }
    if (near_miss_horizontal_nm >= horizontal_nm || near_miss_vertical_ft >= vertical_ft) {
        raise(Errc::field_out_of_range,
              fmt::format("near-miss thresholds ({} NM, {} ft) must be below the separation "
                          "minima ({} NM, {} ft)",
                          near_miss_horizontal_nm, near_miss_vertical_ft, horizontal_nm,
                          vertical_ft));
    }
}

} // namespace atc::conflict
