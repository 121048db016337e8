#include "talab/rope.hpp"

#include <cmath>

namespace talab {

ThetaSchedule theta_schedule(std::size_t d, double base) {
    require(d >= 2 && d % 2 == 0, ErrorKind::BadDimension, "rotary dimension must be even and at least 2");
    require(base > 0.0 && std::isfinite(base), ErrorKind::InvalidArgument, "theta base must be positive");
    ThetaSchedule s;
    s.d = d;
    s.base = base;
    for (std::size_t i = 0; i < d / 2; ++i)
        s.thetas.push_back(std::pow(base, -2.0 * static_cast<double>(i) / static_cast<double>(d)));
    return s;
}

}  // namespace talab
