#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "talab/backend.hpp"
#include "talab/matrix.hpp"
#include "talab/tensor.hpp"

namespace talab {

inline constexpr double kDefaultThetaBase = 10000.0;

struct ThetaSchedule {
    std::size_t d = 0;
    double base = kDefaultThetaBase;
    std::vector<double> thetas;  // d/2 angular frequencies
};

// theta_i = base^(-2(i-1)/d) for i = 1..d/2.
ThetaSchedule theta_schedule(std::size_t d, double base = kDefaultThetaBase);

template <Backend B>
std::pair<typename B::Scalar, typename B::Scalar> sin_cos_approx(const B& be, const typename B::Scalar& x) {
    return be.sin_cos(x);
}

// [[cos t, -sin t], [sin t, cos t]]
template <Backend B>
Matrix<typename B::Scalar> rot2(const B& be, const typename B::Scalar& theta) {
    auto [s, c] = sin_cos_approx(be, theta);
    return Matrix<typename B::Scalar>(2, 2, {c, be.neg(s), s, c});
}

// Block-diagonal with blocks rot2(offset * theta_i). The angles are formed on
// the host and enter as constants.
template <Backend B>
Matrix<typename B::Scalar> rel_rotation(const B& be, std::int64_t offset, const ThetaSchedule& sched) {
    auto out = zeros(be, sched.d, sched.d);
    for (std::size_t i = 0; i < sched.thetas.size(); ++i) {
        auto block = rot2(be, be.constant(static_cast<double>(offset) * sched.thetas[i]));
        for (std::size_t r = 0; r < 2; ++r)
            for (std::size_t c = 0; c < 2; ++c) out(2 * i + r, 2 * i + c) = block(r, c);
    }
    return out;
}

}  // namespace talab
