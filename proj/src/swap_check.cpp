#include "talab/swap_check.hpp"

#include <random>

#include "talab/backend.hpp"
#include "talab/hardlang.hpp"
#include "talab/tensor.hpp"

namespace talab {

namespace {

std::int64_t draw(std::mt19937_64& rng, std::int64_t lo, std::int64_t hi) {
    const auto span = static_cast<unsigned __int128>(hi - lo + 1);
    return lo + static_cast<std::int64_t>((static_cast<unsigned __int128>(rng()) * span) >> 64);
}

Matrix<ExactRational> random_rational(std::mt19937_64& rng, std::size_t r, std::size_t c) {
    Matrix<ExactRational> m(r, c, ExactRational(0));
    for (auto& v : m.data()) v = make_rational(draw(rng, -9, 9), draw(rng, 1, 9));
    return m;
}

}  // namespace

SwapCheckResult run_swap_check(std::size_t trials, std::uint64_t seed) {
    RationalBackend be;
    SwapCheckResult res;
    for (std::size_t t = 0; t < trials; ++t) {
        std::mt19937_64 rng(splitmix64(seed + t));
        const auto n1 = static_cast<std::size_t>(draw(rng, 1, 3));
        const auto n2 = static_cast<std::size_t>(draw(rng, 1, 3));
        const auto d1 = static_cast<std::size_t>(draw(rng, 1, 3));
        const auto d2 = static_cast<std::size_t>(draw(rng, 1, 3));
        const auto k = static_cast<std::size_t>(draw(rng, 1, 3));
        auto a1 = random_rational(rng, n1, d1);
        auto a2 = random_rational(rng, n2, d2);
        auto w1 = random_rational(rng, d1, k);
        auto w2 = random_rational(rng, d2, k);
        ++res.trials;
        if (unfused_project(be, a1, a2, w1, w2) != fused_project(be, a1, a2, w1, w2)) {
            if (res.failures++ == 0)
                res.first_failure = "trial " + std::to_string(t) + ": A1 " + shape_string(a1) + ", A2 " +
                                    shape_string(a2) + ", W1 " + shape_string(w1) + ", W2 " + shape_string(w2);
        }
    }
    return res;
}

}  // namespace talab
