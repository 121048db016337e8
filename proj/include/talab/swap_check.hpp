#pragma once

#include <cstdint>
#include <string>

namespace talab {

struct SwapCheckResult {
    std::size_t trials = 0;
    std::size_t failures = 0;
    std::string first_failure;  // shapes of the first failing trial
    bool passed() const { return failures == 0; }
};

// Random exact-rational instances with n1, n2, d1, d2, k in [1, 3], checking
// (A1 kron A2)(W1 col_kron W2) == (A1 W1) col_kron (A2 W2) entrywise.
SwapCheckResult run_swap_check(std::size_t trials, std::uint64_t seed);

}  // namespace talab
