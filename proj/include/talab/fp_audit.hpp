#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace talab {

struct FpAuditLine {
    std::string op;
    std::int64_t cases = 0;
    // Disagreements with the definitional oracle; any nonzero count fails the audit.
    std::int64_t mismatches = 0;
    // Informational: results that differ from correctly rounding the true value.
    std::int64_t differs_from_true = 0;
    std::string first_mismatch;
    std::string first_true_difference;
};

struct FpAuditReport {
    int p = 0;
    std::vector<FpAuditLine> lines;
    double seconds = 0.0;
    bool passed() const;
    std::string render() const;
};

// Exhaustive check of add, mul, div, compare and floor over every operand pair
// for precision p. The oracle evaluates each defining expression over exact
// rationals and rounds by scanning the sorted list of representable values.
FpAuditReport run_fp_audit(int p);

}  // namespace talab
