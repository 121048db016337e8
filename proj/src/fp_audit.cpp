#include "talab/fp_audit.hpp"

#include <algorithm>
#include <chrono>
#include <functional>
#include <iomanip>
#include <optional>
#include <sstream>

#include "talab/error.hpp"
#include "talab/floatp.hpp"

namespace talab {

namespace {

namespace mp = boost::multiprecision;

// Independent restatement of the special division used by the oracle.
ExactRational oracle_special(const BigInt& x, const BigInt& y) {
    ExactRational q = ratio(x, y);
    if (mp::denominator(ExactRational(q * 4)) == 1) return q;
    return q + ExactRational(1, 8);
}

BigInt floor_div(const BigInt& a, const BigInt& b) {
    BigInt q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

class Grid {
public:
    explicit Grid(int p) : floats_(enumerate_all(p)) {
        values_.reserve(floats_.size());
        for (const auto& f : floats_) values_.push_back(f.value());
    }

    const std::vector<FloatP>& floats() const { return floats_; }

    // Nearest representable value; empty when |x| exceeds the largest one.
    std::optional<FloatP> nearest(const ExactRational& x) const {
        if (x > values_.back() || x < values_.front()) return std::nullopt;
        auto it = std::lower_bound(values_.begin(), values_.end(), x);
        auto hi = static_cast<std::size_t>(it - values_.begin());
        if (values_[hi] == x) return floats_[hi];
        std::size_t lo = hi - 1;
        ExactRational dlo = x - values_[lo];
        ExactRational dhi = values_[hi] - x;
        if (dlo < dhi) return floats_[lo];
        if (dhi < dlo) return floats_[hi];
        const FloatP& a = floats_[lo];
        const FloatP& b = floats_[hi];
        if (a.is_zero()) return a;
        if (b.is_zero()) return b;
        return (a.significand() % 2 == 0) ? a : b;
    }

private:
    std::vector<FloatP> floats_;
    std::vector<ExactRational> values_;
};

std::string show(const std::optional<FloatP>& f) {
    return f ? f->debug_string() : std::string("overflow");
}

std::optional<FloatP> attempt(const std::function<FloatP()>& fn) {
    try {
        FloatP out = fn();
        // Re-validate the range invariants of the result.
        return FloatP::make(out.significand(), out.exponent(), out.precision());
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::PrecisionOverflow) return std::nullopt;
        throw;
    }
}

void tally(FpAuditLine& line, const std::string& label, const std::optional<FloatP>& got,
           const std::optional<FloatP>& expect, const std::optional<FloatP>& truth) {
    ++line.cases;
    if (got != expect) {
        if (line.mismatches == 0)
            line.first_mismatch = label + ": got " + show(got) + ", oracle " + show(expect);
        ++line.mismatches;
    }
    if (got != truth) {
        if (line.differs_from_true == 0)
            line.first_true_difference = label + ": got " + show(got) + ", exact " + show(truth);
        ++line.differs_from_true;
    }
}

}  // namespace

bool FpAuditReport::passed() const {
    return std::all_of(lines.begin(), lines.end(), [](const FpAuditLine& l) { return l.mismatches == 0; });
}

std::string FpAuditReport::render() const {
    std::ostringstream os;
    os << "fp-audit p=" << p << "\n";
    os << std::left << std::setw(10) << "op" << std::right << std::setw(10) << "cases" << std::setw(12)
       << "mismatches" << std::setw(16) << "vs-exact-round" << "\n";
    for (const auto& l : lines) {
        os << std::left << std::setw(10) << l.op << std::right << std::setw(10) << l.cases << std::setw(12)
           << l.mismatches << std::setw(16) << l.differs_from_true << "\n";
    }
    for (const auto& l : lines) {
        if (!l.first_mismatch.empty()) os << "  mismatch " << l.op << " " << l.first_mismatch << "\n";
        if (!l.first_true_difference.empty())
            os << "  note " << l.op << " " << l.first_true_difference << "\n";
    }
    os << std::fixed << std::setprecision(2) << "elapsed " << seconds << " s, "
       << (passed() ? "PASS" : "FAIL") << "\n";
    return os.str();
}

FpAuditReport run_fp_audit(int p) {
    check_precision(p);
    require(p <= 6, ErrorKind::InvalidArgument, "exhaustive audit limited to p <= 6");
    auto start = std::chrono::steady_clock::now();
    Grid grid(p);
    const auto& all = grid.floats();

    FpAuditLine add_line, mul_line, div_line, cmp_line, floor_line;
    add_line.op = "add";
    mul_line.op = "mul";
    div_line.op = "div";
    cmp_line.op = "compare";
    floor_line.op = "floor";

    for (const auto& a : all) {
        const ExactRational va = a.value();
        for (const auto& b : all) {
            const ExactRational vb = b.value();
            const std::string label = a.debug_string() + " op " + b.debug_string();

            std::optional<FloatP> expect_add;
            if (a.is_zero()) expect_add = b;
            else if (b.is_zero()) expect_add = a;
            else if (a.exponent() >= b.exponent()) {
                BigInt scale = BigInt(1) << static_cast<unsigned>(a.exponent() - b.exponent());
                expect_add = grid.nearest(
                    ldexp(ExactRational(a.significand()) + oracle_special(b.significand(), scale), a.exponent()));
            } else {
                BigInt scale = BigInt(1) << static_cast<unsigned>(b.exponent() - a.exponent());
                expect_add = grid.nearest(
                    ldexp(oracle_special(a.significand(), scale) + ExactRational(b.significand()), b.exponent()));
            }
            tally(add_line, label, attempt([&] { return add(a, b); }), expect_add, grid.nearest(va + vb));

            auto expect_mul = grid.nearest(va * vb);
            tally(mul_line, label, attempt([&] { return mul(a, b); }), expect_mul, expect_mul);

            if (!b.is_zero()) {
                BigInt scaled = BigInt(a.significand()) << static_cast<unsigned>(p - 1);
                auto expect_div = grid.nearest(ldexp(oracle_special(scaled, b.significand()),
                                                     a.exponent() - b.exponent() - p + 1));
                tally(div_line, label, attempt([&] { return div(a, b); }), expect_div, grid.nearest(va / vb));
            }

            ++cmp_line.cases;
            auto got = compare(a, b);
            auto want = va < vb ? std::strong_ordering::less
                                : (va == vb ? std::strong_ordering::equal : std::strong_ordering::greater);
            if (got != want) {
                if (cmp_line.mismatches == 0) cmp_line.first_mismatch = label;
                ++cmp_line.mismatches;
            }
        }

        std::optional<FloatP> expect_floor = a;
        if (a.exponent() < 0) {
            BigInt den = BigInt(1) << static_cast<unsigned>(-a.exponent());
            expect_floor = grid.nearest(ExactRational(floor_div(a.significand(), den)));
        }
        auto truth = grid.nearest(ExactRational(floor_div(mp::numerator(va), mp::denominator(va))));
        tally(floor_line, "floor " + a.debug_string(), attempt([&] { return floor(a); }), expect_floor, truth);
    }

    FpAuditReport report;
    report.p = p;
    report.lines = {add_line, mul_line, div_line, cmp_line, floor_line};
    report.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

}  // namespace talab
