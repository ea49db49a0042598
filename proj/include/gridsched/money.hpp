#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <string>

namespace gridsched {

// Cost amounts are kept in integer micro-units of an opaque currency
// (EUR, gCO2eq, ...). Integer representation keeps priority-queue ordering
// and dominance-key equality exact; doubles are only used at the I/O edge.
class Money {
public:
    constexpr Money() = default;

    static constexpr Money from_micro(std::int64_t m) {
        Money v;
        v.micro_ = m;
        return v;
    }

    // Rounds to the nearest micro-unit.
    static Money from_units(double units) {
        return from_micro(std::llround(units * 1e6));
    }

    constexpr std::int64_t micro() const { return micro_; }
    double units() const { return static_cast<double>(micro_) * 1e-6; }

    std::string str() const;

    constexpr Money& operator+=(Money o) {
        micro_ += o.micro_;
        return *this;
    }
    constexpr Money& operator-=(Money o) {
        micro_ -= o.micro_;
        return *this;
    }
    friend constexpr Money operator+(Money a, Money b) { return from_micro(a.micro_ + b.micro_); }
    friend constexpr Money operator-(Money a, Money b) { return from_micro(a.micro_ - b.micro_); }
    friend constexpr auto operator<=>(Money a, Money b) = default;

private:
    std::int64_t micro_ = 0;
};

// Energy bookkeeping inside the scheduler uses integer micro-kWh for the
// same exactness reasons. Physics models hand over doubles and are
// quantized once at the source/demand boundary.
using MicroKwh = std::int64_t;

inline MicroKwh micro_kwh_from_kwh(double kwh) {
    return std::llround(kwh * 1e6);
}

// watts * hours / 1000 = kWh, so micro-kWh = watts * hours * 1000.
inline MicroKwh micro_kwh_from_power(double watts, double hours) {
    return std::llround(watts * hours * 1000.0);
}

inline double kwh_from_micro(MicroKwh m) {
    return static_cast<double>(m) * 1e-6;
}

// price (micro-units per kWh) x energy (micro-kWh), rounded half-up to the
// nearest micro-unit. A single rounding per slot keeps the sum
// order-independent.
Money cost_for_energy(Money price_per_kwh, MicroKwh energy);

} // namespace gridsched
