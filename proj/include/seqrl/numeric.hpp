#pragma once

#include <gmpxx.h>

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace seqrl {

using Rational = mpq_class;

/// Exact mode compares probabilities as rationals; floating mode compares
/// their double images within kFloatTolerance.
enum class NumericMode { Exact, Floating };

inline constexpr double kFloatTolerance = 1e-12;

/// Parses "p/q", integers, and finite decimals ("0.125", "-3.5e-2") into an
/// exact rational. Throws std::invalid_argument on anything else.
Rational parse_rational(std::string_view text);

/// Canonical text form: "p/q", or "p" when the denominator is one.
std::string format_rational(const Rational& value);

/// Decimal text with `digits` significant digits (for reports of huge bounds).
std::string format_decimal(const Rational& value, int digits = 17);

double to_double(const Rational& value);

/// Reads SEQRL_EXACT ("0" selects floating mode; anything else, or unset, is exact).
NumericMode numeric_mode_from_env();

/// Probability vector over observation x reward outcomes, indexed obs * |R| + reward.
using Row = std::vector<Rational>;
using RowD = std::vector<double>;

RowD to_double(const Row& row);

bool rows_equal(const Row& lhs, const Row& rhs, NumericMode mode);

/// Largest absolute coordinate difference, evaluated in doubles.
double row_distance(const Row& lhs, const Row& rhs);

Rational row_sum(const Row& row);

/// Shortest text that round-trips a double ("%.17g").
std::string format_double(double value);

}  // namespace seqrl
