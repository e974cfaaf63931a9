#pragma once

#include <gmpxx.h>

#include <stdexcept>
#include <string>
#include <string_view>

namespace exinv {

/// Exact rational scalar. GMP keeps every value canonical (reduced, den > 0).
using Rational = mpq_class;
using Integer = mpz_class;

/// "num/den", or "num" when the denominator is 1.
std::string to_string(const Rational& q);

/// Parses "3", "-7/8", "0.25", "1.5e-3", "2E4" exactly.
Rational parse_rational(std::string_view text);

/// Exact binary value of a double (every finite double is a dyadic rational).
Rational exact_rational(double x);

inline double to_double(const Rational& q) { return q.get_d(); }

/// Nearest rational with the given denominator: round(x * den) / den.
Rational round_to_denominator(double x, const Integer& den);

}  // namespace exinv
