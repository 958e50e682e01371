#pragma once

#include <gmpxx.h>

#include <cmath>
#include <cstdint>
#include <string>

#include "bksim/errors.hpp"

namespace bk {

using Rational = mpq_class;
using BigInt = mpz_class;

/// Parse a rational from "num/den" or plain integer text (base 10).
/// Accepts optional leading '-'. Result is canonicalized.
inline Rational parse_rational(const std::string& text) {
  if (text.empty()) throw ConfigError("empty rational literal");
  try {
    Rational q(text, 10);
    if (q.get_den() == 0) throw ConfigError("rational with zero denominator: " + text);
    q.canonicalize();
    return q;
  } catch (const std::invalid_argument&) {
    throw ConfigError("malformed rational literal: " + text);
  }
}

/// Serialize as "num/den" ("num" alone when the denominator is 1).
inline std::string format_rational(const Rational& q) { return q.get_str(10); }

/// Exact conversion of a finite double to a rational (doubles are dyadic).
inline Rational rational_from_double(double x) {
  if (!std::isfinite(x)) throw PreconditionError("rational_from_double: non-finite input");
  return Rational(x);  // mpq_set_d is exact
}

/// Largest double <= q (round toward -inf). Used to build sound cached bounds
/// for hot-loop comparisons against 53-bit uniforms.
inline double double_round_down(const Rational& q) {
  double d = q.get_d();  // mpq_get_d truncates toward zero
  if (q >= 0) return d;  // truncation toward zero rounds down for non-negatives
  // Negative: truncation rounded up; step one ulp down if inexact.
  return (Rational(d) == q) ? d : std::nextafter(d, -HUGE_VAL);
}

/// True when q is exactly representable as a double.
inline bool exactly_double(const Rational& q) { return Rational(q.get_d()) == q; }

/// Number of bits in |z| (0 for z == 0).
inline std::size_t bit_length(const BigInt& z) {
  if (z == 0) return 0;
  return mpz_sizeinbase(z.get_mpz_t(), 2);
}

/// Combined bit size of a rational: bits(num) + bits(den).
inline std::size_t bit_length(const Rational& q) {
  return bit_length(BigInt(q.get_num())) + bit_length(BigInt(q.get_den()));
}

/// z^e for non-negative machine exponent.
inline BigInt pow_int(const BigInt& z, unsigned long e) {
  BigInt r;
  mpz_pow_ui(r.get_mpz_t(), z.get_mpz_t(), e);
  return r;
}

/// q^e for non-negative machine exponent.
inline Rational pow_rational(const Rational& q, unsigned long e) {
  Rational r;
  mpz_pow_ui(r.get_num().get_mpz_t(), q.get_num().get_mpz_t(), e);
  mpz_pow_ui(r.get_den().get_mpz_t(), q.get_den().get_mpz_t(), e);
  return r;  // canonical since q is canonical
}

}  // namespace bk
