#pragma once

#include <mpfr.h>

#include <string>
#include <utility>

#include "bksim/rational.hpp"

namespace bk {

/// Thin RAII wrapper over mpfr_t at fixed 192-bit precision, with the rounding
/// mode passed explicitly at every inexact operation. Exact queries
/// (comparison, sign, classification) take no rounding mode.
///
/// Values here are exact reals of the form mantissa * 2^exponent; all interval
/// soundness arguments in logspace.hpp rely on that exactness.
class HighFloat {
 public:
  static constexpr mpfr_prec_t kPrec = 192;

  HighFloat() {
    mpfr_init2(v_, kPrec);
    mpfr_set_zero(v_, +1);
  }
  HighFloat(const HighFloat& o) {
    mpfr_init2(v_, kPrec);
    mpfr_set(v_, o.v_, MPFR_RNDN);  // same precision: exact
  }
  HighFloat(HighFloat&& o) noexcept {
    mpfr_init2(v_, kPrec);
    mpfr_swap(v_, o.v_);
  }
  HighFloat& operator=(const HighFloat& o) {
    if (this != &o) mpfr_set(v_, o.v_, MPFR_RNDN);
    return *this;
  }
  HighFloat& operator=(HighFloat&& o) noexcept {
    if (this != &o) mpfr_swap(v_, o.v_);
    return *this;
  }
  ~HighFloat() { mpfr_clear(v_); }

  static HighFloat from_ui(unsigned long u) {
    HighFloat r;
    mpfr_set_ui(r.v_, u, MPFR_RNDN);  // exact for u < 2^192
    return r;
  }
  static HighFloat from_si(long s) {
    HighFloat r;
    mpfr_set_si(r.v_, s, MPFR_RNDN);
    return r;
  }
  static HighFloat from_double(double d) {
    HighFloat r;
    mpfr_set_d(r.v_, d, MPFR_RNDN);  // exact: doubles fit in 192 bits
    return r;
  }
  static HighFloat from_int(const BigInt& z, mpfr_rnd_t rnd) {
    HighFloat r;
    mpfr_set_z(r.v_, z.get_mpz_t(), rnd);
    return r;
  }
  static HighFloat from_rational(const Rational& q, mpfr_rnd_t rnd) {
    HighFloat r;
    mpfr_set_q(r.v_, q.get_mpq_t(), rnd);
    return r;
  }
  /// ln 2, rounded in the requested direction.
  static HighFloat const_ln2(mpfr_rnd_t rnd) {
    HighFloat r;
    mpfr_const_log2(r.v_, rnd);
    return r;
  }

  bool is_zero() const { return mpfr_zero_p(v_) != 0; }
  bool is_inf() const { return mpfr_inf_p(v_) != 0; }
  bool is_nan() const { return mpfr_nan_p(v_) != 0; }
  int sgn() const { return mpfr_sgn(v_); }

  /// Exact three-way comparison.
  int cmp(const HighFloat& o) const { return mpfr_cmp(v_, o.v_); }
  int cmp_ui(unsigned long u) const { return mpfr_cmp_ui(v_, u); }
  bool operator<(const HighFloat& o) const { return cmp(o) < 0; }
  bool operator<=(const HighFloat& o) const { return cmp(o) <= 0; }
  bool operator==(const HighFloat& o) const { return mpfr_equal_p(v_, o.v_) != 0; }

  double to_double(mpfr_rnd_t rnd = MPFR_RNDN) const { return mpfr_get_d(v_, rnd); }

  std::string str(int digits = 30) const {
    char* s = nullptr;
    mpfr_asprintf(&s, "%.*Rg", digits, v_);
    std::string out(s);
    mpfr_free_str(s);
    return out;
  }

  mpfr_ptr raw() { return v_; }
  mpfr_srcptr raw() const { return v_; }

 private:
  mpfr_t v_;
};

inline HighFloat hf_neg(const HighFloat& a) {
  HighFloat r;
  mpfr_neg(r.raw(), a.raw(), MPFR_RNDN);  // exact
  return r;
}
inline HighFloat hf_abs(const HighFloat& a) {
  HighFloat r;
  mpfr_abs(r.raw(), a.raw(), MPFR_RNDN);  // exact
  return r;
}
inline HighFloat hf_add(const HighFloat& a, const HighFloat& b, mpfr_rnd_t rnd) {
  HighFloat r;
  mpfr_add(r.raw(), a.raw(), b.raw(), rnd);
  return r;
}
inline HighFloat hf_sub(const HighFloat& a, const HighFloat& b, mpfr_rnd_t rnd) {
  HighFloat r;
  mpfr_sub(r.raw(), a.raw(), b.raw(), rnd);
  return r;
}
inline HighFloat hf_mul(const HighFloat& a, const HighFloat& b, mpfr_rnd_t rnd) {
  HighFloat r;
  mpfr_mul(r.raw(), a.raw(), b.raw(), rnd);
  return r;
}
inline HighFloat hf_div(const HighFloat& a, const HighFloat& b, mpfr_rnd_t rnd) {
  HighFloat r;
  mpfr_div(r.raw(), a.raw(), b.raw(), rnd);
  return r;
}
inline HighFloat hf_log2(const HighFloat& a, mpfr_rnd_t rnd) {
  HighFloat r;
  mpfr_log2(r.raw(), a.raw(), rnd);
  return r;
}
inline HighFloat hf_log1p(const HighFloat& a, mpfr_rnd_t rnd) {
  HighFloat r;
  mpfr_log1p(r.raw(), a.raw(), rnd);
  return r;
}
inline HighFloat hf_exp2(const HighFloat& a, mpfr_rnd_t rnd) {
  HighFloat r;
  mpfr_exp2(r.raw(), a.raw(), rnd);
  return r;
}

}  // namespace bk
