#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <variant>

#include "bksim/errors.hpp"
#include "bksim/mpreal.hpp"
#include "bksim/rational.hpp"

namespace bk {

/// Outcome of a sound comparison. Indeterminate means the enclosing intervals
/// overlap: the comparison is not decided at the working precision. Callers
/// must treat Indeterminate as "unknown", never as success or failure.
enum class Cmp { Less, Equal, Greater, Indeterminate };

inline const char* cmp_name(Cmp c) {
  switch (c) {
    case Cmp::Less: return "less";
    case Cmp::Equal: return "equal";
    case Cmp::Greater: return "greater";
    default: return "indeterminate";
  }
}

/// Rounding direction in terms of the represented real value.
enum class Dir { Down, Up };

namespace detail {

/// mpfr rounding mode for the log2-magnitude of a value of sign `sign`,
/// so that the represented real rounds in direction `dir`.
/// (Rounding a negative value toward -inf means growing its magnitude.)
inline mpfr_rnd_t mag_rnd(Dir dir, int sign) {
  if (dir == Dir::Down) return sign >= 0 ? MPFR_RNDD : MPFR_RNDU;
  return sign >= 0 ? MPFR_RNDU : MPFR_RNDD;
}

}  // namespace detail

/// One interval endpoint: the exact real  sign * 2^mag  (sign in {-1,0,+1};
/// mag is an exact 192-bit float, ignored when sign == 0). Storing log2 of the
/// magnitude keeps quantities like 577^(577^217) representable.
struct SignedLog {
  int sign = 0;
  HighFloat mag;

  static SignedLog zero() { return SignedLog{}; }

  /// Validates a freshly computed magnitude; maps underflow to a signed zero
  /// in the sound direction and rejects exponent-range overflow.
  static SignedLog make(int sign, HighFloat mag) {
    if (sign == 0) return zero();
    if (mag.is_nan()) throw Error("internal: NaN log2 magnitude");
    if (mag.is_inf()) {
      if (mag.sgn() > 0)
        throw OverflowError(
            "log-space magnitude exceeds the representable exponent range");
      return zero();  // value underflowed to zero
    }
    return SignedLog{sign, std::move(mag)};
  }
};

/// Exact three-way comparison of the reals represented by two endpoints.
inline int slog_cmp(const SignedLog& a, const SignedLog& b) {
  if (a.sign != b.sign) return a.sign < b.sign ? -1 : 1;
  if (a.sign == 0) return 0;
  int m = a.mag.cmp(b.mag);
  return a.sign > 0 ? m : -m;
}

inline SignedLog slog_neg(const SignedLog& a) { return SignedLog{-a.sign, a.mag}; }

inline SignedLog slog_from_rational(const Rational& q, Dir dir) {
  int s = sgn(q);
  if (s == 0) return SignedLog::zero();
  Rational a = abs(q);
  mpfr_rnd_t r = detail::mag_rnd(dir, s);
  // log2 is monotone, so rounding the operand and the log in the same
  // direction is sound.
  return SignedLog::make(s, hf_log2(HighFloat::from_rational(a, r), r));
}

inline SignedLog slog_from_int(const BigInt& z, Dir dir) {
  return slog_from_rational(Rational(z), dir);
}

/// Endpoint for the exact real held in `r` (a HighFloat is an exact dyadic).
inline SignedLog slog_from_real(const HighFloat& r, Dir dir) {
  if (r.is_nan()) throw Error("internal: NaN real");
  int s = r.sgn();
  if (s == 0) return SignedLog::zero();
  mpfr_rnd_t rnd = detail::mag_rnd(dir, s);
  return SignedLog::make(s, hf_log2(hf_abs(r), rnd));
}

namespace detail {

/// log2(2^p + 2^q) with the result rounded per `rnd`. p, q exact.
inline HighFloat log_add_mag(HighFloat p, HighFloat q, mpfr_rnd_t rnd) {
  if (p.cmp(q) < 0) std::swap(p, q);
  // result = p + log2(1 + 2^(q-p)), with q - p <= 0.
  if (rnd == MPFR_RNDD) {
    HighFloat e = hf_sub(q, p, MPFR_RNDD);
    HighFloat t = hf_exp2(e, MPFR_RNDD);
    if (t.is_zero()) return p;  // true value >= p
    HighFloat v = hf_div(hf_log1p(t, MPFR_RNDD), HighFloat::const_ln2(MPFR_RNDU), MPFR_RNDD);
    return hf_add(p, v, MPFR_RNDD);
  }
  HighFloat e = hf_sub(q, p, MPFR_RNDU);
  HighFloat t = hf_exp2(e, MPFR_RNDU);
  HighFloat v = hf_div(hf_log1p(t, MPFR_RNDU), HighFloat::const_ln2(MPFR_RNDD), MPFR_RNDU);
  return hf_add(p, v, MPFR_RNDU);
}

/// log2(2^p - 2^q) with the result rounded per `rnd`. Requires p > q exactly.
/// May round down to -inf (caller maps that to a zero endpoint).
inline HighFloat log_sub_mag(const HighFloat& p, const HighFloat& q, mpfr_rnd_t rnd) {
  // result = p + log2(1 - 2^e), e = q - p < 0; decreasing in e.
  if (rnd == MPFR_RNDD) {
    HighFloat e = hf_sub(q, p, MPFR_RNDU);
    HighFloat t = hf_exp2(e, MPFR_RNDU);
    if (t.cmp_ui(1) >= 0) {
      HighFloat inf;  // force -inf: value rounds down to zero magnitude
      mpfr_set_inf(inf.raw(), -1);
      return inf;
    }
    HighFloat v = hf_div(hf_log1p(hf_neg(t), MPFR_RNDD), HighFloat::const_ln2(MPFR_RNDD), MPFR_RNDD);
    return hf_add(p, v, MPFR_RNDD);
  }
  HighFloat e = hf_sub(q, p, MPFR_RNDD);
  HighFloat t = hf_exp2(e, MPFR_RNDD);  // < 1 strictly
  HighFloat v = hf_div(hf_log1p(hf_neg(t), MPFR_RNDU), HighFloat::const_ln2(MPFR_RNDU), MPFR_RNDU);
  return hf_add(p, v, MPFR_RNDU);
}

}  // namespace detail

inline SignedLog slog_mul(const SignedLog& a, const SignedLog& b, Dir dir) {
  int s = a.sign * b.sign;
  if (s == 0) return SignedLog::zero();
  return SignedLog::make(s, hf_add(a.mag, b.mag, detail::mag_rnd(dir, s)));
}

/// Exact reciprocal of an endpoint (2^mag -> 2^(-mag) is exact).
inline SignedLog slog_recip(const SignedLog& a) {
  require(a.sign != 0, "reciprocal of zero endpoint");
  return SignedLog{a.sign, hf_neg(a.mag)};
}

inline SignedLog slog_add(const SignedLog& a, const SignedLog& b, Dir dir) {
  if (a.sign == 0) return b;
  if (b.sign == 0) return a;
  if (a.sign == b.sign)
    return SignedLog::make(a.sign,
                           detail::log_add_mag(a.mag, b.mag, detail::mag_rnd(dir, a.sign)));
  // Opposite signs: endpoints are exact reals, so equal magnitudes cancel exactly.
  int mc = a.mag.cmp(b.mag);
  if (mc == 0) return SignedLog::zero();
  const SignedLog& big = (mc > 0) ? a : b;
  const SignedLog& small = (mc > 0) ? b : a;
  return SignedLog::make(big.sign,
                         detail::log_sub_mag(big.mag, small.mag,
                                             detail::mag_rnd(dir, big.sign)));
}

/// a^e for integer e (negative e allowed when a != 0).
inline SignedLog slog_pow(const SignedLog& a, const BigInt& e, Dir dir) {
  if (e == 0) return SignedLog{1, HighFloat::from_ui(0)};  // x^0 = 1 = 2^0
  if (a.sign == 0) {
    require(e > 0, "0 raised to a non-positive power");
    return SignedLog::zero();
  }
  int s = (a.sign < 0 && mpz_odd_p(e.get_mpz_t())) ? -1 : 1;
  HighFloat m;
  mpfr_mul_z(m.raw(), a.mag.raw(), e.get_mpz_t(), detail::mag_rnd(dir, s));
  return SignedLog::make(s, std::move(m));
}

/// Closed interval [lo, hi] guaranteed to contain the represented real.
struct LogInterval {
  SignedLog lo, hi;

  LogInterval() = default;
  LogInterval(SignedLog l, SignedLog h) : lo(std::move(l)), hi(std::move(h)) {
    if (slog_cmp(lo, hi) > 0) throw Error("internal: inverted log-space interval");
  }

  static LogInterval from_rational(const Rational& q) {
    return LogInterval(slog_from_rational(q, Dir::Down), slog_from_rational(q, Dir::Up));
  }
  bool contains_zero() const { return lo.sign <= 0 && hi.sign >= 0; }
  bool is_point() const { return slog_cmp(lo, hi) == 0; }
};

inline LogInterval li_neg(const LogInterval& a) {
  return LogInterval(slog_neg(a.hi), slog_neg(a.lo));
}

inline LogInterval li_add(const LogInterval& a, const LogInterval& b) {
  return LogInterval(slog_add(a.lo, b.lo, Dir::Down), slog_add(a.hi, b.hi, Dir::Up));
}

inline LogInterval li_sub(const LogInterval& a, const LogInterval& b) {
  return li_add(a, li_neg(b));
}

inline LogInterval li_mul(const LogInterval& a, const LogInterval& b) {
  const SignedLog* as[2] = {&a.lo, &a.hi};
  const SignedLog* bs[2] = {&b.lo, &b.hi};
  SignedLog lo, hi;
  bool first = true;
  for (auto* x : as)
    for (auto* y : bs) {
      SignedLog d = slog_mul(*x, *y, Dir::Down);
      SignedLog u = slog_mul(*x, *y, Dir::Up);
      if (first) {
        lo = d;
        hi = u;
        first = false;
      } else {
        if (slog_cmp(d, lo) < 0) lo = d;
        if (slog_cmp(u, hi) > 0) hi = u;
      }
    }
  return LogInterval(std::move(lo), std::move(hi));
}

inline LogInterval li_recip(const LogInterval& a) {
  require(!a.contains_zero(), "reciprocal of an interval containing zero");
  SignedLog l = slog_recip(a.hi), h = slog_recip(a.lo);
  if (slog_cmp(l, h) > 0) std::swap(l, h);
  return LogInterval(std::move(l), std::move(h));
}

inline LogInterval li_div(const LogInterval& a, const LogInterval& b) {
  return li_mul(a, li_recip(b));
}

inline LogInterval li_pow(const LogInterval& a, const BigInt& e) {
  if (e < 0) return li_recip(li_pow(a, BigInt(-e)));
  if (e == 0) {
    SignedLog one{1, HighFloat::from_ui(0)};
    return LogInterval(one, one);
  }
  require(a.lo.sign > 0 || a.hi.sign < 0 || a.is_point(),
          "integer power of an interval spanning zero is not supported");
  SignedLog l = slog_pow(a.lo, e, Dir::Down);
  SignedLog h = slog_pow(a.hi, e, Dir::Up);
  if (slog_cmp(l, h) > 0) {  // negative base or even powers can reorder
    SignedLog l2 = slog_pow(a.hi, e, Dir::Down);
    SignedLog h2 = slog_pow(a.lo, e, Dir::Up);
    l = l2;
    h = h2;
  }
  return LogInterval(std::move(l), std::move(h));
}

/// Natural logarithm of a strictly positive interval.
inline LogInterval li_ln(const LogInterval& a) {
  require(a.lo.sign > 0, "ln requires a certainly positive value");
  // ln x = log2(x) * ln 2, and log2 of an endpoint is its exact mag field.
  const HighFloat& ml = a.lo.mag;
  const HighFloat& mh = a.hi.mag;
  HighFloat lo_real = hf_mul(ml, HighFloat::const_ln2(ml.sgn() >= 0 ? MPFR_RNDD : MPFR_RNDU),
                             MPFR_RNDD);
  HighFloat hi_real = hf_mul(mh, HighFloat::const_ln2(mh.sgn() >= 0 ? MPFR_RNDU : MPFR_RNDD),
                             MPFR_RNDU);
  return LogInterval(slog_from_real(lo_real, Dir::Down), slog_from_real(hi_real, Dir::Up));
}

inline Cmp li_cmp(const LogInterval& a, const LogInterval& b) {
  if (slog_cmp(a.hi, b.lo) < 0) return Cmp::Less;
  if (slog_cmp(a.lo, b.hi) > 0) return Cmp::Greater;
  if (a.is_point() && b.is_point() && slog_cmp(a.lo, b.lo) == 0) return Cmp::Equal;
  return Cmp::Indeterminate;
}

/// A certified scalar: exact rational while numerator/denominator bit lengths
/// stay within bit_cap(), demoted to an outward-rounded log2-space interval
/// beyond that. All operations preserve the enclosure invariant; comparisons
/// are sound and may return Indeterminate.
class LogSpaceValue {
 public:
  LogSpaceValue() : rep_(Rational(0)) {}

  static LogSpaceValue exact(Rational q) {
    q.canonicalize();
    LogSpaceValue v;
    v.rep_ = std::move(q);
    return v.maybe_demote();
  }
  static LogSpaceValue from_int(BigInt z) { return exact(Rational(std::move(z))); }
  static LogSpaceValue from_ui(unsigned long u) { return exact(Rational(u)); }
  static LogSpaceValue interval(LogInterval iv) {
    LogSpaceValue v;
    v.rep_ = std::move(iv);
    return v;
  }

  /// Bit-length cap for the exact representation (spec default 2^20).
  static std::size_t& bit_cap() {
    static std::size_t cap = std::size_t{1} << 20;
    return cap;
  }

  bool is_exact() const { return std::holds_alternative<Rational>(rep_); }
  const Rational& rational() const {
    require(is_exact(), "value is not exact");
    return std::get<Rational>(rep_);
  }
  LogInterval as_interval() const {
    if (is_exact()) return LogInterval::from_rational(std::get<Rational>(rep_));
    return std::get<LogInterval>(rep_);
  }

  int sign_lo() const { return as_interval().lo.sign; }      // sound: value >= lo
  bool certainly_positive() const { return as_interval().lo.sign > 0; }

  friend LogSpaceValue operator-(const LogSpaceValue& a) {
    if (a.is_exact()) return exact(-a.rational());
    return interval(li_neg(a.as_interval()));
  }
  friend LogSpaceValue operator+(const LogSpaceValue& a, const LogSpaceValue& b) {
    if (a.is_exact() && b.is_exact()) return exact(a.rational() + b.rational());
    return interval(li_add(a.as_interval(), b.as_interval()));
  }
  friend LogSpaceValue operator-(const LogSpaceValue& a, const LogSpaceValue& b) {
    if (a.is_exact() && b.is_exact()) return exact(a.rational() - b.rational());
    return interval(li_sub(a.as_interval(), b.as_interval()));
  }
  friend LogSpaceValue operator*(const LogSpaceValue& a, const LogSpaceValue& b) {
    if (a.is_exact() && b.is_exact()) return exact(a.rational() * b.rational());
    return interval(li_mul(a.as_interval(), b.as_interval()));
  }
  friend LogSpaceValue operator/(const LogSpaceValue& a, const LogSpaceValue& b) {
    if (b.is_exact()) {
      require(sgn(b.rational()) != 0, "division by zero");
      if (a.is_exact()) return exact(a.rational() / b.rational());
    }
    return interval(li_div(a.as_interval(), b.as_interval()));
  }

  /// a^e for an integer exponent; estimates result size before computing so
  /// huge powers go straight to log space.
  LogSpaceValue pow(const BigInt& e) const {
    if (is_exact()) {
      const Rational& q = rational();
      if (e == 0) return from_ui(1);
      if (sgn(q) == 0) {
        require(e > 0, "0 raised to a non-positive power");
        return exact(Rational(0));
      }
      BigInt mag_e = abs(e);
      if (mpz_fits_ulong_p(mag_e.get_mpz_t())) {
        unsigned long ue = mag_e.get_ui();
        auto log2_est = [](const BigInt& z) {
          long exp = 0;
          double d = mpz_get_d_2exp(&exp, z.get_mpz_t());
          return std::log2(std::fabs(d)) + static_cast<double>(exp);
        };
        // predicted bits of the power (cost guard only; exact() re-checks)
        double predicted =
            (log2_est(BigInt(q.get_num())) + log2_est(BigInt(q.get_den()))) *
                static_cast<double>(ue) + 4;
        if (predicted <= static_cast<double>(bit_cap())) {
          Rational p = pow_rational(q, ue);
          if (e < 0) p = 1 / p;
          return exact(std::move(p));
        }
      }
    }
    return interval(li_pow(as_interval(), e));
  }

  /// base^exponent where the exponent may itself live in log space (towers).
  /// Requires a certainly positive base. Throws OverflowError when log2 of the
  /// result exceeds the representable exponent range.
  static LogSpaceValue pow_value(const LogSpaceValue& base, const LogSpaceValue& exponent) {
    if (exponent.is_exact() && exponent.rational().get_den() == 1)
      return base.pow(BigInt(exponent.rational().get_num()));
    require(base.certainly_positive(), "pow_value requires a certainly positive base");
    LogInterval b = base.as_interval();
    LogInterval ex = exponent.as_interval();
    // log2(result) = exponent * log2(base), as an interval of plain reals;
    // log2 of a positive endpoint is its exact mag field.
    auto real_of = [](const SignedLog& s, Dir dir) -> HighFloat {
      if (s.sign == 0) return HighFloat::from_ui(0);
      mpfr_rnd_t rnd = (dir == Dir::Down) == (s.sign > 0) ? MPFR_RNDD : MPFR_RNDU;
      HighFloat v = hf_exp2(s.mag, rnd);
      if (v.is_inf())
        throw OverflowError("exponent exceeds the representable exponent range");
      return s.sign > 0 ? v : hf_neg(v);
    };
    HighFloat e_ends[2] = {real_of(ex.lo, Dir::Down), real_of(ex.hi, Dir::Up)};
    HighFloat l2b_ends[2] = {b.lo.mag, b.hi.mag};
    HighFloat mlo, mhi;
    bool first = true;
    for (const auto& e : e_ends)
      for (const auto& l : l2b_ends) {
        HighFloat d = hf_mul(e, l, MPFR_RNDD);
        HighFloat u = hf_mul(e, l, MPFR_RNDU);
        if (first) {
          mlo = d;
          mhi = u;
          first = false;
        } else {
          if (d.cmp(mlo) < 0) mlo = d;
          if (mhi.cmp(u) < 0) mhi = u;
        }
      }
    return interval(LogInterval(SignedLog::make(1, std::move(mlo)),
                                SignedLog::make(1, std::move(mhi))));
  }

  /// Natural log; exact only for ln(1) = 0.
  LogSpaceValue ln() const {
    if (is_exact()) {
      const Rational& q = rational();
      require(sgn(q) > 0, "ln requires a positive value");
      if (q == 1) return exact(Rational(0));
    }
    return interval(li_ln(as_interval()));
  }

  friend Cmp compare(const LogSpaceValue& a, const LogSpaceValue& b) {
    if (a.is_exact() && b.is_exact()) {
      int c = cmp(a.rational(), b.rational());
      return c < 0 ? Cmp::Less : (c > 0 ? Cmp::Greater : Cmp::Equal);
    }
    return li_cmp(a.as_interval(), b.as_interval());
  }

  /// Best-effort double for human-facing display only (never used in checks).
  double approx_double() const {
    if (is_exact()) return rational().get_d();
    LogInterval iv = as_interval();
    if (iv.lo.sign == 0 && iv.hi.sign == 0) return 0.0;
    const SignedLog& pick = iv.lo.sign != 0 ? iv.lo : iv.hi;
    double m = pick.mag.to_double();
    double v = std::pow(2.0, m);
    return pick.sign >= 0 ? v : -v;
  }

  /// Display-only approximate log2 of |value|.
  double approx_log2_abs() const {
    LogInterval iv = as_interval();
    const SignedLog& pick = iv.hi.sign != 0 ? iv.hi : iv.lo;
    if (pick.sign == 0) return -std::numeric_limits<double>::infinity();
    return pick.mag.to_double();
  }

 private:
  LogSpaceValue maybe_demote() {
    if (is_exact() && bit_length(std::get<Rational>(rep_)) > bit_cap())
      rep_ = LogInterval::from_rational(std::get<Rational>(rep_));
    return *this;
  }

  std::variant<Rational, LogInterval> rep_;
};

/// Convenience: certified check that a <= b (true only when sound).
inline bool certainly_leq(const LogSpaceValue& a, const LogSpaceValue& b) {
  Cmp c = compare(a, b);
  return c == Cmp::Less || c == Cmp::Equal;
}
inline bool certainly_geq(const LogSpaceValue& a, const LogSpaceValue& b) {
  Cmp c = compare(a, b);
  return c == Cmp::Greater || c == Cmp::Equal;
}

/// e^x with a sound enclosure; exact only for x == 0. The result's log2
/// magnitude is x / ln 2 with directed rounding on both ends. Deep underflow
/// maps the lower endpoint to zero; magnitudes past the representable
/// exponent range throw OverflowError.
inline LogSpaceValue exp_of(const LogSpaceValue& x) {
  if (x.is_exact() && sgn(x.rational()) == 0) return LogSpaceValue::from_ui(1);
  HighFloat xlo, xhi;
  if (x.is_exact()) {
    Rational q = x.rational();
    xlo = HighFloat::from_rational(q, MPFR_RNDD);
    xhi = HighFloat::from_rational(q, MPFR_RNDU);
  } else {
    LogInterval iv = x.as_interval();
    auto real_of = [](const SignedLog& s, Dir dir) -> HighFloat {
      if (s.sign == 0) return HighFloat::from_ui(0);
      mpfr_rnd_t rnd = (dir == Dir::Down) == (s.sign > 0) ? MPFR_RNDD : MPFR_RNDU;
      HighFloat v = hf_exp2(s.mag, rnd);
      if (v.is_inf())
        throw OverflowError("exp argument exceeds the representable range");
      return s.sign > 0 ? v : hf_neg(v);
    };
    xlo = real_of(iv.lo, Dir::Down);
    xhi = real_of(iv.hi, Dir::Up);
  }
  // log2(e^x) = x / ln 2; ln 2 > 0 so the quotient keeps the rounding direction
  // when the constant is rounded opposite to the numerator's sign.
  HighFloat mlo = hf_div(xlo, HighFloat::const_ln2(xlo.sgn() >= 0 ? MPFR_RNDU : MPFR_RNDD),
                         MPFR_RNDD);
  HighFloat mhi = hf_div(xhi, HighFloat::const_ln2(xhi.sgn() >= 0 ? MPFR_RNDD : MPFR_RNDU),
                         MPFR_RNDU);
  return LogSpaceValue::interval(LogInterval(SignedLog::make(1, std::move(mlo)),
                                             SignedLog::make(1, std::move(mhi))));
}

}  // namespace bk
