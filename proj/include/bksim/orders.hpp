#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bksim/errors.hpp"
#include "bksim/logspace.hpp"
#include "bksim/rational.hpp"

namespace bk {

/// A memory depth m_j: exact integer while it fits the bit cap, otherwise a
/// log2-space enclosure. Tower families outgrow even the log representation;
/// accessors then throw OverflowError rather than degrade silently.
class OrderValue {
 public:
  static OrderValue exact(BigInt m) {
    OrderValue v;
    v.exact_ = std::move(m);
    return v;
  }
  static OrderValue approximate(LogSpaceValue v) {
    OrderValue o;
    o.approx_ = std::move(v);
    return o;
  }

  bool is_exact() const { return exact_.has_value(); }

  const BigInt& exact_value() const {
    if (!exact_) throw OverflowError("order is only available in log space");
    return *exact_;
  }

  /// The order as a certified scalar (exact or interval).
  LogSpaceValue value() const {
    if (exact_) return LogSpaceValue::from_int(*exact_);
    return *approx_;
  }

  /// Machine-size order for simulation; refuses astronomically deep memories.
  std::uint64_t to_u64() const {
    if (!exact_ || !mpz_fits_ulong_p(exact_->get_mpz_t()))
      throw OverflowError("order too large for simulation");
    return exact_->get_ui();
  }

 private:
  std::optional<BigInt> exact_;
  std::optional<LogSpaceValue> approx_;
};

/// The strictly increasing sequence of odd memory depths m_1 < m_2 < ...
/// Families:
///  - Explicit:     a finite validated list
///  - Progression:  m_j = start + (j-1)*step  (start odd, step even)
///  - Tower:        m_1 given, m_{j+1} = c^(m_j)  (c odd)
///  - SquarePow:    m_j = 2^(c*j^2) - 1
class OrderSequence {
 public:
  static OrderSequence explicit_list(std::vector<std::uint64_t> m) {
    require(!m.empty(), "order list must be non-empty");
    for (std::size_t i = 0; i < m.size(); ++i) {
      require(m[i] % 2 == 1, "orders must be odd, got " + std::to_string(m[i]));
      require(i == 0 || m[i] > m[i - 1], "orders must be strictly increasing");
    }
    OrderSequence s;
    s.kind_ = Kind::Explicit;
    s.explicit_ = std::move(m);
    return s;
  }

  static OrderSequence progression(std::uint64_t start, std::uint64_t step) {
    require(start % 2 == 1, "progression start must be odd");
    require(step >= 2 && step % 2 == 0, "progression step must be even and >= 2");
    OrderSequence s;
    s.kind_ = Kind::Progression;
    s.start_ = start;
    s.step_ = step;
    return s;
  }

  static OrderSequence tower(std::uint64_t c, std::uint64_t m1) {
    require(c % 2 == 1 && c >= 3, "tower base must be odd and >= 3");
    require(m1 % 2 == 1, "tower m_1 must be odd");
    OrderSequence s;
    s.kind_ = Kind::Tower;
    s.tower_c_ = c;
    s.start_ = m1;
    return s;
  }

  static OrderSequence square_pow(std::uint64_t c) {
    require(c >= 1, "square-power family needs c >= 1");
    OrderSequence s;
    s.kind_ = Kind::SquarePow;
    s.tower_c_ = c;
    return s;
  }

  enum class Kind { Explicit, Progression, Tower, SquarePow };
  Kind kind() const { return kind_; }

  std::optional<std::uint64_t> max_index() const {
    if (kind_ == Kind::Explicit) return explicit_.size();
    return std::nullopt;
  }

  /// m_j (j >= 1). Exact while representable; log-space enclosure for the
  /// next tower level; OverflowError beyond that.
  OrderValue order(std::uint64_t j) const {
    require(j >= 1, "order indices start at 1");
    switch (kind_) {
      case Kind::Explicit:
        require(j <= explicit_.size(),
                "order index " + std::to_string(j) + " beyond the finite sequence");
        return OrderValue::exact(BigInt(static_cast<unsigned long>(explicit_[j - 1])));
      case Kind::Progression:
        return OrderValue::exact(BigInt(static_cast<unsigned long>(start_)) +
                                 BigInt(static_cast<unsigned long>(step_)) * (j - 1));
      case Kind::Tower: {
        LogSpaceValue m = LogSpaceValue::from_ui(start_);
        for (std::uint64_t i = 1; i < j; ++i)
          m = LogSpaceValue::pow_value(LogSpaceValue::from_ui(tower_c_), m);
        if (m.is_exact()) return OrderValue::exact(BigInt(m.rational().get_num()));
        return OrderValue::approximate(m);
      }
      case Kind::SquarePow: {
        BigInt expo = BigInt(static_cast<unsigned long>(tower_c_)) *
                      BigInt(static_cast<unsigned long>(j)) * BigInt(static_cast<unsigned long>(j));
        if (expo <= (BigInt(1) << 20))
          return OrderValue::exact((BigInt(1) << expo.get_ui()) - 1);
        // 2^expo - 1 in log space: enclose by [2^(expo-1), 2^expo]
        LogSpaceValue p = LogSpaceValue::exact(Rational(2)).pow(expo);
        LogSpaceValue lo = LogSpaceValue::exact(Rational(2)).pow(expo - 1);
        return OrderValue::approximate(
            LogSpaceValue::interval(LogInterval(lo.as_interval().lo, p.as_interval().hi)));
      }
    }
    throw Error("unreachable");
  }

  std::uint64_t tower_c() const { return tower_c_; }
  std::uint64_t tower_m1() const { return start_; }
  std::uint64_t progression_start() const { return start_; }
  std::uint64_t progression_step() const { return step_; }
  const std::vector<std::uint64_t>& explicit_orders() const { return explicit_; }

 private:
  Kind kind_ = Kind::Explicit;
  std::vector<std::uint64_t> explicit_;
  std::uint64_t start_ = 1, step_ = 2;
  std::uint64_t tower_c_ = 0;
};

}  // namespace bk
