#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bksim/errors.hpp"

namespace bk {

/// One chain symbol from the alphabet {-1, +1}.
enum class Spin : std::int8_t { Minus = -1, Plus = +1 };

inline int spin_value(Spin s) { return static_cast<int>(s); }

inline Spin spin_from_int(int v) {
  if (v == +1) return Spin::Plus;
  if (v == -1) return Spin::Minus;
  throw PreconditionError("spin value must be +1 or -1, got " + std::to_string(v));
}

inline Spin flip(Spin s) { return s == Spin::Plus ? Spin::Minus : Spin::Plus; }

/// A finite past, most recent first: symbols[0] is x_{-1}, symbols[i] is x_{-(i+1)}.
class Context {
 public:
  Context() = default;
  explicit Context(std::vector<Spin> symbols) : symbols_(std::move(symbols)) {}

  /// All-equal context of the given order.
  static Context constant(std::size_t order, Spin s) {
    return Context(std::vector<Spin>(order, s));
  }

  /// Decode from packed bits: bit i set <=> x_{-(i+1)} = +1 (bit 0 = most recent).
  static Context from_bits(std::uint64_t bits, std::size_t order) {
    require(order <= 64, "Context::from_bits supports order <= 64");
    std::vector<Spin> s(order);
    for (std::size_t i = 0; i < order; ++i)
      s[i] = (bits >> i & 1u) ? Spin::Plus : Spin::Minus;
    return Context(std::move(s));
  }

  std::size_t order() const { return symbols_.size(); }
  Spin at(std::size_t i) const { return symbols_.at(i); }
  const std::vector<Spin>& symbols() const { return symbols_; }

  /// Pack to bits (inverse of from_bits). Requires order <= 64.
  std::uint64_t to_bits() const {
    require(order() <= 64, "Context::to_bits supports order <= 64");
    std::uint64_t b = 0;
    for (std::size_t i = 0; i < symbols_.size(); ++i)
      if (symbols_[i] == Spin::Plus) b |= std::uint64_t{1} << i;
    return b;
  }

  /// Sum of the first m symbols (the m most recent), as an integer.
  int window_sum(std::size_t m, std::size_t offset = 0) const {
    require(offset + m <= symbols_.size(), "window exceeds context order");
    int s = 0;
    for (std::size_t i = 0; i < m; ++i) s += spin_value(symbols_[offset + i]);
    return s;
  }

  /// Context after observing a new symbol `a`, truncated to the same order.
  Context advanced(Spin a) const {
    std::vector<Spin> next(symbols_.size());
    if (!next.empty()) {
      next[0] = a;
      for (std::size_t i = 1; i < next.size(); ++i) next[i] = symbols_[i - 1];
    }
    return Context(std::move(next));
  }

  /// Coordinatewise partial order: *this >= other (Plus on every site where they differ).
  bool dominates(const Context& other) const {
    require(order() == other.order(), "dominates: order mismatch");
    for (std::size_t i = 0; i < symbols_.size(); ++i)
      if (spin_value(symbols_[i]) < spin_value(other.symbols_[i])) return false;
    return true;
  }

  std::string str() const {
    std::string out;
    out.reserve(symbols_.size());
    for (Spin s : symbols_) out.push_back(s == Spin::Plus ? '+' : '-');
    return out;
  }

  bool operator==(const Context& o) const { return symbols_ == o.symbols_; }

 private:
  std::vector<Spin> symbols_;
};

}  // namespace bk
