#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bksim/errors.hpp"
#include "bksim/logspace.hpp"
#include "bksim/rational.hpp"

namespace bk {

/// Probability weights lambda_j (j >= 1) of the mixture over memory depths.
/// Invariants: lambda_j > 0 wherever defined, and the total mass is exactly 1.
/// Families:
///  - Geometric:    lambda_j = scale * ratio^j on all j >= 1
///  - Explicit:     finite list lambda_1..lambda_K, optionally continued by a
///                  geometric tail lambda_{K+i} = tail_scale * tail_ratio^i
///  - SquareBlocks: blocks of sizes b_1 = 1, b_l = 2^((c * B_{l-1})^2) with
///                  B_l = b_1 + ... + b_l; inside block l every weight equals
///                  (s^(l-1) - s^l) / b_l with s = 3/4. Block masses telescope,
///                  so the total is exactly 1 for every c >= 1.
/// Accessors refuse (OverflowError) indices whose block data exceeds the exact
/// representable range instead of silently approximating.
class WeightFamily {
 public:
  enum class Kind { Geometric, Explicit, SquareBlocks };

  static WeightFamily geometric(Rational scale, Rational ratio) {
    require(sgn(scale) > 0, "geometric weights need scale > 0");
    require(sgn(ratio) > 0 && ratio < 1, "geometric weights need 0 < ratio < 1");
    require(scale * ratio / (1 - ratio) == 1,
            "geometric weights must sum to exactly 1: scale*ratio/(1-ratio) == 1");
    WeightFamily f;
    f.kind_ = Kind::Geometric;
    f.scale_ = std::move(scale);
    f.ratio_ = std::move(ratio);
    return f;
  }

  static WeightFamily explicit_list(std::vector<Rational> w,
                                    std::optional<std::pair<Rational, Rational>> tail = {}) {
    require(!w.empty(), "explicit weight list must be non-empty");
    Rational total(0);
    for (const Rational& x : w) {
      require(sgn(x) > 0, "weights must be strictly positive");
      total += x;
    }
    if (tail) {
      auto& [ts, tr] = *tail;
      require(sgn(ts) > 0, "tail scale must be positive");
      require(sgn(tr) > 0 && tr < 1, "tail ratio must lie in (0,1)");
      total += ts * tr / (1 - tr);
    }
    require(total == 1, "weights must sum to exactly 1, got " + format_rational(total));
    WeightFamily f;
    f.kind_ = Kind::Explicit;
    f.explicit_ = std::move(w);
    f.tail_ = std::move(tail);
    return f;
  }

  static WeightFamily square_blocks(unsigned c) {
    require(c >= 1, "square-blocks family needs c >= 1");
    WeightFamily f;
    f.kind_ = Kind::SquareBlocks;
    f.block_c_ = c;
    f.s_ = Rational(3, 4);
    // Precompute exactly representable block boundaries B_l; stop before the
    // first block whose size exponent (c*B_{l-1})^2 leaves the exact range.
    BigInt boundary(0);
    while (true) {
      f.block_ends_.push_back(boundary);  // block_ends_[l-1] = B_{l-1}, B_0 = 0
      BigInt expo = pow_int(BigInt(c) * (boundary == 0 ? BigInt(1) : boundary), 2);
      if (boundary == 0) expo = 0;  // b_1 = 1 = 2^0
      if (expo > (BigInt(1) << 20)) break;
      BigInt bl = BigInt(1) << expo.get_ui();
      boundary += bl;
    }
    return f;
  }

  Kind kind() const { return kind_; }

  /// Largest index with a defined weight, or nullopt for infinite families.
  std::optional<std::uint64_t> max_index() const {
    if (kind_ == Kind::Explicit && !tail_) return explicit_.size();
    return std::nullopt;
  }

  bool defined_at(std::uint64_t j) const {
    require(j >= 1, "weight indices start at 1");
    auto mx = max_index();
    return !mx || j <= *mx;
  }

  /// lambda_j as an exact rational. Refuses indices beyond the exact range.
  Rational lambda(std::uint64_t j) const {
    require(j >= 1, "weight indices start at 1");
    switch (kind_) {
      case Kind::Geometric:
        return scale_ * pow_rational(ratio_, j);
      case Kind::Explicit:
        if (j <= explicit_.size()) return explicit_[j - 1];
        require(tail_.has_value(),
                "weight index " + std::to_string(j) + " beyond the finite family");
        return tail_->first * pow_rational(tail_->second, j - explicit_.size());
      case Kind::SquareBlocks: {
        std::uint64_t l = block_of(j);
        return block_weight(l);
      }
    }
    throw Error("unreachable");
  }

  /// Sum of lambda_j over j >= k (k >= 1). Exact.
  Rational tail_sum(std::uint64_t k) const {
    require(k >= 1, "tail_sum index starts at 1");
    switch (kind_) {
      case Kind::Geometric:
        // sum_{j>=k} s r^j = s r^k / (1-r)
        return scale_ * pow_rational(ratio_, k) / (1 - ratio_);
      case Kind::Explicit: {
        Rational total(0);
        for (std::uint64_t j = k; j <= explicit_.size(); ++j) total += explicit_[j - 1];
        if (tail_) {
          const auto& [ts, tr] = *tail_;
          std::uint64_t start = k > explicit_.size() ? k - explicit_.size() : 1;
          total += ts * pow_rational(tr, start) / (1 - tr);
        }
        return total;
      }
      case Kind::SquareBlocks: {
        std::uint64_t l = block_of(k);
        // remainder of block l, plus the telescoped mass s^l of blocks > l
        BigInt remaining = block_end(l) - BigInt(static_cast<unsigned long>(k)) + 1;
        return Rational(remaining) * block_weight(l) + pow_rational(s_, l);
      }
    }
    throw Error("unreachable");
  }

  /// Sum of lambda_j over a <= j <= b (empty when a > b). Exact.
  Rational partial_sum(std::uint64_t a, std::uint64_t b) const {
    if (a > b) return Rational(0);
    require(a >= 1, "weight indices start at 1");
    if (kind_ == Kind::Geometric)
      return scale_ * (pow_rational(ratio_, a) - pow_rational(ratio_, b + 1)) / (1 - ratio_);
    if (kind_ == Kind::SquareBlocks) return tail_sum(a) - tail_sum(b + 1);
    // explicit: direct sum (tail handled via tail_sum difference)
    return tail_sum(a) - (defined_at(b + 1) ? tail_sum(b + 1) : Rational(0));
  }

  // --- SquareBlocks specifics (used by the criterium verifier) ---

  /// Block index l containing weight index j (1-based).
  std::uint64_t block_of(std::uint64_t j) const {
    require(kind_ == Kind::SquareBlocks, "block_of applies to square-blocks families");
    require(j >= 1, "weight indices start at 1");
    for (std::uint64_t l = 1; l < block_ends_.size(); ++l)
      if (BigInt(static_cast<unsigned long>(j)) <= block_end(l)) return l;
    throw OverflowError("weight index " + std::to_string(j) +
                        " lies beyond the exactly representable blocks");
  }

  /// B_l, the last index of block l  (block_ends_[l]; block_ends_[0] = B_0 = 0).
  BigInt block_end(std::uint64_t l) const {
    require(kind_ == Kind::SquareBlocks, "block_end applies to square-blocks families");
    require(l >= 1, "block indices start at 1");
    if (l < block_ends_.size()) return block_ends_[l];
    throw OverflowError("block " + std::to_string(l) +
                        " lies beyond the exactly representable range");
  }

  /// Per-index weight inside block l: (s^(l-1) - s^l) / b_l.
  Rational block_weight(std::uint64_t l) const {
    require(kind_ == Kind::SquareBlocks, "block_weight applies to square-blocks families");
    BigInt bl = block_size(l);
    Rational mass = pow_rational(s_, l - 1) - pow_rational(s_, l);
    return mass / Rational(bl);
  }

  /// b_l, the size of block l.
  BigInt block_size(std::uint64_t l) const {
    return block_end(l) - (l >= 2 ? block_end(l - 1) : BigInt(0));
  }

  /// Number of blocks with exactly representable data.
  std::uint64_t representable_blocks() const { return block_ends_.size() - 1; }

  unsigned block_c() const { return block_c_; }
  const Rational& geometric_scale() const { return scale_; }
  const Rational& geometric_ratio() const { return ratio_; }
  const std::vector<Rational>& explicit_weights() const { return explicit_; }
  const std::optional<std::pair<Rational, Rational>>& explicit_tail() const { return tail_; }
  const Rational& block_s() const { return s_; }

 private:
  Kind kind_ = Kind::Geometric;
  Rational scale_, ratio_;                                  // Geometric
  std::vector<Rational> explicit_;                          // Explicit
  std::optional<std::pair<Rational, Rational>> tail_;       // Explicit tail
  unsigned block_c_ = 0;                                    // SquareBlocks
  Rational s_;                                              // SquareBlocks decay
  std::vector<BigInt> block_ends_;                          // B_0=0, B_1, ...
};

}  // namespace bk
