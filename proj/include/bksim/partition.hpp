#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "bksim/kernels.hpp"
#include "bksim/params.hpp"
#include "bksim/rational.hpp"
#include "bksim/spin.hpp"

namespace bk {

/// What a cell of the update partition does with the past.
struct PartitionAction {
  enum class Type { Emit, Majority };
  Type type = Type::Emit;
  Spin emit = Spin::Plus;   // Emit
  std::uint64_t m = 0;      // Majority depth

  static PartitionAction emit_action(Spin s) { return {Type::Emit, s, 0}; }
  static PartitionAction majority_action(std::uint64_t m) {
    return {Type::Majority, Spin::Plus, m};
  }
  bool operator==(const PartitionAction&) const = default;
};

struct IntervalCell {
  Rational lo, hi;  // half-open [lo, hi)
  PartitionAction action;
};

/// The single-uniform update rule of a kernel: a partition of [0,1) into cells
/// whose action decides the emitted symbol from U and the past. The first two
/// cells are always the base noise cells [0,eps) -> -1 and [eps,2eps) -> +1;
/// all majority cells use odd depths, so every action is a monotone function
/// of the past and shared-U couplings of nested kernels stay ordered.
class IntervalPartition {
 public:
  IntervalPartition(std::vector<IntervalCell> cells, Rational epsilon,
                    std::size_t window_offset)
      : cells_(std::move(cells)), epsilon_(std::move(epsilon)), offset_(window_offset) {
    validate();
  }

  const std::vector<IntervalCell>& cells() const { return cells_; }
  const Rational& epsilon() const { return epsilon_; }
  std::size_t window_offset() const { return offset_; }

  /// Deepest symbol any action reads (0 for pure emit partitions).
  std::uint64_t max_depth() const {
    std::uint64_t d = 0;
    for (const auto& c : cells_)
      if (c.action.type == PartitionAction::Type::Majority)
        d = std::max(d, c.action.m + offset_);
    return d;
  }

  /// Index of the cell containing u (exact; for hot loops use CellLocator).
  std::size_t locate(const Rational& u) const {
    require(sgn(u) >= 0 && u < 1, "uniform must lie in [0,1)");
    std::size_t idx = 0;
    for (std::size_t i = 0; i < cells_.size(); ++i)
      if (cells_[i].lo <= u) idx = i;
      else break;
    return idx;
  }

  /// The symbol emitted for uniform u given the past.
  Spin apply(const Rational& u, const Context& ctx) const {
    const PartitionAction& a = cells_[locate(u)].action;
    if (a.type == PartitionAction::Type::Emit) return a.emit;
    int sum = ctx.window_sum(a.m, offset_);
    return sum > 0 ? Spin::Plus : Spin::Minus;
  }

  /// Induced kernel probability: total length of cells that would emit `a`
  /// under this past. Exact; serves as an independent route to kernel_eval.
  Rational induced_probability(Spin a, const Context& ctx) const {
    Rational total(0);
    for (const auto& c : cells_) {
      Spin out;
      if (c.action.type == PartitionAction::Type::Emit) {
        out = c.action.emit;
      } else {
        out = ctx.window_sum(c.action.m, offset_) > 0 ? Spin::Plus : Spin::Minus;
      }
      if (out == a) total += c.hi - c.lo;
    }
    return total;
  }

 private:
  void validate() const {
    require(cells_.size() >= 2, "partition needs at least the two base cells");
    require(cells_.front().lo == 0, "partition must start at 0");
    require(cells_.back().hi == 1, "partition must end at 1");
    for (std::size_t i = 0; i < cells_.size(); ++i) {
      require(cells_[i].lo < cells_[i].hi, "empty or inverted cell");
      if (i) require(cells_[i - 1].hi == cells_[i].lo, "cells must tile [0,1)");
      if (cells_[i].action.type == PartitionAction::Type::Majority)
        require(cells_[i].action.m % 2 == 1, "majority depths must be odd");
    }
    require(cells_[0].hi == epsilon_ &&
                cells_[0].action == PartitionAction::emit_action(Spin::Minus),
            "cell 0 must be [0,eps) emitting -1");
    require(cells_[1].hi == 2 * epsilon_ &&
                cells_[1].action == PartitionAction::emit_action(Spin::Plus),
            "cell 1 must be [eps,2eps) emitting +1");
  }

  std::vector<IntervalCell> cells_;
  Rational epsilon_;
  std::size_t offset_;
};

/// Standard update partition of Lower(k) / Upper(k) / Mixed(r,l) /
/// MixedPrime(r,l): base cells, then one majority cell of mass
/// lambda_bar_j per kept depth, then the pushed ranges.
inline IntervalPartition build_partition(const KernelSpec& spec) {
  require(spec.variant != KernelSpec::Variant::Table &&
              spec.variant != KernelSpec::Variant::FullBK,
          "partitions exist for the truncated mixture kernels only");
  const ModelParams& mp = spec.model();
  std::vector<IntervalCell> cells;
  Rational cum(0);
  auto push = [&](const Rational& len, PartitionAction act) {
    if (sgn(len) == 0) return;
    cells.push_back({cum, cum + len, act});
    cum += len;
  };

  push(mp.epsilon, PartitionAction::emit_action(Spin::Minus));
  push(mp.epsilon, PartitionAction::emit_action(Spin::Plus));
  std::uint64_t depth = spec.majority_depth();
  for (std::uint64_t j = 1; j <= depth; ++j)
    push(mp.lambda_bar(j),
         PartitionAction::majority_action(mp.orders.order(j).to_u64()));

  switch (spec.variant) {
    case KernelSpec::Variant::Lower:
      push(1 - cum, PartitionAction::emit_action(Spin::Plus));
      break;
    case KernelSpec::Variant::Upper:
      push(1 - cum, PartitionAction::emit_action(Spin::Minus));
      break;
    case KernelSpec::Variant::Mixed:
      push(mp.weights.partial_sum(spec.r + 1, spec.l) * mp.contrast(),
           PartitionAction::emit_action(Spin::Minus));
      push(1 - cum, PartitionAction::emit_action(Spin::Plus));
      break;
    case KernelSpec::Variant::MixedPrime:
      // Primed layout: the deep tail sits right after the majorities and is
      // pushed to -1; the middle range fills the top of [0,1) with +1. This
      // placement realizes the maximal shared-U coupling against Mixed.
      push(mp.lambda_bar_tail(spec.l + 1), PartitionAction::emit_action(Spin::Minus));
      push(1 - cum, PartitionAction::emit_action(Spin::Plus));
      break;
    default: break;
  }
  require(cum == 1, "partition masses must total exactly 1");
  return IntervalPartition(std::move(cells), mp.epsilon, mp.window_offset());
}

/// Partition of the primed kernel MixedPrime(r, l) (explicit-argument form).
inline IntervalPartition build_primed_partition(const ModelParams& params,
                                                std::uint64_t r, std::uint64_t l) {
  return build_partition(KernelSpec::mixed_prime(params, r, l));
}

/// Precompiled lookup structure for the hot simulation path. Uniforms are
/// 53-bit doubles; cell bounds are cached as round-down doubles so that the
/// only case needing an exact comparison is u exactly equal to a cached bound
/// of a non-representable rational (then u sits in the one-ulp gap).
class CellLocator {
 public:
  explicit CellLocator(const IntervalPartition& part) : part_(&part) {
    for (const auto& c : part.cells()) {
      lo_down_.push_back(double_round_down(c.lo));
      lo_exact_.push_back(exactly_double(c.lo));
    }
  }

  std::size_t locate(double u) const {
    auto it = std::upper_bound(lo_down_.begin(), lo_down_.end(), u);
    std::size_t i = static_cast<std::size_t>(it - lo_down_.begin()) - 1;
    // u == cached bound of an inexact rational: the true bound may still be
    // above u, in which case u belongs to the previous cell.
    if (i > 0 && u == lo_down_[i] && !lo_exact_[i] &&
        Rational(u) < part_->cells()[i].lo)
      --i;
    return i;
  }

  const PartitionAction& action(std::size_t idx) const {
    return part_->cells()[idx].action;
  }
  const IntervalPartition& partition() const { return *part_; }

 private:
  const IntervalPartition* part_;
  std::vector<double> lo_down_;
  std::vector<bool> lo_exact_;
};

}  // namespace bk
