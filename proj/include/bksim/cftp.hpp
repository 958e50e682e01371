#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bksim/errors.hpp"
#include "bksim/kernels.hpp"
#include "bksim/partition.hpp"
#include "bksim/rational.hpp"
#include "bksim/rng.hpp"
#include "bksim/spin.hpp"
#include "bksim/table.hpp"

namespace bk {

/// Hard caps for backward searches. Hitting a cap raises OverflowError with a
/// message naming the search, never a silent truncation.
struct SimLimits {
  std::uint64_t max_depth = std::uint64_t{1} << 30;  // sandwich start depth
  std::uint64_t max_scan = 1'000'000'000;            // regeneration scan length
};

enum class SampleMethod { MonotoneSandwich, RegenerationWindow };

inline const char* method_name(SampleMethod m) {
  return m == SampleMethod::MonotoneSandwich ? "monotone-sandwich"
                                             : "regeneration-window";
}

/// Mutable simulation state for one chain. Partition-backed kernels keep a
/// ring buffer of recent symbols (slot = time mod ring size) plus running
/// suffix sums so each step is O(#tracked depths) even for orders in the
/// hundreds; table kernels keep only the packed context word.
struct ChainState {
  std::int64_t t = 0;               // next position to be emitted
  std::uint64_t packed = 0;         // table mode context bits
  std::vector<std::int8_t> ring;    // partition mode recent symbols
  std::vector<std::int64_t> sums;   // partition mode suffix sums
};

/// Compiled single-step evaluator for a kernel. The update is driven by one
/// uniform per position and is exact: uniforms are dyadic rationals and every
/// threshold comparison falls back to exact arithmetic on boundary hits.
class KernelRuntime {
 public:
  explicit KernelRuntime(const KernelSpec& spec,
                         std::uint64_t table_order_cap = 20) {
    switch (spec.variant) {
      case KernelSpec::Variant::Table:
        init_table(spec.table);
        break;
      case KernelSpec::Variant::FullBK:
        // Finite families only; realized through an exhaustive table.
        init_table(std::make_shared<const TableKernel<Rational>>(
            to_table(spec, table_order_cap)));
        break;
      default: {
        part_ = std::make_shared<const IntervalPartition>(build_partition(spec));
        locator_.emplace(*part_);
        compile_partition();
        break;
      }
    }
  }

  std::uint64_t depth() const { return depth_; }
  bool partition_backed() const { return part_ != nullptr; }
  bool attractive() const { return attractive_; }

  const IntervalPartition& partition() const {
    require(part_ != nullptr, "kernel has no interval partition");
    return *part_;
  }

  ChainState start_extremal(Spin fill, std::int64_t start) const {
    return make_state(start, [&](std::size_t) { return fill; });
  }

  ChainState start_context(const Context& past, std::int64_t start) const {
    require(past.order() >= depth_, "past context shorter than kernel depth");
    return make_state(start, [&](std::size_t i) { return past.at(i); });
  }

  /// Emit the symbol at position cs.t driven by uniform u, then advance.
  Spin step(ChainState& cs, double u) const {
    Spin s;
    if (part_) {
      const CellOp& op = ops_[locator_->locate(u)];
      if (op.majority) {
        std::int64_t w = cs.sums[op.hi] - (op.lo >= 0 ? cs.sums[op.lo] : 0);
        s = w > 0 ? Spin::Plus : Spin::Minus;
      } else {
        s = op.emit;
      }
      std::int8_t v = static_cast<std::int8_t>(spin_value(s));
      std::uint64_t t = static_cast<std::uint64_t>(cs.t);
      for (std::size_t i = 0; i < tracked_.size(); ++i)
        cs.sums[i] += v - cs.ring[(t - tracked_[i]) & ring_mask_];
      cs.ring[t & ring_mask_] = v;
    } else {
      bool plus = u < p_down_[cs.packed] ||
                  (u == p_down_[cs.packed] && p_inexact_[cs.packed]);
      s = plus ? Spin::Plus : Spin::Minus;
      cs.packed = table_->succ(cs.packed, s);
    }
    ++cs.t;
    return s;
  }

  /// Whether u lands in the past-independent base region [0, 2*epsilon).
  bool base_draw(double u) const {
    require(part_ != nullptr,
            "base-region draws need an interval-partition kernel");
    return u < teps_down_ || (u == teps_down_ && teps_inexact_);
  }

 private:
  struct CellOp {
    bool majority = false;
    Spin emit = Spin::Plus;
    int hi = -1, lo = -1;  // indices into tracked suffix depths
  };

  void init_table(std::shared_ptr<const TableKernel<Rational>> tab) {
    require(tab != nullptr, "table kernel missing");
    table_ = std::move(tab);
    depth_ = table_->order();
    attractive_ = check_attractive(*table_);
    p_down_.resize(table_->states());
    p_inexact_.resize(table_->states());
    for (std::uint64_t s = 0; s < table_->states(); ++s) {
      const Rational& p = table_->p_plus(s);
      p_down_[s] = double_round_down(p);
      p_inexact_[s] = exactly_double(p) ? 0 : 1;
    }
  }

  void compile_partition() {
    depth_ = part_->max_depth();
    attractive_ = true;  // emit cells are constant, majority cells monotone
    std::size_t offset = part_->window_offset();
    auto track = [&](std::uint64_t d) -> int {
      if (d == 0) return -1;
      for (std::size_t i = 0; i < tracked_.size(); ++i)
        if (tracked_[i] == d) return static_cast<int>(i);
      tracked_.push_back(d);
      return static_cast<int>(tracked_.size() - 1);
    };
    for (const auto& cell : part_->cells()) {
      CellOp op;
      if (cell.action.type == PartitionAction::Type::Majority) {
        op.majority = true;
        op.hi = track(cell.action.m + offset);
        op.lo = track(offset);
      } else {
        op.emit = cell.action.emit;
      }
      ops_.push_back(op);
    }
    ring_n_ = 1;
    while (ring_n_ < depth_ + 1) ring_n_ <<= 1;
    ring_mask_ = ring_n_ - 1;
    Rational teps = 2 * part_->epsilon();
    teps_down_ = double_round_down(teps);
    teps_inexact_ = !exactly_double(teps);
  }

  template <typename SymbolAt>  // SymbolAt(i) = symbol at position start-1-i
  ChainState make_state(std::int64_t start, SymbolAt at) const {
    ChainState cs;
    cs.t = start;
    if (part_) {
      cs.ring.assign(ring_n_, 0);
      for (std::size_t i = 0; i < depth_; ++i)
        cs.ring[static_cast<std::uint64_t>(start - 1 - static_cast<std::int64_t>(i)) &
                ring_mask_] = static_cast<std::int8_t>(spin_value(at(i)));
      cs.sums.assign(tracked_.size(), 0);
      for (std::size_t j = 0; j < tracked_.size(); ++j)
        for (std::uint64_t i = 0; i < tracked_[j]; ++i)
          cs.sums[j] += spin_value(at(i));
    } else {
      cs.packed = 0;
      for (std::size_t i = 0; i < depth_; ++i)
        if (at(i) == Spin::Plus) cs.packed |= std::uint64_t{1} << i;
    }
    return cs;
  }

  std::shared_ptr<const IntervalPartition> part_;
  std::optional<CellLocator> locator_;
  std::vector<CellOp> ops_;
  std::vector<std::uint64_t> tracked_;
  std::uint64_t ring_n_ = 1, ring_mask_ = 0;
  double teps_down_ = 0;
  bool teps_inexact_ = false;

  std::shared_ptr<const TableKernel<Rational>> table_;
  std::vector<double> p_down_;
  std::vector<std::uint8_t> p_inexact_;

  std::uint64_t depth_ = 0;
  bool attractive_ = false;
};

/// Deterministic forward run from a fixed past; returns symbols at [a, b].
inline std::vector<Spin> forward_simulate(const KernelRuntime& rt,
                                          const RandomStream& stream,
                                          const Context& past, std::int64_t a,
                                          std::int64_t b) {
  require(a <= b, "window must be nonempty");
  ChainState cs = rt.start_context(past, a);
  std::vector<Spin> out;
  out.reserve(static_cast<std::size_t>(b - a + 1));
  for (std::int64_t t = a; t <= b; ++t)
    out.push_back(rt.step(cs, stream.uniform_at(t)));
  return out;
}

/// Run the two extremal chains from `start`, sharing uniforms, up to `b`.
/// Returns true when the chains agree at every position of [a, b]; fills
/// `out` (if given) with the upper chain's symbols on [a, b]. Throws if the
/// sandwich order is ever violated, which would mean a non-monotone update.
inline bool sandwich_window(const KernelRuntime& rt, const RandomStream& stream,
                            std::int64_t start, std::int64_t a, std::int64_t b,
                            std::vector<Spin>* out, std::uint64_t* steps_used) {
  require(rt.attractive(),
          "monotone sandwich requires an attractive kernel");
  require(start <= a && a <= b, "need start <= a <= b");
  ChainState hi = rt.start_extremal(Spin::Plus, start);
  ChainState lo = rt.start_extremal(Spin::Minus, start);
  bool all_agree = true;
  if (out) out->assign(static_cast<std::size_t>(b - a + 1), Spin::Plus);
  for (std::int64_t t = start; t <= b; ++t) {
    double u = stream.uniform_at(t);
    Spin shi = rt.step(hi, u);
    Spin slo = rt.step(lo, u);
    if (spin_value(shi) < spin_value(slo))
      throw Error("sandwich order violated: upper chain fell below lower");
    if (t >= a) {
      if (shi != slo) all_agree = false;
      if (out) (*out)[static_cast<std::size_t>(t - a)] = shi;
    }
  }
  if (steps_used) *steps_used += static_cast<std::uint64_t>(b - start + 1);
  return all_agree;
}

namespace detail {

/// Smallest d such that probe(d) holds, assuming probe is monotone in d.
/// Doubling phase finds a bracket, then binary search pins the minimum.
template <typename Probe>
std::uint64_t min_depth(Probe probe, std::uint64_t cap, const char* what) {
  if (probe(0)) return 0;
  std::uint64_t d = 1;
  while (!probe(d)) {
    if (d >= cap) throw OverflowError(std::string(what) + " exceeded depth cap");
    d *= 2;
  }
  std::uint64_t lo = d / 2 + 1, hi = d;
  while (lo < hi) {
    std::uint64_t mid = lo + (hi - lo) / 2;
    if (probe(mid))
      hi = mid;
    else
      lo = mid + 1;
  }
  return lo;
}

}  // namespace detail

/// Exact coalescence depth at position t: the smallest i >= 0 such that the
/// extremal sandwich started at t - i already agrees at t. Nested sandwiches
/// make agreement monotone in i, so binary search applies.
inline std::uint64_t coalescence_time(const KernelRuntime& rt,
                                      const RandomStream& stream, std::int64_t t,
                                      const SimLimits& limits = {},
                                      std::uint64_t* steps_used = nullptr) {
  return detail::min_depth(
      [&](std::uint64_t d) {
        return sandwich_window(rt, stream, t - static_cast<std::int64_t>(d), t,
                               t, nullptr, steps_used);
      },
      limits.max_depth, "coalescence search");
}

/// Regeneration distance at position t: the smallest i with the kernel's full
/// depth m of consecutive uniforms below 2*epsilon in a window ending at or
/// before t, namely U_{t-i}, ..., U_{t-i+m-1} all base draws. Once such a
/// window occurs, every later symbol is determined independently of the past.
inline std::uint64_t regeneration_time(const KernelRuntime& rt,
                                       const RandomStream& stream,
                                       std::int64_t t,
                                       const SimLimits& limits = {}) {
  require(rt.partition_backed(),
          "regeneration times need an interval-partition kernel");
  std::uint64_t m = rt.depth();
  if (m == 0) return 0;
  std::uint64_t run = 0, scanned = 0;
  for (std::int64_t p = t - static_cast<std::int64_t>(m) + 1;; --p) {
    if (rt.base_draw(stream.uniform_at(p))) {
      if (++run == m) return static_cast<std::uint64_t>(t - p);
    } else {
      run = 0;
    }
    if (++scanned > limits.max_scan)
      throw OverflowError("regeneration scan exceeded cap");
  }
}

/// One perfect draw of the stationary window [a, b], plus how it was made.
/// theta is the minimal sandwich depth below `a` that determines the whole
/// window; eta the regeneration distance from `a`. Either may be absent
/// depending on the method. No wall-clock data: results are byte-stable.
struct CftpResult {
  std::int64_t window_start = 0;
  std::int64_t window_end = 0;
  std::vector<Spin> symbols;
  std::optional<std::uint64_t> theta;
  std::optional<std::uint64_t> eta;
  std::uint64_t steps_used = 0;
  SampleMethod method = SampleMethod::MonotoneSandwich;
  std::uint64_t master_seed = 0;
  std::uint64_t replicate = 0;
};

inline CftpResult perfect_sample(const KernelRuntime& rt,
                                 const RandomStream& stream, std::int64_t a,
                                 std::int64_t b, SampleMethod method,
                                 const SimLimits& limits = {}) {
  require(a <= b, "window must be nonempty");
  CftpResult res;
  res.window_start = a;
  res.window_end = b;
  res.method = method;
  res.master_seed = stream.master_seed();
  res.replicate = stream.replicate();
  if (method == SampleMethod::MonotoneSandwich) {
    std::uint64_t theta = detail::min_depth(
        [&](std::uint64_t d) {
          return sandwich_window(rt, stream, a - static_cast<std::int64_t>(d),
                                 a, b, nullptr, &res.steps_used);
        },
        limits.max_depth, "window coalescence search");
    res.theta = theta;
    // Any coalesced depth yields the same determined window; refill at the
    // minimal depth for the recorded symbols.
    sandwich_window(rt, stream, a - static_cast<std::int64_t>(theta), a, b,
                    &res.symbols, &res.steps_used);
  } else {
    std::uint64_t eta = regeneration_time(rt, stream, a, limits);
    res.eta = eta;
    std::int64_t p = a - static_cast<std::int64_t>(eta);
    // The m base draws at [p, p+m-1] are past-independent, so any starting
    // context gives the determined trajectory from p on.
    ChainState cs = rt.start_extremal(Spin::Plus, p);
    for (std::int64_t t = p; t <= b; ++t) {
      Spin s = rt.step(cs, stream.uniform_at(t));
      if (t >= a) res.symbols.push_back(s);
      ++res.steps_used;
    }
  }
  return res;
}

inline CftpResult perfect_sample(const KernelSpec& spec,
                                 const RandomStream& stream, std::int64_t a,
                                 std::int64_t b, SampleMethod method,
                                 const SimLimits& limits = {}) {
  return perfect_sample(KernelRuntime(spec), stream, a, b, method, limits);
}

/// Two perfect draws sharing one uniform stream: position t of both chains is
/// driven by the same U_t, realizing the shared-uniform coupling of the two
/// stationary laws. Reports the pointwise disagreement count over the window.
struct CoupledCftpResult {
  CftpResult first, second;
  std::uint64_t disagreements = 0;
};

inline CoupledCftpResult coupled_perfect_sample(const KernelRuntime& ra,
                                                const KernelRuntime& rb,
                                                const RandomStream& stream,
                                                std::int64_t a, std::int64_t b,
                                                SampleMethod method,
                                                const SimLimits& limits = {}) {
  CoupledCftpResult out{perfect_sample(ra, stream, a, b, method, limits),
                        perfect_sample(rb, stream, a, b, method, limits), 0};
  for (std::size_t i = 0; i < out.first.symbols.size(); ++i)
    if (out.first.symbols[i] != out.second.symbols[i]) ++out.disagreements;
  return out;
}

inline CoupledCftpResult coupled_perfect_sample(const KernelSpec& sa,
                                                const KernelSpec& sb,
                                                const RandomStream& stream,
                                                std::int64_t a, std::int64_t b,
                                                SampleMethod method,
                                                const SimLimits& limits = {}) {
  return coupled_perfect_sample(KernelRuntime(sa), KernelRuntime(sb), stream, a,
                                b, method, limits);
}

}  // namespace bk
