#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>

#include "bksim/params.hpp"
#include "bksim/spin.hpp"
#include "bksim/table.hpp"

namespace bk {

/// One member of the kernel family:
///  - Lower(k):         mixture truncated at depth k; the whole tail follows
///                      the biased coin favoring +1 (the dominating kernel)
///  - Upper(k):         tail follows the coin favoring -1 (the dominated one)
///  - Mixed(r, l):      majorities up to r; depths r+1..l pushed to -1; the
///                      deep tail beyond l pushed to +1
///  - MixedPrime(r, l): depths r+1..l pushed to +1, deep tail to -1
///  - FullBK:           the untruncated mixture (finite families only can be
///                      evaluated pointwise; see bk_eval_bounded otherwise)
///  - Table:            an explicit finite-order conditional table
struct KernelSpec {
  enum class Variant { Lower, Upper, Mixed, MixedPrime, FullBK, Table };

  Variant variant = Variant::Lower;
  std::optional<ModelParams> params;  // absent only for Table
  std::uint64_t k = 0;                // Lower/Upper truncation depth
  std::uint64_t r = 0, l = 0;         // Mixed/MixedPrime middle range (r+1..l)
  std::shared_ptr<const TableKernel<Rational>> table;

  static KernelSpec lower(ModelParams p, std::uint64_t k) {
    KernelSpec s;
    s.variant = Variant::Lower;
    s.params = std::move(p);
    s.k = k;
    return s;
  }
  static KernelSpec upper(ModelParams p, std::uint64_t k) {
    KernelSpec s;
    s.variant = Variant::Upper;
    s.params = std::move(p);
    s.k = k;
    return s;
  }
  static KernelSpec mixed(ModelParams p, std::uint64_t r, std::uint64_t l) {
    require(r < l, "mixed kernel needs r < l");
    auto mx = p.weights.max_index();
    require(!mx || l <= *mx, "middle range extends beyond the weight family");
    KernelSpec s;
    s.variant = Variant::Mixed;
    s.params = std::move(p);
    s.r = r;
    s.l = l;
    return s;
  }
  static KernelSpec mixed_prime(ModelParams p, std::uint64_t r, std::uint64_t l) {
    require(r < l, "mixed-prime kernel needs r < l");
    auto mx = p.weights.max_index();
    require(!mx || l <= *mx, "middle range extends beyond the weight family");
    KernelSpec s;
    s.variant = Variant::MixedPrime;
    s.params = std::move(p);
    s.r = r;
    s.l = l;
    return s;
  }
  static KernelSpec full_bk(ModelParams p) {
    KernelSpec s;
    s.variant = Variant::FullBK;
    s.params = std::move(p);
    return s;
  }
  static KernelSpec from_table(TableKernel<Rational> t) {
    KernelSpec s;
    s.variant = Variant::Table;
    s.table = std::make_shared<const TableKernel<Rational>>(std::move(t));
    return s;
  }

  /// Truncation depth of the mixture: highest j whose majority is kept.
  std::uint64_t majority_depth() const {
    switch (variant) {
      case Variant::Lower:
      case Variant::Upper: return k;
      case Variant::Mixed:
      case Variant::MixedPrime: return r;
      default: return 0;
    }
  }

  const ModelParams& model() const {
    require(params.has_value(), "this kernel variant carries no model parameters");
    return *params;
  }
};

/// p_[m](a | ctx): the depth-m majority vote flipped with probability epsilon;
/// p_[0] is the biased coin P(+1) = 1 - epsilon.
inline Rational majority_eval(const ModelParams& params, std::uint64_t m, Spin a,
                              const Context& ctx) {
  if (m == 0) return a == Spin::Plus ? 1 - params.epsilon : params.epsilon;
  require(m % 2 == 1, "majority depth must be odd");
  int sum = ctx.window_sum(m, params.window_offset());
  bool aligned = (sum > 0) == (a == Spin::Plus);
  return aligned ? 1 - params.epsilon : params.epsilon;
}

/// Memory depth the kernel actually reads (machine-sized; refuses towers).
inline std::uint64_t kernel_order(const KernelSpec& spec) {
  switch (spec.variant) {
    case KernelSpec::Variant::Table:
      return spec.table->order();
    case KernelSpec::Variant::FullBK: {
      auto mx = spec.model().orders.max_index();
      auto wx = spec.model().weights.max_index();
      require(wx.has_value(),
              "the untruncated kernel has unbounded memory; use bk_eval_bounded");
      std::uint64_t top = *wx;
      require(!mx || top <= *mx, "weight list extends beyond the order list");
      return spec.model().orders.order(top).to_u64() + spec.model().window_offset();
    }
    default: {
      std::uint64_t d = spec.majority_depth();
      if (d == 0) return 0;
      return spec.model().orders.order(d).to_u64() + spec.model().window_offset();
    }
  }
}

/// Exact conditional probability of symbol `a` given a finite past.
/// The context must cover the kernel's full memory.
inline Rational kernel_eval(const KernelSpec& spec, Spin a, const Context& ctx) {
  if (spec.variant == KernelSpec::Variant::Table) {
    require(ctx.order() >= spec.table->order(), "context shorter than the table order");
    std::uint64_t s = 0;
    for (std::uint64_t i = 0; i < spec.table->order(); ++i)
      if (ctx.at(i) == Spin::Plus) s |= std::uint64_t{1} << i;
    const Rational& p = spec.table->p_plus(s);
    return a == Spin::Plus ? p : 1 - p;
  }

  const ModelParams& mp = spec.model();
  require(ctx.order() >= kernel_order(spec), "context shorter than the kernel order");
  auto coin_plus = [&](Spin x) { return majority_eval(mp, 0, x, ctx); };
  auto coin_minus = [&](Spin x) { return majority_eval(mp, 0, flip(x), ctx); };

  Rational total(0);
  std::uint64_t depth = spec.majority_depth();
  for (std::uint64_t j = 1; j <= depth; ++j)
    total += mp.weights.lambda(j) *
             majority_eval(mp, mp.orders.order(j).to_u64(), a, ctx);

  switch (spec.variant) {
    case KernelSpec::Variant::Lower:
      total += mp.weights.tail_sum(spec.k + 1) * coin_plus(a);
      break;
    case KernelSpec::Variant::Upper:
      total += mp.weights.tail_sum(spec.k + 1) * coin_minus(a);
      break;
    case KernelSpec::Variant::Mixed:
      total += mp.weights.partial_sum(spec.r + 1, spec.l) * coin_minus(a);
      total += mp.weights.tail_sum(spec.l + 1) * coin_plus(a);
      break;
    case KernelSpec::Variant::MixedPrime:
      total += mp.weights.partial_sum(spec.r + 1, spec.l) * coin_plus(a);
      total += mp.weights.tail_sum(spec.l + 1) * coin_minus(a);
      break;
    case KernelSpec::Variant::FullBK: {
      // finite family: kernel_order already validated finiteness
      std::uint64_t top = *mp.weights.max_index();
      for (std::uint64_t j = 1; j <= top; ++j)
        total += mp.weights.lambda(j) *
                 majority_eval(mp, mp.orders.order(j).to_u64(), a, ctx);
      break;
    }
    default: break;
  }
  return total;
}

/// Sound enclosure of the untruncated-kernel probability given only a finite
/// past: every depth whose window fits is resolved exactly; the unresolved
/// rewritten tail mass (1-2 eps) * sum of deeper weights widens the interval.
inline std::pair<Rational, Rational> bk_eval_bounded(const ModelParams& params, Spin a,
                                                     const Context& ctx) {
  std::size_t off = params.window_offset();
  Rational resolved = params.epsilon;  // base cell mass toward either symbol
  std::uint64_t j = 1;
  Rational unresolved;
  while (true) {
    if (!params.weights.defined_at(j)) {
      unresolved = 0;  // finite family fully resolved
      break;
    }
    OrderValue mv = params.orders.order(j);
    if (!mv.is_exact() || !mpz_fits_ulong_p(mv.exact_value().get_mpz_t()) ||
        mv.exact_value().get_ui() + off > ctx.order()) {
      unresolved = params.lambda_bar_tail(j);
      break;
    }
    std::uint64_t m = mv.exact_value().get_ui();
    int sum = ctx.window_sum(m, off);
    if ((sum > 0) == (a == Spin::Plus)) resolved += params.lambda_bar(j);
    ++j;
  }
  return {resolved, resolved + unresolved};
}

/// Materialize any finite-order kernel as a dense exact table.
inline TableKernel<Rational> to_table(const KernelSpec& spec, std::uint64_t max_order = 20) {
  if (spec.variant == KernelSpec::Variant::Table) return *spec.table;
  std::uint64_t n = kernel_order(spec);
  if (n > max_order)
    throw OverflowError("kernel order " + std::to_string(n) +
                        " exceeds the table cap " + std::to_string(max_order));
  std::vector<Rational> p(std::uint64_t{1} << n);
  for (std::uint64_t s = 0; s < p.size(); ++s)
    p[s] = kernel_eval(spec, Spin::Plus, Context::from_bits(s, n));
  return TableKernel<Rational>(n, std::move(p));
}

}  // namespace bk
