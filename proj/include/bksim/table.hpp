#pragma once

#include <cstdint>
#include <vector>

#include "bksim/errors.hpp"
#include "bksim/rational.hpp"
#include "bksim/spin.hpp"

namespace bk {

/// Finite-order kernel as a dense table of P(+1 | context), templated on the
/// scalar (exact Rational or double). Contexts are packed state indices:
/// bit i set <=> x_{-(i+1)} = +1, so bit 0 is the most recent symbol.
template <typename T>
class TableKernel {
 public:
  TableKernel() = default;
  TableKernel(std::uint64_t order, std::vector<T> p_plus)
      : order_(order), p_(std::move(p_plus)) {
    require(order <= 25, "table order capped at 25");
    require(p_.size() == (std::uint64_t{1} << order), "table size must be 2^order");
  }

  std::uint64_t order() const { return order_; }
  std::uint64_t states() const { return std::uint64_t{1} << order_; }
  std::uint64_t mask() const { return states() - 1; }

  const T& p_plus(std::uint64_t state) const { return p_[state]; }
  T& p_plus(std::uint64_t state) { return p_[state]; }
  const std::vector<T>& values() const { return p_; }

  /// Successor state after emitting `a` (new symbol becomes bit 0).
  std::uint64_t succ(std::uint64_t state, Spin a) const {
    return ((state << 1) | (a == Spin::Plus ? 1u : 0u)) & mask();
  }

 private:
  std::uint64_t order_ = 0;
  std::vector<T> p_;
};

/// Monotone in the coordinatewise partial order on contexts: flipping any
/// context site from -1 to +1 never decreases P(+1 | context). Checking all
/// single-site covers suffices on the hypercube.
template <typename T>
bool check_attractive(const TableKernel<T>& g) {
  const std::uint64_t n = g.states();
  for (std::uint64_t s = 0; s < n; ++s)
    for (std::uint64_t i = 0; i < g.order(); ++i) {
      std::uint64_t bit = std::uint64_t{1} << i;
      if ((s & bit) && g.p_plus(s) < g.p_plus(s & ~bit)) return false;
    }
  return true;
}

/// Order-j upper envelope: sup of P(+1 | .) over all completions of the j most
/// recent symbols. Preserves attractivity.
template <typename T>
TableKernel<T> sup_truncation(const TableKernel<T>& g, std::uint64_t j) {
  require(j <= g.order(), "truncation order exceeds the table order");
  std::uint64_t jmask = (std::uint64_t{1} << j) - 1;
  std::vector<T> out(std::uint64_t{1} << j);
  std::vector<bool> seen(out.size(), false);
  for (std::uint64_t s = 0; s < g.states(); ++s) {
    std::uint64_t c = s & jmask;
    if (!seen[c] || out[c] < g.p_plus(s)) out[c] = g.p_plus(s);
    seen[c] = true;
  }
  return TableKernel<T>(j, std::move(out));
}

/// Order-j lower envelope (inf over completions).
template <typename T>
TableKernel<T> inf_truncation(const TableKernel<T>& g, std::uint64_t j) {
  require(j <= g.order(), "truncation order exceeds the table order");
  std::uint64_t jmask = (std::uint64_t{1} << j) - 1;
  std::vector<T> out(std::uint64_t{1} << j);
  std::vector<bool> seen(out.size(), false);
  for (std::uint64_t s = 0; s < g.states(); ++s) {
    std::uint64_t c = s & jmask;
    if (!seen[c] || g.p_plus(s) < out[c]) out[c] = g.p_plus(s);
    seen[c] = true;
  }
  return TableKernel<T>(j, std::move(out));
}

/// Pointwise domination: a(+1|c) >= b(+1|c) on the refinement of their
/// contexts. Orders may differ; each table reads its own prefix.
template <typename T>
bool dominates_pointwise(const TableKernel<T>& a, const TableKernel<T>& b) {
  std::uint64_t m = std::max(a.order(), b.order());
  require(m <= 22, "domination check capped at order 22");
  for (std::uint64_t s = 0; s < (std::uint64_t{1} << m); ++s)
    if (a.p_plus(s & a.mask()) < b.p_plus(s & b.mask())) return false;
  return true;
}

inline TableKernel<double> to_double_table(const TableKernel<Rational>& g) {
  std::vector<double> v(g.states());
  for (std::uint64_t s = 0; s < g.states(); ++s) v[s] = g.p_plus(s).get_d();
  return TableKernel<double>(g.order(), std::move(v));
}

}  // namespace bk
