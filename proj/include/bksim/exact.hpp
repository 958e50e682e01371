#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "bksim/errors.hpp"
#include "bksim/kernels.hpp"
#include "bksim/partition.hpp"
#include "bksim/rational.hpp"
#include "bksim/spin.hpp"
#include "bksim/table.hpp"

namespace bk {

/// Probability vector over the 2^order packed contexts of a finite chain.
/// Bit i of the state is the symbol emitted i+1 steps ago, so bit 0 is the
/// most recent symbol.
template <typename T>
struct StateDist {
  std::uint64_t order = 0;
  std::vector<T> pi;
};

/// Sparse transition structure: out_edges[s] lists (target, probability).
template <typename T>
using OutEdges = std::vector<std::vector<std::pair<std::uint64_t, T>>>;

template <typename T>
OutEdges<T> kernel_edges(const TableKernel<T>& g) {
  OutEdges<T> edges(g.states());
  for (std::uint64_t s = 0; s < g.states(); ++s) {
    edges[s].emplace_back(g.succ(s, Spin::Plus), g.p_plus(s));
    edges[s].emplace_back(g.succ(s, Spin::Minus), T(1) - g.p_plus(s));
  }
  return edges;
}

namespace detail {

/// Exact stationary vector of an n-state chain by fraction-free (Bareiss)
/// elimination on the integerized balance system. Memory grows like
/// n^2 * n * entry-bits, hence the hard cap.
inline std::vector<Rational> stationary_bareiss(const OutEdges<Rational>& edges) {
  const std::uint64_t n = edges.size();
  require(n >= 1, "empty chain");
  require(n <= 512, "exact stationary route caps at 512 states");
  // A = P^T - I with the last row replaced by the normalization sum = 1.
  std::vector<std::vector<Rational>> A(n, std::vector<Rational>(n + 1, Rational(0)));
  for (std::uint64_t s = 0; s < n; ++s)
    for (const auto& [t, p] : edges[s]) {
      require(t < n, "edge target out of range");
      A[t][s] += p;
    }
  for (std::uint64_t i = 0; i < n; ++i) A[i][i] -= 1;
  for (std::uint64_t j = 0; j < n; ++j) A[n - 1][j] = 1;
  A[n - 1][n] = 1;  // right-hand side
  // Integerize row by row.
  std::vector<std::vector<BigInt>> M(n, std::vector<BigInt>(n + 1));
  for (std::uint64_t i = 0; i < n; ++i) {
    BigInt L(1);
    for (std::uint64_t j = 0; j <= n; ++j)
      mpz_lcm(L.get_mpz_t(), L.get_mpz_t(), A[i][j].get_den_mpz_t());
    for (std::uint64_t j = 0; j <= n; ++j) {
      Rational v = A[i][j] * L;
      M[i][j] = v.get_num();  // denominator is 1 by construction
    }
  }
  // Fraction-free forward elimination with row pivoting.
  BigInt prev(1);
  for (std::uint64_t k = 0; k + 1 < n; ++k) {
    std::uint64_t piv = k;
    while (piv < n && sgn(M[piv][k]) == 0) ++piv;
    require(piv < n,
            "stationary system is singular; chain may be reducible");
    if (piv != k) std::swap(M[piv], M[k]);
    for (std::uint64_t i = k + 1; i < n; ++i) {
      for (std::uint64_t j = k + 1; j <= n; ++j) {
        BigInt t = M[k][k] * M[i][j] - M[i][k] * M[k][j];
        mpz_divexact(M[i][j].get_mpz_t(), t.get_mpz_t(), prev.get_mpz_t());
      }
      M[i][k] = 0;
    }
    prev = M[k][k];
  }
  // Back substitution in rationals.
  std::vector<Rational> x(n);
  for (std::uint64_t ii = n; ii-- > 0;) {
    require(sgn(M[ii][ii]) != 0,
            "stationary system is singular; chain may be reducible");
    Rational acc(M[ii][n]);
    for (std::uint64_t j = ii + 1; j < n; ++j) acc -= Rational(M[ii][j]) * x[j];
    x[ii] = acc / Rational(M[ii][ii]);
  }
  // Exact self-check: balance, normalization, nonnegativity. Zero masses are
  // legitimate for transient states; multiple recurrent classes would have
  // made the pivot search fail instead.
  Rational total(0);
  std::vector<Rational> inflow(n, Rational(0));
  for (std::uint64_t s = 0; s < n; ++s) {
    require(sgn(x[s]) >= 0, "stationary solve produced negative mass");
    total += x[s];
    for (const auto& [t, p] : edges[s]) inflow[t] += x[s] * p;
  }
  require(total == 1, "stationary masses must sum to one");
  for (std::uint64_t s = 0; s < n; ++s)
    require(inflow[s] == x[s], "stationary balance violated after solve");
  return x;
}

inline std::vector<double> stationary_power_iteration(
    const OutEdges<double>& edges, std::uint64_t max_iters, double tol) {
  const std::uint64_t n = edges.size();
  require(n >= 1 && n <= (std::uint64_t{1} << 20),
          "power-iteration route caps at 2^20 states");
  std::vector<double> pi(n, 1.0 / static_cast<double>(n)), next(n);
  for (std::uint64_t it = 0; it < max_iters; ++it) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::uint64_t s = 0; s < n; ++s)
      for (const auto& [t, p] : edges[s]) next[t] += pi[s] * p;
    double norm = 0, diff = 0;
    for (std::uint64_t s = 0; s < n; ++s) norm += next[s];
    for (std::uint64_t s = 0; s < n; ++s) {
      next[s] /= norm;
      diff += std::abs(next[s] - pi[s]);
    }
    pi.swap(next);
    if (diff < tol) return pi;
  }
  throw OverflowError("power iteration failed to converge within the cap");
}

}  // namespace detail

/// Exact stationary law of a table kernel (states <= 512).
inline StateDist<Rational> stationary_exact(const TableKernel<Rational>& g) {
  return {g.order(), detail::stationary_bareiss(kernel_edges(g))};
}

/// Dense double-precision stationary law through an LU solve.
inline StateDist<double> stationary_dense(const TableKernel<double>& g) {
  const std::uint64_t n = g.states();
  require(n <= 2048, "dense stationary route caps at 2048 states");
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                            static_cast<Eigen::Index>(n));
  for (std::uint64_t s = 0; s < n; ++s) {
    A(static_cast<Eigen::Index>(g.succ(s, Spin::Plus)),
      static_cast<Eigen::Index>(s)) += g.p_plus(s);
    A(static_cast<Eigen::Index>(g.succ(s, Spin::Minus)),
      static_cast<Eigen::Index>(s)) += 1.0 - g.p_plus(s);
  }
  A -= Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n),
                                 static_cast<Eigen::Index>(n));
  A.row(static_cast<Eigen::Index>(n - 1)).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  b(static_cast<Eigen::Index>(n - 1)) = 1.0;
  Eigen::VectorXd x = A.partialPivLu().solve(b);
  StateDist<double> out{g.order(), std::vector<double>(n)};
  for (std::uint64_t s = 0; s < n; ++s)
    out.pi[s] = x(static_cast<Eigen::Index>(s));
  return out;
}

/// Sparse power-iteration stationary law (states <= 2^20).
inline StateDist<double> stationary_power(const TableKernel<double>& g,
                                          std::uint64_t max_iters = 200000,
                                          double tol = 1e-14) {
  return {g.order(),
          detail::stationary_power_iteration(kernel_edges(g), max_iters, tol)};
}

/// P(X_t = +1) under the given law: sum of pi(s) p_plus(s). Works for every
/// order, including 0. For order >= 1 this equals the bit-0 mass of pi, which
/// tests cross-check.
template <typename T>
T marginal_plus(const StateDist<T>& dist, const TableKernel<T>& g) {
  require(dist.order == g.order() && dist.pi.size() == g.states(),
          "distribution and kernel orders disagree");
  T acc(0);
  for (std::uint64_t s = 0; s < g.states(); ++s)
    acc += dist.pi[s] * g.p_plus(s);
  return acc;
}

/// Mass of states whose most recent symbol is +1 (order >= 1 only).
template <typename T>
T plus_bit_mass(const StateDist<T>& dist) {
  require(dist.order >= 1, "bit marginal needs order >= 1");
  T acc(0);
  for (std::uint64_t s = 0; s < dist.pi.size(); ++s)
    if (s & 1) acc += dist.pi[s];
  return acc;
}

/// P(X_{t-1} = +1, X_t = +1) under the given law. For order >= 1 this sums
/// the +1 emission over states whose most recent symbol is +1; for order 0
/// consecutive symbols are independent and the mass factorises.
template <typename T>
T pair_plus_exact(const StateDist<T>& dist, const TableKernel<T>& g) {
  require(dist.order == g.order() && dist.pi.size() == g.states(),
          "distribution and kernel orders disagree");
  if (g.order() == 0) {
    T p = marginal_plus(dist, g);
    return p * p;
  }
  T acc(0);
  for (std::uint64_t s = 0; s < g.states(); ++s)
    if (s & 1) acc += dist.pi[s] * g.p_plus(s);
  return acc;
}

/// Entropy rate in nats: -sum_s pi(s) [p log p + (1-p) log(1-p)].
inline double entropy_rate(const StateDist<double>& dist,
                           const TableKernel<double>& g) {
  require(dist.order == g.order(), "distribution and kernel orders disagree");
  double h = 0;
  for (std::uint64_t s = 0; s < g.states(); ++s) {
    double p = g.p_plus(s);
    double term = 0;
    if (p > 0) term -= p * std::log(p);
    if (p < 1) term -= (1 - p) * std::log(1 - p);
    h += dist.pi[s] * term;
  }
  return h;
}

/// One application of the transfer operator: (Lf)(s) = E[f(next state) | s].
template <typename T>
std::vector<T> ruelle_apply(const TableKernel<T>& g, const std::vector<T>& f) {
  require(f.size() == g.states(), "function must live on the state space");
  std::vector<T> out(g.states());
  for (std::uint64_t s = 0; s < g.states(); ++s)
    out[s] = g.p_plus(s) * f[g.succ(s, Spin::Plus)] +
             (T(1) - g.p_plus(s)) * f[g.succ(s, Spin::Minus)];
  return out;
}

/// One-step coupling of two finite kernels on pair states
/// (sx << order_y) | sy, with outcome masses in the order (++, +-, -+, --).
template <typename T>
struct CoupledKernel {
  std::uint64_t order_x = 0, order_y = 0;
  std::vector<std::array<T, 4>> p;

  std::uint64_t pair_states() const {
    return std::uint64_t{1} << (order_x + order_y);
  }
  std::uint64_t pair_index(std::uint64_t sx, std::uint64_t sy) const {
    return (sx << order_y) | sy;
  }
  std::uint64_t sx_of(std::uint64_t pair) const { return pair >> order_y; }
  std::uint64_t sy_of(std::uint64_t pair) const {
    return pair & ((std::uint64_t{1} << order_y) - 1);
  }
};

namespace detail {

inline std::uint64_t succ_bits(std::uint64_t s, Spin a, std::uint64_t order) {
  if (order == 0) return 0;
  return ((s << 1) | (a == Spin::Plus ? 1u : 0u)) &
         ((std::uint64_t{1} << order) - 1);
}

constexpr std::array<std::pair<Spin, Spin>, 4> kPairOutcomes = {
    std::pair{Spin::Plus, Spin::Plus}, std::pair{Spin::Plus, Spin::Minus},
    std::pair{Spin::Minus, Spin::Plus}, std::pair{Spin::Minus, Spin::Minus}};

template <typename T>
OutEdges<T> coupled_edges(const CoupledKernel<T>& c) {
  OutEdges<T> edges(c.pair_states());
  for (std::uint64_t pr = 0; pr < c.pair_states(); ++pr) {
    std::uint64_t sx = c.sx_of(pr), sy = c.sy_of(pr);
    for (int o = 0; o < 4; ++o) {
      const T& mass = c.p[pr][o];
      if (mass == T(0)) continue;
      std::uint64_t nx = succ_bits(sx, kPairOutcomes[o].first, c.order_x);
      std::uint64_t ny = succ_bits(sy, kPairOutcomes[o].second, c.order_y);
      edges[pr].emplace_back(c.pair_index(nx, ny), mass);
    }
  }
  return edges;
}

}  // namespace detail

/// Greedy marginal-matching one-step coupling: both +1 with probability
/// min(p, q), both -1 with probability min(1-p, 1-q), the excess split into
/// the off-diagonal cell on the side of the larger +1 mass. This is the
/// maximal one-step coupling, and it is exactly what a shared uniform does to
/// two threshold rules.
inline CoupledKernel<Rational> hulse_coupling(const TableKernel<Rational>& gx,
                                              const TableKernel<Rational>& gy) {
  CoupledKernel<Rational> c;
  c.order_x = gx.order();
  c.order_y = gy.order();
  require(c.order_x + c.order_y <= 22, "pair state space too large");
  c.p.resize(c.pair_states());
  for (std::uint64_t pr = 0; pr < c.pair_states(); ++pr) {
    const Rational& p = gx.p_plus(c.sx_of(pr));
    const Rational& q = gy.p_plus(c.sy_of(pr));
    Rational both_plus = p < q ? p : q;
    Rational both_minus = (1 - p) < (1 - q) ? (1 - p) : (1 - q);
    c.p[pr] = {both_plus, p - both_plus, q - both_plus, both_minus};
  }
  return c;
}

/// Shared-uniform coupling of two interval-partition kernels: refine the two
/// partitions over [0,1) and record, for every pair context, the mass of each
/// joint outcome. This is the coupling the sandwich simulation realizes.
inline CoupledKernel<Rational> partition_coupling(const IntervalPartition& px,
                                                  const IntervalPartition& py) {
  CoupledKernel<Rational> c;
  c.order_x = px.max_depth();
  c.order_y = py.max_depth();
  require(c.order_x + c.order_y <= 22, "pair state space too large");
  c.p.assign(c.pair_states(), {Rational(0), Rational(0), Rational(0), Rational(0)});
  // Common refinement boundaries.
  std::vector<Rational> cuts;
  for (const auto& cell : px.cells()) cuts.push_back(cell.lo);
  for (const auto& cell : py.cells()) cuts.push_back(cell.lo);
  cuts.push_back(Rational(1));
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  for (std::uint64_t pr = 0; pr < c.pair_states(); ++pr) {
    Context cx = Context::from_bits(c.sx_of(pr), c.order_x);
    Context cy = Context::from_bits(c.sy_of(pr), c.order_y);
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      Rational mass = cuts[i + 1] - cuts[i];
      Spin x = px.apply(cuts[i], cx);
      Spin y = py.apply(cuts[i], cy);
      int o = (x == Spin::Plus ? 0 : 2) + (y == Spin::Plus ? 0 : 1);
      c.p[pr][o] += mass;
    }
  }
  return c;
}

/// Exact stationary law of the paired chain (pair states <= 512).
inline StateDist<Rational> pair_stationary_exact(const CoupledKernel<Rational>& c) {
  return {c.order_x + c.order_y,
          detail::stationary_bareiss(detail::coupled_edges(c))};
}

/// P(X != Y) under a law on pair states: expected mass of the off-diagonal
/// one-step outcomes.
inline Rational disagreement_probability(const CoupledKernel<Rational>& c,
                                         const StateDist<Rational>& pair_dist) {
  require(pair_dist.pi.size() == c.pair_states(), "pair law size mismatch");
  Rational acc(0);
  for (std::uint64_t pr = 0; pr < c.pair_states(); ++pr)
    acc += pair_dist.pi[pr] * (c.p[pr][1] + c.p[pr][2]);
  return acc;
}

/// Exact tail P(theta > d) for d = 0..max_d: evolve the shared-uniform
/// self-coupling from the extremal pair (all plus, all minus) and read off
/// the probability that the two emissions at the last step differ. The
/// coupling matches what the simulation engine does for the given spec:
/// threshold rule for tables, interval partition otherwise.
inline std::vector<Rational> theta_tail_exact(const KernelSpec& spec,
                                              std::uint64_t max_d,
                                              std::uint64_t table_order_cap = 11) {
  CoupledKernel<Rational> c;
  if (spec.variant == KernelSpec::Variant::Table ||
      spec.variant == KernelSpec::Variant::FullBK) {
    TableKernel<Rational> t = spec.variant == KernelSpec::Variant::Table
                                  ? *spec.table
                                  : to_table(spec, table_order_cap);
    c = hulse_coupling(t, t);
  } else {
    IntervalPartition part = build_partition(spec);
    c = partition_coupling(part, part);
  }
  std::uint64_t m = c.order_x;
  std::vector<Rational> tail(max_d + 1, Rational(0));
  if (m == 0) return tail;  // order 0 coalesces immediately
  OutEdges<Rational> edges = detail::coupled_edges(c);
  std::vector<Rational> mu(c.pair_states(), Rational(0));
  mu[c.pair_index((std::uint64_t{1} << m) - 1, 0)] = 1;
  std::vector<Rational> next(c.pair_states());
  for (std::uint64_t d = 0; d <= max_d; ++d) {
    std::fill(next.begin(), next.end(), Rational(0));
    for (std::uint64_t pr = 0; pr < c.pair_states(); ++pr) {
      if (mu[pr] == 0) continue;
      for (const auto& [t, p] : edges[pr]) next[t] += mu[pr] * p;
    }
    mu.swap(next);
    // After d+1 steps, bit 0 of each side is the emission at the probed
    // position; theta > d iff they differ.
    Rational dis(0);
    for (std::uint64_t pr = 0; pr < c.pair_states(); ++pr)
      if (((c.sx_of(pr) ^ c.sy_of(pr)) & 1) && sgn(mu[pr]) != 0) dis += mu[pr];
    tail[d] = dis;
  }
  return tail;
}

/// Exact Ornstein distance between the stationary laws of two finite
/// attractive kernels, one of which dominates the other pointwise. Under
/// these hypotheses the shared-uniform stationary coupling is ordered, so the
/// distance collapses to the difference of the +1 marginals.
struct DbarExact {
  Rational value;
  Rational marginal_x, marginal_y;
};

inline DbarExact exact_dbar_attractive(const KernelSpec& x, const KernelSpec& y,
                                       std::uint64_t table_order_cap = 11) {
  TableKernel<Rational> tx = to_table(x, table_order_cap);
  TableKernel<Rational> ty = to_table(y, table_order_cap);
  require(check_attractive(tx) && check_attractive(ty),
          "exact distance route requires attractive kernels");
  require(dominates_pointwise(tx, ty),
          "exact distance route requires pointwise domination");
  DbarExact out;
  out.marginal_x = marginal_plus(stationary_exact(tx), tx);
  out.marginal_y = marginal_plus(stationary_exact(ty), ty);
  out.value = out.marginal_x - out.marginal_y;
  return out;
}

inline TableKernel<double> to_double(const TableKernel<Rational>& g) {
  return to_double_table(g);
}

}  // namespace bk
