#pragma once

// Shared test utilities: canonical model instances, random attractive tables,
// exhaustive context enumeration, independent oracle evaluations.

#include <random>
#include <vector>

#include "bksim/kernels.hpp"
#include "bksim/params.hpp"
#include "bksim/partition.hpp"
#include "bksim/table.hpp"

namespace bktest {

using namespace bk;

/// Family A: eps = 1/4, lambda_j = (1/2)(2/3)^j, m = (1,3,5,7,9,...).
inline ModelParams family_a(Rational eps = Rational(1, 4),
                            MajorityWindow w = MajorityWindow::MostRecent) {
  return ModelParams(std::move(eps),
                     WeightFamily::geometric(Rational(1, 2), Rational(2, 3)),
                     OrderSequence::progression(1, 2), w);
}

/// Family B: eps = 1/4, lambda_j = (1/3)(3/4)^j (slower decay, so tail-vs-
/// middle gaps stay positive for more (r,k) pairs), m = (1,3,5,...).
inline ModelParams family_b(Rational eps = Rational(1, 4)) {
  return ModelParams(std::move(eps),
                     WeightFamily::geometric(Rational(1, 3), Rational(3, 4)),
                     OrderSequence::progression(1, 2));
}

/// All contexts of the given order (2^order of them).
inline std::vector<Context> all_contexts(std::uint64_t order) {
  std::vector<Context> out;
  out.reserve(std::size_t{1} << order);
  for (std::uint64_t s = 0; s < (std::uint64_t{1} << order); ++s)
    out.push_back(Context::from_bits(s, order));
  return out;
}

/// Random attractive table: raw rational entries in [1/16, 15/16] (denominator
/// 4096), monotonized upward along the hypercube so single-site flips to +1
/// never decrease P(+1 | context).
inline TableKernel<Rational> random_attractive_table(std::uint64_t order,
                                                     std::mt19937_64& rng) {
  std::uniform_int_distribution<int> num(256, 3840);
  std::uint64_t n = std::uint64_t{1} << order;
  std::vector<Rational> p(n);
  for (auto& x : p) {
    x = Rational(num(rng), 4096);
    x.canonicalize();
  }
  for (std::uint64_t s = 0; s < n; ++s)
    for (std::uint64_t i = 0; i < order; ++i)
      if (s & (std::uint64_t{1} << i)) {
        const Rational& below = p[s & ~(std::uint64_t{1} << i)];
        if (p[s] < below) p[s] = below;
      }
  return TableKernel<Rational>(order, std::move(p));
}

/// Independent oracle for the truncated kernels: the plain, un-rewritten
/// mixture sum evaluated with fresh code (no lambda_bar shortcuts).
inline Rational oracle_kernel_plus(const KernelSpec& spec, const Context& ctx) {
  const ModelParams& mp = spec.model();
  auto comp_majority = [&](std::uint64_t j) {
    std::uint64_t m = mp.orders.order(j).to_u64();
    int sum = 0;
    for (std::uint64_t i = 0; i < m; ++i)
      sum += spin_value(ctx.at(i + mp.window_offset()));
    return sum > 0 ? 1 - mp.epsilon : mp.epsilon;  // P(+1 | window)
  };
  Rational plus_coin = 1 - mp.epsilon;   // depth-0 component, P(+1)
  Rational minus_coin = mp.epsilon;      // flipped coin, P(+1)
  Rational total(0);
  std::uint64_t depth = spec.majority_depth();
  for (std::uint64_t j = 1; j <= depth; ++j) total += mp.weights.lambda(j) * comp_majority(j);
  switch (spec.variant) {
    case KernelSpec::Variant::Lower:
      total += mp.weights.tail_sum(spec.k + 1) * plus_coin;
      break;
    case KernelSpec::Variant::Upper:
      total += mp.weights.tail_sum(spec.k + 1) * minus_coin;
      break;
    case KernelSpec::Variant::Mixed:
      for (std::uint64_t j = spec.r + 1; j <= spec.l; ++j)
        total += mp.weights.lambda(j) * minus_coin;
      total += mp.weights.tail_sum(spec.l + 1) * plus_coin;
      break;
    case KernelSpec::Variant::MixedPrime:
      for (std::uint64_t j = spec.r + 1; j <= spec.l; ++j)
        total += mp.weights.lambda(j) * plus_coin;
      total += mp.weights.tail_sum(spec.l + 1) * minus_coin;
      break;
    default: throw Error("oracle handles truncated kernels only");
  }
  return total;
}

/// Probe uniforms hitting every cell of (the common refinement of) the given
/// partitions: one interior point per refined cell plus every boundary.
inline std::vector<Rational> probe_uniforms(const std::vector<const IntervalPartition*>& parts) {
  std::vector<Rational> bounds{Rational(0), Rational(1)};
  for (const auto* p : parts)
    for (const auto& c : p->cells()) bounds.push_back(c.lo);
  std::sort(bounds.begin(), bounds.end());
  bounds.erase(std::unique(bounds.begin(), bounds.end()), bounds.end());
  std::vector<Rational> probes;
  for (std::size_t i = 0; i + 1 < bounds.size(); ++i) {
    probes.push_back(bounds[i]);                            // cell start
    probes.push_back((bounds[i] + bounds[i + 1]) / 2);      // interior
  }
  return probes;
}

}  // namespace bktest
