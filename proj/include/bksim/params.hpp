#pragma once

#include "bksim/errors.hpp"
#include "bksim/orders.hpp"
#include "bksim/rational.hpp"
#include "bksim/weights.hpp"

namespace bk {

/// Which symbols a depth-m majority window reads: the m most recent
/// (x_{-1}..x_{-m}, the default) or the m symbols before the most recent
/// (x_{-2}..x_{-m-1}).
enum class MajorityWindow { MostRecent, SkipMostRecent };

/// Full parameterization of the chain family: noise level epsilon, mixture
/// weights, memory depths, and the majority-window convention.
struct ModelParams {
  Rational epsilon;
  WeightFamily weights;
  OrderSequence orders;
  MajorityWindow window = MajorityWindow::MostRecent;

  ModelParams(Rational eps, WeightFamily w, OrderSequence o,
              MajorityWindow win = MajorityWindow::MostRecent)
      : epsilon(std::move(eps)), weights(std::move(w)), orders(std::move(o)), window(win) {
    require(sgn(epsilon) > 0 && epsilon < Rational(1, 2),
            "epsilon must lie strictly inside (0, 1/2)");
  }

  Rational two_eps() const { return 2 * epsilon; }
  Rational contrast() const { return 1 - 2 * epsilon; }  // 1 - 2*epsilon

  /// Rewritten weights: lambda_bar_0 = 2 eps, lambda_bar_j = lambda_j (1-2 eps).
  Rational lambda_bar(std::uint64_t j) const {
    if (j == 0) return two_eps();
    return weights.lambda(j) * contrast();
  }

  /// (1-2 eps) * sum_{j >= k} lambda_j, the rewritten tail mass from index k.
  Rational lambda_bar_tail(std::uint64_t k) const {
    return weights.tail_sum(k) * contrast();
  }

  /// Offset into the context at which majority windows start.
  std::size_t window_offset() const {
    return window == MajorityWindow::MostRecent ? 0 : 1;
  }
};

}  // namespace bk
