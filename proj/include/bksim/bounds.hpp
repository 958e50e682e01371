#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "bksim/errors.hpp"
#include "bksim/logspace.hpp"
#include "bksim/params.hpp"
#include "bksim/rational.hpp"

namespace bk {

/// Caller-supplied depth-selection function r with r(k) < k, validated lazily
/// at each use.
using RFunc = std::function<std::uint64_t(std::uint64_t)>;

/// Upper bound m/(2 eps)^m on the mean regeneration depth E[eta] of a chain
/// whose majority window has length m (and hence on E[theta], since
/// theta <= eta pathwise). Exact rational while m is small, log-space beyond.
inline LogSpaceValue eta_mean_bound(const LogSpaceValue& m, const Rational& epsilon) {
  require(sgn(epsilon) > 0 && epsilon < Rational(1, 2),
          "epsilon must lie strictly inside (0, 1/2)");
  require(certainly_geq(m, LogSpaceValue::from_ui(1)), "window length must be >= 1");
  if (m.is_exact())
    require(m.rational().get_den() == 1, "window length must be an integer");
  LogSpaceValue inv = LogSpaceValue::exact(1 / (2 * epsilon));
  return m * LogSpaceValue::pow_value(inv, m);
}

inline LogSpaceValue eta_mean_bound(std::uint64_t m, const Rational& epsilon) {
  return eta_mean_bound(LogSpaceValue::from_ui(static_cast<unsigned long>(m)), epsilon);
}

/// The mixture-mass gap  sum_{j >= k+2} lambda_j  -  sum_{j=r+1}^{k+1} lambda_j.
inline Rational magnetization_gap(const ModelParams& params, std::uint64_t r, std::uint64_t k) {
  require(r <= k + 1, "depth selection r must satisfy r <= k+1");
  return params.weights.tail_sum(k + 2) - params.weights.partial_sum(r + 1, k + 1);
}

/// Lower bound (1 - 2 eps) * gap on the magnetization E[Y^{r,k+1}_0] of the
/// mixed kernel, exact rational. Requires the gap hypothesis to hold.
inline Rational magnetization_lower_bound(const ModelParams& params, std::uint64_t r,
                                          std::uint64_t k) {
  Rational tail = params.weights.tail_sum(k + 2);
  Rational middle = params.weights.partial_sum(r + 1, k + 1);
  if (!(tail > middle))
    throw PreconditionError(
        "magnetization hypothesis fails at r=" + std::to_string(r) +
        ", k=" + std::to_string(k) + ": sum_{j>=" + std::to_string(k + 2) +
        "} lambda_j = " + format_rational(tail) + " does not exceed sum_{j=" +
        std::to_string(r + 1) + "}^{" + std::to_string(k + 1) +
        "} lambda_j = " + format_rational(middle));
  return params.contrast() * (tail - middle);
}

/// Concentration tail bound  2 exp( - m_{k+1} E^2 / (8 (1 + thetaBar)^2) )
/// for the event that the block average of Y deviates from its mean by E/2.
/// E defaults to magnetization_lower_bound(params, r, k); pass an exact
/// magnetization to tighten. E = 0 gives the vacuous bound 2.
inline LogSpaceValue concentration_rhs(const ModelParams& params, std::uint64_t r,
                                       std::uint64_t k, const LogSpaceValue& theta_mean_bound,
                                       const std::optional<Rational>& energy = {}) {
  require(certainly_geq(theta_mean_bound, LogSpaceValue::exact(Rational(0))),
          "theta mean bound must be nonnegative");
  Rational e = energy ? *energy : magnetization_lower_bound(params, r, k);
  require(sgn(e) >= 0 && e <= 1, "magnetization bound must lie in [0, 1]");
  if (sgn(e) == 0) return LogSpaceValue::from_ui(2);
  LogSpaceValue m_next = params.orders.order(k + 1).value();
  LogSpaceValue one_plus = LogSpaceValue::from_ui(1) + theta_mean_bound;
  LogSpaceValue denom = LogSpaceValue::from_ui(8) * one_plus * one_plus;
  LogSpaceValue expo = -(m_next * LogSpaceValue::exact(e * e)) / denom;
  return LogSpaceValue::from_ui(2) * exp_of(expo);
}

namespace detail {

/// m_j with the m_0 = 0 convention used by the A_k formula.
inline LogSpaceValue order_or_zero(const ModelParams& params, std::uint64_t j) {
  if (j == 0) return LogSpaceValue::exact(Rational(0));
  return params.orders.order(j).value();
}

/// m * (2 eps)^(-m); zero depth contributes exactly 0.
inline LogSpaceValue weighted_depth(const LogSpaceValue& m, const Rational& two_eps) {
  if (m.is_exact() && sgn(m.rational()) == 0) return LogSpaceValue::exact(Rational(0));
  LogSpaceValue inv = LogSpaceValue::exact(1 / two_eps);
  return m * LogSpaceValue::pow_value(inv, m);
}

}  // namespace detail

/// The per-level constant
///   A_0 = 8 (1-2eps)^{-2} ln(4 / alpha),
///   A_k = 8 (1-2eps)^{-2} (1 + m_{r(k+1)} (2eps)^{-m_{r(k+1)}})^2
///           * ln( 2^{k+2} (1 + m_k (2eps)^{-m_k}) / alpha )        (k >= 1).
/// Exact factors stay rational; the logarithm makes the result an enclosure.
/// Throws OverflowError when the level's depths leave the representable range.
inline LogSpaceValue compute_A_k(const ModelParams& params, const RFunc& r,
                                 const Rational& alpha, std::uint64_t k) {
  require(sgn(alpha) > 0 && alpha < Rational(1, 2) - params.epsilon,
          "alpha must lie strictly inside (0, 1/2 - epsilon)");
  LogSpaceValue pref =
      LogSpaceValue::exact(Rational(8) / (params.contrast() * params.contrast()));
  if (k == 0)
    return pref * LogSpaceValue::exact(Rational(4) / alpha).ln();
  std::uint64_t r_next = r(k + 1);
  require(r_next < k + 1, "depth selection must satisfy r(k+1) < k+1, got r(" +
                              std::to_string(k + 1) + ") = " + std::to_string(r_next));
  Rational two_eps = params.two_eps();
  LogSpaceValue one = LogSpaceValue::from_ui(1);
  LogSpaceValue q_r = one + detail::weighted_depth(detail::order_or_zero(params, r_next), two_eps);
  LogSpaceValue q_k = one + detail::weighted_depth(detail::order_or_zero(params, k), two_eps);
  LogSpaceValue arg = LogSpaceValue::exact(Rational(2)).pow(BigInt(static_cast<unsigned long>(k + 2))) *
                      q_k * LogSpaceValue::exact(1 / alpha);
  return pref * q_r * q_r * arg.ln();
}

}  // namespace bk
