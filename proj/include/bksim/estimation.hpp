#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "bksim/bounds.hpp"
#include "bksim/cftp.hpp"
#include "bksim/errors.hpp"
#include "bksim/exact.hpp"
#include "bksim/kernels.hpp"
#include "bksim/rng.hpp"

namespace bk {

/// Distribution-free confidence halfwidth for the mean of n independent
/// outcomes spanning `range`:  range * sqrt(ln(2/delta) / (2n)).
inline double hoeffding_halfwidth(std::uint64_t n, double confidence,
                                  double range = 1.0) {
  require(confidence > 0 && confidence < 1, "confidence level must be in (0,1)");
  if (n == 0) return range;
  double delta = 1.0 - confidence;
  return range * std::sqrt(std::log(2.0 / delta) / (2.0 * static_cast<double>(n)));
}

/// One Monte-Carlo summary. Point estimates are ratios of integer
/// accumulators reduced in replication order, so a report is byte-identical
/// for any worker count. No wall-clock or host data is recorded.
struct EstimateReport {
  std::string quantity;
  double point = 0.0;
  std::uint64_t n = 0;          // replications that completed
  std::uint64_t requested = 0;  // replications asked for
  std::uint64_t failures = 0;   // replications lost to scan/depth overflow
  double confidence = 0.99;
  double range = 1.0;   // outcome range behind the band (1 for probabilities)
  double band = 0.0;    // Hoeffding halfwidth at `confidence`
  std::uint64_t seed = 0;
  std::uint64_t purpose = 0;  // uniform-stream purpose tag
  std::uint64_t first_replicate = 0;
};

struct EstimateOptions {
  std::uint64_t n = 10'000;
  std::uint64_t seed = 0;
  std::uint64_t first_replicate = 0;
  double confidence = 0.99;
  unsigned workers = 1;  // 0 = hardware concurrency
  SampleMethod method = SampleMethod::MonotoneSandwich;
  SimLimits limits{};
};

namespace detail {

enum class RepStatus : std::uint8_t { Ok, Overflowed, Failed };

template <typename T>
struct Replication {
  RepStatus status = RepStatus::Ok;
  T value{};
  std::string message;
};

/// Run fn(i) for i in [0, n) over any worker count, storing results by
/// replication index. Overflow errors are recorded per replication; any other
/// error is re-thrown after all workers finish (lowest index wins, so the
/// thrown message does not depend on scheduling).
template <typename T, typename Fn>
std::vector<Replication<T>> run_replications(std::uint64_t n, unsigned workers,
                                             Fn&& fn) {
  std::vector<Replication<T>> out(n);
  auto run_range = [&](std::uint64_t lo, std::uint64_t hi) {
    for (std::uint64_t i = lo; i < hi; ++i) {
      try {
        out[i].value = fn(i);
      } catch (const OverflowError& e) {
        out[i].status = RepStatus::Overflowed;
        out[i].message = e.what();
      } catch (const std::exception& e) {
        out[i].status = RepStatus::Failed;
        out[i].message = e.what();
      }
    }
  };
  std::uint64_t w =
      workers == 0 ? std::max(1u, std::thread::hardware_concurrency()) : workers;
  w = std::min<std::uint64_t>(std::max<std::uint64_t>(w, 1),
                              std::max<std::uint64_t>(n, 1));
  if (w <= 1) {
    run_range(0, n);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(w));
    for (std::uint64_t t = 0; t < w; ++t)
      pool.emplace_back(run_range, n * t / w, n * (t + 1) / w);
    for (auto& th : pool) th.join();
  }
  for (const auto& r : out)
    if (r.status == RepStatus::Failed) throw Error(r.message);
  return out;
}

inline EstimateReport make_report(std::string quantity,
                                  const EstimateOptions& opt,
                                  StreamPurpose purpose, std::uint64_t ok,
                                  std::uint64_t failures, double point,
                                  double range = 1.0) {
  EstimateReport rep;
  rep.quantity = std::move(quantity);
  rep.point = point;
  rep.n = ok;
  rep.requested = opt.n;
  rep.failures = failures;
  rep.confidence = opt.confidence;
  rep.range = range;
  rep.band = hoeffding_halfwidth(ok, opt.confidence, range);
  rep.seed = opt.seed;
  rep.purpose = static_cast<std::uint64_t>(purpose);
  rep.first_replicate = opt.first_replicate;
  return rep;
}

template <typename T>
std::pair<std::uint64_t, std::uint64_t> count_outcomes(
    const std::vector<Replication<T>>& reps) {
  std::uint64_t ok = 0, fail = 0;
  for (const auto& r : reps)
    (r.status == RepStatus::Ok ? ok : fail) += 1;
  return {ok, fail};
}

inline double ratio(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? 0.0
                  : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Marginals
// ---------------------------------------------------------------------------

/// P(X_0 = +1) under the stationary law, from independent perfect samples.
inline EstimateReport estimate_marginal(const KernelSpec& spec,
                                        const EstimateOptions& opt) {
  KernelRuntime rt(spec);
  auto reps = detail::run_replications<std::uint8_t>(
      opt.n, opt.workers, [&](std::uint64_t i) {
        RandomStream stream(opt.seed, opt.first_replicate + i,
                            StreamPurpose::Coupling);
        CftpResult res = perfect_sample(rt, stream, 0, 0, opt.method, opt.limits);
        return static_cast<std::uint8_t>(res.symbols.front() == Spin::Plus);
      });
  auto [ok, fail] = detail::count_outcomes(reps);
  std::uint64_t count = 0;
  for (const auto& r : reps)
    if (r.status == detail::RepStatus::Ok) count += r.value;
  return detail::make_report("P(X_0 = +1)", opt, StreamPurpose::Coupling, ok,
                             fail, detail::ratio(count, ok));
}

/// P(X_{-1} = +1, X_0 = +1): adjacent-pair plus-plus mass under the
/// stationary law, from perfect samples of the two-site window.
inline EstimateReport estimate_pair_plus(const KernelSpec& spec,
                                         const EstimateOptions& opt) {
  KernelRuntime rt(spec);
  auto reps = detail::run_replications<std::uint8_t>(
      opt.n, opt.workers, [&](std::uint64_t i) {
        RandomStream stream(opt.seed, opt.first_replicate + i,
                            StreamPurpose::Coupling);
        CftpResult res =
            perfect_sample(rt, stream, -1, 0, opt.method, opt.limits);
        return static_cast<std::uint8_t>(res.symbols[0] == Spin::Plus &&
                                         res.symbols[1] == Spin::Plus);
      });
  auto [ok, fail] = detail::count_outcomes(reps);
  std::uint64_t count = 0;
  for (const auto& r : reps)
    if (r.status == detail::RepStatus::Ok) count += r.value;
  return detail::make_report("P(X_{-1} = +1, X_0 = +1)", opt,
                             StreamPurpose::Coupling, ok, fail,
                             detail::ratio(count, ok));
}

// ---------------------------------------------------------------------------
// Regeneration and coalescence statistics
// ---------------------------------------------------------------------------

struct EtaThetaReport {
  EstimateReport eta_mean;    // band uses the empirical range (heuristic:
  EstimateReport theta_mean;  // these outcomes have no a-priori upper bound)
  std::vector<double> theta_tail;  // P(theta > j), j = 0 .. tail_depth
  std::uint64_t max_eta = 0;
  std::uint64_t max_theta = 0;
};

/// Empirical means of the regeneration distance eta and the coalescence
/// depth theta at position 0, plus the empirical tail of theta. Every
/// replication asserts theta <= eta on its own path.
inline EtaThetaReport estimate_eta_theta(const KernelSpec& spec,
                                         const EstimateOptions& opt,
                                         std::uint64_t tail_depth = 16) {
  KernelRuntime rt(spec);
  require(rt.partition_backed(),
          "regeneration statistics need an interval-partition kernel");
  struct Times {
    std::uint64_t eta = 0, theta = 0;
  };
  auto reps = detail::run_replications<Times>(
      opt.n, opt.workers, [&](std::uint64_t i) {
        RandomStream stream(opt.seed, opt.first_replicate + i,
                            StreamPurpose::Coupling);
        Times t;
        t.theta = coalescence_time(rt, stream, 0, opt.limits);
        t.eta = regeneration_time(rt, stream, 0, opt.limits);
        if (t.theta > t.eta)
          throw Error("coalescence depth exceeded the regeneration distance "
                      "on one path; the sandwich must settle inside the "
                      "regeneration window");
        return t;
      });
  auto [ok, fail] = detail::count_outcomes(reps);
  EtaThetaReport out;
  std::uint64_t eta_sum = 0, theta_sum = 0;
  std::vector<std::uint64_t> tail_counts(tail_depth + 1, 0);
  for (const auto& r : reps) {
    if (r.status != detail::RepStatus::Ok) continue;
    eta_sum += r.value.eta;
    theta_sum += r.value.theta;
    out.max_eta = std::max(out.max_eta, r.value.eta);
    out.max_theta = std::max(out.max_theta, r.value.theta);
    for (std::uint64_t j = 0; j <= tail_depth && j < r.value.theta; ++j)
      ++tail_counts[j];
  }
  out.eta_mean = detail::make_report(
      "mean eta", opt, StreamPurpose::Coupling, ok, fail,
      detail::ratio(eta_sum, ok), static_cast<double>(out.max_eta));
  out.theta_mean = detail::make_report(
      "mean theta", opt, StreamPurpose::Coupling, ok, fail,
      detail::ratio(theta_sum, ok), static_cast<double>(out.max_theta));
  out.theta_tail.reserve(tail_depth + 1);
  for (std::uint64_t j = 0; j <= tail_depth; ++j)
    out.theta_tail.push_back(detail::ratio(tail_counts[j], ok));
  return out;
}

// ---------------------------------------------------------------------------
// Distance upper bounds
// ---------------------------------------------------------------------------

/// Extra structure for the product majorant (mean eta + 1) * P(S_0^c): the
/// first kernel supplies the regeneration distance, the second the
/// window-majority event S_0 = { sum of its symbols over [-m, -1] > 0 } with
/// m the order at `next_index` in `params`.
struct MajorantSpec {
  ModelParams params;
  std::uint64_t next_index = 1;
};

struct DbarEstimate {
  EstimateReport disagreement;  // P(X^A_0 != X^B_0) under the shared-uniform
                                // coupling of the two stationary laws
  std::optional<EstimateReport> s0_complement;  // P(S_0^c), second chain
  std::optional<EstimateReport> eta_mean;       // regeneration, first chain
  std::optional<double> product_majorant;  // (mean eta + 1) * P(S_0^c)
};

/// Estimate an upper bound for the Ornstein distance between the stationary
/// laws of two attractive kernels: couple two perfect samples through one
/// uniform stream and report the disagreement frequency at time 0. With a
/// MajorantSpec the same replications also record the regeneration distance
/// of the first chain and the window-majority failure of the second, giving
/// the analytic product majorant alongside the direct frequency.
inline DbarEstimate estimate_dbar_upper(
    const KernelSpec& a, const KernelSpec& b, const EstimateOptions& opt,
    const std::optional<MajorantSpec>& majorant = {}) {
  KernelRuntime ra(a), rb(b);
  require(ra.attractive() && rb.attractive(),
          "the shared-uniform estimator needs attractive kernels");
  std::uint64_t m_next = 0;
  if (majorant) {
    require(ra.partition_backed(),
            "the product majorant needs an interval-partition first kernel");
    m_next = majorant->params.orders.order(majorant->next_index).to_u64();
    require(m_next >= 1, "majorant window must be nonempty");
  }
  struct Rec {
    std::uint8_t disagree = 0, s0c = 0;
    std::uint64_t eta = 0;
  };
  std::int64_t start = majorant ? -static_cast<std::int64_t>(m_next) : 0;
  auto reps = detail::run_replications<Rec>(
      opt.n, opt.workers, [&](std::uint64_t i) {
        RandomStream stream(opt.seed, opt.first_replicate + i,
                            StreamPurpose::Coupling);
        CoupledCftpResult cr = coupled_perfect_sample(ra, rb, stream, start, 0,
                                                      opt.method, opt.limits);
        Rec rec;
        rec.disagree = cr.first.symbols.back() != cr.second.symbols.back();
        if (majorant) {
          std::int64_t sum = 0;
          for (std::uint64_t j = 0; j < m_next; ++j)
            sum += spin_value(cr.second.symbols[j]);
          rec.s0c = sum > 0 ? 0 : 1;
          rec.eta = regeneration_time(ra, stream, 0, opt.limits);
        }
        return rec;
      });
  auto [ok, fail] = detail::count_outcomes(reps);
  std::uint64_t dis = 0, s0c = 0, eta_sum = 0, max_eta = 0;
  for (const auto& r : reps) {
    if (r.status != detail::RepStatus::Ok) continue;
    dis += r.value.disagree;
    s0c += r.value.s0c;
    eta_sum += r.value.eta;
    max_eta = std::max<std::uint64_t>(max_eta, r.value.eta);
  }
  DbarEstimate out;
  out.disagreement =
      detail::make_report("P(X^A_0 != X^B_0)", opt, StreamPurpose::Coupling,
                          ok, fail, detail::ratio(dis, ok));
  if (majorant) {
    out.s0_complement =
        detail::make_report("P(S_0^c)", opt, StreamPurpose::Coupling, ok, fail,
                            detail::ratio(s0c, ok));
    out.eta_mean = detail::make_report(
        "mean eta", opt, StreamPurpose::Coupling, ok, fail,
        detail::ratio(eta_sum, ok), static_cast<double>(max_eta));
    out.product_majorant =
        (out.eta_mean->point + 1.0) * out.s0_complement->point;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Concentration of block averages
// ---------------------------------------------------------------------------

struct ConcentrationReport {
  EstimateReport deviation;  // P(|block mean - E| >= E/2)
  Rational energy;           // the E used inside the event
  bool energy_exact = false;  // exact stationary magnetization vs lower bound
  LogSpaceValue rhs = LogSpaceValue::exact(Rational(2));  // analytic ceiling
  double rhs_value = 2.0;
  std::uint64_t block_length = 0;
};

/// Empirical probability that the average of one stationary block of length
/// m_{k+1} under the Mixed(r, k+1) kernel deviates from E by at least E/2.
/// E is the exact stationary magnetization when the kernel tabulates within
/// `exact_order_cap`, else the analytic magnetization lower bound. The
/// report carries the analytic ceiling computed at the matching
/// regeneration-mean bound for the kernel's own memory depth.
inline ConcentrationReport concentration_empirical(
    const ModelParams& params, std::uint64_t r, std::uint64_t k,
    const EstimateOptions& opt, std::uint64_t exact_order_cap = 12) {
  KernelSpec spec = KernelSpec::mixed(params, r, k + 1);
  KernelRuntime rt(spec);
  std::uint64_t m_next = params.orders.order(k + 1).to_u64();

  ConcentrationReport out;
  out.block_length = m_next;
  if (kernel_order(spec) <= exact_order_cap) {
    TableKernel<Rational> table = to_table(spec, exact_order_cap);
    StateDist<Rational> pi = stationary_exact(table);
    out.energy = 2 * marginal_plus(pi, table) - 1;
    out.energy_exact = true;
  } else {
    out.energy = magnetization_lower_bound(params, r, k);
  }
  require(sgn(out.energy) > 0,
          "the deviation event needs a positive stationary block mean");

  LogSpaceValue theta_bar =
      r == 0 ? LogSpaceValue::exact(Rational(0))
             : eta_mean_bound(params.orders.order(r).to_u64(), params.epsilon);
  out.rhs = concentration_rhs(params, r, k, theta_bar, out.energy);
  out.rhs_value = out.rhs.approx_double();

  const Rational& e = out.energy;
  Rational m_e = Rational(static_cast<unsigned long>(m_next)) * e;
  auto reps = detail::run_replications<std::uint8_t>(
      opt.n, opt.workers, [&](std::uint64_t i) {
        RandomStream stream(opt.seed, opt.first_replicate + i,
                            StreamPurpose::Coupling);
        CftpResult res = perfect_sample(
            rt, stream, 0, static_cast<std::int64_t>(m_next) - 1, opt.method,
            opt.limits);
        long s = 0;
        for (Spin x : res.symbols) s += spin_value(x);
        // |S/m - E| >= E/2  <=>  2 |S - m E| >= m E, decided exactly.
        Rational diff = Rational(s) - m_e;
        return static_cast<std::uint8_t>(2 * abs(diff) >= m_e);
      });
  auto [ok, fail] = detail::count_outcomes(reps);
  std::uint64_t count = 0;
  for (const auto& rrep : reps)
    if (rrep.status == detail::RepStatus::Ok) count += rrep.value;
  out.deviation = detail::make_report("P(|block mean - E| >= E/2)", opt,
                                      StreamPurpose::Coupling, ok, fail,
                                      detail::ratio(count, ok));
  return out;
}

// ---------------------------------------------------------------------------
// Phase probe
// ---------------------------------------------------------------------------

struct PhaseProbeReport {
  EstimateReport gap;  // estimate of mu^+(x_h = +1) - mu^-(x_h = +1)
  std::uint64_t truncation_index = 0;  // mixture index actually probed
  std::uint64_t truncation_order = 0;  // its window length
  std::uint64_t horizon = 0;
  std::string caveat;
};

/// Forward-simulate the deepest order-capped truncation from the all-plus and
/// all-minus pasts with shared uniforms and report the difference of the
/// +1 frequencies at the horizon. A gap indistinguishable from 0 is evidence
/// of uniqueness for the truncated kernel; a separated gap signals
/// non-uniqueness pressure in the truncation. Either way this probes the
/// truncation, never the untruncated chain, and the report says so.
inline PhaseProbeReport phase_probe(const ModelParams& params,
                                    std::uint64_t order_cap,
                                    std::uint64_t horizon,
                                    const EstimateOptions& opt) {
  require(horizon >= 1, "probe horizon must be positive");
  // Highest truncation index whose window fits the cap; index 0 (the
  // past-independent coin) is only reachable by asking for cap 0 explicitly.
  std::uint64_t kstar = 0, mstar = 0;
  if (order_cap > 0) {
    for (std::uint64_t j = 1; params.weights.defined_at(j); ++j) {
      std::uint64_t m;
      try {
        m = params.orders.order(j).to_u64();
      } catch (const OverflowError&) {
        break;
      }
      if (m > order_cap) break;
      kstar = j;
      mstar = m;
    }
    require(kstar >= 1,
            "order cap admits no majority component; raise it to at least "
            "the first window length");
  }
  KernelRuntime rt(KernelSpec::lower(params, kstar));
  require(rt.attractive(), "phase probe needs an attractive kernel");

  auto reps = detail::run_replications<std::uint8_t>(
      opt.n, opt.workers, [&](std::uint64_t i) {
        RandomStream stream(opt.seed, opt.first_replicate + i,
                            StreamPurpose::Probe);
        ChainState hi = rt.start_extremal(Spin::Plus, 0);
        ChainState lo = rt.start_extremal(Spin::Minus, 0);
        Spin shi = Spin::Plus, slo = Spin::Plus;
        for (std::uint64_t t = 0; t < horizon; ++t) {
          double u = stream.uniform_at(static_cast<std::int64_t>(t));
          shi = rt.step(hi, u);
          slo = rt.step(lo, u);
          if (spin_value(shi) < spin_value(slo))
            throw Error("monotone domination violated in the phase probe");
        }
        return static_cast<std::uint8_t>((shi == Spin::Plus ? 1 : 0) -
                                         (slo == Spin::Plus ? 1 : 0));
      });
  auto [ok, fail] = detail::count_outcomes(reps);
  std::uint64_t gap_sum = 0;
  for (const auto& r : reps)
    if (r.status == detail::RepStatus::Ok) gap_sum += r.value;
  PhaseProbeReport out;
  out.gap = detail::make_report("mu+ - mu- at the horizon", opt,
                                StreamPurpose::Probe, ok, fail,
                                detail::ratio(gap_sum, ok));
  out.truncation_index = kstar;
  out.truncation_order = mstar;
  out.horizon = horizon;
  out.caveat =
      "probes the order-" + std::to_string(mstar) +
      " truncation at mixture index " + std::to_string(kstar) +
      ", not the untruncated chain";
  return out;
}

}  // namespace bk
