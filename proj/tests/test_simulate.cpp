#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "bksim/cftp.hpp"
#include "bksim/kernels.hpp"
#include "bksim/partition.hpp"
#include "bksim/rng.hpp"
#include "helpers.hpp"

using namespace bk;
using bktest::family_a;
using bktest::family_b;

namespace {

// Naive coalescence oracle: linear scan over start depths, fresh full runs.
std::uint64_t naive_theta(const KernelRuntime& rt, const RandomStream& st,
                          std::int64_t t, std::uint64_t cap = 100000) {
  for (std::uint64_t d = 0;; ++d) {
    REQUIRE(d <= cap);
    if (sandwich_window(rt, st, t - static_cast<std::int64_t>(d), t, t, nullptr,
                        nullptr))
      return d;
  }
}

// Naive forward oracle: explicit history vector, exact rational location in
// the interval partition, no ring buffers or cached double bounds.
std::vector<Spin> naive_forward(const KernelSpec& spec, const RandomStream& st,
                                const Context& past, std::int64_t a,
                                std::int64_t b) {
  IntervalPartition part = build_partition(spec);
  std::vector<Spin> hist(past.symbols());  // most recent first
  std::vector<Spin> out;
  for (std::int64_t t = a; t <= b; ++t) {
    Rational u = rational_from_double(st.uniform_at(t));
    Spin s = part.apply(u, Context(hist));
    out.push_back(s);
    hist.insert(hist.begin(), s);
  }
  return out;
}

// Exact expected scan length until m consecutive base draws, success
// probability q per draw: solve E_r = 1 + q E_{r+1} + (1-q) E_0 with E_m = 0.
Rational exact_expected_scan(std::uint64_t m, const Rational& q) {
  Rational a(0), b(0);  // E_r = a + b E_0, backwards from r = m
  for (std::uint64_t r = m; r-- > 0;) {
    a = 1 + q * a;
    b = q * b + (1 - q);
  }
  return a / (1 - b);
}

double frequency_sigma(double p, std::uint64_t n) {
  return std::sqrt(p * (1 - p) / static_cast<double>(n));
}

}  // namespace

TEST_CASE("random stream: determinism, separation, frozen anchors") {
  RandomStream s1(42, 7, StreamPurpose::Coupling);
  RandomStream s2(42, 7, StreamPurpose::Coupling);
  for (std::int64_t p : {-1000000, -17, -1, 0, 1, 5, 999999}) {
    CHECK(s1.bits_at(p) == s2.bits_at(p));
    double u = s1.uniform_at(p);
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    // 53-bit dyadic: scaling back up is exact
    CHECK(u * 0x1.0p53 == std::floor(u * 0x1.0p53));
  }
  RandomStream other_rep(42, 8, StreamPurpose::Coupling);
  RandomStream other_purpose(42, 7, StreamPurpose::Estimation);
  RandomStream other_seed(43, 7, StreamPurpose::Coupling);
  int agree_rep = 0, agree_pur = 0, agree_seed = 0;
  for (std::int64_t p = -500; p < 500; ++p) {
    agree_rep += s1.bits_at(p) == other_rep.bits_at(p);
    agree_pur += s1.bits_at(p) == other_purpose.bits_at(p);
    agree_seed += s1.bits_at(p) == other_seed.bits_at(p);
  }
  CHECK(agree_rep == 0);
  CHECK(agree_pur == 0);
  CHECK(agree_seed == 0);
  // Regression anchors: any change to the mixing constants must be deliberate.
  RandomStream anchor(1, 0, StreamPurpose::Coupling);
  CHECK(anchor.bits_at(0) == 15574732230508818517ull);
  CHECK(anchor.bits_at(-5) == 2509095285636466983ull);
  CHECK(anchor.bits_at(123456789) == 4579324390729925559ull);
}

TEST_CASE("random stream: chi-square uniformity and lag independence") {
  RandomStream st(2024, 0, StreamPurpose::Coupling);
  const int bins = 64;
  const std::int64_t n = 1 << 16;
  std::vector<std::int64_t> count(bins, 0);
  std::vector<std::int64_t> pair(64, 0);
  std::vector<std::int64_t> cross(64, 0);
  RandomStream st2(2024, 1, StreamPurpose::Coupling);
  for (std::int64_t i = -n / 2; i < n / 2; ++i) {
    double u = st.uniform_at(i);
    double v = st.uniform_at(i + 1);
    double w = st2.uniform_at(i);
    count[static_cast<int>(u * bins)]++;
    pair[static_cast<int>(u * 8) * 8 + static_cast<int>(v * 8)]++;
    cross[static_cast<int>(u * 8) * 8 + static_cast<int>(w * 8)]++;
  }
  auto chi2 = [&](const std::vector<std::int64_t>& c) {
    double expect = static_cast<double>(n) / static_cast<double>(c.size());
    double x = 0;
    for (std::int64_t v : c) {
      double d = static_cast<double>(v) - expect;
      x += d * d / expect;
    }
    return x;
  };
  // chi^2 with 63 dof: mean 63, sd ~11.2; [20, 120] is a ~5 sigma corridor.
  CHECK(chi2(count) > 20.0);
  CHECK(chi2(count) < 120.0);
  CHECK(chi2(pair) > 20.0);
  CHECK(chi2(pair) < 120.0);
  CHECK(chi2(cross) > 20.0);
  CHECK(chi2(cross) < 120.0);
}

TEST_CASE("order-0 kernel: coalescence depth is always zero") {
  ModelParams mp = family_a();
  KernelRuntime rt(KernelSpec::lower(mp, 0));
  CHECK(rt.depth() == 0);
  for (std::uint64_t rep = 0; rep < 200; ++rep) {
    RandomStream st(11, rep, StreamPurpose::Coupling);
    CHECK(coalescence_time(rt, st, 0) == 0);
    CHECK(regeneration_time(rt, st, 0) == 0);
  }
}

TEST_CASE("coalescence depth matches the naive linear-scan oracle") {
  ModelParams mp = family_a();
  std::vector<KernelSpec> specs = {
      KernelSpec::lower(mp, 1), KernelSpec::lower(mp, 2),
      KernelSpec::upper(mp, 2), KernelSpec::mixed(mp, 0, 2)};
  specs.push_back(KernelSpec::from_table(to_table(KernelSpec::lower(mp, 2))));
  for (const KernelSpec& spec : specs) {
    KernelRuntime rt(spec);
    for (std::uint64_t rep = 0; rep < 120; ++rep) {
      RandomStream st(314, rep, StreamPurpose::Coupling);
      CHECK(coalescence_time(rt, st, 3) == naive_theta(rt, st, 3));
    }
  }
}

TEST_CASE("theta is zero exactly when the driving uniform hits an emit cell") {
  ModelParams mp = family_a();
  KernelSpec spec = KernelSpec::lower(mp, 2);
  KernelRuntime rt(spec);
  IntervalPartition part = build_partition(spec);
  for (std::uint64_t rep = 0; rep < 400; ++rep) {
    RandomStream st(99, rep, StreamPurpose::Coupling);
    Rational u = rational_from_double(st.uniform_at(0));
    bool emit = part.cells()[part.locate(u)].action.type ==
                PartitionAction::Type::Emit;
    CHECK((coalescence_time(rt, st, 0) == 0) == emit);
  }
}

TEST_CASE("theta never exceeds eta") {
  for (const ModelParams& mp : {family_a(), family_b()}) {
    for (std::uint64_t k : {1, 2}) {
      KernelRuntime rt(KernelSpec::lower(mp, k));
      for (std::uint64_t rep = 0; rep < 1500; ++rep) {
        RandomStream st(777, rep, StreamPurpose::Coupling);
        std::uint64_t theta = coalescence_time(rt, st, 0);
        std::uint64_t eta = regeneration_time(rt, st, 0);
        REQUIRE(theta <= eta);
      }
    }
  }
}

TEST_CASE("eta sample mean matches the exact run-length expectation") {
  ModelParams mp = family_a();  // 2*epsilon = 1/2
  struct Combo {
    std::uint64_t k, m;
  };
  for (Combo c : {Combo{1, 1}, Combo{2, 3}}) {
    KernelRuntime rt(KernelSpec::lower(mp, c.k));
    REQUIRE(rt.depth() == c.m);
    const std::uint64_t n = 10000;
    double sum = 0, sumsq = 0;
    for (std::uint64_t rep = 0; rep < n; ++rep) {
      RandomStream st(1234, rep, StreamPurpose::Coupling);
      double e = static_cast<double>(regeneration_time(rt, st, 0));
      sum += e;
      sumsq += e * e;
    }
    double mean = sum / n;
    double sd = std::sqrt((sumsq / n - mean * mean) / n);
    // eta = (scan length) + m - 2 where the scan waits for m consecutive
    // base draws of probability 2*epsilon each.
    Rational expect =
        exact_expected_scan(c.m, mp.two_eps()) + static_cast<long>(c.m) - 2;
    double ex = expect.get_d();
    CHECK(std::abs(mean - ex) < 5 * sd + 1e-9);
    // The closed-form majorant m/(2eps)^m dominates the exact mean.
    Rational bound = Rational(static_cast<long>(c.m)) /
                     pow_rational(mp.two_eps(), c.m);
    CHECK(expect <= bound);
    CHECK(mean <= bound.get_d());
  }
}

TEST_CASE("forward simulation agrees with the explicit-history oracle") {
  for (MajorityWindow w : {MajorityWindow::MostRecent,
                           MajorityWindow::SkipMostRecent}) {
    ModelParams mp = family_a(Rational(1, 4), w);
    for (const KernelSpec& spec :
         {KernelSpec::lower(mp, 2), KernelSpec::mixed(mp, 1, 2),
          KernelSpec::mixed_prime(mp, 0, 2)}) {
      KernelRuntime rt(spec);
      RandomStream st(555, 3, StreamPurpose::Coupling);
      // Random but fixed past, longer than the kernel depth.
      std::vector<Spin> past;
      for (std::size_t i = 0; i < rt.depth() + 4; ++i)
        past.push_back(st.uniform_at(-1000 - static_cast<std::int64_t>(i)) < 0.5
                           ? Spin::Minus
                           : Spin::Plus);
      Context ctx(past);
      CHECK(forward_simulate(rt, st, ctx, 0, 299) ==
            naive_forward(spec, st, ctx, 0, 299));
    }
  }
}

TEST_CASE("forward simulation handles order 217 through the ring buffer") {
  ModelParams mp(Rational(1, 4), WeightFamily::geometric(Rational(1, 2), Rational(2, 3)),
                 OrderSequence::tower(577, 217));
  KernelSpec spec = KernelSpec::lower(mp, 1);
  KernelRuntime rt(spec);
  CHECK(rt.depth() == 217);
  RandomStream st(808, 0, StreamPurpose::Coupling);
  Context plus = Context::constant(230, Spin::Plus);
  std::vector<Spin> fast = forward_simulate(rt, st, plus, 0, 199);
  std::vector<Spin> slow = naive_forward(spec, st, plus, 0, 199);
  CHECK(fast == slow);
  // All-plus past keeps the majority window positive for a while, so the
  // chain behaves like the order-0 coin p(+1) = 1 - lambda_bar tail ... the
  // first symbol must match the partition applied to U_0 directly.
  IntervalPartition part = build_partition(spec);
  CHECK(fast[0] == part.apply(rational_from_double(st.uniform_at(0)), plus));
}

TEST_CASE("perfect sampling: both methods produce the identical window") {
  ModelParams mp = family_a();
  for (const KernelSpec& spec :
       {KernelSpec::lower(mp, 1), KernelSpec::lower(mp, 2),
        KernelSpec::mixed(mp, 0, 2), KernelSpec::upper(mp, 2)}) {
    KernelRuntime rt(spec);
    for (std::uint64_t rep = 0; rep < 300; ++rep) {
      RandomStream st(4242, rep, StreamPurpose::Coupling);
      CftpResult a =
          perfect_sample(rt, st, -2, 2, SampleMethod::MonotoneSandwich);
      CftpResult b =
          perfect_sample(rt, st, -2, 2, SampleMethod::RegenerationWindow);
      REQUIRE(a.symbols == b.symbols);
      CHECK(a.theta.has_value());
      CHECK(b.eta.has_value());
      CHECK(*a.theta <= *b.eta);
      CHECK(a.symbols.size() == 5);
    }
  }
}

TEST_CASE("perfect sampling is byte-reproducible") {
  ModelParams mp = family_b();
  KernelRuntime rt(KernelSpec::lower(mp, 2));
  RandomStream s1(31337, 5, StreamPurpose::Coupling);
  RandomStream s2(31337, 5, StreamPurpose::Coupling);
  CftpResult a = perfect_sample(rt, s1, 0, 9, SampleMethod::MonotoneSandwich);
  CftpResult b = perfect_sample(rt, s2, 0, 9, SampleMethod::MonotoneSandwich);
  CHECK(a.symbols == b.symbols);
  CHECK(a.theta == b.theta);
  CHECK(a.steps_used == b.steps_used);
  CHECK(a.master_seed == 31337);
  CHECK(a.replicate == 5);
}

TEST_CASE("stationary marginal of the depth-1 truncation is 7/10") {
  ModelParams mp = family_a();
  KernelSpec spec = KernelSpec::lower(mp, 1);
  // Partition-backed and table-backed runtimes realize different per-uniform
  // maps with the same law; both frequencies must sit in the 7/10 band.
  KernelSpec tabular = KernelSpec::from_table(to_table(spec));
  const std::uint64_t n = 20000;
  for (int mode = 0; mode < 2; ++mode) {
    KernelRuntime rt(mode == 0 ? spec : tabular);
    std::uint64_t plus = 0;
    for (std::uint64_t rep = 0; rep < n; ++rep) {
      RandomStream st(90210, rep, StreamPurpose::Coupling);
      CftpResult r =
          perfect_sample(rt, st, 0, 0, SampleMethod::MonotoneSandwich);
      plus += r.symbols[0] == Spin::Plus;
    }
    double freq = static_cast<double>(plus) / static_cast<double>(n);
    CHECK(std::abs(freq - 0.7) < 4 * frequency_sigma(0.7, n));
  }
}

TEST_CASE("order-0 marginal matches 1 - epsilon under both methods") {
  ModelParams mp = family_a();
  KernelRuntime rt(KernelSpec::lower(mp, 0));
  const std::uint64_t n = 4000;
  for (SampleMethod method : {SampleMethod::MonotoneSandwich,
                              SampleMethod::RegenerationWindow}) {
    std::uint64_t plus = 0;
    for (std::uint64_t rep = 0; rep < n; ++rep) {
      RandomStream st(60606, rep, StreamPurpose::Coupling);
      plus += perfect_sample(rt, st, 0, 0, method).symbols[0] == Spin::Plus;
    }
    double freq = static_cast<double>(plus) / static_cast<double>(n);
    CHECK(std::abs(freq - 0.75) < 4 * frequency_sigma(0.75, n));
  }
}

TEST_CASE("shared uniforms preserve the truncation ladder pathwise") {
  ModelParams mp = family_a();
  // Pointwise kernel order Lower(1) >= Lower(2) >= Mixed(1,2) and
  // Lower(2) >= Upper(2) >= Upper(1) transfers to the sampled windows.
  KernelRuntime l1(KernelSpec::lower(mp, 1)), l2(KernelSpec::lower(mp, 2));
  KernelRuntime u2(KernelSpec::upper(mp, 2)), u1(KernelSpec::upper(mp, 1));
  KernelRuntime q12(KernelSpec::mixed(mp, 1, 2));
  for (std::uint64_t rep = 0; rep < 400; ++rep) {
    RandomStream st(246810, rep, StreamPurpose::Coupling);
    auto sample = [&](KernelRuntime& rt) {
      return perfect_sample(rt, st, -1, 3, SampleMethod::MonotoneSandwich)
          .symbols;
    };
    std::vector<Spin> x1 = sample(l1), x2 = sample(l2), y2 = sample(u2),
                      y1 = sample(u1), q = sample(q12);
    for (std::size_t i = 0; i < x1.size(); ++i) {
      REQUIRE(spin_value(x1[i]) >= spin_value(x2[i]));
      REQUIRE(spin_value(x2[i]) >= spin_value(y2[i]));
      REQUIRE(spin_value(y2[i]) >= spin_value(y1[i]));
      REQUIRE(spin_value(x2[i]) >= spin_value(q[i]));
    }
  }
}

TEST_CASE("coupled sampling reports disagreements for the d-bar estimator") {
  ModelParams mp = family_a();
  CoupledCftpResult r = coupled_perfect_sample(
      KernelSpec::lower(mp, 0), KernelSpec::upper(mp, 0),
      RandomStream(5150, 0, StreamPurpose::Coupling), 0, 999,
      SampleMethod::MonotoneSandwich);
  // Order-0 extremes disagree exactly when U lands in [1/2, 1).
  double freq = static_cast<double>(r.disagreements) / 1000.0;
  CHECK(std::abs(freq - 0.5) < 4 * frequency_sigma(0.5, 1000));
  // Every disagreement has the lower kernel above the upper-variant kernel.
  for (std::size_t i = 0; i < r.first.symbols.size(); ++i)
    REQUIRE(spin_value(r.first.symbols[i]) >= spin_value(r.second.symbols[i]));
}

TEST_CASE("caps raise overflow errors, not silent truncation") {
  ModelParams mp = family_a();
  KernelRuntime rt(KernelSpec::lower(mp, 2));
  SimLimits tight;
  tight.max_scan = 2;
  bool scan_threw = false;
  for (std::uint64_t rep = 0; rep < 50 && !scan_threw; ++rep) {
    RandomStream st(808080, rep, StreamPurpose::Coupling);
    try {
      regeneration_time(rt, st, 0, tight);
    } catch (const OverflowError&) {
      scan_threw = true;
    }
  }
  CHECK(scan_threw);

  SimLimits shallow;
  shallow.max_depth = 1;
  bool depth_threw = false;
  for (std::uint64_t rep = 0; rep < 200 && !depth_threw; ++rep) {
    RandomStream st(808081, rep, StreamPurpose::Coupling);
    if (coalescence_time(rt, st, 0) <= 2) continue;
    try {
      coalescence_time(rt, st, 0, shallow);
    } catch (const OverflowError& e) {
      depth_threw = true;
      CHECK(std::string(e.what()).find("depth cap") != std::string::npos);
    }
  }
  CHECK(depth_threw);
}

TEST_CASE("non-attractive tables are rejected by the sandwich method") {
  // p(+|+) = 1/5 < p(+|-) = 4/5 violates attractivity.
  KernelRuntime rt(KernelSpec::from_table(
      TableKernel<Rational>(1, {Rational(4, 5), Rational(1, 5)})));
  CHECK(!rt.attractive());
  RandomStream st(1, 0, StreamPurpose::Coupling);
  CHECK_THROWS_AS(
      perfect_sample(rt, st, 0, 0, SampleMethod::MonotoneSandwich),
      PreconditionError);
  CHECK_THROWS_AS(regeneration_time(rt, st, 0), PreconditionError);
}
