#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "bksim/cftp.hpp"
#include "bksim/exact.hpp"
#include "bksim/kernels.hpp"
#include "helpers.hpp"

using namespace bk;
using bktest::family_a;
using bktest::random_attractive_table;

TEST_CASE("stationary law of the depth-1 truncation, frozen") {
  ModelParams mp = family_a();
  TableKernel<Rational> t = to_table(KernelSpec::lower(mp, 1));
  StateDist<Rational> pi = stationary_exact(t);
  REQUIRE(pi.pi.size() == 2);
  CHECK(pi.pi[0] == Rational(3, 10));  // most recent symbol -1
  CHECK(pi.pi[1] == Rational(7, 10));  // most recent symbol +1
  CHECK(marginal_plus(pi, t) == Rational(7, 10));
  CHECK(plus_bit_mass(pi) == Rational(7, 10));

  TableKernel<Rational> u = to_table(KernelSpec::upper(mp, 1));
  StateDist<Rational> piu = stationary_exact(u);
  CHECK(marginal_plus(piu, u) == Rational(3, 10));
}

TEST_CASE("order-0 kernel has the one-point stationary law") {
  ModelParams mp = family_a();
  TableKernel<Rational> t = to_table(KernelSpec::lower(mp, 0));
  StateDist<Rational> pi = stationary_exact(t);
  REQUIRE(pi.pi.size() == 1);
  CHECK(pi.pi[0] == 1);
  CHECK(marginal_plus(pi, t) == Rational(3, 4));
}

TEST_CASE("bit-mass identity and route cross-validation on random tables") {
  std::mt19937_64 rng(2718);
  for (std::uint64_t order : {1, 2, 4, 6}) {
    for (int trial = 0; trial < 3; ++trial) {
      TableKernel<Rational> t = random_attractive_table(order, rng);
      StateDist<Rational> pi = stationary_exact(t);
      CHECK(plus_bit_mass(pi) == marginal_plus(pi, t));

      TableKernel<double> td = to_double_table(t);
      StateDist<double> dense = stationary_dense(td);
      StateDist<double> power = stationary_power(td);
      for (std::uint64_t s = 0; s < t.states(); ++s) {
        CHECK(std::abs(dense.pi[s] - pi.pi[s].get_d()) < 1e-12);
        CHECK(std::abs(power.pi[s] - pi.pi[s].get_d()) < 1e-12);
      }
    }
  }
}

TEST_CASE("power iteration matches dense LU on a 1024-state kernel") {
  std::mt19937_64 rng(3141);
  TableKernel<Rational> t = random_attractive_table(10, rng);
  TableKernel<double> td = to_double_table(t);
  StateDist<double> dense = stationary_dense(td);
  StateDist<double> power = stationary_power(td);
  double worst = 0;
  for (std::uint64_t s = 0; s < td.states(); ++s)
    worst = std::max(worst, std::abs(dense.pi[s] - power.pi[s]));
  CHECK(worst < 1e-10);
}

TEST_CASE("exact distances along the truncation ladder, frozen") {
  ModelParams mp = family_a();
  auto dbar = [&](std::uint64_t k) {
    return exact_dbar_attractive(KernelSpec::lower(mp, k),
                                 KernelSpec::upper(mp, k));
  };
  DbarExact d0 = dbar(0), d1 = dbar(1), d2 = dbar(2), d3 = dbar(3);
  CHECK(d0.value == Rational(1, 2));  // exactly 1 - 2*epsilon
  CHECK(d0.value == mp.contrast());
  CHECK(d1.value == Rational(2, 5));
  CHECK(d2.value == Rational(157, 489));
  CHECK(d2.marginal_x == Rational(323, 489));
  CHECK(d3.value == parse_rational("2666974036453817/10601357054270923"));
  // Distances shrink as the truncation deepens; marginals are ordered.
  CHECK(d0.value > d1.value);
  CHECK(d1.value > d2.value);
  CHECK(d2.value > d3.value);
  CHECK(d0.marginal_x > d1.marginal_x);
  CHECK(d1.marginal_x > d2.marginal_x);
  CHECK(d2.marginal_x > d3.marginal_x);
  CHECK(d3.marginal_x > d3.marginal_y);
  CHECK(d2.marginal_y > d1.marginal_y);
  CHECK(d1.marginal_y > d0.marginal_y);
}

TEST_CASE("distance route refuses pairs without domination") {
  ModelParams mp = family_a();
  CHECK_THROWS_AS(exact_dbar_attractive(KernelSpec::upper(mp, 1),
                                        KernelSpec::lower(mp, 1)),
                  PreconditionError);
}

TEST_CASE("entropy rate of the depth-1 truncation") {
  ModelParams mp = family_a();
  TableKernel<Rational> t = to_table(KernelSpec::lower(mp, 1));
  TableKernel<double> td = to_double_table(t);
  StateDist<Rational> pi = stationary_exact(t);
  StateDist<double> pid{pi.order, {pi.pi[0].get_d(), pi.pi[1].get_d()}};
  double h = entropy_rate(pid, td);
  // Independent formula: pi(+) H(p(+|+)) + pi(-) H(p(+|-)) in nats.
  auto bin_entropy = [](double p) {
    return -p * std::log(p) - (1 - p) * std::log(1 - p);
  };
  double oracle = 0.7 * bin_entropy(0.75) + 0.3 * bin_entropy(7.0 / 12.0);
  CHECK(std::abs(h - oracle) < 1e-14);
  CHECK(h == doctest::Approx(0.597392581030624).epsilon(1e-12));
  CHECK(h > 0);
  CHECK(h < std::log(2.0));
}

TEST_CASE("transfer operator: exact single step and iterated convergence") {
  ModelParams mp = family_a();
  TableKernel<Rational> t = to_table(KernelSpec::lower(mp, 1));
  // f = indicator of most-recent-symbol +1; states 0 -> p(+|-), 1 -> p(+|+).
  std::vector<Rational> f = {Rational(0), Rational(1)};
  std::vector<Rational> lf = ruelle_apply(t, f);
  CHECK(lf[0] == Rational(7, 12));
  CHECK(lf[1] == Rational(3, 4));
  // Iterating flattens the function toward the stationary marginal.
  TableKernel<double> td = to_double_table(t);
  std::vector<double> g = {0.0, 1.0};
  for (int it = 0; it < 200; ++it) g = ruelle_apply(td, g);
  CHECK(std::abs(g[0] - 0.7) < 1e-12);
  CHECK(std::abs(g[1] - 0.7) < 1e-12);
}

TEST_CASE("greedy one-step coupling reproduces both marginals maximally") {
  std::mt19937_64 rng(5882);
  TableKernel<Rational> gx = random_attractive_table(3, rng);
  TableKernel<Rational> gy = random_attractive_table(2, rng);
  CoupledKernel<Rational> c = hulse_coupling(gx, gy);
  for (std::uint64_t pr = 0; pr < c.pair_states(); ++pr) {
    const auto& p = c.p[pr];
    for (int o = 0; o < 4; ++o) CHECK(sgn(p[o]) >= 0);
    CHECK(p[0] + p[1] + p[2] + p[3] == 1);
    CHECK(p[0] + p[1] == gx.p_plus(c.sx_of(pr)));
    CHECK(p[0] + p[2] == gy.p_plus(c.sy_of(pr)));
    // Maximality: at most one off-diagonal outcome carries mass.
    CHECK(p[1] * p[2] == 0);
  }
}

TEST_CASE("shared-uniform partition coupling matches the kernels cellwise") {
  ModelParams mp = family_a();
  KernelSpec sx = KernelSpec::lower(mp, 2), sy = KernelSpec::upper(mp, 2);
  CoupledKernel<Rational> c = partition_coupling(build_partition(sx),
                                                 build_partition(sy));
  for (std::uint64_t pr = 0; pr < c.pair_states(); ++pr) {
    Context cx = Context::from_bits(c.sx_of(pr), c.order_x);
    Context cy = Context::from_bits(c.sy_of(pr), c.order_y);
    const auto& p = c.p[pr];
    CHECK(p[0] + p[1] + p[2] + p[3] == 1);
    CHECK(p[0] + p[1] == kernel_eval(sx, Spin::Plus, cx));
    CHECK(p[0] + p[2] == kernel_eval(sy, Spin::Plus, cy));
  }
  // Self-coupling: equal contexts are perfectly coupled (diagonal forever).
  CoupledKernel<Rational> self = partition_coupling(build_partition(sx),
                                                    build_partition(sx));
  for (std::uint64_t s = 0; s < (std::uint64_t{1} << self.order_x); ++s) {
    const auto& p = self.p[self.pair_index(s, s)];
    CHECK(p[1] == 0);
    CHECK(p[2] == 0);
  }
}

TEST_CASE("pair stationary law: frozen masses and the distance identity") {
  ModelParams mp = family_a();
  CoupledKernel<Rational> c =
      partition_coupling(build_partition(KernelSpec::lower(mp, 1)),
                         build_partition(KernelSpec::upper(mp, 1)));
  StateDist<Rational> pp = pair_stationary_exact(c);
  CHECK(pp.pi[0] == Rational(3, 10));  // (-,-)
  CHECK(pp.pi[1] == 0);                // (-,+) transient under ordering
  CHECK(pp.pi[2] == Rational(2, 5));   // (+,-)
  CHECK(pp.pi[3] == Rational(3, 10));  // (+,+)
  Rational dis = disagreement_probability(c, pp);
  CHECK(dis == Rational(2, 5));
  // State-level disagreement mass agrees with the one-step version.
  Rational state_dis(0);
  for (std::uint64_t pr = 0; pr < c.pair_states(); ++pr)
    if ((c.sx_of(pr) ^ c.sy_of(pr)) & 1) state_dis += pp.pi[pr];
  CHECK(state_dis == dis);
  // And both equal the exact Ornstein distance.
  CHECK(dis == exact_dbar_attractive(KernelSpec::lower(mp, 1),
                                     KernelSpec::upper(mp, 1))
                   .value);
}

TEST_CASE("pair stationary identity at depth 2 as well") {
  ModelParams mp = family_a();
  CoupledKernel<Rational> c =
      partition_coupling(build_partition(KernelSpec::lower(mp, 2)),
                         build_partition(KernelSpec::upper(mp, 2)));
  StateDist<Rational> pp = pair_stationary_exact(c);
  CHECK(disagreement_probability(c, pp) == Rational(157, 489));
}

TEST_CASE("coalescence tails: closed form at depth 1, frozen at depth 2") {
  ModelParams mp = family_a();
  std::vector<Rational> t1 = theta_tail_exact(KernelSpec::lower(mp, 1), 6);
  for (std::uint64_t d = 0; d <= 6; ++d)
    CHECK(t1[d] == pow_rational(Rational(1, 6), d + 1));
  std::vector<Rational> t2 = theta_tail_exact(KernelSpec::lower(mp, 2), 4);
  CHECK(t2[0] == Rational(5, 18));
  CHECK(t2[1] == Rational(17, 108));
  CHECK(t2[2] == Rational(269, 2916));
  CHECK(t2[3] == Rational(4411, 104976));
  CHECK(t2[4] == Rational(40007, 1889568));
  for (std::uint64_t d = 0; d + 1 <= 4; ++d) CHECK(t2[d + 1] < t2[d]);
  // Order-0 kernels coalesce instantly.
  std::vector<Rational> t0 = theta_tail_exact(KernelSpec::lower(mp, 0), 3);
  for (const Rational& v : t0) CHECK(v == 0);
}

TEST_CASE("empirical coalescence depths match the exact tail") {
  ModelParams mp = family_a();
  KernelSpec spec = KernelSpec::lower(mp, 2);
  std::vector<Rational> tail = theta_tail_exact(spec, 4);
  KernelRuntime rt(spec);
  const std::uint64_t n = 20000;
  std::vector<std::uint64_t> exceed(5, 0);
  for (std::uint64_t rep = 0; rep < n; ++rep) {
    RandomStream st(171717, rep, StreamPurpose::Coupling);
    std::uint64_t theta = coalescence_time(rt, st, 0);
    for (std::uint64_t d = 0; d <= 4; ++d) exceed[d] += theta > d;
  }
  for (std::uint64_t d = 0; d <= 4; ++d) {
    double p = tail[d].get_d();
    double freq = static_cast<double>(exceed[d]) / static_cast<double>(n);
    double sigma = std::sqrt(p * (1 - p) / static_cast<double>(n));
    CHECK(std::abs(freq - p) < 4 * sigma + 1e-9);
  }
}

TEST_CASE("chains with several recurrent classes are rejected") {
  // Both all-plus and all-minus are absorbing: stationary law not unique.
  TableKernel<Rational> t(1, {Rational(0), Rational(1)});
  CHECK_THROWS_AS(stationary_exact(t), PreconditionError);
}

TEST_CASE("exact route caps are enforced") {
  std::mt19937_64 rng(1);
  TableKernel<Rational> t = random_attractive_table(10, rng);
  CHECK_THROWS_AS(stationary_exact(t), PreconditionError);  // 1024 > 512
}
