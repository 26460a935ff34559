#include "doctest.h"

#include <cmath>
#include <memory>

#include "ergoshift/rng.hpp"
#include "ergoshift/stats.hpp"
#include "ergoshift/symbolic.hpp"

using namespace ergoshift;

namespace {

std::shared_ptr<ConstraintProfile> small_profile(IndexKind side) {
  // gaps 2, 3, 4, 5: strictly growing
  return std::make_shared<ConstraintProfile>(side, std::vector<std::int64_t>{1, 3, 6, 10, 15});
}

}  // namespace

TEST_SUITE("symbolic") {

TEST_CASE("profile caps follow the schedule") {
  const auto p = small_profile(IndexKind::Bilateral);
  CHECK(p->N(0) == 0);
  CHECK(p->N(1) == 1);
  CHECK(p->cap(0) == 1);
  CHECK(p->cap(1) == 1);
  CHECK(p->cap(-1) == 1);
  CHECK(p->cap(2) == 1);   // N_1 < 2 <= N_2
  CHECK(p->cap(3) == 1);
  CHECK(p->cap(4) == 2);   // N_2 < 4 <= N_3
  CHECK(p->cap(-6) == 2);
  CHECK(p->cap(7) == 3);
  CHECK(p->cap(15) == 4);
  CHECK_THROWS_AS(p->cap(16), std::invalid_argument);
  CHECK_THROWS_AS(p->N(6), std::runtime_error);  // no extender installed

  CHECK_THROWS_AS(ConstraintProfile(IndexKind::Bilateral, {1, 3, 5, 7}), std::invalid_argument);
  CHECK_THROWS_AS(ConstraintProfile(IndexKind::Bilateral, {3, 2}), std::invalid_argument);
}

TEST_CASE("geometric weights") {
  const SymbolWeights w = SymbolWeights::geometric(0.9);
  CHECK(w.prob(1) == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(w.prob(2) == doctest::Approx(0.09).epsilon(1e-12));
  CHECK(w.survival(0) == 1.0);
  double total = 0.0;
  for (std::int64_t n = 1; n <= 50; ++n) total += w.prob(n);
  CHECK(total + w.survival(50) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(w.beta(1), std::runtime_error);
  CHECK_THROWS_AS(w.log_beta_tail(1), std::runtime_error);
}

TEST_CASE("schedule-rule weights make the block factors exact") {
  const auto p = small_profile(IndexKind::Bilateral);
  const double theta = 0.5;
  const SymbolWeights w = SymbolWeights::schedule_rule(theta, p);

  // beta_l = cumulative(l)^gap(l) must equal 1 - theta 2^-l by construction
  for (std::int64_t l = 1; l <= 4; ++l) {
    const double direct = std::pow(w.cumulative(l), static_cast<double>(p->gap(l)));
    CHECK(w.beta(l) == doctest::Approx(1.0 - theta * std::ldexp(1.0, -static_cast<int>(l)))
                           .epsilon(1e-15));
    CHECK(direct == doctest::Approx(w.beta(l)).epsilon(1e-13));
  }
  // positivity and monotonicity of the survival
  double prev = 1.0;
  for (std::int64_t j = 1; j <= 4; ++j) {
    CHECK(w.survival(j) > 0.0);
    CHECK(w.survival(j) < prev);
    CHECK(w.prob(j) > 0.0);
    CHECK(w.survival(j) <= w.survival_bound(j) + 1e-18);
    prev = w.survival(j);
  }
}

TEST_CASE("beta from an explicit cumulative: c=0.5 with gap 2 gives 0.25") {
  // direct arithmetic on the beta formula, independent of the weight rule
  const SymbolWeights w = SymbolWeights::geometric(0.5);  // cumulative(1) = 0.5
  CHECK(w.beta_direct(1, 2) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("sampling: determinism, near-degenerate head, CLT band") {
  const SymbolWeights w = SymbolWeights::geometric(0.9);
  SplitMix64 a = substream(7, "sampling");
  SplitMix64 b = substream(7, "sampling");
  const SymbolSequence s1 = sample_symbols(w, -5, 30, a);
  const SymbolSequence s2 = sample_symbols(w, -5, 30, b);
  CHECK(s1 == s2);

  // near-degenerate: p_1 = 1 - 1e-12 makes 10^3 coordinates all ones
  const SymbolWeights deg = SymbolWeights::geometric(1.0 - 1e-12);
  SplitMix64 c = substream(8, "degenerate");
  const SymbolSequence sd = sample_symbols(deg, 1, 1000, c);
  bool all_one = true;
  for (std::int64_t k = 1; k <= 1000; ++k) all_one = all_one && sd.at(k) == 1;
  CHECK(all_one);

  // empirical frequency of symbol 1 with p1 = 0.9 within 3 sigma of the CLT
  SplitMix64 d = substream(9, "clt");
  std::int64_t hits = 0;
  const std::int64_t n = 100000;
  for (std::int64_t t = 0; t < n; ++t) hits += w.sample(d) == 1 ? 1 : 0;
  const double freq = static_cast<double>(hits) / static_cast<double>(n);
  CHECK(std::fabs(freq - 0.9) <= 3.0 * 0.3 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("shift bookkeeping") {
  SplitMix64 rng = substream(10, "shift");
  const SymbolWeights w = SymbolWeights::geometric(0.5);
  const SymbolSequence s = sample_symbols(w, -8, 8, rng);

  CHECK(shift_symbols(s, 0) == s);
  const SymbolSequence s1 = shift_symbols(s, 1);
  for (std::int64_t k = s1.lo(); k <= s1.hi(); ++k) CHECK(s1.at(k) == s.at(k + 1));

  const std::int64_t a = rng.next_in(-5, 5), b = rng.next_in(-5, 5);
  const SymbolSequence left = shift_symbols(shift_symbols(s, a), b);
  const SymbolSequence right = shift_symbols(s, a + b);
  CHECK(left == right);
}

TEST_CASE("admissibility tagging against K(s)") {
  const auto p = small_profile(IndexKind::Bilateral);
  // all-ones is admissible everywhere
  SymbolSequence ones(-10, std::vector<std::int64_t>(21, 1));
  CHECK(check_admissible(*p, ones));
  // symbol 2 at coordinate 2 violates F_2 = {1}
  std::vector<std::int64_t> v(21, 1);
  v[12] = 2;  // coordinate +2
  const SymbolSequence bad(-10, v);
  CHECK_FALSE(check_admissible(*p, bad));
  // shifting moves the tag so admissibility is preserved
  const SymbolSequence shifted = shift_symbols(ones, 3);
  CHECK(check_admissible(*p, shifted));
}

TEST_CASE("cylinder measures: products and invariance") {
  const SymbolWeights w = SymbolWeights::geometric(0.7);
  CHECK(cylinder_measure(w, {}) == 1.0);
  CHECK(cylinder_measure(w, {{0, AdmissibleSet::of({1})}}) ==
        doctest::Approx(w.prob(1)).epsilon(1e-15));
  const double expect = w.prob(1) * (w.prob(1) + w.prob(2));
  const double got =
      cylinder_measure(w, {{0, AdmissibleSet::of({1})}, {5, AdmissibleSet::of({1, 2})}});
  CHECK(got == doctest::Approx(expect).epsilon(1e-15));

  // Monte-Carlo cross-check within a Hoeffding band
  SplitMix64 rng = substream(31, "cyl-mc");
  std::int64_t hits = 0;
  const std::int64_t n = 100000;
  for (std::int64_t t = 0; t < n; ++t) {
    const SymbolSequence s = sample_symbols(w, 0, 5, rng);
    if (s.at(0) == 1 && s.at(5) <= 2) ++hits;
  }
  const double freq = static_cast<double>(hits) / static_cast<double>(n);
  CHECK(std::fabs(freq - got) <= 3.0 * hoeffding_radius(n, 0.01));

  // sigma-invariance is exact (bitwise): shifting all constraints
  const std::vector<std::pair<std::int64_t, AdmissibleSet>> cs = {
      {-2, AdmissibleSet::of({2})}, {1, AdmissibleSet::range(1, 3)}};
  CHECK(cylinder_measure(w, cs) == cylinder_measure(w, shift_constraints(cs, 1)));

  // intersecting constraints on the same coordinate
  const double inter = cylinder_measure(
      w, {{0, AdmissibleSet::range(1, 3)}, {0, AdmissibleSet::of({2, 3, 4})}});
  CHECK(inter == doctest::Approx(w.prob(2) + w.prob(3)).epsilon(1e-14));

  // cofinite sets
  const double cof = cylinder_measure(w, {{0, AdmissibleSet::excluding({1})}});
  CHECK(cof == doctest::Approx(1.0 - w.prob(1)).epsilon(1e-14));

  // cofinite intersected with cofinite excludes the union
  const double c2 = cylinder_measure(
      w, {{0, AdmissibleSet::excluding({1})}, {0, AdmissibleSet::excluding({2})}});
  CHECK(c2 == doctest::Approx(1.0 - w.prob(1) - w.prob(2)).epsilon(1e-13));

  // finite intersected with cofinite drops the excluded symbols
  const double c3 = cylinder_measure(
      w, {{0, AdmissibleSet::range(1, 3)}, {0, AdmissibleSet::excluding({2})}});
  CHECK(c3 == doctest::Approx(w.prob(1) + w.prob(3)).epsilon(1e-13));
}

TEST_CASE("exact mixing identity for disjoint windows") {
  const SymbolWeights w = SymbolWeights::geometric(0.6);
  SplitMix64 rng = substream(32, "mixing-oracle");
  for (int t = 0; t < 200; ++t) {
    std::vector<std::pair<std::int64_t, AdmissibleSet>> A, B;
    const int na = static_cast<int>(rng.next_in(1, 3));
    for (int i = 0; i < na; ++i)
      A.push_back({rng.next_in(-4, 4), AdmissibleSet::range(1, rng.next_in(1, 4))});
    const int nb = static_cast<int>(rng.next_in(1, 3));
    for (int i = 0; i < nb; ++i)
      B.push_back({rng.next_in(-4, 4), AdmissibleSet::range(1, rng.next_in(1, 4))});
    const std::int64_t lag = rng.next_in(9, 100);  // pushes B's window past A's
    auto joint = A;
    const auto shifted = shift_constraints(B, lag);
    joint.insert(joint.end(), shifted.begin(), shifted.end());
    const double lhs = cylinder_measure(w, joint);
    const double rhs = cylinder_measure(w, A) * cylinder_measure(w, B);
    CHECK(std::fabs(lhs - rhs) <= 1e-14);
  }
}

TEST_CASE("k-measure lower bound") {
  const auto p = small_profile(IndexKind::Bilateral);
  const SymbolWeights w = SymbolWeights::schedule_rule(0.5, p);

  const KMeasureBound b3 = k_measure_lower_bound(w, *p, 3);
  CHECK(b3.partial > 0.0);
  CHECK(b3.certified > 0.0);
  CHECK(b3.tail_factor > 0.0);
  CHECK(b3.tail_factor < 1.0);
  CHECK(b3.certified <= b3.partial);

  // partial products are nonincreasing in L
  double prev = k_measure_lower_bound(w, *p, 1).partial;
  for (std::int64_t L = 2; L <= 5; ++L) {
    const double cur = k_measure_lower_bound(w, *p, L).partial;
    CHECK(cur <= prev + 1e-18);
    prev = cur;
  }

  // direct product oracle: beta factors multiplied one at a time
  // (stops at depth-1 because the direct route needs the gap of each level)
  const std::int64_t L = 4;
  double direct = std::pow(w.prob(1), static_cast<double>(2 * p->N(1) + 1));
  for (std::int64_t l = 1; l <= L; ++l)
    direct *= std::pow(w.beta_direct(l, p->gap(l)), 2.0);
  CHECK(k_measure_lower_bound(w, *p, L).partial == doctest::Approx(direct).epsilon(1e-13));

  // unilateral variant uses the single product and N_1 forced coordinates
  const auto pu = small_profile(IndexKind::Unilateral);
  const SymbolWeights wu = SymbolWeights::schedule_rule(0.5, pu);
  double direct_u = std::pow(wu.prob(1), static_cast<double>(pu->N(1)));
  for (std::int64_t l = 1; l <= 2; ++l) direct_u *= wu.beta_direct(l, pu->gap(l));
  CHECK(k_measure_lower_bound(wu, *pu, 2).partial == doctest::Approx(direct_u).epsilon(1e-13));

  CHECK_THROWS_AS(k_measure_lower_bound(w, *p, 0), std::invalid_argument);
  CHECK_THROWS_AS(k_measure_lower_bound(w, *p, 9), std::invalid_argument);
}

}  // TEST_SUITE
