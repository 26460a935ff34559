#include "doctest.h"

#include <cmath>

#include "ergoshift/fspace.hpp"
#include "ergoshift/rng.hpp"

using namespace ergoshift;

namespace {

SparseVector random_vector(SplitMix64& rng, IndexKind kind, std::int64_t radius = 12,
                           int max_support = 6) {
  SparseVector x(kind);
  const int n = static_cast<int>(rng.next_in(0, max_support));
  for (int i = 0; i < n; ++i) {
    const std::int64_t lo = kind == IndexKind::Unilateral ? 1 : -radius;
    const std::int64_t idx = rng.next_in(lo, radius);
    x.set(idx, (rng.next_double() - 0.5) * 6.0);
  }
  return x;
}

// direct oracle for the omega F-norm
double omega_norm_direct(const SparseVector& x) {
  double s = 0.0;
  for (const auto& [i, v] : x.entries())
    s += std::pow(2.0, static_cast<double>(-i)) * std::fabs(v) / (1.0 + std::fabs(v));
  return s;
}

}  // namespace

TEST_SUITE("fspace") {

TEST_CASE("lp norm basics") {
  const FSpace l2 = FSpace::lp(2.0);
  SparseVector x(IndexKind::Unilateral);
  x.set(1, 3.0);
  x.set(2, 4.0);
  CHECK(f_norm(l2, x) == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(f_norm(l2, SparseVector(IndexKind::Unilateral)) == 0.0);
  CHECK(f_norm(FSpace::omega(), SparseVector(IndexKind::Unilateral)) == 0.0);
}

TEST_CASE("omega norm matches the Frechet sum") {
  const FSpace om = FSpace::omega();
  CHECK(f_norm(om, SparseVector::unit(IndexKind::Unilateral, 1)) ==
        doctest::Approx(0.25).epsilon(1e-15));
  SplitMix64 rng = substream(11, "omega-norm");
  for (int t = 0; t < 200; ++t) {
    const SparseVector x = random_vector(rng, IndexKind::Unilateral);
    CHECK(f_norm(om, x) == doctest::Approx(omega_norm_direct(x)).epsilon(1e-13));
  }
}

TEST_CASE("space construction rejects bad parameters") {
  CHECK_THROWS_AS(FSpace::lp(0.0), std::invalid_argument);
  CHECK_THROWS_AS(FSpace::lp(-1.0), std::invalid_argument);
  CHECK_THROWS_AS(FSpace::lp(2.0, 0.0), std::invalid_argument);
  // omega is unilateral only
  CHECK_THROWS_AS(f_norm(FSpace::omega(), SparseVector(IndexKind::Bilateral)),
                  std::invalid_argument);
}

TEST_CASE("neighborhood radii") {
  const FSpace l2 = FSpace::lp(2.0);
  CHECK(neighborhood_radius(l2, 1) == 0.5);
  CHECK(neighborhood_radius(l2, 3) == 0.125);
  CHECK_THROWS_AS(neighborhood_radius(l2, 0), std::invalid_argument);
  // membership: F(x) = 0.3 < r_1
  SparseVector x = SparseVector::unit(IndexKind::Unilateral, 4, 0.3);
  CHECK(f_norm(l2, x) < neighborhood_radius(l2, 1));
}

TEST_CASE("vector arithmetic") {
  SparseVector e1 = SparseVector::unit(IndexKind::Unilateral, 1);
  CHECK(vec_add(e1, e1).at(1) == 2.0);
  SplitMix64 rng = substream(12, "vec-arith");
  const SparseVector x = random_vector(rng, IndexKind::Bilateral);
  CHECK(vec_scale(0.0, x).empty());
  CHECK_THROWS_AS(vec_add(e1, SparseVector(IndexKind::Bilateral)), std::invalid_argument);
  CHECK_THROWS_AS(SparseVector(IndexKind::Unilateral).set(0, 1.0), std::invalid_argument);

  // canonical form: cancellation removes the entry
  SparseVector y = e1;
  y.add(1, -1.0);
  CHECK(y.empty());
}

TEST_CASE("truncation reports the discarded norm") {
  const FSpace l2 = FSpace::lp(2.0);
  SparseVector x(IndexKind::Unilateral);
  x.set(1, 3.0);
  x.set(5, 4.0);
  const TruncateResult r = vec_truncate(l2, x, 1, 3);
  CHECK(r.kept.at(1) == 3.0);
  CHECK(r.kept.support_size() == 1);
  CHECK(r.discarded_norm == doctest::Approx(4.0).epsilon(1e-15));
}

TEST_CASE("subadditivity and balancedness across the space families") {
  const FSpace spaces[] = {FSpace::lp(2.0), FSpace::lp(1.0), FSpace::lp(0.5), FSpace::omega()};
  SplitMix64 rng = substream(13, "subadd");
  for (const FSpace& sp : spaces) {
    const IndexKind kind =
        sp.kind() == FSpace::Kind::Omega ? IndexKind::Unilateral : IndexKind::Bilateral;
    for (int t = 0; t < 2500; ++t) {
      const SparseVector x = random_vector(rng, kind);
      const SparseVector y = random_vector(rng, kind);
      CHECK(f_norm(sp, vec_add(x, y)) <= f_norm(sp, x) + f_norm(sp, y) + 1e-12);
      CHECK(f_norm(sp, vec_scale(-1.0, x)) == doctest::Approx(f_norm(sp, x)).epsilon(1e-14));
      const double c = (rng.next_double() * 2.0 - 1.0);  // |c| <= 1
      CHECK(f_norm(sp, vec_scale(c, x)) <= f_norm(sp, x) + 1e-12);
    }
  }
}

TEST_CASE("neighborhood chain U_{n+1} + U_{n+1} inside U_n") {
  const FSpace spaces[] = {FSpace::lp(2.0), FSpace::lp(0.5), FSpace::omega()};
  SplitMix64 rng = substream(14, "chain");
  for (const FSpace& sp : spaces) {
    const IndexKind kind =
        sp.kind() == FSpace::Kind::Omega ? IndexKind::Unilateral : IndexKind::Bilateral;
    auto shrink_into = [&sp](SparseVector v, double target) {
      for (int i = 0; i < 4000 && f_norm(sp, v) >= target; ++i) v = vec_scale(0.5, v);
      return v;
    };
    for (int n = 1; n <= 30; ++n) {
      const double rn = neighborhood_radius(sp, n);
      const double rn1 = neighborhood_radius(sp, n + 1);
      for (int t = 0; t < 20; ++t) {
        const SparseVector x = shrink_into(random_vector(rng, kind), rn1);
        const SparseVector y = shrink_into(random_vector(rng, kind), rn1);
        REQUIRE(f_norm(sp, x) < rn1);
        REQUIRE(f_norm(sp, y) < rn1);
        CHECK(f_norm(sp, vec_add(x, y)) < rn);
      }
    }
  }
}

}  // TEST_SUITE
