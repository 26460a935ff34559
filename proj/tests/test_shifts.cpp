#include "doctest.h"

#include <cmath>
#include <set>

#include "ergoshift/fspace.hpp"
#include "ergoshift/rng.hpp"
#include "ergoshift/shifts.hpp"

using namespace ergoshift;

namespace {

SparseVector random_sparse(SplitMix64& rng, IndexKind kind, std::int64_t radius = 10) {
  SparseVector x(kind);
  const int n = static_cast<int>(rng.next_in(1, 5));
  for (int i = 0; i < n; ++i) {
    const std::int64_t lo = kind == IndexKind::Unilateral ? 1 : -radius;
    x.set(rng.next_in(lo, radius), (rng.next_double() - 0.5) * 4.0);
  }
  return x;
}

double max_coord_diff(const SparseVector& a, const SparseVector& b) {
  double worst = 0.0;
  for (const auto& [i, v] : a.entries()) worst = std::max(worst, std::fabs(v - b.at(i)));
  for (const auto& [i, v] : b.entries()) worst = std::max(worst, std::fabs(v - a.at(i)));
  return worst;
}

}  // namespace

TEST_SUITE("shifts") {

TEST_CASE("backward action on basis vectors") {
  const WeightedShift dbl(IndexKind::Unilateral, ConstantWeights{2.0});
  CHECK(dbl.apply_backward(SparseVector::unit(IndexKind::Unilateral, 2)).at(1) == 2.0);
  CHECK(dbl.apply_backward(SparseVector::unit(IndexKind::Unilateral, 1)).empty());

  const WeightedShift one(IndexKind::Bilateral, ConstantWeights{1.0});
  const SparseVector moved = one.apply_backward(SparseVector::unit(IndexKind::Bilateral, 0));
  CHECK(moved.at(-1) == 1.0);
  CHECK(moved.support_size() == 1);
}

TEST_CASE("right inverse basics") {
  const WeightedShift one(IndexKind::Unilateral, ConstantWeights{1.0});
  const SparseVector s1e1 = one.apply_right_inverse(1, SparseVector::unit(IndexKind::Unilateral, 1));
  CHECK(s1e1.at(2) == 1.0);
  CHECK(one.apply_backward(s1e1).at(1) == 1.0);
  CHECK(one.apply_right_inverse(7, SparseVector(IndexKind::Unilateral)).empty());
}

TEST_CASE("right inverse identities hold to 1e-12") {
  const WeightedShift shifts[] = {
      WeightedShift(IndexKind::Unilateral, ConstantWeights{2.0}),
      WeightedShift(IndexKind::Bilateral, PowerRatioWeights{3.0}),
      WeightedShift(IndexKind::Unilateral, TableWeights{1, {0.5, -3.0, 1.25}, 1.0, 2.0}),
  };
  SplitMix64 rng = substream(21, "identities");
  for (const auto& op : shifts) {
    for (int t = 0; t < 333; ++t) {
      const SparseVector x = random_sparse(rng, op.side());
      const std::int64_t n = rng.next_in(1, 20);
      const std::int64_t m = rng.next_in(0, n - 1);
      const SparseVector sn = op.apply_right_inverse(n, x);
      CHECK(max_coord_diff(op.apply_backward_n(sn, n), x) <= 1e-12);
      if (m >= 1)
        CHECK(max_coord_diff(op.apply_backward_n(sn, m), op.apply_right_inverse(n - m, x)) <=
              1e-12);
    }
  }
}

TEST_CASE("backward action is linear") {
  const WeightedShift op(IndexKind::Bilateral, PowerRatioWeights{2.0});
  SplitMix64 rng = substream(22, "linear");
  for (int t = 0; t < 300; ++t) {
    const SparseVector x = random_sparse(rng, IndexKind::Bilateral);
    const SparseVector y = random_sparse(rng, IndexKind::Bilateral);
    const double a = rng.next_double() * 4.0 - 2.0;
    const double b = rng.next_double() * 4.0 - 2.0;
    const SparseVector lhs = op.apply_backward(vec_add(vec_scale(a, x), vec_scale(b, y)));
    const SparseVector rhs =
        vec_add(vec_scale(a, op.apply_backward(x)), vec_scale(b, op.apply_backward(y)));
    CHECK(max_coord_diff(lhs, rhs) <= 1e-12);
  }
}

TEST_CASE("closed-form products agree with stepwise evaluation") {
  const WeightedShift shifts[] = {
      WeightedShift(IndexKind::Unilateral, ConstantWeights{2.0}),
      WeightedShift(IndexKind::Bilateral, PowerRatioWeights{3.0}),
      WeightedShift(IndexKind::Bilateral, TableWeights{-2, {0.5, -3.0, 1.25, 2.0}, 0.5, 2.0}),
  };
  SplitMix64 rng = substream(23, "products");
  for (const auto& op : shifts) {
    for (int t = 0; t < 400; ++t) {
      const std::int64_t lo = op.side() == IndexKind::Unilateral ? 1 : -15;
      const std::int64_t alpha = rng.next_in(lo, 15);
      const std::int64_t beta = alpha + rng.next_in(0, 12);
      double direct = 1.0;
      for (std::int64_t j = alpha; j <= beta; ++j) direct *= op.weight(j);
      CHECK(op.product(alpha, beta) == doctest::Approx(direct).epsilon(1e-12));
      CHECK(op.log_abs_product(alpha, beta) ==
            doctest::Approx(std::log(std::fabs(direct))).epsilon(1e-10));
    }
  }
}

TEST_CASE("scalar pool enumerates dyadics exactly once") {
  const ScalarPool pool;
  CHECK(pool.value(1) == 0.0);
  CHECK(pool.value(2) == 1.0);
  CHECK(pool.value(3) == -1.0);
  std::set<double> seen;
  for (std::int64_t i = 1; i <= 500; ++i) {
    const double z = pool.value(i);
    CHECK(seen.insert(z).second);  // no repeats
    // dyadic: z * 2^40 is an integer for every pool value in this prefix
    const double scaled = std::ldexp(z, 40);
    CHECK(scaled == std::floor(scaled));
    CHECK(std::fabs(z) <= pool.abs_bound(i));
  }
  CHECK(pool.index_of(0.0) == 1);
  CHECK(pool.index_of(2.0) > 0);
  CHECK(pool.index_of(-0.75) > 0);
  CHECK(pool.value(pool.index_of(-0.75)) == -0.75);
}

TEST_CASE("dense enumeration: determinism, zero start, basis coverage") {
  for (IndexKind side : {IndexKind::Unilateral, IndexKind::Bilateral}) {
    const DenseVectors dv(side);
    CHECK(dv.vector(1).empty());
    CHECK(dv.vector(17) == dv.vector(17));

    // every e_j with |j| <= 3 appears in a finite prefix (exhaustive scan)
    std::set<std::int64_t> wanted;
    for (std::int64_t j = side == IndexKind::Unilateral ? 1 : -3; j <= 3; ++j)
      if (j != 0 || side == IndexKind::Bilateral) wanted.insert(j);
    const std::int64_t scan_limit = side == IndexKind::Unilateral ? 200 : 20000;
    std::int64_t found_by = 0;
    for (std::int64_t m = 2; m <= scan_limit && !wanted.empty(); ++m) {
      const SparseVector x = dv.vector(m);
      if (x.support_size() == 1 && x.entries().begin()->second == 1.0) {
        if (wanted.erase(x.entries().begin()->first)) found_by = m;
      }
    }
    INFO("all unit vectors found by index ", found_by);
    CHECK(wanted.empty());
  }

  // surjectivity spot check: a specific dyadic vector appears in the prefix
  const DenseVectors dv(IndexKind::Unilateral);
  SparseVector target(IndexKind::Unilateral);
  target.set(1, 2.0);
  target.set(2, -1.0);
  bool found = false;
  for (std::int64_t m = 2; m <= 100 && !found; ++m) found = dv.vector(m) == target;
  CHECK(found);
}

TEST_CASE("dense enumeration level accounting") {
  const DenseVectors dv(IndexKind::Bilateral);
  CHECK(dv.level_size(1) == 7);         // 2^3 - 1
  CHECK(dv.level_size(2) == 235);       // 3^5 - 2^3
  CHECK(dv.level_start(1) == 2);
  CHECK(dv.level_start(2) == 9);
  CHECK(dv.level_of(2) == 1);
  CHECK(dv.level_of(8) == 1);
  CHECK(dv.level_of(9) == 2);
  // first level-1 vector is e_{-1} under big-endian lex order
  const SparseVector first = dv.vector(2);
  CHECK(first.support_size() == 1);
}

TEST_CASE("majorant dominates the true tail terms") {
  const FSpace l2 = FSpace::lp(2.0);
  const WeightedShift op(IndexKind::Bilateral, PowerRatioWeights{3.0});
  const DenseVectors dv(IndexKind::Bilateral);
  auto provider = [&dv](std::int64_t m) { return dv.vector(m); };
  const TailMajorant maj = TailMajorant::dense(op, l2, provider);
  for (std::int64_t m = 1; m <= 10; ++m) {
    const SparseVector x = dv.vector(m);
    for (std::int64_t k = 1; k <= 40; ++k) {
      const double ft = f_norm(l2, op.apply_backward_n(x, k));
      CHECK(maj.bound(Side::Forward, m, k) >= ft - 1e-12);
      const double fs = f_norm(l2, op.apply_right_inverse(k, x));
      CHECK(maj.bound(Side::Inverse, m, k) >= fs - 1e-12);
    }
  }
}

TEST_CASE("closed-form tails match direct summation") {
  const FSpace l2 = FSpace::lp(2.0);

  // doubling weights: sum_{k>K} 2^-k = 2^-K for the inverse side of e_1
  const WeightedShift dbl(IndexKind::Unilateral, ConstantWeights{2.0});
  auto e1_provider = [](std::int64_t) { return SparseVector::unit(IndexKind::Unilateral, 1); };
  const TailMajorant geo = TailMajorant::dense(dbl, l2, e1_provider);
  for (std::int64_t K : {1, 3, 8, 20}) {
    const double closed = geo.tail(Side::Inverse, 1, K);
    CHECK(closed == doctest::Approx(std::ldexp(1.0, static_cast<int>(-K))).epsilon(1e-12));
    double direct = 0.0;
    for (std::int64_t k = K + 1; k <= K + 400; ++k) direct += geo.bound(Side::Inverse, 1, k);
    CHECK(direct <= closed * (1.0 + 1e-12));
    CHECK(closed == doctest::Approx(direct).epsilon(1e-10));
  }

  // polynomial-ratio weights: closed form is an upper bound within the
  // integral-test slack of the direct sum
  const WeightedShift pw(IndexKind::Bilateral, PowerRatioWeights{3.0});
  const DenseVectors dv(IndexKind::Bilateral);
  auto provider = [&dv](std::int64_t m) { return dv.vector(m); };
  const TailMajorant pm = TailMajorant::dense(pw, l2, provider);
  for (std::int64_t m : {2, 5, 9}) {
    for (std::int64_t K : {6, 12, 30}) {
      for (Side side : {Side::Forward, Side::Inverse}) {
        double direct = 0.0;
        for (std::int64_t k = K + 1; k <= K + 20000; ++k) direct += pm.bound(side, m, k);
        const double closed = pm.tail(side, m, K);
        CHECK(direct <= closed * (1.0 + 1e-9));
        CHECK(closed <= direct * 1.5 + 1e-12);  // integral bound stays tight
      }
    }
  }
}

TEST_CASE("tail monotonicity in K") {
  const FSpace l2 = FSpace::lp(2.0);
  const WeightedShift pw(IndexKind::Bilateral, PowerRatioWeights{3.0});
  const DenseVectors dv(IndexKind::Bilateral);
  const TailMajorant maj =
      TailMajorant::dense(pw, l2, [&dv](std::int64_t m) { return dv.vector(m); });
  double prev = maj.full_tail(Side::Inverse, 6, 5);
  for (std::int64_t K = 6; K <= 60; ++K) {
    const double cur = maj.full_tail(Side::Inverse, 6, K);
    CHECK(cur <= prev + 1e-15);
    prev = cur;
  }
}

TEST_CASE("tail_sum bounds random admissible assignments") {
  const FSpace l2 = FSpace::lp(2.0);
  const WeightedShift dbl(IndexKind::Unilateral, ConstantWeights{2.0});
  const DenseVectors dv(IndexKind::Unilateral);
  const TailMajorant maj =
      TailMajorant::dense(dbl, l2, [&dv](std::int64_t m) { return dv.vector(m); });

  const std::int64_t K = 10;
  const std::vector<CapStep> steps = {{30, 2}, {60, 4}};
  const double bound = tail_sum(maj, Side::Inverse, steps, 6, K);

  SplitMix64 rng = substream(24, "tailsum");
  for (int t = 0; t < 10000; ++t) {
    SparseVector acc(IndexKind::Unilateral);
    for (std::int64_t k = K + 1; k <= 200; ++k) {
      const std::int64_t cap = k <= 30 ? 2 : (k <= 60 ? 4 : 6);
      const std::int64_t m = rng.next_in(1, cap);
      acc = vec_add(acc, dbl.apply_right_inverse(k, dv.vector(m)));
    }
    CHECK(f_norm(l2, acc) <= bound + 1e-12);
  }

  // tail_sum shrinks as the cut K moves out
  double prev_ts = tail_sum(maj, Side::Inverse, steps, 6, K);
  for (std::int64_t K2 = K + 1; K2 <= K + 40; ++K2) {
    const double cur = tail_sum(maj, Side::Inverse, steps, 6, K2);
    CHECK(cur <= prev_ts + 1e-15);
    prev_ts = cur;
  }

  // zero vectors in cap range give a zero tail
  auto zero = [](std::int64_t) { return SparseVector(IndexKind::Unilateral); };
  const TailMajorant zm = TailMajorant::dense(dbl, l2, zero);
  CHECK(tail_sum(zm, Side::Inverse, steps, 6, K) == 0.0);

  // the backward orbit annihilates finite supports: tail 0 past the support
  auto small = [](std::int64_t) {
    SparseVector x(IndexKind::Unilateral);
    x.set(2, 1.5);
    x.set(5, -0.5);
    return x;
  };
  const TailMajorant sm = TailMajorant::dense(dbl, l2, small);
  CHECK(tail_sum(sm, Side::Forward, {}, 4, 5) == 0.0);
}

TEST_CASE("table-rule tails match direct summation on both sides") {
  const FSpace l2 = FSpace::lp(2.0);
  // step weights: 1/2 on the left of the table, 2 on the right
  const WeightedShift op(IndexKind::Bilateral, TableWeights{-1, {0.75, 1.5, -2.0}, 0.5, 2.0});
  const DenseVectors dv(IndexKind::Bilateral);
  const TailMajorant maj =
      TailMajorant::dense(op, l2, [&dv](std::int64_t m) { return dv.vector(m); });
  CHECK(maj.certifiable(Side::Forward));
  CHECK(maj.certifiable(Side::Inverse));
  for (std::int64_t m : {2, 4, 8}) {
    for (std::int64_t K : {3, 7, 15}) {
      for (Side side : {Side::Forward, Side::Inverse}) {
        double direct = 0.0;
        for (std::int64_t k = K + 1; k <= K + 300; ++k) direct += maj.bound(side, m, k);
        const double closed = maj.tail(side, m, K);
        CHECK(direct <= closed * (1.0 + 1e-10));
        CHECK(closed == doctest::Approx(direct).epsilon(1e-8));
      }
    }
  }
}

TEST_CASE("chaos certificates") {
  const FSpace l2 = FSpace::lp(2.0);
  const ChaosReport dbl = chaos_check(WeightedShift(IndexKind::Unilateral, ConstantWeights{2.0}), l2);
  CHECK(dbl.chaotic);
  CHECK(dbl.tail_value < 1e-6);

  const ChaosReport flat = chaos_check(WeightedShift(IndexKind::Unilateral, ConstantWeights{1.0}), l2);
  CHECK_FALSE(flat.chaotic);
  CHECK(flat.divergence_proven);

  const ChaosReport bi = chaos_check(WeightedShift(IndexKind::Bilateral, PowerRatioWeights{3.0}), l2);
  CHECK(bi.chaotic);

  const ChaosReport bic = chaos_check(WeightedShift(IndexKind::Bilateral, ConstantWeights{2.0}), l2);
  CHECK_FALSE(bic.chaotic);

  // every unilateral weighted shift on omega is chaotic
  const FSpace om = FSpace::omega();
  for (double lam : {1.0, 0.25, 7.0}) {
    const ChaosReport r = chaos_check(WeightedShift(IndexKind::Unilateral, ConstantWeights{lam}), om);
    CHECK(r.chaotic);
  }
  const ChaosReport rp = chaos_check(WeightedShift(IndexKind::Unilateral, PowerRatioWeights{0.5}), om);
  CHECK(rp.chaotic);
}

TEST_CASE("weights must be nonzero") {
  CHECK_THROWS_AS(WeightedShift(IndexKind::Unilateral, ConstantWeights{0.0}), std::invalid_argument);
  CHECK_THROWS_AS(WeightedShift(IndexKind::Unilateral, TableWeights{1, {1.0, 0.0}, 1.0, 1.0}),
                  std::invalid_argument);
}

}  // TEST_SUITE
