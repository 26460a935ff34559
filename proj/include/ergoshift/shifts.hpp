#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "ergoshift/fspace.hpp"

namespace ergoshift {

// ---------------------------------------------------------------------------
// Weight rules
// ---------------------------------------------------------------------------

// w_j = value for every j.
struct ConstantWeights {
  double value = 2.0;
};

// Ratio weights with polynomial growth of the running products.
//
// Unilateral: w_j = ((j+1)/j)^a for j >= 1, so products telescope to
// ((j+n+1)/(j+1))^a.
//
// Bilateral: the exponent is mirrored, w_j = ((|j|+1)/max(|j|,1))^(a*sgn j)
// with w_0 = 1.  Backward products then decay polynomially toward -oo and
// forward products grow polynomially toward +oo, which is the arrangement a
// chaotic bilateral shift needs.
struct PowerRatioWeights {
  double exponent = 3.0;
};

// Explicit table over [first_index, first_index + values.size()), extended by
// constants on each side.
struct TableWeights {
  std::int64_t first_index = 1;
  std::vector<double> values;
  double left_extension = 1.0;
  double right_extension = 1.0;
};

using WeightRule = std::variant<ConstantWeights, PowerRatioWeights, TableWeights>;

// Weighted backward shift T = B_w on a sequence space:
//   unilateral: (Tx)_k = w_{k+1} x_{k+1}, k >= 1
//   bilateral : (Tx)_k = w_{k+1} x_{k+1}, k in Z
// together with the right inverses S_n (weighted forward shifts).
class WeightedShift {
 public:
  WeightedShift(IndexKind side, WeightRule rule) : side_(side), rule_(std::move(rule)) {
    validate();
  }

  IndexKind side() const { return side_; }
  const WeightRule& rule() const { return rule_; }

  double weight(std::int64_t j) const {
    if (side_ == IndexKind::Unilateral && j < 1)
      throw std::invalid_argument("weight: unilateral index must be >= 1");
    if (const auto* c = std::get_if<ConstantWeights>(&rule_)) return c->value;
    if (const auto* p = std::get_if<PowerRatioWeights>(&rule_)) {
      if (j >= 1) return std::pow((static_cast<double>(j) + 1.0) / static_cast<double>(j), p->exponent);
      if (j == 0) return 1.0;
      const double m = static_cast<double>(-j);
      return std::pow((m + 1.0) / m, -p->exponent);
    }
    const auto& t = std::get<TableWeights>(rule_);
    if (j < t.first_index) return t.left_extension;
    const std::int64_t off = j - t.first_index;
    if (off < static_cast<std::int64_t>(t.values.size())) return t.values[static_cast<std::size_t>(off)];
    return t.right_extension;
  }

  // Signed product of weights over the index range [alpha, beta]; 1 when empty.
  // Closed forms keep this O(1) for the constant and ratio rules.
  double product(std::int64_t alpha, std::int64_t beta) const {
    if (beta < alpha) return 1.0;
    if (side_ == IndexKind::Unilateral && alpha < 1)
      throw std::invalid_argument("product: unilateral range must start at >= 1");
    if (const auto* c = std::get_if<ConstantWeights>(&rule_)) {
      return std::pow(c->value, static_cast<double>(beta - alpha + 1));
    }
    if (const auto* p = std::get_if<PowerRatioWeights>(&rule_)) {
      double out = 1.0;
      if (beta >= 1) {
        const double lo = static_cast<double>(std::max<std::int64_t>(alpha, 1));
        out *= std::pow((static_cast<double>(beta) + 1.0) / lo, p->exponent);
      }
      if (alpha <= 0) {
        const std::int64_t b2 = std::min<std::int64_t>(beta, 0);
        const double num = b2 <= -1 ? static_cast<double>(-b2) : 1.0;
        const double den = 1.0 - static_cast<double>(alpha);
        out *= std::pow(num / den, p->exponent);
      }
      return out;
    }
    const auto& t = std::get<TableWeights>(rule_);
    const std::int64_t tbl_lo = t.first_index;
    const std::int64_t tbl_hi = t.first_index + static_cast<std::int64_t>(t.values.size()) - 1;
    double out = 1.0;
    const std::int64_t nl = std::min(beta, tbl_lo - 1) - alpha + 1;
    if (nl > 0) out *= std::pow(t.left_extension, static_cast<double>(nl));
    const std::int64_t nr = beta - std::max(alpha, tbl_hi + 1) + 1;
    if (nr > 0) out *= std::pow(t.right_extension, static_cast<double>(nr));
    for (std::int64_t j = std::max(alpha, tbl_lo); j <= std::min(beta, tbl_hi); ++j)
      out *= t.values[static_cast<std::size_t>(j - tbl_lo)];
    return out;
  }

  double log_abs_product(std::int64_t alpha, std::int64_t beta) const {
    if (beta < alpha) return 0.0;
    if (const auto* c = std::get_if<ConstantWeights>(&rule_)) {
      return static_cast<double>(beta - alpha + 1) * std::log(std::fabs(c->value));
    }
    if (const auto* p = std::get_if<PowerRatioWeights>(&rule_)) {
      double out = 0.0;
      if (beta >= 1) {
        const double lo = static_cast<double>(std::max<std::int64_t>(alpha, 1));
        out += p->exponent * (std::log(static_cast<double>(beta) + 1.0) - std::log(lo));
      }
      if (alpha <= 0) {
        const std::int64_t b2 = std::min<std::int64_t>(beta, 0);
        const double num = b2 <= -1 ? static_cast<double>(-b2) : 1.0;
        out += p->exponent * (std::log(num) - std::log(1.0 - static_cast<double>(alpha)));
      }
      return out;
    }
    const auto& t = std::get<TableWeights>(rule_);
    const std::int64_t tbl_lo = t.first_index;
    const std::int64_t tbl_hi = t.first_index + static_cast<std::int64_t>(t.values.size()) - 1;
    double out = 0.0;
    const std::int64_t nl = std::min(beta, tbl_lo - 1) - alpha + 1;
    if (nl > 0) out += static_cast<double>(nl) * std::log(std::fabs(t.left_extension));
    const std::int64_t nr = beta - std::max(alpha, tbl_hi + 1) + 1;
    if (nr > 0) out += static_cast<double>(nr) * std::log(std::fabs(t.right_extension));
    for (std::int64_t j = std::max(alpha, tbl_lo); j <= std::min(beta, tbl_hi); ++j)
      out += std::log(std::fabs(t.values[static_cast<std::size_t>(j - tbl_lo)]));
    return out;
  }

  // Coefficient products for the canonical basis:
  //   T^n e_j = backward_product(j, n) e_{j-n}
  //   S_n e_j = e_{j+n} / forward_product(j, n)
  double forward_product(std::int64_t j, std::int64_t n) const { return product(j + 1, j + n); }
  double backward_product(std::int64_t j, std::int64_t n) const { return product(j - n + 1, j); }
  double log_abs_forward(std::int64_t j, std::int64_t n) const { return log_abs_product(j + 1, j + n); }
  double log_abs_backward(std::int64_t j, std::int64_t n) const { return log_abs_product(j - n + 1, j); }

  // Diagonal conjugacy scaling b_k = w_2 * ... * w_k (b_1 = 1).
  double diagonal_scaling(std::int64_t k) const { return forward_product(1, k - 1); }

  SparseVector apply_backward(const SparseVector& x) const {
    require_compatible(x);
    SparseVector out(x.index_kind());
    for (const auto& [i, v] : x.entries()) {
      const std::int64_t k = i - 1;
      if (side_ == IndexKind::Unilateral && k < 1) continue;
      out.set(k, weight(i) * v);
    }
    return out;
  }

  SparseVector apply_backward_n(const SparseVector& x, std::int64_t n) const {
    if (n < 0) throw std::invalid_argument("apply_backward_n: n must be >= 0");
    SparseVector out = x;
    for (std::int64_t s = 0; s < n; ++s) out = apply_backward(out);
    return out;
  }

  // S_n: moves coordinate j to j+n, dividing by w_{j+1} ... w_{j+n} one step
  // at a time so that T^n S_n x = x holds to rounding.
  SparseVector apply_right_inverse(std::int64_t n, const SparseVector& x) const {
    if (n < 0) throw std::invalid_argument("apply_right_inverse: n must be >= 0");
    require_compatible(x);
    SparseVector out(x.index_kind());
    for (const auto& [i, v] : x.entries()) {
      double c = v;
      for (std::int64_t s = 1; s <= n; ++s) c /= weight(i + s);
      out.set(i + n, c);
    }
    return out;
  }

 private:
  void validate() const {
    if (const auto* c = std::get_if<ConstantWeights>(&rule_)) {
      if (c->value == 0.0) throw std::invalid_argument("weights must be nonzero");
    } else if (const auto* t = std::get_if<TableWeights>(&rule_)) {
      if (t->left_extension == 0.0 || t->right_extension == 0.0)
        throw std::invalid_argument("weights must be nonzero");
      for (double v : t->values)
        if (v == 0.0) throw std::invalid_argument("weights must be nonzero");
    }
  }

  void require_compatible(const SparseVector& x) const {
    if (x.index_kind() != side_)
      throw std::invalid_argument("shift/vector index kinds differ");
  }

  IndexKind side_;
  WeightRule rule_;
};

// ---------------------------------------------------------------------------
// Dense scalar pool: a fixed enumeration of the dyadic rationals
// ---------------------------------------------------------------------------

// z_1 = 0; the nonzero dyadics u * 2^t (u odd) are listed in blocks of
// increasing size S = |u| + |t|, inside a block by |u| ascending, then
// t = +t_abs before -t_abs, then +u before -u.  Every dyadic rational
// appears exactly once and the scheme is fixed for reproducibility.
class ScalarPool {
 public:
  double value(std::int64_t n) const {
    if (n < 1) throw std::invalid_argument("ScalarPool: index must be >= 1");
    if (n == 1) return 0.0;
    std::int64_t t = n - 2;  // position among nonzero entries
    for (std::int64_t S = 1;; ++S) {
      const std::int64_t c = block_count(S);
      if (t < c) return decode_in_block(S, t);
      t -= c;
      if (S > 4096) throw std::invalid_argument("ScalarPool: index out of supported range");
    }
  }

  // Largest |z_i| over i <= n.
  double max_abs_prefix(std::int64_t n) const {
    double best = 0.0;
    for (std::int64_t i = 2; i <= n; ++i) best = std::max(best, std::fabs(value(i)));
    return best;
  }

  // Closed-form bound on |z_n|: the block S holding index n satisfies
  // cumulative count >= n - 1, and every entry of block S has |z| <= 2^(S-1).
  double abs_bound(std::int64_t n) const {
    if (n <= 1) return 0.0;
    std::int64_t t = n - 2;
    for (std::int64_t S = 1;; ++S) {
      const std::int64_t c = block_count(S);
      if (t < c) return std::ldexp(1.0, static_cast<int>(std::min<std::int64_t>(S - 1, 1023)));
      t -= c;
    }
  }

  // Index of an exactly representable dyadic value, or 0 if not found within
  // the search limit.
  std::int64_t index_of(double v, std::int64_t limit = 1 << 16) const {
    for (std::int64_t i = 1; i <= limit; ++i)
      if (value(i) == v) return i;
    return 0;
  }

 private:
  static std::int64_t block_count(std::int64_t S) {
    std::int64_t c = 0;
    for (std::int64_t u = 1; u <= S; u += 2) c += (S - u == 0) ? 2 : 4;
    return c;
  }

  static double decode_in_block(std::int64_t S, std::int64_t t) {
    for (std::int64_t u = 1; u <= S; u += 2) {
      const std::int64_t t_abs = S - u;
      const std::int64_t here = (t_abs == 0) ? 2 : 4;
      if (t < here) {
        const std::int64_t texp = (t_abs == 0) ? 0 : (t / 2 == 0 ? t_abs : -t_abs);
        const double sign = (t % 2 == 0) ? 1.0 : -1.0;
        return sign * static_cast<double>(u) * std::ldexp(1.0, static_cast<int>(texp));
      }
      t -= here;
    }
    throw std::logic_error("ScalarPool: block decode overflow");
  }
};

// ---------------------------------------------------------------------------
// Dense vector enumeration
// ---------------------------------------------------------------------------

// Enumerates the finitely supported vectors with dyadic rational coordinates:
// x_1 = 0, and level c >= 1 lists all digit tuples over the window
// (unilateral {1..c}, bilateral {-c..c}) with coordinates drawn from the pool
// prefix {z_1, ..., z_{c+1}}, in big-endian lexicographic order, skipping
// tuples that already appeared at level c-1.  Deterministic and stable; every
// finitely supported dyadic vector appears exactly once.
class DenseVectors {
 public:
  explicit DenseVectors(IndexKind side, std::shared_ptr<const ScalarPool> pool =
                                            std::make_shared<ScalarPool>())
      : side_(side), pool_(std::move(pool)) {}

  IndexKind side() const { return side_; }
  const ScalarPool& pool() const { return *pool_; }

  SparseVector vector(std::int64_t m) const {
    if (m < 1) throw std::invalid_argument("DenseVectors: index must be >= 1");
    if (m == 1) return SparseVector(side_);
    std::lock_guard<std::mutex> lock(mu_);
    while (static_cast<std::int64_t>(cache_.size()) < m - 1) advance_locked();
    return cache_[static_cast<std::size_t>(m - 2)];
  }

  // Number of window positions at a level.
  std::int64_t window_length(std::int64_t c) const {
    return side_ == IndexKind::Unilateral ? c : 2 * c + 1;
  }

  std::int64_t support_radius(std::int64_t c) const { return c; }

  // Exact size of level c (saturating; levels grow double-exponentially).
  std::int64_t level_size(std::int64_t c) const {
    const std::int64_t whole = pow_sat(c + 1, window_length(c));
    const std::int64_t prev = c >= 1 ? pow_sat(c, window_length(c - 1)) : 1;
    return whole == sat_max() ? sat_max() : whole - prev;
  }

  // First enumeration index of level c (level 1 starts at m = 2).
  std::int64_t level_start(std::int64_t c) const {
    std::int64_t s = 2;
    for (std::int64_t i = 1; i < c; ++i) {
      const std::int64_t sz = level_size(i);
      if (sz == sat_max() || s > sat_max() - sz) return sat_max();
      s += sz;
    }
    return s;
  }

  std::int64_t level_of(std::int64_t m) const {
    if (m < 2) return 0;
    for (std::int64_t c = 1;; ++c) {
      const std::int64_t next = level_start(c + 1);
      if (m < next || next == sat_max()) return c;
    }
  }

  // l1-mass bound for any vector at level <= c.
  double l1_bound(std::int64_t c) const {
    return static_cast<double>(window_length(c)) * pool_->abs_bound(c + 1);
  }

 private:
  static std::int64_t sat_max() { return std::numeric_limits<std::int64_t>::max() / 4; }

  static std::int64_t pow_sat(std::int64_t base, std::int64_t exp) {
    std::int64_t r = 1;
    for (std::int64_t i = 0; i < exp; ++i) {
      if (r > sat_max() / base) return sat_max();
      r *= base;
    }
    return r;
  }

  std::vector<std::int64_t> window(std::int64_t c) const {
    std::vector<std::int64_t> pos;
    if (side_ == IndexKind::Unilateral) {
      for (std::int64_t i = 1; i <= c; ++i) pos.push_back(i);
    } else {
      for (std::int64_t i = -c; i <= c; ++i) pos.push_back(i);
    }
    return pos;
  }

  // Generates the next kept tuple into the cache.
  void advance_locked() const {
    while (true) {
      if (gen_level_ == 0 || !odometer_step_locked()) {
        ++gen_level_;
        if (gen_level_ > 24) throw std::runtime_error("DenseVectors: enumeration depth exceeded");
        gen_pos_ = window(gen_level_);
        gen_digits_.assign(gen_pos_.size(), 0);
        // the all-zero tuple is never emitted; step once
        if (!odometer_step_locked()) continue;
      }
      if (skip_current_locked()) continue;
      SparseVector x(side_);
      for (std::size_t i = 0; i < gen_pos_.size(); ++i)
        if (gen_digits_[i] != 0) x.set(gen_pos_[i], pool_->value(gen_digits_[i] + 1));
      cache_.push_back(std::move(x));
      return;
    }
  }

  // Lexicographic successor with rightmost digit fastest; false on wrap.
  bool odometer_step_locked() const {
    const std::int64_t base = gen_level_ + 1;
    for (std::size_t i = gen_digits_.size(); i-- > 0;) {
      if (++gen_digits_[i] < base) return true;
      gen_digits_[i] = 0;
    }
    return false;
  }

  bool skip_current_locked() const {
    // Skip tuples that already appeared at level (gen_level_ - 1): digits all
    // below the previous pool prefix and support inside the previous window.
    const std::int64_t prev_base = gen_level_;  // = P(c-1)
    const std::int64_t prev_radius = gen_level_ - 1;
    for (std::size_t i = 0; i < gen_digits_.size(); ++i) {
      const std::int64_t d = gen_digits_[i];
      if (d == 0) continue;
      if (d >= prev_base) return false;
      const std::int64_t p = gen_pos_[i];
      if (std::llabs(p) > prev_radius || (side_ == IndexKind::Unilateral && p > prev_radius))
        return false;
    }
    // Also treat the all-zero tuple (only reachable as wrap artifact) as skipped.
    for (std::int64_t d : gen_digits_)
      if (d != 0) return true;
    return true;
  }

  IndexKind side_;
  std::shared_ptr<const ScalarPool> pool_;

  mutable std::mutex mu_;
  mutable std::vector<SparseVector> cache_;
  mutable std::int64_t gen_level_ = 0;
  mutable std::vector<std::int64_t> gen_pos_;
  mutable std::vector<std::int64_t> gen_digits_;
};

inline SparseVector enumerate_dense(const DenseVectors& e, std::int64_t m) {
  return e.vector(m);
}

// ---------------------------------------------------------------------------
// Tail majorants
// ---------------------------------------------------------------------------

enum class Side { Forward, Inverse, Basis };

// Closed-form majorants for the tail terms of the orbit series:
//
//   dense mode:  bound(Forward, m, k) >= F(T^k x_m)
//                bound(Inverse, m, k) >= F(S_k x_m)
//   basis mode:  bound(Basis, n, k)  >= F((z_n / b_k) e_k)
//
// together with closed-form sums over k > K.  Everything reduces to
// geometric or power tails of the weight products, so the certificates are
// honest upper bounds rather than sampled estimates.
class TailMajorant {
 public:
  static TailMajorant dense(const WeightedShift& op, const FSpace& space,
                            std::function<SparseVector(std::int64_t)> vectors) {
    if (!space.accepts(op.side()))
      throw std::invalid_argument("TailMajorant: space/operator index kinds incompatible");
    return TailMajorant(op, space, std::move(vectors), nullptr);
  }

  static TailMajorant basis(const WeightedShift& op, const FSpace& space,
                            std::shared_ptr<const ScalarPool> pool) {
    if (op.side() != IndexKind::Unilateral)
      throw std::invalid_argument("TailMajorant: basis mode is unilateral only");
    return TailMajorant(op, space, nullptr, std::move(pool));
  }

  const WeightedShift& shift() const { return op_; }
  const FSpace& space() const { return space_; }
  bool is_basis_mode() const { return pool_ != nullptr; }

  // Exact per-term value of the majorant.
  double bound(Side side, std::int64_t m, std::int64_t k) const {
    if (k < 1) throw std::invalid_argument("TailMajorant: tail coordinate must be >= 1");
    if (side == Side::Basis) {
      const double z = pool_->value(m);
      if (z == 0.0) return 0.0;
      const double logb = op_.log_abs_forward(1, k - 1);
      return space_.coord_norm(k, std::fabs(z) * std::exp(-logb));
    }
    double s = 0.0;
    const SparseVector x = vectors_(m);
    for (const auto& [j, c] : x.entries()) {
      if (side == Side::Forward) {
        if (op_.side() == IndexKind::Unilateral && k >= j) continue;
        const double lp = op_.log_abs_backward(j, k);
        s += space_.coord_norm(j - k, std::fabs(c) * std::exp(lp));
      } else {
        const double lp = op_.log_abs_forward(j, k);
        s += space_.coord_norm(j + k, std::fabs(c) * std::exp(-lp));
      }
    }
    return s;
  }

  // Closed-form upper bound on sum_{k > K} bound(side, m, k).
  // Throws when the rule cannot certify a finite tail.
  double tail(Side side, std::int64_t m, std::int64_t K) const {
    if (K < 0) throw std::invalid_argument("TailMajorant: K must be >= 0");
    if (side == Side::Basis) {
      const double z = pool_->value(m);
      return basis_tail(std::fabs(z), K);
    }
    double s = 0.0;
    const SparseVector x = vectors_(m);
    for (const auto& [j, c] : x.entries()) s += coord_tail(side, j, std::fabs(c), K);
    return s;
  }

  // Worst-case tail over all admissible symbols m <= cap.
  // Dense mode uses the subadditive sum over m; basis mode uses the largest
  // pool magnitude in the prefix.
  double full_tail(Side side, std::int64_t cap, std::int64_t K) const {
    if (side == Side::Basis) {
      return basis_tail(pool_->max_abs_prefix(cap), K);
    }
    double s = 0.0;
    for (std::int64_t m = 1; m <= cap; ++m) s += tail(side, m, K);
    return s;
  }

  bool certifiable(Side side) const {
    std::string r;
    return classify(side, &r);
  }

  // True when the tail terms provably fail to be summable.  For unit vectors
  // the majorant terms equal the actual F-norms, so for these rule families a
  // missing certificate is in fact a proof of divergence.
  bool divergence_proven(Side side) const {
    std::string r;
    return !classify(side, &r);
  }

 private:
  TailMajorant(WeightedShift op, FSpace space,
               std::function<SparseVector(std::int64_t)> vectors,
               std::shared_ptr<const ScalarPool> pool)
      : op_(std::move(op)), space_(space), vectors_(std::move(vectors)), pool_(std::move(pool)) {}

  // Classification of the per-side tail behaviour. Returns true when a
  // closed-form convergent tail exists; fills reason otherwise.
  bool classify(Side side, std::string* reason) const {
    const double q = space_.power();
    if (space_.kind() == FSpace::Kind::Omega) {
      if (side == Side::Forward) return true;   // finite support dies out
      return true;                              // 2^-k Frechet weights dominate
    }
    auto geometric_ok = [&](double ratio_base, bool growth_needed) {
      const double mag = std::fabs(ratio_base);
      if (growth_needed ? mag > 1.0 : mag < 1.0) return true;
      if (reason) *reason = "constant weight magnitude does not certify this side";
      return false;
    };
    if (const auto* c = std::get_if<ConstantWeights>(&op_.rule())) {
      if (side == Side::Forward) {
        if (op_.side() == IndexKind::Unilateral) return true;
        return geometric_ok(c->value, false);
      }
      return geometric_ok(c->value, true);
    }
    if (const auto* p = std::get_if<PowerRatioWeights>(&op_.rule())) {
      if (side == Side::Forward && op_.side() == IndexKind::Unilateral) return true;
      if (p->exponent * q > 1.0) return true;
      if (reason) *reason = "ratio exponent too small for a summable tail";
      return false;
    }
    const auto& t = std::get<TableWeights>(op_.rule());
    if (side == Side::Forward) {
      if (op_.side() == IndexKind::Unilateral) return true;
      return geometric_ok(t.left_extension, false);
    }
    return geometric_ok(t.right_extension, true);
  }

  double require_certifiable(Side side) const {
    std::string reason;
    if (!classify(side, &reason)) throw std::runtime_error("no certificate: " + reason);
    return space_.power();
  }

  // sum_{u > U} u^-s bounded by the integral, valid for U >= 1.
  static double power_tail(double U, double s) {
    return std::pow(U, 1.0 - s) / (s - 1.0);
  }

  // Tail for a single support coordinate (j, |c|) on the given side.
  double coord_tail(Side side, std::int64_t j, double c_abs, std::int64_t K) const {
    if (c_abs == 0.0) return 0.0;
    if (side == Side::Forward && op_.side() == IndexKind::Unilateral) {
      double s = 0.0;
      for (std::int64_t k = K + 1; k <= j - 1; ++k) {
        const double lp = op_.log_abs_backward(j, k);
        s += space_.coord_norm(j - k, c_abs * std::exp(lp));
      }
      return s;
    }
    if (space_.kind() == FSpace::Kind::Omega) {
      // side == Inverse on omega: each term is at most 2^-(j+k).
      return std::ldexp(1.0, static_cast<int>(-std::min<std::int64_t>(j + K, 1000)));
    }
    const double q = require_certifiable(side);
    // Closed form applies from k >= k0; earlier terms are summed directly.
    std::int64_t k0;
    double s = 0.0;
    if (const auto* cw = std::get_if<ConstantWeights>(&op_.rule())) {
      const double rho = side == Side::Inverse ? std::pow(std::fabs(cw->value), -q)
                                               : std::pow(std::fabs(cw->value), q);
      const double t0 = std::pow(c_abs, q) * std::pow(rho, static_cast<double>(K + 1));
      return t0 / (1.0 - rho);
    }
    if (const auto* pw = std::get_if<PowerRatioWeights>(&op_.rule())) {
      const double sx = pw->exponent * q;
      if (side == Side::Inverse) {
        // |c| / |P_fwd(j,k)| = |c| m_j^a (j+k+1)^-a once j+k >= max(j,0)+1
        k0 = std::max<std::int64_t>(K + 1, 1 - j);
        const double mj = j >= 0 ? static_cast<double>(j + 1) : static_cast<double>(-j);
        for (std::int64_t k = K + 1; k < k0; ++k)
          s += space_.coord_norm(j + k, c_abs * std::exp(-op_.log_abs_forward(j, k)));
        s += std::pow(c_abs, q) * std::pow(mj, sx) * power_tail(static_cast<double>(k0 - 1 + j + 1), sx);
        return s;
      }
      // Forward side, bilateral: |P_bwd(j,k)| = m'_j^a (k-j)^-a for k >= j+1
      k0 = std::max<std::int64_t>(K + 1, j + 2);
      const double mj = j >= 1 ? static_cast<double>(j + 1) : std::max(1.0, static_cast<double>(-j));
      for (std::int64_t k = K + 1; k < k0; ++k)
        s += space_.coord_norm(j - k, c_abs * std::exp(op_.log_abs_backward(j, k)));
      s += std::pow(c_abs, q) * std::pow(mj, sx) * power_tail(static_cast<double>(k0 - 1 - j), sx);
      return s;
    }
    const auto& tw = std::get<TableWeights>(op_.rule());
    const std::int64_t tbl_lo = tw.first_index;
    const std::int64_t tbl_hi = tw.first_index + static_cast<std::int64_t>(tw.values.size()) - 1;
    if (side == Side::Inverse) {
      // geometric once the whole step range [j+1, j+k] sits right of the table
      k0 = std::max<std::int64_t>(K + 1, tbl_hi - j + 1);
      for (std::int64_t k = K + 1; k < k0; ++k)
        s += space_.coord_norm(j + k, c_abs * std::exp(-op_.log_abs_forward(j, k)));
      const double rho = std::pow(std::fabs(tw.right_extension), -q);
      const double t0 = std::pow(c_abs * std::exp(-op_.log_abs_forward(j, k0)), q);
      return s + t0 / (1.0 - rho);
    }
    k0 = std::max<std::int64_t>(K + 1, j - tbl_lo + 2);
    for (std::int64_t k = K + 1; k < k0; ++k)
      s += space_.coord_norm(j - k, c_abs * std::exp(op_.log_abs_backward(j, k)));
    const double rho = std::pow(std::fabs(tw.left_extension), q);
    const double t0 = std::pow(c_abs * std::exp(op_.log_abs_backward(j, k0)), q);
    return s + t0 / (1.0 - rho);
  }

  // Tail of sum_{k > K} coordF(k, zmag / b_k) in basis mode.
  double basis_tail(double zmag, std::int64_t K) const {
    if (space_.kind() == FSpace::Kind::Omega)
      return std::ldexp(1.0, static_cast<int>(-std::min<std::int64_t>(K, 1000)));
    if (zmag == 0.0) return 0.0;
    const double q = require_certifiable(Side::Basis);
    if (const auto* cw = std::get_if<ConstantWeights>(&op_.rule())) {
      const double rho = std::pow(std::fabs(cw->value), -q);
      // |b_k| = |w|^(k-1): term(k) = (z |w|^{1-k})^q
      const double t0 = std::pow(zmag, q) * std::pow(rho, static_cast<double>(K));
      return t0 / (1.0 - rho);
    }
    if (const auto* pw = std::get_if<PowerRatioWeights>(&op_.rule())) {
      const double sx = pw->exponent * q;
      // b_k = ((k+1)/2)^a
      return std::pow(zmag, q) * std::pow(2.0, sx) * power_tail(static_cast<double>(K + 1), sx);
    }
    const auto& tw = std::get<TableWeights>(op_.rule());
    const std::int64_t tbl_hi = tw.first_index + static_cast<std::int64_t>(tw.values.size()) - 1;
    const std::int64_t k0 = std::max<std::int64_t>(K + 1, tbl_hi + 1);
    double s = 0.0;
    for (std::int64_t k = K + 1; k < k0; ++k)
      s += space_.coord_norm(k, zmag * std::exp(-op_.log_abs_forward(1, k - 1)));
    const double rho = std::pow(std::fabs(tw.right_extension), -q);
    const double t0 = std::pow(zmag * std::exp(-op_.log_abs_forward(1, k0 - 1)), q);
    return s + t0 / (1.0 - rho);
  }

  WeightedShift op_;
  FSpace space_;
  std::function<SparseVector(std::int64_t)> vectors_;
  std::shared_ptr<const ScalarPool> pool_;
};

// ---------------------------------------------------------------------------
// tail_sum over a cap profile
// ---------------------------------------------------------------------------

// cap(k) = steps[i].cap for k in (previous hi, steps[i].k_hi], and tail_cap
// beyond the last step.
struct CapStep {
  std::int64_t k_hi;
  std::int64_t cap;
};

// Upper bound on F(sum_{k > K} term_k) over every admissible symbol choice
// with m_k <= cap(k), by subadditivity of the F-norm.
inline double tail_sum(const TailMajorant& maj, Side side, const std::vector<CapStep>& steps,
                       std::int64_t tail_cap, std::int64_t K) {
  double total = 0.0;
  std::int64_t lo = K;  // exclusive
  for (const auto& st : steps) {
    if (st.k_hi <= lo) continue;
    total += maj.full_tail(side, st.cap, lo) - maj.full_tail(side, st.cap, st.k_hi);
    lo = st.k_hi;
  }
  total += maj.full_tail(side, tail_cap, lo);
  return total;
}

// ---------------------------------------------------------------------------
// Chaos certificate
// ---------------------------------------------------------------------------

struct ChaosReport {
  bool chaotic = false;
  bool divergence_proven = false;
  std::int64_t cutoff = 0;      // tail start at which the certificate holds
  double tail_value = 0.0;      // certified tail bound at the cutoff
  std::string detail;
};

// Certificate-based check that the orbit series of the unit vectors are
// summable: the inverse-side tail for unilateral shifts, both sides for
// bilateral ones.  "chaotic = false" means no certificate was found; the
// divergence_proven flag distinguishes a proof of divergence.
inline ChaosReport chaos_check(const WeightedShift& op, const FSpace& space,
                               double tolerance = 1e-6) {
  ChaosReport rep;
  const std::int64_t e_index = op.side() == IndexKind::Unilateral ? 1 : 0;
  auto unit_provider = [e_index, side = op.side()](std::int64_t m) {
    if (m == 1) return SparseVector(side);
    return SparseVector::unit(side, e_index);
  };
  TailMajorant maj = TailMajorant::dense(op, space, unit_provider);

  std::vector<Side> sides = {Side::Inverse};
  if (op.side() == IndexKind::Bilateral) sides.push_back(Side::Forward);

  for (Side side : sides) {
    if (!maj.certifiable(side)) {
      rep.chaotic = false;
      rep.divergence_proven = maj.divergence_proven(side);
      rep.detail = rep.divergence_proven ? "series divergence proven" : "no certificate for tail";
      return rep;
    }
  }
  std::int64_t K = 1;
  for (int iter = 0; iter < 70; ++iter, K *= 2) {
    double worst = 0.0;
    for (Side side : sides) worst = std::max(worst, maj.tail(side, 2, K));
    if (worst < tolerance) {
      rep.chaotic = true;
      rep.cutoff = K;
      rep.tail_value = worst;
      rep.detail = "tail certificate below tolerance";
      return rep;
    }
  }
  rep.chaotic = false;
  rep.detail = "certificate search exhausted";
  return rep;
}

}  // namespace ergoshift
