#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>

namespace ergoshift {

enum class IndexKind { Unilateral, Bilateral };

inline const char* to_string(IndexKind k) {
  return k == IndexKind::Unilateral ? "unilateral" : "bilateral";
}

// Descriptor of a sequence F-space: either l^p (0 < p < oo) or omega,
// the space of all scalar sequences with its Frechet metric.
//
// The F-norm conventions are:
//   l^p, p >= 1 : F(x) = (sum |x_k|^p)^(1/p)          (the usual norm)
//   l^p, p < 1  : F(x) = sum |x_k|^p                  (subadditive as is)
//   omega       : F(x) = sum_{n>=1} 2^-n |x_n|/(1+|x_n|)
//
// All three are subadditive and balanced, so the dyadic radii
// r_n = r0 * 2^-n give 0-neighborhoods U_n = {F < r_n} with
// U_{n+1} + U_{n+1} contained in U_n exactly.
class FSpace {
 public:
  enum class Kind { Lp, Omega };

  static FSpace lp(double p, double base_radius = 1.0) {
    if (!(p > 0.0)) throw std::invalid_argument("FSpace: p must be positive");
    if (!(base_radius > 0.0)) throw std::invalid_argument("FSpace: base radius must be positive");
    return FSpace(Kind::Lp, p, base_radius);
  }

  static FSpace omega(double base_radius = 1.0) {
    if (!(base_radius > 0.0)) throw std::invalid_argument("FSpace: base radius must be positive");
    return FSpace(Kind::Omega, 0.0, base_radius);
  }

  Kind kind() const { return kind_; }
  double p() const { return p_; }
  double base_radius() const { return r0_; }

  bool accepts(IndexKind ik) const {
    // omega is built unilaterally; l^p supports both index kinds.
    return kind_ == Kind::Lp || ik == IndexKind::Unilateral;
  }

  // Exponent q such that the per-coordinate contribution |v|^q is additive
  // across coordinates for the subadditive form of the norm.
  double power() const { return kind_ == Kind::Lp && p_ < 1.0 ? p_ : 1.0; }

  // F-norm of the single-coordinate vector v*e_index.
  double coord_norm(std::int64_t index, double v) const {
    const double a = std::fabs(v);
    if (a == 0.0) return 0.0;
    switch (kind_) {
      case Kind::Lp:
        return p_ >= 1.0 ? a : std::pow(a, p_);
      case Kind::Omega:
        return std::ldexp(a / (1.0 + a), static_cast<int>(-index));
    }
    return 0.0;
  }

  std::string describe() const {
    if (kind_ == Kind::Omega) return "omega";
    return "l^" + std::to_string(p_);
  }

 private:
  FSpace(Kind k, double p, double r0) : kind_(k), p_(p), r0_(r0) {}

  Kind kind_;
  double p_;
  double r0_;
};

// Finitely supported vector stored in canonical form: no explicit zeros.
// Unilateral vectors live on indices >= 1, bilateral vectors on all of Z.
class SparseVector {
 public:
  explicit SparseVector(IndexKind kind = IndexKind::Unilateral) : kind_(kind) {}

  IndexKind index_kind() const { return kind_; }
  const std::map<std::int64_t, double>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }
  std::size_t support_size() const { return entries_.size(); }

  double at(std::int64_t i) const {
    auto it = entries_.find(i);
    return it == entries_.end() ? 0.0 : it->second;
  }

  void set(std::int64_t i, double v) {
    check_index(i);
    if (v == 0.0) {
      entries_.erase(i);
    } else {
      entries_[i] = v;
    }
  }

  void add(std::int64_t i, double v) { set(i, at(i) + v); }

  static SparseVector unit(IndexKind kind, std::int64_t i, double v = 1.0) {
    SparseVector x(kind);
    x.set(i, v);
    return x;
  }

  bool operator==(const SparseVector& o) const {
    return kind_ == o.kind_ && entries_ == o.entries_;
  }

  std::int64_t min_index() const { return entries_.empty() ? 0 : entries_.begin()->first; }
  std::int64_t max_index() const { return entries_.empty() ? 0 : entries_.rbegin()->first; }

 private:
  void check_index(std::int64_t i) const {
    if (kind_ == IndexKind::Unilateral && i < 1)
      throw std::invalid_argument("SparseVector: unilateral index must be >= 1");
  }

  IndexKind kind_;
  std::map<std::int64_t, double> entries_;
};

inline void require_same_kind(const SparseVector& a, const SparseVector& b) {
  if (a.index_kind() != b.index_kind())
    throw std::invalid_argument("mixed index kinds");
}

inline double f_norm(const FSpace& space, const SparseVector& x) {
  if (!space.accepts(x.index_kind()))
    throw std::invalid_argument("f_norm: omega is unilateral only");
  if (space.kind() == FSpace::Kind::Lp && space.p() >= 1.0) {
    double s = 0.0;
    for (const auto& [i, v] : x.entries()) s += std::pow(std::fabs(v), space.p());
    return std::pow(s, 1.0 / space.p());
  }
  double s = 0.0;
  for (const auto& [i, v] : x.entries()) s += space.coord_norm(i, v);
  return s;
}

// r_n = r0 * 2^-n; U_n = {x : F(x) < r_n}.
inline double neighborhood_radius(const FSpace& space, int n) {
  if (n < 1) throw std::invalid_argument("neighborhood_radius: n must be >= 1");
  return std::ldexp(space.base_radius(), -n);
}

inline SparseVector vec_add(const SparseVector& a, const SparseVector& b) {
  require_same_kind(a, b);
  SparseVector out = a;
  for (const auto& [i, v] : b.entries()) out.add(i, v);
  return out;
}

inline SparseVector vec_scale(double c, const SparseVector& x) {
  SparseVector out(x.index_kind());
  if (c == 0.0) return out;
  for (const auto& [i, v] : x.entries()) out.set(i, c * v);
  return out;
}

inline SparseVector vec_sub(const SparseVector& a, const SparseVector& b) {
  return vec_add(a, vec_scale(-1.0, b));
}

struct TruncateResult {
  SparseVector kept;
  double discarded_norm = 0.0;  // F-norm of the part outside the window
};

inline TruncateResult vec_truncate(const FSpace& space, const SparseVector& x,
                                   std::int64_t lo, std::int64_t hi) {
  TruncateResult r{SparseVector(x.index_kind()), 0.0};
  SparseVector dropped(x.index_kind());
  for (const auto& [i, v] : x.entries()) {
    if (i >= lo && i <= hi) {
      r.kept.set(i, v);
    } else {
      dropped.set(i, v);
    }
  }
  r.discarded_norm = f_norm(space, dropped);
  return r;
}

}  // namespace ergoshift
