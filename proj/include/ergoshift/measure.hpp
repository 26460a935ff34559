#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ergoshift/fspace.hpp"
#include "ergoshift/rng.hpp"
#include "ergoshift/shifts.hpp"
#include "ergoshift/symbolic.hpp"

namespace ergoshift {

// Two ways to realize the invariant measure for a shift:
//
//   BilateralFHC:    symbols on Z, the coding map sums right-inverse orbits
//                    on the negative side and forward orbits on the positive
//                    side of a dense-set enumeration.
//
//   UnilateralExact: symbols on N index the dyadic scalar pool, the coding
//                    map places pool values on the basis (rescaled through
//                    the diagonal conjugacy for weighted shifts), and the
//                    resulting measure is exact rather than merely mixing.
enum class ModelMode { BilateralFHC, UnilateralExact };

inline const char* to_string(ModelMode m) {
  return m == ModelMode::BilateralFHC ? "bilateral-fhc" : "unilateral-exact";
}

struct TruncatedVector {
  SparseVector value;
  double truncation_error = 0.0;  // certified F-norm bound on the discarded tail
};

namespace detail {

// Smallest K >= 1 with full_tail(side, cap, K) <= eps on every side, found by
// doubling then bisection.  Monotone in K, so the result is well-defined.
inline std::int64_t schedule_threshold(const TailMajorant& maj, const std::vector<Side>& sides,
                                       std::int64_t cap, double eps, std::int64_t level) {
  auto ok = [&](std::int64_t K) {
    for (Side s : sides)
      if (!(maj.full_tail(s, cap, K) <= eps)) return false;
    return true;
  };
  const std::int64_t limit = std::int64_t{1} << 32;
  if (ok(1)) return 1;
  std::int64_t hi = 2;
  while (!ok(hi)) {
    hi *= 2;
    if (hi > limit)
      throw std::runtime_error("certificate unobtainable at depth " + std::to_string(level) +
                               ": tail bound cannot reach the required radius");
  }
  std::int64_t lo = hi / 2;  // ok(lo) == false
  while (hi - lo > 1) {
    const std::int64_t mid = lo + (hi - lo) / 2;
    (ok(mid) ? hi : lo) = mid;
  }
  return hi;
}

inline std::int64_t next_schedule_entry(const TailMajorant& maj, const std::vector<Side>& sides,
                                        double r0, std::int64_t level, std::int64_t n_prev,
                                        std::int64_t n_prev2) {
  const double eps = std::ldexp(r0, static_cast<int>(-(level + 3)));
  const std::int64_t thr = schedule_threshold(maj, sides, 2 * level, eps, level);
  // Strict gap growth with the N_0 = 0 convention: each gap exceeds the last.
  const std::int64_t min_gap = n_prev - n_prev2 + 1;
  return std::max(thr, n_prev + min_gap);
}

}  // namespace detail

// Builds the schedule N_1 < ... < N_depth such that the worst-case tail of
// the orbit series beyond N_n, over every admissible symbol choice with caps
// 2l per block, stays below the radius r_{n+1}.  Level l contributes at most
// r0 * 2^-(l+3), so the certificates hold with room to spare even counting
// all unbuilt levels.
inline std::shared_ptr<ConstraintProfile> build_schedule(const TailMajorant& maj,
                                                         const std::vector<Side>& sides,
                                                         IndexKind model_side, std::int64_t depth,
                                                         double r0) {
  if (depth < 2) throw std::invalid_argument("build_schedule: depth must be >= 2");
  for (Side s : sides)
    if (!maj.certifiable(s))
      throw std::runtime_error("certificate unobtainable at depth 1: tail series not summable");
  std::vector<std::int64_t> n;
  n.reserve(static_cast<std::size_t>(depth));
  for (std::int64_t l = 1; l <= depth; ++l) {
    const std::int64_t prev = n.empty() ? 0 : n.back();
    const std::int64_t prev2 = n.size() < 2 ? 0 : n[n.size() - 2];
    n.push_back(detail::next_schedule_entry(maj, sides, r0, l, prev, prev2));
  }
  auto profile = std::make_shared<ConstraintProfile>(model_side, std::move(n));
  profile->install_extender(
      [maj, sides, r0](std::int64_t level, std::int64_t n_prev, std::int64_t n_prev2) {
        return detail::next_schedule_entry(maj, sides, r0, level, n_prev, n_prev2);
      });
  return profile;
}

// Per-level exact tail blocks plus the allowance for all unbuilt levels.
struct ScheduleCertificates {
  std::vector<double> block_primary;    // S-side (FHC) or the basis series
  std::vector<double> block_secondary;  // T-side (FHC); empty in exact mode
  double extension_allowance = 0.0;

  double cert(const std::vector<double>& blocks, std::int64_t n) const {
    double s = extension_allowance;
    for (std::size_t l = static_cast<std::size_t>(n - 1); l < blocks.size(); ++l) s += blocks[l];
    return s;
  }
  double cert_primary(std::int64_t n) const { return cert(block_primary, n); }
  double cert_secondary(std::int64_t n) const {
    return block_secondary.empty() ? 0.0 : cert(block_secondary, n);
  }
  double cert_total(std::int64_t n) const { return cert_primary(n) + cert_secondary(n); }
};

// The assembled measure model: operator, space, schedule, symbol weights and
// the truncation certificates of the coding map.
class MeasureModel {
 public:
  static MeasureModel build(const FSpace& space, const WeightedShift& op, ModelMode mode,
                            std::int64_t depth = 12, double theta = 0.5) {
    if (!space.accepts(op.side()))
      throw std::invalid_argument("build_model: omega space requires a unilateral shift");
    if (mode == ModelMode::UnilateralExact && op.side() != IndexKind::Unilateral)
      throw std::invalid_argument("build_model: exact mode requires a unilateral shift");

    const ChaosReport chaos = chaos_check(op, space);
    if (!chaos.chaotic)
      throw std::runtime_error(std::string("no chaos certificate: ") + chaos.detail);

    MeasureModel m(space, op, mode, depth, theta);
    m.chaos_ = chaos;

    if (mode == ModelMode::UnilateralExact) {
      m.pool_ = std::make_shared<ScalarPool>();
      m.majorant_ = std::make_shared<TailMajorant>(TailMajorant::basis(op, space, m.pool_));
      m.sides_ = {Side::Basis};
    } else {
      m.dense_ = std::make_shared<DenseVectors>(op.side());
      auto dense = m.dense_;
      m.majorant_ = std::make_shared<TailMajorant>(TailMajorant::dense(
          op, space, [dense](std::int64_t i) { return dense->vector(i); }));
      m.sides_ = {Side::Inverse, Side::Forward};
    }

    const IndexKind model_side =
        mode == ModelMode::BilateralFHC ? IndexKind::Bilateral : IndexKind::Unilateral;
    m.profile_ = build_schedule(*m.majorant_, m.sides_, model_side, depth, space.base_radius());
    m.weights_ = std::make_shared<SymbolWeights>(SymbolWeights::schedule_rule(theta, m.profile_));

    m.compute_certificates();
    m.fingerprint_ = fnv1a64(m.fingerprint_text());
    return m;
  }

  const FSpace& space() const { return space_; }
  const WeightedShift& op() const { return op_; }
  ModelMode mode() const { return mode_; }
  std::int64_t depth() const { return depth_; }
  double theta() const { return theta_; }
  const ConstraintProfile& profile() const { return *profile_; }
  std::shared_ptr<const ConstraintProfile> profile_ptr() const { return profile_; }
  const SymbolWeights& weights() const { return *weights_; }
  const TailMajorant& majorant() const { return *majorant_; }
  const ScheduleCertificates& certificates() const { return certs_; }
  const ChaosReport& chaos() const { return chaos_; }
  std::uint64_t fingerprint() const { return fingerprint_; }

  const DenseVectors& dense_vectors() const {
    if (!dense_) throw std::runtime_error("MeasureModel: no dense enumeration in exact mode");
    return *dense_;
  }
  const ScalarPool& pool() const {
    if (!pool_) throw std::runtime_error("MeasureModel: no scalar pool in fhc mode");
    return *pool_;
  }

  IndexKind model_side() const { return profile_->model_side(); }
  double radius(std::int64_t n) const {
    return std::ldexp(space_.base_radius(), static_cast<int>(-n));
  }

  // Certified truncation budget at level L for sequences known to satisfy the
  // admissibility caps beyond the window.
  double admissible_budget(std::int64_t L) const { return certs_.cert_total(L); }

  // Expected-tail certificate for unconditioned i.i.d. samples truncated at
  // N_L: bounds E[F(discarded tail)] by sum_{k > N_L} sum_m p_m bound(m, k).
  double iid_budget(std::int64_t L) const {
    std::lock_guard<std::mutex> lock(iid_cache_->mu);
    auto it = iid_cache_->values.find(L);
    if (it != iid_cache_->values.end()) return it->second;
    const double v = compute_iid_budget(profile_->N(L));
    iid_cache_->values[L] = v;
    return v;
  }

  // Window the caller must sample so that orbit points up to `max_shift` can
  // be evaluated at level L.
  std::pair<std::int64_t, std::int64_t> required_window(std::int64_t L,
                                                        std::int64_t max_shift = 0) const {
    const std::int64_t w = profile_->N(L);
    if (mode_ == ModelMode::BilateralFHC) return {-w - max_shift, w};
    return {1, w + max_shift};
  }

  std::string fingerprint_text() const {
    std::ostringstream os;
    os << "ergoshift-model-1|" << space_.describe() << "|r0=" << space_.base_radius() << '|'
       << to_string(op_.side()) << '|' << rule_text() << '|' << to_string(mode_)
       << "|depth=" << depth_ << "|theta=" << theta_ << "|N=";
    for (std::int64_t v : profile_->stored()) os << v << ',';
    os << "|sv=";
    for (double s : weights_->survival_head(8)) {
      os << std::hexfloat << s << ',' << std::defaultfloat;
    }
    return os.str();
  }

 private:
  MeasureModel(const FSpace& space, const WeightedShift& op, ModelMode mode, std::int64_t depth,
               double theta)
      : space_(space), op_(op), mode_(mode), depth_(depth), theta_(theta) {}

  std::string rule_text() const {
    std::ostringstream os;
    if (const auto* c = std::get_if<ConstantWeights>(&op_.rule())) {
      os << "const:" << c->value;
    } else if (const auto* p = std::get_if<PowerRatioWeights>(&op_.rule())) {
      os << "power:" << p->exponent;
    } else {
      const auto& t = std::get<TableWeights>(op_.rule());
      os << "table:" << t.first_index << ':' << t.left_extension << ':' << t.right_extension << ':';
      for (double v : t.values) os << v << ',';
    }
    return os.str();
  }

  void compute_certificates() {
    const double r0 = space_.base_radius();
    certs_.extension_allowance = std::ldexp(r0, static_cast<int>(-(depth_ + 2)));
    certs_.block_primary.assign(static_cast<std::size_t>(depth_ - 1), 0.0);
    if (mode_ == ModelMode::BilateralFHC)
      certs_.block_secondary.assign(static_cast<std::size_t>(depth_ - 1), 0.0);
    for (std::int64_t l = 1; l < depth_; ++l) {
      const std::int64_t klo = profile_->N(l), khi = profile_->N(l + 1);
      const Side primary = mode_ == ModelMode::BilateralFHC ? Side::Inverse : Side::Basis;
      certs_.block_primary[static_cast<std::size_t>(l - 1)] =
          majorant_->full_tail(primary, 2 * l, klo) - majorant_->full_tail(primary, 2 * l, khi);
      if (mode_ == ModelMode::BilateralFHC) {
        certs_.block_secondary[static_cast<std::size_t>(l - 1)] =
            majorant_->full_tail(Side::Forward, 2 * l, klo) -
            majorant_->full_tail(Side::Forward, 2 * l, khi);
      }
    }
    for (std::int64_t n = 1; n <= depth_; ++n) {
      const double rn1 = radius(n + 1);
      if (!(certs_.cert_primary(n) < rn1) ||
          (mode_ == ModelMode::BilateralFHC && !(certs_.cert_secondary(n) < rn1)))
        throw std::runtime_error("schedule certificate failed at level " + std::to_string(n));
    }
  }

  double compute_iid_budget(std::int64_t W) const {
    double total = 0.0;
    if (mode_ == ModelMode::UnilateralExact) {
      // exact head over the pool, survival bound beyond; terms vanish fast
      for (std::int64_t n = 2; n <= 4000; ++n) {
        const double p = n <= depth_ ? weights_->prob(n) : weights_->survival_bound(n - 1);
        const double t = majorant_->tail(Side::Basis, n, W);
        const double term = p * t;
        total += term;
        if (n > 64 && term == 0.0) break;
      }
      return total;
    }
    const std::int64_t exact_upto =
        std::min<std::int64_t>(dense_->level_start(3) - 1, 300);
    for (std::int64_t m = 2; m <= exact_upto; ++m) {
      const double p = m <= depth_ ? weights_->prob(m) : weights_->survival_bound(m - 1);
      total += p * (majorant_->tail(Side::Inverse, m, W) + majorant_->tail(Side::Forward, m, W));
    }
    // level-grouped remainder: p-mass of a level against its worst tail
    for (std::int64_t c = 3; c <= 24; ++c) {
      const std::int64_t start = dense_->level_start(c);
      const double mass = weights_->survival_bound(std::max<std::int64_t>(start - 1, 1));
      if (mass == 0.0) break;
      const double q = space_.power();
      const double coef = std::pow(dense_->pool().abs_bound(c + 1), q) *
                          static_cast<double>(dense_->window_length(c));
      double worst = 0.0;
      for (std::int64_t j = -c; j <= c; ++j) {
        if (op_.side() == IndexKind::Unilateral && j < 1) continue;
        worst = std::max(worst, unit_coord_tail(Side::Inverse, j, W) +
                                    unit_coord_tail(Side::Forward, j, W));
      }
      const double term = mass * coef * worst;
      total += term;
      if (term == 0.0) break;
    }
    return total;
  }

  // tail(side) of a single unit coordinate; helper for the level remainder.
  double unit_coord_tail(Side side, std::int64_t j, std::int64_t W) const {
    auto unit = [this, j](std::int64_t m) {
      if (m == 1) return SparseVector(op_.side());
      return SparseVector::unit(op_.side(), j);
    };
    TailMajorant tm = TailMajorant::dense(op_, space_, unit);
    return tm.tail(side, 2, W);
  }

  FSpace space_;
  WeightedShift op_;
  ModelMode mode_;
  std::int64_t depth_;
  double theta_;

  std::shared_ptr<DenseVectors> dense_;
  std::shared_ptr<const ScalarPool> pool_;
  std::shared_ptr<TailMajorant> majorant_;
  std::vector<Side> sides_;
  std::shared_ptr<ConstraintProfile> profile_;
  std::shared_ptr<SymbolWeights> weights_;
  ScheduleCertificates certs_;
  ChaosReport chaos_;
  std::uint64_t fingerprint_ = 0;

  struct IidCache {
    std::mutex mu;
    std::map<std::int64_t, double> values;
  };
  std::shared_ptr<IidCache> iid_cache_ = std::make_shared<IidCache>();
};

// ---------------------------------------------------------------------------
// The coding map
// ---------------------------------------------------------------------------

// Evaluates the coding map over the window |k| <= N_L (k <= N_L unilaterally):
//
//   bilateral:  Phi(n) = sum_{k<0} S_{-k} x_{n_k} + x_{n_0} + sum_{k>0} T^k x_{n_k}
//   unilateral: Phi(a)_k = z_{a_k} / b_k
//
// The truncation error is the certified admissible-tail budget when the
// sequence is tagged admissible, and the expected-tail certificate otherwise.
inline TruncatedVector evaluate_phi(const MeasureModel& model, const SymbolSequence& seq,
                                    std::int64_t L) {
  if (L < 1 || L > model.depth())
    throw std::invalid_argument("evaluate_phi: level must lie in [1, depth]");
  const std::int64_t W = model.profile().N(L);
  TruncatedVector out;
  if (model.mode() == ModelMode::UnilateralExact) {
    if (!seq.covers(1, W))
      throw std::invalid_argument("evaluate_phi: window must cover coordinates up to N_L = " +
                                  std::to_string(W));
    out.value = SparseVector(IndexKind::Unilateral);
    for (std::int64_t k = 1; k <= W; ++k) {
      const double z = model.pool().value(seq.at(k));
      if (z == 0.0) continue;
      out.value.set(k, z / model.op().diagonal_scaling(k));
    }
  } else {
    if (!seq.covers(-W, W))
      throw std::invalid_argument("evaluate_phi: window must cover coordinates |k| <= N_L = " +
                                  std::to_string(W));
    out.value = SparseVector(model.op().side());
    const bool op_unilateral = model.op().side() == IndexKind::Unilateral;
    for (std::int64_t k = -W; k <= W; ++k) {
      const std::int64_t m = seq.at(k);
      if (m == 1) continue;
      const SparseVector x = model.dense_vectors().vector(m);
      for (const auto& [j, c] : x.entries()) {
        if (k == 0) {
          out.value.add(j, c);
        } else if (k > 0) {
          const std::int64_t target = j - k;
          if (op_unilateral && target < 1) continue;
          out.value.add(target, c * model.op().backward_product(j, k));
        } else {
          out.value.add(j - k, c / model.op().forward_product(j, -k));
        }
      }
    }
  }
  out.truncation_error =
      seq.admissible_tag() ? model.admissible_budget(L) : model.iid_budget(L);
  return out;
}

// Samples one point of the pushforward measure: i.i.d. symbols on the level-L
// window, then the coding map.
inline TruncatedVector sample_point(const MeasureModel& model, SplitMix64& rng, std::int64_t L) {
  const auto [lo, hi] = model.required_window(L);
  const SymbolSequence seq = sample_symbols(model.weights(), lo, hi, rng);
  return evaluate_phi(model, seq, L);
}

// T^n Phi(seq), computed through the shift semiconjugacy as Phi of the
// shifted sequence.  Bilateral models use sigma^{-n}; unilateral exact models
// drop the first n symbols.
inline TruncatedVector orbit_point(const MeasureModel& model, const SymbolSequence& seq,
                                   std::int64_t n, std::int64_t L) {
  if (n < 0) throw std::invalid_argument("orbit_point: n must be >= 0");
  const std::int64_t t = model.mode() == ModelMode::BilateralFHC ? -n : n;
  return evaluate_phi(model, shift_symbols(seq, t), L);
}

}  // namespace ergoshift
