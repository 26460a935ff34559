#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <vector>

#include "ergoshift/fspace.hpp"
#include "ergoshift/rng.hpp"

namespace ergoshift {

// ---------------------------------------------------------------------------
// Constraint profile: the schedule (N_n) and per-coordinate admissible caps
// ---------------------------------------------------------------------------

// cap(k) = 1 for |k| <= N_1 and cap(k) = m for N_m < |k| <= N_{m+1}.
// Bilateral profiles fold |k|; unilateral profiles live on k >= 1.
//
// The stored schedule is finite.  Levels beyond it can be materialized on
// demand through an installed extender (the deterministic rule used by the
// schedule builder), so that symbol weights tied to schedule gaps remain
// well-defined at any depth.
class ConstraintProfile {
 public:
  // level, N_{level-1}, N_{level-2} -> N_level
  using Extender = std::function<std::int64_t(std::int64_t, std::int64_t, std::int64_t)>;

  ConstraintProfile(IndexKind model_side, std::vector<std::int64_t> schedule)
      : side_(model_side), n_(std::move(schedule)) {
    if (n_.empty()) throw std::invalid_argument("ConstraintProfile: empty schedule");
    std::int64_t prev = 0;
    for (std::size_t i = 0; i < n_.size(); ++i) {
      if (n_[i] <= prev) throw std::invalid_argument("ConstraintProfile: schedule must increase");
      prev = n_[i];
    }
    for (std::size_t i = 0; i + 2 < n_.size(); ++i) {
      if (n_[i + 2] - n_[i + 1] <= n_[i + 1] - n_[i])
        throw std::invalid_argument("ConstraintProfile: gaps must grow strictly");
    }
  }

  IndexKind model_side() const { return side_; }
  std::int64_t stored_depth() const { return static_cast<std::int64_t>(n_.size()); }

  void install_extender(Extender e) { extender_ = std::move(e); }
  bool has_extender() const { return static_cast<bool>(extender_); }

  // N_l with N_0 = 0; levels beyond the stored depth are extended lazily.
  std::int64_t N(std::int64_t l) const {
    if (l < 0) throw std::invalid_argument("ConstraintProfile: level must be >= 0");
    if (l == 0) return 0;
    if (l <= stored_depth()) return n_[static_cast<std::size_t>(l - 1)];
    std::lock_guard<std::mutex> lock(mu_);
    while (static_cast<std::int64_t>(n_.size() + ext_.size()) < l) {
      if (!extender_)
        throw std::runtime_error("ConstraintProfile: no tail rule installed for level extension");
      const std::int64_t next = static_cast<std::int64_t>(n_.size() + ext_.size()) + 1;
      ext_.push_back(extender_(next, unguarded(next - 1), unguarded(next - 2)));
    }
    return unguarded(l);
  }

  // Gap of level l: Delta_l = N_{l+1} - N_l (Delta_0 = N_1).
  std::int64_t gap(std::int64_t l) const { return N(l + 1) - N(l); }

  // Admissible cap at a profile coordinate.  Coordinates must stay within the
  // stored schedule range.
  std::int64_t cap(std::int64_t coord) const {
    const std::int64_t a = side_ == IndexKind::Bilateral ? std::llabs(coord) : coord;
    if (side_ == IndexKind::Unilateral && coord < 1)
      throw std::invalid_argument("ConstraintProfile: unilateral coordinate must be >= 1");
    if (a <= n_[0]) return 1;
    for (std::size_t m = 1; m < n_.size(); ++m)
      if (a <= n_[m]) return static_cast<std::int64_t>(m);
    throw std::invalid_argument("ConstraintProfile: coordinate beyond stored schedule");
  }

  const std::vector<std::int64_t>& stored() const { return n_; }

 private:
  std::int64_t unguarded(std::int64_t l) const {
    if (l <= stored_depth()) return n_[static_cast<std::size_t>(l - 1)];
    return ext_[static_cast<std::size_t>(l - stored_depth() - 1)];
  }

  IndexKind side_;
  std::vector<std::int64_t> n_;
  Extender extender_;
  mutable std::mutex mu_;
  mutable std::vector<std::int64_t> ext_;
};

// ---------------------------------------------------------------------------
// Symbol weights: the marginal distribution (p_n) on N = {1, 2, ...}
// ---------------------------------------------------------------------------

// Represented through the survival function tail_j = P(symbol > j), which is
// exact at any depth and free of cancellation.
//
// Two rules are provided:
//
//   geometric(p1):       tail_j = (1 - p1)^j.
//
//   schedule_rule(theta, profile): tail_j chosen so that the block factor
//     beta_j = (sum_{i<=j} p_i)^(Delta_j) equals exactly 1 - theta * 2^-j.
//     This makes prod_j beta_j > 0 certifiable in closed form for any
//     schedule, which is what the measure construction needs.
class SymbolWeights {
 public:
  static SymbolWeights geometric(double p1) {
    if (!(p1 > 0.0 && p1 < 1.0)) throw std::invalid_argument("SymbolWeights: p1 in (0,1) required");
    SymbolWeights w;
    w.kind_ = Kind::Geometric;
    w.p1_ = p1;
    return w;
  }

  static SymbolWeights schedule_rule(double theta, std::shared_ptr<const ConstraintProfile> profile) {
    if (!(theta > 0.0 && theta < 1.0)) throw std::invalid_argument("SymbolWeights: theta in (0,1) required");
    if (!profile) throw std::invalid_argument("SymbolWeights: profile required");
    SymbolWeights w;
    w.kind_ = Kind::ScheduleRule;
    w.theta_ = theta;
    w.profile_ = std::move(profile);
    // precompute the head over the stored schedule; survival beyond it falls
    // back to the live rule (and may extend the schedule)
    for (std::int64_t j = 1; j < w.profile_->stored_depth(); ++j)
      w.head_.push_back(w.survival_live(j));
    return w;
  }

  bool is_schedule_rule() const { return kind_ == Kind::ScheduleRule; }
  double theta() const { return theta_; }

  // P(symbol > j), exact.
  double survival(std::int64_t j) const {
    if (j < 0) throw std::invalid_argument("SymbolWeights: j must be >= 0");
    if (j == 0) return 1.0;
    if (kind_ == Kind::Geometric) return std::pow(1.0 - p1_, static_cast<double>(j));
    if (j <= static_cast<std::int64_t>(head_.size())) return head_[static_cast<std::size_t>(j - 1)];
    return survival_live(j);
  }

  // Closed-form upper bound on survival(j) that needs no schedule lookup.
  double survival_bound(std::int64_t j) const {
    if (kind_ == Kind::Geometric) return std::pow(1.0 - p1_, static_cast<double>(j));
    return theta_ * std::ldexp(1.0, static_cast<int>(-std::min<std::int64_t>(j, 1000)));
  }

  double cumulative(std::int64_t j) const { return 1.0 - survival(j); }

  double prob(std::int64_t n) const {
    if (n < 1) throw std::invalid_argument("SymbolWeights: symbol must be >= 1");
    return survival(n - 1) - survival(n);
  }

  // Block factor beta_l = cumulative(l)^Delta_l.  For the schedule rule this
  // is 1 - theta * 2^-l exactly by construction.
  double beta(std::int64_t l) const {
    if (kind_ == Kind::ScheduleRule)
      return 1.0 - theta_ * std::ldexp(1.0, static_cast<int>(-l));
    throw std::runtime_error("SymbolWeights: tail rule missing (beta needs the schedule rule)");
  }

  double beta_direct(std::int64_t l, std::int64_t gap) const {
    return std::pow(cumulative(l), static_cast<double>(gap));
  }

  // log prod_{l > L} beta_l, evaluated to machine precision.
  double log_beta_tail(std::int64_t L) const {
    if (kind_ != Kind::ScheduleRule)
      throw std::runtime_error("SymbolWeights: tail rule missing (no certified beta tail)");
    double acc = 0.0;
    for (std::int64_t l = L + 1; l <= L + 80; ++l)
      acc += std::log1p(-theta_ * std::ldexp(1.0, static_cast<int>(-std::min<std::int64_t>(l, 1000))));
    return acc;
  }

  std::int64_t sample(SplitMix64& rng) const {
    const double s = rng.next_open();
    std::int64_t n = 1;
    while (survival(n) >= s) {
      ++n;
      if (n > 4000) throw std::runtime_error("SymbolWeights: sampling ran off the distribution tail");
    }
    return n;
  }

  // Survival head used in fingerprints and reports.
  std::vector<double> survival_head(std::int64_t count) const {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(count));
    for (std::int64_t j = 1; j <= count; ++j) out.push_back(survival(j));
    return out;
  }

 private:
  enum class Kind { Geometric, ScheduleRule };
  SymbolWeights() = default;

  double survival_live(std::int64_t j) const {
    const double gap = static_cast<double>(std::max<std::int64_t>(profile_->gap(j), 1));
    return -std::expm1(std::log1p(-theta_ * std::ldexp(1.0, static_cast<int>(-std::min<std::int64_t>(j, 1000)))) / gap);
  }

  Kind kind_ = Kind::Geometric;
  double p1_ = 0.5;
  double theta_ = 0.5;
  std::shared_ptr<const ConstraintProfile> profile_;
  std::vector<double> head_;
};

// ---------------------------------------------------------------------------
// Admissible symbol sets for cylinder events
// ---------------------------------------------------------------------------

struct AdmissibleSet {
  bool complement = false;              // true: everything except `symbols`
  std::vector<std::int64_t> symbols;    // sorted, unique, >= 1

  static AdmissibleSet of(std::vector<std::int64_t> syms) {
    AdmissibleSet s;
    s.symbols = std::move(syms);
    std::sort(s.symbols.begin(), s.symbols.end());
    s.symbols.erase(std::unique(s.symbols.begin(), s.symbols.end()), s.symbols.end());
    if (!s.symbols.empty() && s.symbols.front() < 1)
      throw std::invalid_argument("AdmissibleSet: symbols must be >= 1");
    return s;
  }

  static AdmissibleSet range(std::int64_t lo, std::int64_t hi) {
    std::vector<std::int64_t> v;
    for (std::int64_t n = lo; n <= hi; ++n) v.push_back(n);
    return of(std::move(v));
  }

  static AdmissibleSet excluding(std::vector<std::int64_t> syms) {
    AdmissibleSet s = of(std::move(syms));
    s.complement = true;
    return s;
  }

  bool contains(std::int64_t n) const {
    const bool in = std::binary_search(symbols.begin(), symbols.end(), n);
    return complement ? !in : in;
  }

  double measure(const SymbolWeights& w) const {
    double s = 0.0;
    for (std::int64_t n : symbols) s += w.prob(n);
    return complement ? 1.0 - s : s;
  }

  static AdmissibleSet intersect(const AdmissibleSet& a, const AdmissibleSet& b) {
    AdmissibleSet out;
    if (!a.complement && !b.complement) {
      std::set_intersection(a.symbols.begin(), a.symbols.end(), b.symbols.begin(),
                            b.symbols.end(), std::back_inserter(out.symbols));
    } else if (a.complement && b.complement) {
      out.complement = true;
      std::set_union(a.symbols.begin(), a.symbols.end(), b.symbols.begin(), b.symbols.end(),
                     std::back_inserter(out.symbols));
    } else {
      const AdmissibleSet& fin = a.complement ? b : a;
      const AdmissibleSet& cof = a.complement ? a : b;
      std::set_difference(fin.symbols.begin(), fin.symbols.end(), cof.symbols.begin(),
                          cof.symbols.end(), std::back_inserter(out.symbols));
    }
    return out;
  }
};

// ---------------------------------------------------------------------------
// Symbol sequences and the Bernoulli shift
// ---------------------------------------------------------------------------

// A finite window of a symbol sequence.  `offset` carries the K(s) tag: a
// sequence tagged with offset s claims symbols(k) admissible for F_{k+s}.
class SymbolSequence {
 public:
  SymbolSequence(std::int64_t lo, std::vector<std::int64_t> symbols, std::int64_t offset = 0,
                 bool admissible = false)
      : lo_(lo), symbols_(std::move(symbols)), offset_(offset), admissible_(admissible) {
    for (std::int64_t s : symbols_)
      if (s < 1) throw std::invalid_argument("SymbolSequence: symbols must be >= 1");
  }

  std::int64_t lo() const { return lo_; }
  std::int64_t hi() const { return lo_ + static_cast<std::int64_t>(symbols_.size()) - 1; }
  std::int64_t size() const { return static_cast<std::int64_t>(symbols_.size()); }
  std::int64_t offset() const { return offset_; }
  bool admissible_tag() const { return admissible_; }
  void set_admissible_tag(bool v) { admissible_ = v; }

  bool covers(std::int64_t a, std::int64_t b) const { return lo_ <= a && hi() >= b; }

  std::int64_t at(std::int64_t k) const {
    if (k < lo_ || k > hi()) throw std::out_of_range("SymbolSequence: coordinate outside window");
    return symbols_[static_cast<std::size_t>(k - lo_)];
  }

  const std::vector<std::int64_t>& raw() const { return symbols_; }

  bool operator==(const SymbolSequence& o) const {
    return lo_ == o.lo_ && offset_ == o.offset_ && symbols_ == o.symbols_;
  }

 private:
  std::int64_t lo_;
  std::vector<std::int64_t> symbols_;
  std::int64_t offset_;
  bool admissible_;
};

// i.i.d. coordinates on [lo, hi], each distributed by the weights.
inline SymbolSequence sample_symbols(const SymbolWeights& w, std::int64_t lo, std::int64_t hi,
                                     SplitMix64& rng) {
  if (hi < lo) throw std::invalid_argument("sample_symbols: empty window");
  std::vector<std::int64_t> syms;
  syms.reserve(static_cast<std::size_t>(hi - lo + 1));
  for (std::int64_t k = lo; k <= hi; ++k) syms.push_back(w.sample(rng));
  return SymbolSequence(lo, std::move(syms));
}

// sigma^t: (sigma^t x)(k) = x(k + t); the window and the K(s) tag move along.
inline SymbolSequence shift_symbols(const SymbolSequence& s, std::int64_t t) {
  return SymbolSequence(s.lo() - t, s.raw(), s.offset() + t, s.admissible_tag());
}

// Window-restricted admissibility check against K(s) for the sequence's tag.
inline bool check_admissible(const ConstraintProfile& profile, const SymbolSequence& s) {
  for (std::int64_t k = s.lo(); k <= s.hi(); ++k)
    if (s.at(k) > profile.cap(k + s.offset())) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Exact cylinder measures
// ---------------------------------------------------------------------------

// Product measure of a cylinder event: finitely many constrained coordinates,
// independent factors.  Repeated coordinates are intersected first.
inline double cylinder_measure(const SymbolWeights& w,
                               std::vector<std::pair<std::int64_t, AdmissibleSet>> constraints) {
  std::sort(constraints.begin(), constraints.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  double out = 1.0;
  std::size_t i = 0;
  while (i < constraints.size()) {
    AdmissibleSet acc = constraints[i].second;
    std::size_t j = i + 1;
    while (j < constraints.size() && constraints[j].first == constraints[i].first) {
      acc = AdmissibleSet::intersect(acc, constraints[j].second);
      ++j;
    }
    out *= acc.measure(w);
    i = j;
  }
  return out;
}

// Shifts every constraint coordinate: the event sigma^{-n} E.
inline std::vector<std::pair<std::int64_t, AdmissibleSet>> shift_constraints(
    std::vector<std::pair<std::int64_t, AdmissibleSet>> cs, std::int64_t n) {
  for (auto& c : cs) c.first += n;
  return cs;
}

// ---------------------------------------------------------------------------
// Lower bound for the measure of the constrained product set K
// ---------------------------------------------------------------------------

struct KMeasureBound {
  double partial = 0.0;       // forced coordinates and block factors up to depth L
  double tail_factor = 0.0;   // certified lower bound on the neglected blocks
  double certified = 0.0;     // partial * tail_factor^(number of sides)
};

// mu(K) >= p_1^(forced) * (prod_{l<=L} beta_l)^sides * (prod_{l>L} beta_l)^sides,
// where forced = 2 N_1 + 1 bilaterally and N_1 unilaterally, and the tail
// product is certified through the weights' closed-form rule.
inline KMeasureBound k_measure_lower_bound(const SymbolWeights& w, const ConstraintProfile& profile,
                                           std::int64_t L) {
  if (L < 1 || L > profile.stored_depth())
    throw std::invalid_argument("k_measure_lower_bound: L must lie in the stored schedule");
  const bool bilateral = profile.model_side() == IndexKind::Bilateral;
  const int sides = bilateral ? 2 : 1;
  const double forced = bilateral ? static_cast<double>(2 * profile.N(1) + 1)
                                  : static_cast<double>(profile.N(1));
  double log_partial = forced * std::log(w.prob(1));
  for (std::int64_t l = 1; l <= L; ++l) {
    const double beta = w.is_schedule_rule() ? w.beta(l) : w.beta_direct(l, profile.gap(l));
    log_partial += sides * std::log(beta);
  }
  KMeasureBound out;
  out.partial = std::exp(log_partial);
  out.tail_factor = std::exp(w.log_beta_tail(L));
  out.certified = out.partial * std::pow(out.tail_factor, sides);
  return out;
}

}  // namespace ergoshift
