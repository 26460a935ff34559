#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "ergoshift/config.hpp"
#include "ergoshift/verifier.hpp"

namespace ergoshift::cli {

// Exit codes: 0 all-pass, 1 any-fail, 2 any-inconclusive-without-fail,
// 64 usage or configuration error.
constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitInconclusive = 2;
constexpr int kExitUsage = 64;

inline std::string fmt_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string fingerprint_hex(std::uint64_t fp) {
  std::ostringstream os;
  os << std::hex << fp;
  return os.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

// ---------------------------------------------------------------------------
// Model summary (the `build` artifact)
// ---------------------------------------------------------------------------

inline ordered_json model_summary(const MeasureModel& model, const ExperimentConfig& cfg) {
  ordered_json j;
  j["config"] = config_to_json(cfg);
  j["fingerprint"] = fingerprint_hex(model.fingerprint());
  j["mode"] = to_string(model.mode());
  j["space"] = model.space().describe();
  j["schedule"] = model.profile().stored();
  ordered_json gaps = ordered_json::array();
  for (std::int64_t l = 0; l < model.depth(); ++l) gaps.push_back(model.profile().gap(l));
  j["gaps"] = gaps;
  const auto& c = model.certificates();
  j["certificates"] = ordered_json{{"block_primary", c.block_primary},
                                   {"block_secondary", c.block_secondary},
                                   {"extension_allowance", c.extension_allowance}};
  ordered_json certs = ordered_json::array();
  for (std::int64_t n = 1; n <= model.depth(); ++n)
    certs.push_back(ordered_json{{"level", n},
                                 {"cert_primary", c.cert_primary(n)},
                                 {"cert_secondary", c.cert_secondary(n)},
                                 {"radius_next", model.radius(n + 1)}});
  j["tail_certificates"] = certs;
  ordered_json weights;
  ordered_json probs = ordered_json::array(), survs = ordered_json::array();
  for (std::int64_t n = 1; n <= 8; ++n) {
    probs.push_back(model.weights().prob(n));
    survs.push_back(model.weights().survival(n));
  }
  weights["theta"] = model.theta();
  weights["p_head"] = probs;
  weights["survival_head"] = survs;
  j["weights"] = weights;
  const KMeasureBound kb =
      k_measure_lower_bound(model.weights(), model.profile(), model.depth());
  j["k_measure"] = ordered_json{{"partial", kb.partial},
                                {"tail_factor", kb.tail_factor},
                                {"certified", kb.certified}};
  j["chaos"] = ordered_json{{"chaotic", model.chaos().chaotic},
                            {"cutoff", model.chaos().cutoff},
                            {"tail_value", model.chaos().tail_value},
                            {"detail", model.chaos().detail}};
  return j;
}

// ---------------------------------------------------------------------------
// Default event batteries
// ---------------------------------------------------------------------------

// Centers are scaled by 3/4 so that the point mass of the measure at the
// zero vector never sits exactly on a ball boundary (dyadic radii meet
// dyadic center norms otherwise, which would inflate the uncertain mass).
inline std::vector<EventSpec> default_ball_events(const MeasureModel& model, int count) {
  std::vector<EventSpec> events;
  DenseVectors centers(model.mode() == ModelMode::UnilateralExact ? IndexKind::Unilateral
                                                                  : model.op().side());
  for (int i = 0; i < count; ++i) {
    const std::int64_t m = i + 1;
    const std::int64_t level = 1 + (i % 3);
    events.push_back(EventSpec::ball("ball-m" + std::to_string(m) + "-u" + std::to_string(level),
                                     vec_scale(0.75, centers.vector(m)), level));
  }
  return events;
}

inline std::vector<EventSpec> default_cylinder_events(const MeasureModel& model) {
  const std::int64_t c0 = model.mode() == ModelMode::BilateralFHC ? 0 : 1;
  std::vector<EventSpec> events;
  events.push_back(
      EventSpec::cylinder("cyl-" + std::to_string(c0) + "-sym1",
                          {{c0, AdmissibleSet::of({1})}}));
  events.push_back(EventSpec::cylinder(
      "cyl-pair", {{c0, AdmissibleSet::of({1})}, {c0 + 3, AdmissibleSet::of({1, 2})}}));
  return events;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

inline int run_build(const ExperimentConfig& cfg) {
  std::filesystem::create_directories(cfg.out);
  try {
    const MeasureModel model = build_from_config(cfg);
    const ordered_json j = model_summary(model, cfg);
    write_text(std::filesystem::path(cfg.out) / "model.json", j.dump(2) + "\n");
    std::cout << "model " << fingerprint_hex(model.fingerprint()) << " written to " << cfg.out
              << "/model.json\n";
    return kExitPass;
  } catch (const std::exception& e) {
    std::cerr << "build failed: " << e.what() << "\n";
    return kExitFail;
  }
}

inline int run_sample(const ExperimentConfig& cfg, std::int64_t count) {
  std::filesystem::create_directories(cfg.out);
  MeasureModel model = build_from_config(cfg);
  std::ostringstream csv;
  const bool bilateral = model.model_side() == IndexKind::Bilateral;
  const std::int64_t head_lo = bilateral ? -5 : 1;
  const std::int64_t head_hi = bilateral ? 5 : 10;
  csv << "# fingerprint " << fingerprint_hex(model.fingerprint()) << " seed " << cfg.seed << "\n";
  csv << "index,f_norm,truncation_error";
  for (std::int64_t k = head_lo; k <= head_hi; ++k) csv << ",c_" << k;
  csv << "\n";
  SplitMix64 rng = substream(cfg.seed, "sample");
  for (std::int64_t i = 0; i < count; ++i) {
    const TruncatedVector tv = sample_point(model, rng, cfg.level);
    csv << i << ',' << fmt_double(f_norm(model.space(), tv.value)) << ','
        << fmt_double(tv.truncation_error);
    for (std::int64_t k = head_lo; k <= head_hi; ++k) csv << ',' << fmt_double(tv.value.at(k));
    csv << "\n";
  }
  write_text(std::filesystem::path(cfg.out) / "samples.csv", csv.str());
  std::cout << count << " samples written to " << cfg.out << "/samples.csv\n";
  return kExitPass;
}

inline Verdict worst_of(Verdict a, Verdict b) {
  if (a == Verdict::Fail || b == Verdict::Fail) return Verdict::Fail;
  if (a == Verdict::Inconclusive || b == Verdict::Inconclusive) return Verdict::Inconclusive;
  return Verdict::Pass;
}

inline int run_verify(const ExperimentConfig& cfg) {
  static const std::vector<std::string> known = {"invariance", "mixing", "support", "density",
                                                 "exactness"};
  // resolve mode early so usage errors beat build errors
  const WeightedShift op = make_shift(cfg.op);
  const ModelMode mode = resolve_mode(cfg, op);

  std::vector<std::string> tests = cfg.tests;
  if (tests.empty()) {
    tests = {"invariance", "mixing", "support", "density"};
    if (mode == ModelMode::UnilateralExact) tests.push_back("exactness");
  }
  for (const auto& t : tests) {
    if (std::find(known.begin(), known.end(), t) == known.end()) {
      std::cerr << "unknown test: " << t << "\n";
      return kExitUsage;
    }
    if (t == "exactness" && mode != ModelMode::UnilateralExact) {
      std::cerr << "usage error: test 'exactness' requires a unilateral exact-mode model\n";
      return kExitUsage;
    }
  }

  std::filesystem::create_directories(cfg.out);
  MeasureModel model = [&]() {
    try {
      return build_from_config(cfg);
    } catch (const std::exception& e) {
      std::cerr << "build failed: " << e.what() << "\n";
      throw;
    }
  }();
  write_text(std::filesystem::path(cfg.out) / "model.json",
             model_summary(model, cfg).dump(2) + "\n");

  Verdict worst = Verdict::Pass;
  ordered_json combined;
  combined["config"] = config_to_json(cfg);
  combined["fingerprint"] = fingerprint_hex(model.fingerprint());
  ordered_json per_test = ordered_json::array();

  auto record = [&](const std::string& name, const std::vector<VerificationReport>& reps) {
    ordered_json arr = ordered_json::array();
    Verdict v = Verdict::Pass;
    for (const auto& r : reps) {
      arr.push_back(r.to_json());
      v = worst_of(v, r.verdict);
    }
    ordered_json file;
    file["test"] = name;
    file["verdict"] = to_string(v);
    file["config"] = config_to_json(cfg);
    file["reports"] = arr;
    write_text(std::filesystem::path(cfg.out) / ("report_" + name + ".json"), file.dump(2) + "\n");
    worst = worst_of(worst, v);
    per_test.push_back(ordered_json{{"test", name}, {"verdict", to_string(v)}});
    std::cout << "[" << to_string(v) << "] " << name << " (" << reps.size() << " checks)\n";
  };

  for (const auto& t : tests) {
    if (t == "invariance") {
      auto events = default_ball_events(model, 6);
      for (auto& ev : default_cylinder_events(model)) events.push_back(ev);
      record(t, test_invariance(model, events, cfg.samples, cfg.delta, cfg.seed, cfg.level));
    } else if (t == "mixing") {
      DenseVectors centers(model.mode() == ModelMode::UnilateralExact ? IndexKind::Unilateral
                                                                      : model.op().side());
      const EventSpec A = EventSpec::ball("ball-zero-u1", centers.vector(1), 1);
      const EventSpec B = EventSpec::ball("ball-zero-u2", centers.vector(1), 2);
      const VerificationReport rep = test_mixing(model, A, B, cfg.effective_lags(), cfg.samples,
                                                 cfg.delta, cfg.seed, cfg.level);
      std::ostringstream curve;
      curve << "# fingerprint " << fingerprint_hex(model.fingerprint()) << " seed " << cfg.seed
            << "\n";
      curve << "lag,joint,product,corr,band\n";
      for (const auto& row : rep.details["curve"]) {
        curve << row["lag"].get<std::int64_t>() << ',' << fmt_double(row["joint"].get<double>())
              << ',' << fmt_double(row["product"].get<double>()) << ','
              << fmt_double(row["corr"].get<double>()) << ','
              << fmt_double(row["band"].get<double>()) << "\n";
      }
      write_text(std::filesystem::path(cfg.out) / "mixing_curve.csv", curve.str());
      record(t, {rep});
    } else if (t == "support") {
      std::vector<std::int64_t> ms;
      for (std::int64_t m = 1; m <= std::min<std::int64_t>(5, model.depth()); ++m)
        ms.push_back(m);
      record(t, test_full_support(model, ms, cfg.samples, cfg.delta, cfg.seed, cfg.level));
    } else if (t == "density") {
      auto events = default_ball_events(model, 3);
      for (auto& ev : default_cylinder_events(model)) events.push_back(ev);
      record(t, test_visit_density(model, events, cfg.horizon, cfg.samples, cfg.delta, cfg.seed,
                                   cfg.level));
    } else if (t == "exactness") {
      record(t, {check_exactness_structure(model, cfg.samples, cfg.seed)});
    }
  }

  combined["tests"] = per_test;
  combined["verdict"] = to_string(worst);
  write_text(std::filesystem::path(cfg.out) / "combined.json", combined.dump(2) + "\n");
  std::cout << "combined verdict: " << to_string(worst) << "\n";
  if (worst == Verdict::Fail) return kExitFail;
  if (worst == Verdict::Inconclusive) return kExitInconclusive;
  return kExitPass;
}

}  // namespace ergoshift::cli
