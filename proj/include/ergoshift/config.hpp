#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "ergoshift/measure.hpp"

namespace ergoshift {

using ordered_json = nlohmann::ordered_json;

struct SpaceSpec {
  std::string kind = "lp";  // "lp" | "omega"
  double p = 2.0;
  double r0 = 1.0;
};

struct OperatorSpec {
  std::string side = "unilateral";  // "unilateral" | "bilateral"
  std::string rule = "constant";    // "constant" | "power" | "table"
  double value = 2.0;               // constant rule
  double exponent = 3.0;            // power rule
  std::int64_t table_first = 1;
  std::vector<double> table_values;
  double table_left = 1.0;
  double table_right = 2.0;
};

// Everything a run needs; fully serializable and embedded verbatim in every
// output so results can be reproduced from any report.
struct ExperimentConfig {
  std::string preset;
  SpaceSpec space;
  OperatorSpec op;
  std::string mode = "auto";  // "auto" | "fhc" | "exact"
  std::int64_t depth = 12;
  std::int64_t level = 6;
  double theta = 0.5;
  std::int64_t samples = 100000;
  double delta = 0.01;
  std::vector<std::int64_t> lags;
  std::int64_t horizon = 10000;
  std::uint64_t seed = 1;
  std::string out = "out";
  std::vector<std::string> tests;

  std::vector<std::int64_t> effective_lags() const {
    if (!lags.empty()) return lags;
    std::vector<std::int64_t> v;
    for (std::int64_t n = 0; n <= 20; ++n) v.push_back(n);
    return v;
  }
};

inline ordered_json config_to_json(const ExperimentConfig& c) {
  ordered_json j;
  j["preset"] = c.preset;
  j["space"] = ordered_json{{"kind", c.space.kind}, {"p", c.space.p}, {"r0", c.space.r0}};
  ordered_json op{{"side", c.op.side}, {"rule", c.op.rule}};
  if (c.op.rule == "constant") op["value"] = c.op.value;
  if (c.op.rule == "power") op["exponent"] = c.op.exponent;
  if (c.op.rule == "table") {
    op["first_index"] = c.op.table_first;
    op["values"] = c.op.table_values;
    op["left_extension"] = c.op.table_left;
    op["right_extension"] = c.op.table_right;
  }
  j["operator"] = op;
  j["mode"] = c.mode;
  j["depth"] = c.depth;
  j["level"] = c.level;
  j["theta"] = c.theta;
  j["samples"] = c.samples;
  j["delta"] = c.delta;
  j["lags"] = c.effective_lags();
  j["horizon"] = c.horizon;
  j["seed"] = c.seed;
  j["out"] = c.out;
  j["tests"] = c.tests;
  return j;
}

inline ExperimentConfig config_from_json(const ordered_json& j) {
  ExperimentConfig c;
  c.preset = j.value("preset", std::string());
  if (j.contains("space")) {
    const auto& s = j.at("space");
    c.space.kind = s.value("kind", c.space.kind);
    c.space.p = s.value("p", c.space.p);
    c.space.r0 = s.value("r0", c.space.r0);
  }
  if (j.contains("operator")) {
    const auto& o = j.at("operator");
    c.op.side = o.value("side", c.op.side);
    c.op.rule = o.value("rule", c.op.rule);
    c.op.value = o.value("value", c.op.value);
    c.op.exponent = o.value("exponent", c.op.exponent);
    c.op.table_first = o.value("first_index", c.op.table_first);
    if (o.contains("values")) c.op.table_values = o.at("values").get<std::vector<double>>();
    c.op.table_left = o.value("left_extension", c.op.table_left);
    c.op.table_right = o.value("right_extension", c.op.table_right);
  }
  c.mode = j.value("mode", c.mode);
  c.depth = j.value("depth", c.depth);
  c.level = j.value("level", c.level);
  c.theta = j.value("theta", c.theta);
  c.samples = j.value("samples", c.samples);
  c.delta = j.value("delta", c.delta);
  if (j.contains("lags")) c.lags = j.at("lags").get<std::vector<std::int64_t>>();
  c.horizon = j.value("horizon", c.horizon);
  c.seed = j.value("seed", c.seed);
  c.out = j.value("out", c.out);
  if (j.contains("tests")) c.tests = j.at("tests").get<std::vector<std::string>>();
  return c;
}

// Shipped configurations.
inline ExperimentConfig preset_config(const std::string& name) {
  ExperimentConfig c;
  c.preset = name;
  if (name == "l2-doubling") {
    c.space = SpaceSpec{"lp", 2.0, 1.0};
    c.op = OperatorSpec{};
    c.op.side = "unilateral";
    c.op.rule = "constant";
    c.op.value = 2.0;
    c.mode = "exact";
    return c;
  }
  if (name == "l2-bilateral") {
    c.space = SpaceSpec{"lp", 2.0, 1.0};
    c.op.side = "bilateral";
    c.op.rule = "power";
    c.op.exponent = 3.0;
    c.mode = "fhc";
    return c;
  }
  if (name == "omega-any") {
    c.space = SpaceSpec{"omega", 2.0, 1.0};
    c.op.side = "unilateral";
    c.op.rule = "constant";
    c.op.value = 1.0;
    c.mode = "exact";
    return c;
  }
  throw std::invalid_argument("unknown preset: " + name);
}

inline FSpace make_space(const SpaceSpec& s) {
  if (s.kind == "omega") return FSpace::omega(s.r0);
  if (s.kind == "lp") return FSpace::lp(s.p, s.r0);
  throw std::invalid_argument("space kind must be 'lp' or 'omega'");
}

inline WeightedShift make_shift(const OperatorSpec& o) {
  IndexKind side;
  if (o.side == "unilateral") side = IndexKind::Unilateral;
  else if (o.side == "bilateral") side = IndexKind::Bilateral;
  else throw std::invalid_argument("operator side must be 'unilateral' or 'bilateral'");
  if (o.rule == "constant") return WeightedShift(side, ConstantWeights{o.value});
  if (o.rule == "power") return WeightedShift(side, PowerRatioWeights{o.exponent});
  if (o.rule == "table")
    return WeightedShift(side, TableWeights{o.table_first, o.table_values, o.table_left,
                                            o.table_right});
  throw std::invalid_argument("operator rule must be 'constant', 'power' or 'table'");
}

inline ModelMode resolve_mode(const ExperimentConfig& c, const WeightedShift& op) {
  if (c.mode == "fhc") return ModelMode::BilateralFHC;
  if (c.mode == "exact") {
    if (op.side() != IndexKind::Unilateral)
      throw std::invalid_argument("exact mode requires a unilateral operator");
    return ModelMode::UnilateralExact;
  }
  if (c.mode == "auto")
    return op.side() == IndexKind::Unilateral ? ModelMode::UnilateralExact
                                              : ModelMode::BilateralFHC;
  throw std::invalid_argument("mode must be 'auto', 'fhc' or 'exact'");
}

inline MeasureModel build_from_config(const ExperimentConfig& c) {
  const FSpace space = make_space(c.space);
  const WeightedShift op = make_shift(c.op);
  return MeasureModel::build(space, op, resolve_mode(c, op), c.depth, c.theta);
}

}  // namespace ergoshift
