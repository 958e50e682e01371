#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bksim/cftp.hpp"
#include "bksim/criterium.hpp"
#include "bksim/errors.hpp"
#include "bksim/estimation.hpp"
#include "bksim/kernels.hpp"
#include "bksim/logspace.hpp"
#include "bksim/params.hpp"
#include "bksim/rational.hpp"

namespace bk {

using Json = nlohmann::json;

// ---------------------------------------------------------------------------
// Rationals: canonical "num/den" strings
// ---------------------------------------------------------------------------

inline std::string rational_str(const Rational& q) { return q.get_str(10); }

inline Rational rational_from_str(const std::string& s) {
  auto bad = [&]() -> ConfigError {
    return ConfigError("bad rational literal '" + s + "'; expected num or num/den");
  };
  if (s.empty()) throw bad();
  auto slash = s.find('/');
  BigInt num, den(1);
  try {
    num = BigInt(slash == std::string::npos ? s : s.substr(0, slash));
    if (slash != std::string::npos) den = BigInt(s.substr(slash + 1));
  } catch (const std::invalid_argument&) {
    throw bad();
  }
  if (den == 0) throw ConfigError("zero denominator in rational '" + s + "'");
  Rational q(num, den);
  q.canonicalize();
  return q;
}

inline Rational rational_from_json(const Json& v) {
  if (v.is_string()) return rational_from_str(v.get<std::string>());
  if (v.is_number_integer())
    return Rational(BigInt(std::to_string(v.get<std::int64_t>())));
  throw ConfigError("expected a rational as \"num/den\" or an integer");
}

namespace detail {

inline const Json& need(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key))
    throw ConfigError(std::string("missing field '") + key + "'");
  return j.at(key);
}

inline std::string need_str(const Json& j, const char* key) {
  const Json& v = need(j, key);
  if (!v.is_string())
    throw ConfigError(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

inline std::uint64_t need_u64(const Json& j, const char* key) {
  const Json& v = need(j, key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
    throw ConfigError(std::string("field '") + key +
                      "' must be a nonnegative integer");
  return v.get<std::uint64_t>();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Certified scalars
// ---------------------------------------------------------------------------

inline Json json_of(const LogSpaceValue& v) {
  Json j;
  if (v.is_exact()) {
    j["kind"] = "exact";
    j["value"] = rational_str(v.rational());
  } else {
    j["kind"] = "log2-interval";
    LogInterval iv = v.as_interval();
    auto side = [](const SignedLog& s) {
      Json e;
      e["sign"] = s.sign;
      if (s.sign != 0) e["log2_abs"] = s.mag.str(40);
      return e;
    };
    j["lo"] = side(iv.lo);
    j["hi"] = side(iv.hi);
  }
  double approx = v.approx_double();
  if (std::isfinite(approx)) j["approx"] = approx;
  j["approx_log2_abs"] = v.approx_log2_abs();
  return j;
}

inline Json json_of(const ComparisonRecord& r) {
  bool exact = r.lhs.is_exact() && r.rhs.is_exact();
  Json j;
  j["label"] = r.label;
  j["relation"] = r.relation;
  j["lhs"] = json_of(r.lhs);
  j["rhs"] = json_of(r.rhs);
  j["representation"] = exact ? "exact-rational" : "log2-interval";
  j["rounding"] = exact ? "exact" : "outward";
  j["outcome"] = cmp_name(r.outcome);
  j["satisfied"] = satisfied_name(r.satisfied);
  return j;
}

// ---------------------------------------------------------------------------
// Model parameters and kernel specs (round-trippable)
// ---------------------------------------------------------------------------

inline Json json_of(const WeightFamily& w) {
  Json j;
  switch (w.kind()) {
    case WeightFamily::Kind::Geometric:
      j["kind"] = "geometric";
      j["scale"] = rational_str(w.geometric_scale());
      j["ratio"] = rational_str(w.geometric_ratio());
      break;
    case WeightFamily::Kind::Explicit: {
      j["kind"] = "explicit";
      Json vals = Json::array();
      for (const Rational& q : w.explicit_weights()) vals.push_back(rational_str(q));
      j["values"] = std::move(vals);
      if (w.explicit_tail()) {
        j["tail"] = {{"scale", rational_str(w.explicit_tail()->first)},
                     {"ratio", rational_str(w.explicit_tail()->second)}};
      }
      break;
    }
    case WeightFamily::Kind::SquareBlocks:
      j["kind"] = "square-blocks";
      j["c"] = w.block_c();
      break;
  }
  return j;
}

inline WeightFamily weight_family_from_json(const Json& j) {
  std::string kind = detail::need_str(j, "kind");
  if (kind == "geometric")
    return WeightFamily::geometric(rational_from_json(detail::need(j, "scale")),
                                   rational_from_json(detail::need(j, "ratio")));
  if (kind == "explicit") {
    const Json& vals = detail::need(j, "values");
    if (!vals.is_array()) throw ConfigError("explicit weights need a 'values' array");
    std::vector<Rational> w;
    for (const Json& v : vals) w.push_back(rational_from_json(v));
    std::optional<std::pair<Rational, Rational>> tail;
    if (j.contains("tail")) {
      const Json& t = j.at("tail");
      tail = std::make_pair(rational_from_json(detail::need(t, "scale")),
                            rational_from_json(detail::need(t, "ratio")));
    }
    return WeightFamily::explicit_list(std::move(w), std::move(tail));
  }
  if (kind == "square-blocks")
    return WeightFamily::square_blocks(
        static_cast<unsigned>(detail::need_u64(j, "c")));
  throw ConfigError("unknown weight family kind '" + kind + "'");
}

inline Json json_of(const OrderSequence& o) {
  Json j;
  switch (o.kind()) {
    case OrderSequence::Kind::Explicit:
      j["kind"] = "explicit";
      j["values"] = o.explicit_orders();
      break;
    case OrderSequence::Kind::Progression:
      j["kind"] = "progression";
      j["start"] = o.progression_start();
      j["step"] = o.progression_step();
      break;
    case OrderSequence::Kind::Tower:
      j["kind"] = "tower";
      j["base"] = o.tower_c();
      j["m1"] = o.tower_m1();
      break;
    case OrderSequence::Kind::SquarePow:
      j["kind"] = "square-pow";
      j["c"] = o.tower_c();
      break;
  }
  return j;
}

inline OrderSequence order_sequence_from_json(const Json& j) {
  std::string kind = detail::need_str(j, "kind");
  if (kind == "explicit") {
    const Json& vals = detail::need(j, "values");
    if (!vals.is_array()) throw ConfigError("explicit orders need a 'values' array");
    std::vector<std::uint64_t> m;
    for (const Json& v : vals) {
      if (!v.is_number_integer() && !v.is_number_unsigned())
        throw ConfigError("orders must be integers");
      m.push_back(v.get<std::uint64_t>());
    }
    return OrderSequence::explicit_list(std::move(m));
  }
  if (kind == "progression")
    return OrderSequence::progression(detail::need_u64(j, "start"),
                                      detail::need_u64(j, "step"));
  if (kind == "tower")
    return OrderSequence::tower(detail::need_u64(j, "base"),
                                detail::need_u64(j, "m1"));
  if (kind == "square-pow") return OrderSequence::square_pow(detail::need_u64(j, "c"));
  throw ConfigError("unknown order sequence kind '" + kind + "'");
}

inline Json json_of(const ModelParams& p) {
  Json j;
  j["epsilon"] = rational_str(p.epsilon);
  j["window"] = p.window == MajorityWindow::MostRecent ? "most-recent"
                                                       : "skip-most-recent";
  j["weights"] = json_of(p.weights);
  j["orders"] = json_of(p.orders);
  return j;
}

inline ModelParams model_params_from_json(const Json& j) {
  MajorityWindow win = MajorityWindow::MostRecent;
  if (j.contains("window")) {
    std::string w = detail::need_str(j, "window");
    if (w == "most-recent")
      win = MajorityWindow::MostRecent;
    else if (w == "skip-most-recent")
      win = MajorityWindow::SkipMostRecent;
    else
      throw ConfigError("unknown window convention '" + w + "'");
  }
  return ModelParams(rational_from_json(detail::need(j, "epsilon")),
                     weight_family_from_json(detail::need(j, "weights")),
                     order_sequence_from_json(detail::need(j, "orders")), win);
}

inline Json json_of(const KernelSpec& s) {
  Json j;
  switch (s.variant) {
    case KernelSpec::Variant::Lower:
      j["variant"] = "lower";
      j["k"] = s.k;
      break;
    case KernelSpec::Variant::Upper:
      j["variant"] = "upper";
      j["k"] = s.k;
      break;
    case KernelSpec::Variant::Mixed:
      j["variant"] = "mixed";
      j["r"] = s.r;
      j["l"] = s.l;
      break;
    case KernelSpec::Variant::MixedPrime:
      j["variant"] = "mixed-prime";
      j["r"] = s.r;
      j["l"] = s.l;
      break;
    case KernelSpec::Variant::FullBK:
      j["variant"] = "full-bk";
      break;
    case KernelSpec::Variant::Table: {
      j["variant"] = "table";
      Json t;
      t["order"] = s.table->order();
      Json vals = Json::array();
      for (std::uint64_t st = 0; st < s.table->states(); ++st)
        vals.push_back(rational_str(s.table->p_plus(st)));
      t["p_plus"] = std::move(vals);
      j["table"] = std::move(t);
      return j;
    }
  }
  j["params"] = json_of(s.model());
  return j;
}

inline KernelSpec kernel_spec_from_json(const Json& j) {
  std::string variant = detail::need_str(j, "variant");
  if (variant == "table") {
    const Json& t = detail::need(j, "table");
    std::uint64_t order = detail::need_u64(t, "order");
    const Json& vals = detail::need(t, "p_plus");
    if (!vals.is_array() || vals.size() != (std::uint64_t{1} << order))
      throw ConfigError("table needs exactly 2^order p_plus entries");
    std::vector<Rational> p;
    p.reserve(vals.size());
    for (const Json& v : vals) p.push_back(rational_from_json(v));
    return KernelSpec::from_table(TableKernel<Rational>(order, std::move(p)));
  }
  ModelParams params = model_params_from_json(detail::need(j, "params"));
  if (variant == "lower")
    return KernelSpec::lower(std::move(params), detail::need_u64(j, "k"));
  if (variant == "upper")
    return KernelSpec::upper(std::move(params), detail::need_u64(j, "k"));
  if (variant == "mixed")
    return KernelSpec::mixed(std::move(params), detail::need_u64(j, "r"),
                             detail::need_u64(j, "l"));
  if (variant == "mixed-prime")
    return KernelSpec::mixed_prime(std::move(params), detail::need_u64(j, "r"),
                                   detail::need_u64(j, "l"));
  if (variant == "full-bk") return KernelSpec::full_bk(std::move(params));
  throw ConfigError("unknown kernel variant '" + variant + "'");
}

// ---------------------------------------------------------------------------
// Simulation and estimation reports (one-way)
// ---------------------------------------------------------------------------

inline std::string symbols_str(const std::vector<Spin>& xs) {
  std::string out;
  out.reserve(xs.size());
  for (Spin x : xs) out.push_back(x == Spin::Plus ? '+' : '-');
  return out;
}

inline Json json_of(const CftpResult& r) {
  Json j;
  j["window_start"] = r.window_start;
  j["window_end"] = r.window_end;
  j["symbols"] = symbols_str(r.symbols);
  if (r.theta) j["theta"] = *r.theta;
  if (r.eta) j["eta"] = *r.eta;
  j["steps_used"] = r.steps_used;
  j["method"] = method_name(r.method);
  j["master_seed"] = r.master_seed;
  j["replicate"] = r.replicate;
  return j;
}

inline Json json_of(const EstimateReport& r) {
  Json j;
  j["quantity"] = r.quantity;
  j["point"] = r.point;
  j["n"] = r.n;
  j["requested"] = r.requested;
  j["failures"] = r.failures;
  j["confidence"] = r.confidence;
  j["range"] = r.range;
  j["band"] = r.band;
  j["seed"] = r.seed;
  j["purpose"] = r.purpose;
  j["first_replicate"] = r.first_replicate;
  return j;
}

inline Json json_of(const DbarEstimate& d) {
  Json j;
  j["disagreement"] = json_of(d.disagreement);
  if (d.s0_complement) j["s0_complement"] = json_of(*d.s0_complement);
  if (d.eta_mean) j["eta_mean"] = json_of(*d.eta_mean);
  if (d.product_majorant) j["product_majorant"] = *d.product_majorant;
  return j;
}

inline Json json_of(const EtaThetaReport& r) {
  Json j;
  j["eta_mean"] = json_of(r.eta_mean);
  j["theta_mean"] = json_of(r.theta_mean);
  j["theta_tail"] = r.theta_tail;
  j["max_eta"] = r.max_eta;
  j["max_theta"] = r.max_theta;
  return j;
}

inline Json json_of(const ConcentrationReport& r) {
  Json j;
  j["deviation"] = json_of(r.deviation);
  j["energy"] = rational_str(r.energy);
  j["energy_exact"] = r.energy_exact;
  j["rhs"] = json_of(r.rhs);
  j["rhs_value"] = r.rhs_value;
  j["block_length"] = r.block_length;
  return j;
}

inline Json json_of(const PhaseProbeReport& r) {
  Json j;
  j["gap"] = json_of(r.gap);
  j["truncation_index"] = r.truncation_index;
  j["truncation_order"] = r.truncation_order;
  j["horizon"] = r.horizon;
  j["caveat"] = r.caveat;
  return j;
}

// ---------------------------------------------------------------------------
// Criterium report
// ---------------------------------------------------------------------------

inline Json json_of(const PerKEntry& e) {
  Json j;
  j["k"] = e.k;
  j["r_next"] = e.r_next;
  if (e.gap_statement) j["gap_statement"] = rational_str(*e.gap_statement);
  if (e.gap_proof) j["gap_proof"] = rational_str(*e.gap_proof);
  if (e.a_k) j["a_k"] = json_of(*e.a_k);
  if (e.threshold_statement)
    j["threshold_statement"] = json_of(*e.threshold_statement);
  if (e.threshold_proof) j["threshold_proof"] = json_of(*e.threshold_proof);
  if (e.m_next) j["m_next"] = json_of(*e.m_next);
  j["satisfied_statement"] = satisfied_name(e.satisfied_statement);
  j["satisfied_proof"] = satisfied_name(e.satisfied_proof);
  j["covered_by_tail_rule"] = e.covered_by_tail_rule;
  if (!e.note.empty()) j["note"] = e.note;
  return j;
}

inline Json json_of(const CriteriumReport& r) {
  Json j;
  j["family"] = r.family;
  j["epsilon"] = rational_str(r.epsilon);
  j["alpha"] = rational_str(r.alpha);
  j["verdict"] = verdict_name(r.verdict);
  j["tail_rule"] = r.tail_rule;
  j["tail_ok"] = satisfied_name(r.tail_ok);
  j["ledger"] = {{"sum", rational_str(r.ledger_sum)},
                 {"lhs", rational_str(r.ledger_lhs)},
                 {"rhs", rational_str(r.ledger_rhs)},
                 {"ok", satisfied_name(r.ledger_ok)}};
  Json per = Json::array();
  for (const PerKEntry& e : r.per_k) per.push_back(json_of(e));
  j["per_k"] = std::move(per);
  Json steps = Json::array();
  for (const ComparisonRecord& s : r.steps) steps.push_back(json_of(s));
  j["steps"] = std::move(steps);
  if (r.quoted_threshold_printed) {
    Json q;
    q["printed"] = rational_str(*r.quoted_threshold_printed);
    if (r.quoted_threshold_expression)
      q["printed_expression"] = json_of(*r.quoted_threshold_expression);
    if (r.direct_threshold_k0)
      q["direct_statement_form"] = json_of(*r.direct_threshold_k0);
    q["discrepancy_flagged"] = r.threshold_discrepancy;
    j["k0_thresholds"] = std::move(q);
  }
  return j;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

inline std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

inline std::string trajectory_csv(const CftpResult& r) {
  std::string out = "position,symbol\n";
  for (std::size_t i = 0; i < r.symbols.size(); ++i) {
    out += std::to_string(r.window_start + static_cast<std::int64_t>(i));
    out += r.symbols[i] == Spin::Plus ? ",+1\n" : ",-1\n";
  }
  return out;
}

inline std::string estimate_csv_header() {
  return "experiment,quantity,point,n,requested,failures,confidence,range,"
         "band,seed,purpose,first_replicate\n";
}

inline std::string estimate_csv_row(const std::string& experiment,
                                    const EstimateReport& r) {
  Json point = r.point, band = r.band, confidence = r.confidence,
       range = r.range;  // reuse JSON double formatting for stable text
  return csv_quote(experiment) + "," + csv_quote(r.quantity) + "," +
         point.dump() + "," + std::to_string(r.n) + "," +
         std::to_string(r.requested) + "," + std::to_string(r.failures) + "," +
         confidence.dump() + "," + range.dump() + "," + band.dump() + "," +
         std::to_string(r.seed) + "," + std::to_string(r.purpose) + "," +
         std::to_string(r.first_replicate) + "\n";
}

/// Append one row to a results file, writing the header first on a new file.
inline void append_estimate_csv(const std::string& path,
                                const std::string& experiment,
                                const EstimateReport& r) {
  bool fresh = !std::ifstream(path).good();
  std::ofstream out(path, std::ios::app);
  if (!out) throw ConfigError("cannot open results file '" + path + "'");
  if (fresh) out << estimate_csv_header();
  out << estimate_csv_row(experiment, r);
}

// ---------------------------------------------------------------------------
// Bit-packed binary trajectories
// ---------------------------------------------------------------------------

inline constexpr char kTrajectoryMagic[8] = {'B', 'K', 'T', 'R',
                                             'J', '1', '\0', '\1'};

inline std::vector<std::uint8_t> trajectory_binary(const CftpResult& r) {
  std::vector<std::uint8_t> out(sizeof(kTrajectoryMagic), 0);
  for (std::size_t i = 0; i < sizeof(kTrajectoryMagic); ++i)
    out[i] = static_cast<std::uint8_t>(kTrajectoryMagic[i]);
  auto push_u64 = [&](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
  };
  push_u64(static_cast<std::uint64_t>(r.window_start));
  push_u64(r.symbols.size());
  std::size_t data_at = out.size();
  out.resize(data_at + (r.symbols.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < r.symbols.size(); ++i)
    if (r.symbols[i] == Spin::Plus)
      out[data_at + i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
  return out;
}

struct TrajectoryWindow {
  std::int64_t start = 0;
  std::vector<Spin> symbols;
};

inline TrajectoryWindow trajectory_from_binary(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < sizeof(kTrajectoryMagic) + 16)
    throw ConfigError("trajectory blob too short");
  for (std::size_t i = 0; i < sizeof(kTrajectoryMagic); ++i)
    if (bytes[i] != static_cast<std::uint8_t>(kTrajectoryMagic[i]))
      throw ConfigError("trajectory blob has a wrong magic header");
  auto read_u64 = [&](std::size_t at) {
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) v |= std::uint64_t{bytes[at + b]} << (8 * b);
    return v;
  };
  TrajectoryWindow w;
  w.start = static_cast<std::int64_t>(read_u64(sizeof(kTrajectoryMagic)));
  std::uint64_t count = read_u64(sizeof(kTrajectoryMagic) + 8);
  std::size_t data_at = sizeof(kTrajectoryMagic) + 16;
  if (bytes.size() != data_at + (count + 7) / 8)
    throw ConfigError("trajectory blob length mismatch");
  w.symbols.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i)
    w.symbols.push_back((bytes[data_at + i / 8] >> (i % 8)) & 1 ? Spin::Plus
                                                                : Spin::Minus);
  return w;
}

}  // namespace bk
