// bk — command-line front end for the chain-simulation library.
//
// Output contract: every invocation writes exactly one JSON document to
// stdout — a result object on success, {"error": {...}} on failure — so
// pipelines never have to scrape logs. Human-oriented renderings (the
// criterium table) and diagnostics go to stderr. Exit codes: 0 ok,
// 2 config error, 3 numeric budget exhausted, 4 precondition violated.
//
// Configs are JSON with "num/den" rationals; CLI flags override config
// fields, and a config's "command" field may stand in for the subcommand,
// so `bk --config file.json` replays a fully pinned experiment.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bksim/bounds.hpp"
#include "bksim/estimation.hpp"
#include "bksim/serialize.hpp"

namespace {

using bk::Json;

struct Global {
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  std::optional<std::string> out;
  std::string config_path;
};

Json load_config(const std::string& path) {
  if (path.empty()) return Json::object();
  std::ifstream in(path);
  if (!in) throw bk::ConfigError("cannot open config file '" + path + "'");
  Json cfg;
  try {
    in >> cfg;
  } catch (const Json::parse_error& e) {
    throw bk::ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  if (!cfg.is_object()) throw bk::ConfigError("config root must be a JSON object");
  if (cfg.contains("schema")) {
    const Json& s = cfg.at("schema");
    if (!s.is_number_integer() || s.get<std::int64_t>() != 1)
      throw bk::ConfigError("unsupported config schema; this build reads schema 1");
  }
  return cfg;
}

const Json& need(const Json& cfg, const char* key) {
  if (!cfg.contains(key))
    throw bk::ConfigError(std::string("missing required field '") + key + "'");
  return cfg.at(key);
}

std::uint64_t u64_field(const Json& cfg, const char* key, std::uint64_t fallback) {
  if (!cfg.contains(key)) return fallback;
  const Json& v = cfg.at(key);
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0)
    return static_cast<std::uint64_t>(v.get<std::int64_t>());
  throw bk::ConfigError(std::string("field '") + key +
                        "' must be a nonnegative integer");
}

std::int64_t i64_field(const Json& cfg, const char* key, std::int64_t fallback) {
  if (!cfg.contains(key)) return fallback;
  const Json& v = cfg.at(key);
  if (!v.is_number_integer() && !v.is_number_unsigned())
    throw bk::ConfigError(std::string("field '") + key + "' must be an integer");
  return v.get<std::int64_t>();
}

double dbl_field(const Json& cfg, const char* key, double fallback) {
  if (!cfg.contains(key)) return fallback;
  const Json& v = cfg.at(key);
  if (!v.is_number())
    throw bk::ConfigError(std::string("field '") + key + "' must be a number");
  return v.get<double>();
}

bool bool_field(const Json& cfg, const char* key, bool fallback) {
  if (!cfg.contains(key)) return fallback;
  const Json& v = cfg.at(key);
  if (!v.is_boolean())
    throw bk::ConfigError(std::string("field '") + key + "' must be a boolean");
  return v.get<bool>();
}

std::string str_field(const Json& cfg, const char* key, std::string fallback) {
  if (!cfg.contains(key)) return fallback;
  const Json& v = cfg.at(key);
  if (!v.is_string())
    throw bk::ConfigError(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

bk::SampleMethod method_from(const std::string& name) {
  if (name == "monotone-sandwich") return bk::SampleMethod::MonotoneSandwich;
  if (name == "regeneration-window") return bk::SampleMethod::RegenerationWindow;
  throw bk::ConfigError("unknown method '" + name +
                        "' (monotone-sandwich | regeneration-window)");
}

bk::EstimateOptions est_options(const Json& cfg, const Global& g,
                                std::uint64_t default_n) {
  bk::EstimateOptions o;
  o.n = u64_field(cfg, "replicates", default_n);
  if (o.n == 0) throw bk::ConfigError("'replicates' must be positive");
  o.seed = g.seed ? *g.seed : u64_field(cfg, "seed", 0);
  o.first_replicate = u64_field(cfg, "first_replicate", 0);
  o.confidence = dbl_field(cfg, "confidence", 0.99);
  o.workers = g.workers ? *g.workers
                        : static_cast<unsigned>(u64_field(cfg, "workers", 0));
  o.method = method_from(str_field(cfg, "method", "monotone-sandwich"));
  if (cfg.contains("limits")) {
    const Json& lim = need(cfg, "limits");
    o.limits.max_depth = u64_field(lim, "max_depth", o.limits.max_depth);
    o.limits.max_scan = u64_field(lim, "max_scan", o.limits.max_scan);
  }
  return o;
}

std::string out_path(const Json& cfg, const Global& g, const char* cfg_key) {
  return g.out ? *g.out : str_field(cfg, cfg_key, "");
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p);
  if (!f) throw bk::ConfigError("cannot write '" + p.string() + "'");
  f << text;
}

void write_file(const std::filesystem::path& p,
                const std::vector<std::uint8_t>& bytes) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw bk::ConfigError("cannot write '" + p.string() + "'");
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
}

Json rational_entry(const bk::Rational& q) {
  return Json{{"value", bk::rational_str(q)}, {"approx", q.get_d()}};
}

// ---------------------------------------------------------------- simulate

Json cmd_simulate(const Json& cfg, const Global& g) {
  bk::KernelSpec spec = bk::kernel_spec_from_json(need(cfg, "kernel"));
  bk::EstimateOptions o = est_options(cfg, g, 1);
  Json doc;
  doc["command"] = "simulate";
  doc["kernel"] = bk::json_of(spec);
  doc["seed"] = o.seed;
  doc["method"] = bk::method_name(o.method);
  doc["replicates"] = o.n;

  if (cfg.contains("estimators")) {
    const Json& est = need(cfg, "estimators");
    if (!est.is_object()) throw bk::ConfigError("'estimators' must be an object");
    Json out = Json::object();
    if (bool_field(est, "marginal", false))
      out["marginal"] = bk::json_of(bk::estimate_marginal(spec, o));
    if (bool_field(est, "pair", false))
      out["pair_plus"] = bk::json_of(bk::estimate_pair_plus(spec, o));
    bool want_eta = est.contains("eta_theta") &&
                    !(est.at("eta_theta").is_boolean() &&
                      !est.at("eta_theta").get<bool>());
    if (want_eta) {
      std::uint64_t tail = 16;
      if (est.at("eta_theta").is_object())
        tail = u64_field(est.at("eta_theta"), "tail_depth", 16);
      Json et = bk::json_of(bk::estimate_eta_theta(spec, o, tail));
      if (spec.variant != bk::KernelSpec::Variant::Table)
        et["eta_mean_bound"] = bk::json_of(
            bk::eta_mean_bound(bk::kernel_order(spec), spec.model().epsilon));
      out["eta_theta"] = et;
    }
    if (bool_field(est, "concentration", false)) {
      if (spec.variant != bk::KernelSpec::Variant::Mixed)
        throw bk::ConfigError(
            "the concentration estimator reads its depth range (r, k+1) off a "
            "'mixed' kernel");
      out["concentration"] = bk::json_of(bk::concentration_empirical(
          spec.model(), spec.r, spec.l - 1, o,
          u64_field(cfg, "table_order_cap", 12)));
    }
    if (out.empty())
      throw bk::ConfigError(
          "'estimators' requests nothing; enable marginal, pair, eta_theta, "
          "or concentration");
    doc["estimates"] = out;
    return doc;
  }

  std::int64_t a = -15, b = 0;
  if (cfg.contains("window")) {
    const Json& w = need(cfg, "window");
    a = i64_field(w, "start", a);
    b = i64_field(w, "end", b);
  }
  if (a > b) throw bk::ConfigError("window start must not exceed window end");
  bk::KernelRuntime rt(spec);
  std::vector<bk::CftpResult> results;
  results.reserve(o.n);
  long double total = 0;
  std::uint64_t count = 0;
  for (std::uint64_t i = 0; i < o.n; ++i) {
    bk::RandomStream stream(o.seed, o.first_replicate + i,
                            bk::StreamPurpose::Coupling);
    results.push_back(bk::perfect_sample(rt, stream, a, b, o.method, o.limits));
    for (bk::Spin s : results.back().symbols) total += bk::spin_value(s);
    count += results.back().symbols.size();
  }
  doc["window"] = Json{{"start", a}, {"end", b}};
  Json arr = Json::array();
  for (const bk::CftpResult& r : results) arr.push_back(bk::json_of(r));
  doc["results"] = std::move(arr);
  doc["empirical_mean"] =
      count == 0 ? 0.0 : static_cast<double>(total / static_cast<long double>(count));

  std::string path = out_path(cfg, g, "out");
  if (!path.empty()) {
    namespace fs = std::filesystem;
    fs::path base(path);
    Json files = Json::array();
    for (const bk::CftpResult& r : results) {
      fs::path p = base;
      if (results.size() > 1) {
        fs::path ext = p.extension();
        p.replace_extension();
        p += "_rep" + std::to_string(r.replicate);
        p += ext;
      }
      if (p.extension() == ".bktrj")
        write_file(p, bk::trajectory_binary(r));
      else
        write_file(p, bk::trajectory_csv(r));
      files.push_back(p.string());
    }
    doc["files"] = std::move(files);
  }
  return doc;
}

// -------------------------------------------------------------------- dbar

Json cmd_dbar(const Json& cfg, const Global& g) {
  bk::KernelSpec a = bk::kernel_spec_from_json(need(cfg, "kernel_a"));
  bk::KernelSpec b = bk::kernel_spec_from_json(need(cfg, "kernel_b"));
  bk::EstimateOptions o = est_options(cfg, g, 10'000);
  std::optional<bk::MajorantSpec> majorant;
  if (cfg.contains("majorant")) {
    const Json& m = need(cfg, "majorant");
    majorant = bk::MajorantSpec{bk::model_params_from_json(need(m, "params")),
                                u64_field(m, "next_index", 1)};
  }
  bk::DbarEstimate d = bk::estimate_dbar_upper(a, b, o, majorant);
  Json doc = bk::json_of(d);
  doc["command"] = "dbar";
  doc["kernel_a"] = bk::json_of(a);
  doc["kernel_b"] = bk::json_of(b);
  if (bool_field(cfg, "exact_reference", false)) {
    bk::DbarExact e =
        bk::exact_dbar_attractive(a, b, u64_field(cfg, "table_order_cap", 11));
    doc["exact"] = Json{{"value", bk::rational_str(e.value)},
                        {"approx", e.value.get_d()},
                        {"marginal_a", bk::rational_str(e.marginal_x)},
                        {"marginal_b", bk::rational_str(e.marginal_y)}};
  }
  std::string csv = out_path(cfg, g, "results_csv");
  if (!csv.empty()) {
    std::string experiment = str_field(cfg, "experiment", "dbar");
    bk::append_estimate_csv(csv, experiment, d.disagreement);
    if (d.s0_complement) bk::append_estimate_csv(csv, experiment, *d.s0_complement);
    if (d.eta_mean) bk::append_estimate_csv(csv, experiment, *d.eta_mean);
    doc["files"] = Json::array({csv});
  }
  return doc;
}

// ------------------------------------------------------------------- exact

Json cmd_exact(const Json& cfg, const Global&) {
  bk::KernelSpec spec = bk::kernel_spec_from_json(need(cfg, "kernel"));
  std::uint64_t cap = u64_field(cfg, "table_order_cap", 12);
  bk::TableKernel<bk::Rational> table = bk::to_table(spec, cap);
  bk::StateDist<bk::Rational> pi = bk::stationary_exact(table);
  bk::Rational marginal = bk::marginal_plus(pi, table);
  Json doc;
  doc["command"] = "exact";
  doc["kernel"] = bk::json_of(spec);
  doc["order"] = table.order();
  doc["states"] = table.states();
  doc["attractive"] = bk::check_attractive(table);
  doc["marginal_plus"] = rational_entry(marginal);
  doc["magnetization"] = rational_entry(2 * marginal - 1);
  doc["pair_plus"] = rational_entry(bk::pair_plus_exact(pi, table));
  if (cfg.contains("pair_with")) {
    bk::KernelSpec other = bk::kernel_spec_from_json(need(cfg, "pair_with"));
    bk::DbarExact e = bk::exact_dbar_attractive(spec, other, cap);
    doc["dbar"] = Json{{"value", bk::rational_str(e.value)},
                       {"approx", e.value.get_d()},
                       {"marginal_a", bk::rational_str(e.marginal_x)},
                       {"marginal_b", bk::rational_str(e.marginal_y)}};
  }
  if (cfg.contains("theta_tail_depth")) {
    std::uint64_t depth = u64_field(cfg, "theta_tail_depth", 4);
    std::vector<bk::Rational> tail = bk::theta_tail_exact(spec, depth, cap);
    Json arr = Json::array();
    for (std::size_t d = 0; d < tail.size(); ++d) {
      Json row = rational_entry(tail[d]);
      row["d"] = d;
      arr.push_back(std::move(row));
    }
    doc["theta_tail"] = std::move(arr);
  }
  if (bool_field(cfg, "entropy", false)) {
    bk::TableKernel<double> dt = bk::to_double(table);
    bk::StateDist<double> dpi = table.states() <= 2048
                                    ? bk::stationary_dense(dt)
                                    : bk::stationary_power(dt);
    doc["entropy_rate_nats"] = bk::entropy_rate(dpi, dt);
  }
  if (bool_field(cfg, "magnetization_bound", false)) {
    if (spec.variant != bk::KernelSpec::Variant::Mixed)
      throw bk::ConfigError(
          "the magnetization bound reads its depth range (r, k+1) off a "
          "'mixed' kernel");
    std::uint64_t r = spec.r, k = spec.l - 1;
    bk::Rational gap = bk::magnetization_gap(spec.model(), r, k);
    bk::Rational bound = bk::magnetization_lower_bound(spec.model(), r, k);
    bk::Rational magnetization = 2 * marginal - 1;
    Json mb;
    mb["gap"] = rational_entry(gap);
    mb["bound"] = rational_entry(bound);
    mb["satisfied"] = magnetization >= bound;
    doc["magnetization_bound"] = std::move(mb);
  }
  return doc;
}

// --------------------------------------------------------- check-criterium

Json cmd_check_criterium(const Json& cfg, const Global&) {
  std::string family = str_field(cfg, "family", "");
  if (family.empty())
    throw bk::ConfigError("check-criterium needs a 'family' field");
  std::uint64_t c = u64_field(cfg, "c", 0);
  if (c == 0) throw bk::ConfigError("check-criterium needs a positive 'c'");
  bk::Rational alpha(1, 8);
  if (cfg.contains("alpha")) alpha = bk::rational_from_json(cfg.at("alpha"));
  bk::CriteriumReport rep;
  if (family == "geometric-tower") {
    rep = bk::tower_family_verify(c, u64_field(cfg, "k_max", 6), alpha);
  } else if (family == "square-blocks") {
    if (c > std::numeric_limits<unsigned>::max())
      throw bk::ConfigError("square-blocks base exponent 'c' is out of range");
    rep = bk::block_family_verify(static_cast<unsigned>(c),
                                  u64_field(cfg, "k_max", 8), alpha);
  } else {
    throw bk::ConfigError(
        "family '" + family +
        "' carries no symbolic tail rule; the criterium quantifies over all "
        "k, so only registered families (geometric-tower, square-blocks) can "
        "be certified");
  }
  std::cerr << bk::criterium_table(rep);
  Json doc = bk::json_of(rep);
  doc["command"] = "check-criterium";
  doc["c"] = c;
  return doc;
}

// -------------------------------------------------------------- gen-params

Json cmd_gen_params(const Json& cfg, const Global& g) {
  bk::ModelParams params = [&]() -> bk::ModelParams {
    std::string family = str_field(cfg, "family", "");
    if (family == "geometric-tower" || family == "square-blocks") {
      std::uint64_t c = u64_field(cfg, "c", 0);
      if (c == 0) throw bk::ConfigError("gen-params needs a positive 'c'");
      if (family == "geometric-tower") return bk::tower_family_params(c);
      if (c > std::numeric_limits<unsigned>::max())
        throw bk::ConfigError("square-blocks base exponent 'c' is out of range");
      return bk::block_family_params(static_cast<unsigned>(c));
    }
    if (!family.empty())
      throw bk::ConfigError("unknown family '" + family +
                            "' (geometric-tower | square-blocks)");
    if (cfg.contains("params"))  // validate-and-echo mode
      return bk::model_params_from_json(cfg.at("params"));
    if (cfg.contains("random")) {
      const Json& r = need(cfg, "random");
      std::uint64_t seed = g.seed ? *g.seed : u64_field(r, "seed", 0);
      bk::RandomStream stream(seed, 0, bk::StreamPurpose::Generation);
      std::uint64_t terms = 2 + stream.bits_at(0) % 3;
      std::vector<bk::Rational> w;
      bk::Rational sum(0);
      for (std::uint64_t i = 0; i < terms; ++i) {
        bk::Rational a(1 + stream.bits_at(1 + i) % 9);
        w.push_back(a);
        sum += a;
      }
      for (bk::Rational& x : w) x /= sum;
      bk::Rational eps(1 + stream.bits_at(9) % 4, 10);
      eps.canonicalize();
      std::uint64_t start = 1 + 2 * (stream.bits_at(10) % 3);
      return bk::ModelParams(eps, bk::WeightFamily::explicit_list(std::move(w)),
                             bk::OrderSequence::progression(start, 2));
    }
    throw bk::ConfigError("gen-params needs 'family', 'params', or 'random'");
  }();
  Json doc;
  doc["command"] = "gen-params";
  doc["params"] = bk::json_of(params);
  std::string path = out_path(cfg, g, "out");
  if (!path.empty()) {
    write_file(std::filesystem::path(path), bk::json_of(params).dump(2) + "\n");
    doc["files"] = Json::array({path});
  }
  return doc;
}

// -------------------------------------------------------- probe-transition

Json cmd_probe_transition(const Json& cfg, const Global& g) {
  bk::ModelParams params = bk::model_params_from_json(need(cfg, "params"));
  if (!cfg.contains("order_cap"))
    throw bk::ConfigError("probe-transition needs an 'order_cap' field");
  std::uint64_t cap = u64_field(cfg, "order_cap", 0);
  std::uint64_t horizon = u64_field(cfg, "horizon", 8);
  bk::PhaseProbeReport rep =
      bk::phase_probe(params, cap, horizon, est_options(cfg, g, 10'000));
  Json doc = bk::json_of(rep);
  doc["command"] = "probe-transition";
  return doc;
}

// -------------------------------------------------------------- dispatcher

int emit_error(const char* type, const std::string& message, int code) {
  Json doc;
  doc["error"] = Json{{"type", type}, {"message", message}};
  std::cout << doc.dump(2) << '\n';
  return code;
}

int run(int argc, char** argv) {
  CLI::App app{
      "bk: perfect simulation, distance estimation, and exact certification "
      "for binary chains with long memory"};
  app.require_subcommand(0, 1);
  Global g;
  app.add_option("--seed", g.seed, "master seed (overrides the config field)");
  app.add_option("--workers", g.workers,
                 "worker threads; 0 = hardware concurrency (results do not "
                 "depend on this)");
  app.add_option("--out", g.out,
                 "output path: trajectory files, CSV appends, generated "
                 "parameter files");
  app.add_option("--config", g.config_path,
                 "JSON config file; explicit flags override its fields");
  const std::pair<const char*, const char*> subs[] = {
      {"simulate", "draw perfect samples; trajectory files or estimator reports"},
      {"dbar", "estimate the process distance between two kernels on a shared stream"},
      {"exact", "exact stationary analysis of a finite-order kernel"},
      {"check-criterium", "verify the non-uniqueness criterium for a registered family"},
      {"gen-params", "produce a model parameter file"},
      {"probe-transition", "estimate the extremal-start gap of a truncation"},
  };
  for (const auto& [name, desc] : subs) app.add_subcommand(name, desc)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    throw bk::ConfigError(std::string("command line: ") + e.what());
  }

  std::string effective = app.get_subcommands().empty()
                              ? std::string{}
                              : app.get_subcommands().front()->get_name();
  Json cfg = load_config(g.config_path);
  if (cfg.contains("command")) {
    std::string from_cfg = str_field(cfg, "command", "");
    if (effective.empty())
      effective = from_cfg;
    else if (effective != from_cfg)
      throw bk::ConfigError("config pins command '" + from_cfg +
                            "' but the command line asks for '" + effective +
                            "'");
  }
  if (effective.empty())
    throw bk::ConfigError(
        "no command given: pass a subcommand or a config with a 'command' "
        "field");

  Json doc;
  if (effective == "simulate")
    doc = cmd_simulate(cfg, g);
  else if (effective == "dbar")
    doc = cmd_dbar(cfg, g);
  else if (effective == "exact")
    doc = cmd_exact(cfg, g);
  else if (effective == "check-criterium")
    doc = cmd_check_criterium(cfg, g);
  else if (effective == "gen-params")
    doc = cmd_gen_params(cfg, g);
  else if (effective == "probe-transition")
    doc = cmd_probe_transition(cfg, g);
  else
    throw bk::ConfigError("unknown command '" + effective + "'");
  std::cout << doc.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const bk::ConfigError& e) {
    return emit_error("config", e.what(), 2);
  } catch (const bk::OverflowError& e) {
    return emit_error("overflow", e.what(), 3);
  } catch (const bk::PreconditionError& e) {
    return emit_error("precondition", e.what(), 4);
  } catch (const bk::Error& e) {
    return emit_error("internal", e.what(), 1);
  } catch (const std::exception& e) {
    return emit_error("internal", e.what(), 1);
  }
}
