// Serialization round trips and end-to-end checks of the bk command-line
// tool: output contract (exactly one JSON document on stdout), exit codes,
// determinism across reruns and worker counts, and file formats.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "bksim/estimation.hpp"
#include "bksim/serialize.hpp"
#include "helpers.hpp"

using namespace bk;
using namespace bktest;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
};

RunResult run_cli(const std::string& args) {
  std::string cmd = std::string(BKSIM_CLI_PATH) + " " + args + " 2>/dev/null";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string out;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, n);
  int status = ::pclose(pipe);
  RunResult r;
  r.out = std::move(out);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string config_path(const char* name) {
  return std::string(BKSIM_CONFIG_DIR) + "/" + name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch_file(const char* name) {
  return fs::temp_directory_path() / (std::string("bk_cli_test_") + name);
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  REQUIRE(out.good());
  out << text;
}

}  // namespace

// ---------------------------------------------------------------------------
// Serialization round trips (library level)
// ---------------------------------------------------------------------------

TEST_CASE("model params survive a JSON round trip for every family kind") {
  std::vector<ModelParams> cases;
  cases.push_back(family_a());
  cases.push_back(family_a(Rational(3, 10), MajorityWindow::SkipMostRecent));
  cases.push_back(ModelParams(Rational(1, 4),
                              WeightFamily::explicit_list(
                                  {Rational(1, 3), Rational(1, 3), Rational(1, 3)}),
                              OrderSequence::explicit_list({1, 5, 9})));
  cases.push_back(ModelParams(
      Rational(1, 4),
      WeightFamily::explicit_list({Rational(1, 2)},
                                  std::make_pair(Rational(1, 2), Rational(1, 2))),
      OrderSequence::tower(577, 217)));
  cases.push_back(ModelParams(Rational(1, 4), WeightFamily::square_blocks(7),
                              OrderSequence::square_pow(7)));
  for (const ModelParams& p : cases) {
    Json j = json_of(p);
    ModelParams back = model_params_from_json(j);
    CHECK(json_of(back) == j);  // canonical form is a fixed point
    CHECK(back.epsilon == p.epsilon);
    CHECK(back.weights.lambda(1) == p.weights.lambda(1));
    CHECK(back.weights.lambda(3) == p.weights.lambda(3));
  }
}

TEST_CASE("kernel specs survive a JSON round trip, table variant included") {
  std::vector<KernelSpec> cases;
  cases.push_back(KernelSpec::lower(family_a(), 2));
  cases.push_back(KernelSpec::upper(family_a(), 1));
  cases.push_back(KernelSpec::mixed(family_a(), 1, 3));
  cases.push_back(KernelSpec::mixed_prime(family_a(), 0, 2));
  cases.push_back(KernelSpec::from_table(to_table(KernelSpec::lower(family_a(), 1))));
  for (const KernelSpec& s : cases) {
    Json j = json_of(s);
    KernelSpec back = kernel_spec_from_json(j);
    CHECK(json_of(back) == j);
    for (std::uint64_t st = 0; st < 2; ++st) {
      Context ctx = all_contexts(5)[7 * st + 3];
      CHECK(kernel_eval(back, Spin::Plus, ctx) == kernel_eval(s, Spin::Plus, ctx));
    }
  }
}

TEST_CASE("rational literals: canonical output, hard parse rejections") {
  CHECK(rational_str(Rational(1) / Rational(2)) == "1/2");
  CHECK(rational_str(Rational(7)) == "7");
  CHECK(rational_from_str("-3/9") == Rational(-1, 3));
  CHECK(rational_from_str("42") == Rational(42));
  CHECK_THROWS_AS(rational_from_str("1/0"), ConfigError);
  CHECK_THROWS_AS(rational_from_str(""), ConfigError);
  CHECK_THROWS_AS(rational_from_str("a/b"), ConfigError);
  CHECK_THROWS_AS(rational_from_str("1/2/3"), ConfigError);
}

TEST_CASE("trajectory binary format round-trips and pins its header") {
  KernelSpec spec = KernelSpec::lower(family_a(), 1);
  RandomStream stream(99, 0, StreamPurpose::Coupling);
  CftpResult res = perfect_sample(spec, stream, -13, 3,
                                  SampleMethod::MonotoneSandwich);
  std::vector<std::uint8_t> bytes = trajectory_binary(res);
  CHECK(bytes.size() == 8 + 8 + 8 + (res.symbols.size() + 7) / 8);
  CHECK(bytes[0] == 'B');
  CHECK(bytes[5] == '1');
  TrajectoryWindow back = trajectory_from_binary(bytes);
  CHECK(back.start == -13);
  REQUIRE(back.symbols.size() == res.symbols.size());
  CHECK(back.symbols == res.symbols);
  bytes[2] ^= 0xff;  // corrupt the magic
  CHECK_THROWS_AS(trajectory_from_binary(bytes), ConfigError);
}

TEST_CASE("estimate CSV rows quote the quantity and keep full precision") {
  EstimateReport rep = estimate_marginal(KernelSpec::lower(family_a(), 1), [] {
    EstimateOptions o;
    o.n = 500;
    o.seed = 19;
    return o;
  }());
  std::string row = estimate_csv_row("exp-1", rep);
  CHECK(row.find("\"P(X_0 = +1)\"") != std::string::npos);
  CHECK(row.find("\"exp-1\"") != std::string::npos);
  CHECK(row.rfind('\n') == row.size() - 1);
  std::string header = estimate_csv_header();
  CHECK(std::count(header.begin(), header.end(), ',') ==
        std::count(row.begin(), row.end(), ','));
}

// ---------------------------------------------------------------------------
// CLI end-to-end
// ---------------------------------------------------------------------------

TEST_CASE("cli: exact analysis of the two-state instance hits 7/10") {
  RunResult r = run_cli("--config " + config_path("exact_two_state.json"));
  REQUIRE(r.exit_code == 0);
  Json doc = Json::parse(r.out);  // throws on anything but one JSON document
  CHECK(doc.at("command") == "exact");
  CHECK(doc.at("marginal_plus").at("value") == "7/10");
  CHECK(doc.at("dbar").at("value") == "2/5");
  CHECK(doc.at("pair_plus").at("value") == "21/40");
  CHECK(doc.at("theta_tail")[0].at("value") == "1/6");
  CHECK(doc.at("attractive") == true);
}

TEST_CASE("cli: criterium verdicts for the bundled certification configs") {
  Json cert = Json::parse(
      run_cli("--config " + config_path("corollary1.json")).out);
  CHECK(cert.at("verdict") == "NonUniquenessCertified");
  CHECK(cert.at("family") == "geometric-tower");
  CHECK(cert.at("k0_thresholds").at("discrepancy_flagged") == true);
  CHECK(cert.at("k0_thresholds").at("printed") == "10837/50");

  Json fail = Json::parse(
      run_cli("--config " + config_path("corollary1_575.json")).out);
  CHECK(fail.at("verdict") == "NotCertified");

  Json blocks = Json::parse(
      run_cli("--config " + config_path("corollary2.json")).out);
  CHECK(blocks.at("verdict") == "NonUniquenessCertified");
  Json blocks6 = Json::parse(
      run_cli("--config " + config_path("corollary2_6.json")).out);
  CHECK(blocks6.at("verdict") == "NotCertified");
}

TEST_CASE("cli: explicit subcommand agrees with the config command field") {
  RunResult ok = run_cli("check-criterium --config " + config_path("corollary2.json"));
  CHECK(ok.exit_code == 0);
  RunResult clash = run_cli("exact --config " + config_path("corollary2.json"));
  CHECK(clash.exit_code == 2);
  Json err = Json::parse(clash.out);
  CHECK(err.at("error").at("type") == "config");
}

TEST_CASE("cli: exit codes cover config, precondition, and overflow lanes") {
  RunResult none = run_cli("");
  CHECK(none.exit_code == 2);
  CHECK(Json::parse(none.out).at("error").at("type") == "config");

  fs::path bad_alpha = scratch_file("alpha.json");
  write_text(bad_alpha, R"({"schema":1,"command":"check-criterium",
    "family":"geometric-tower","c":577,"alpha":"3/10"})");
  RunResult alpha = run_cli("--config " + bad_alpha.string());
  CHECK(alpha.exit_code == 4);
  CHECK(Json::parse(alpha.out).at("error").at("type") == "precondition");

  fs::path ovf = scratch_file("overflow.json");
  write_text(ovf, R"({"schema":1,"command":"simulate","method":"regeneration-window",
    "window":{"start":0,"end":0},"limits":{"max_scan":2000,"max_depth":4096},
    "kernel":{"variant":"lower","k":1,"params":{"epsilon":"1/100",
      "window":"most-recent","weights":{"kind":"explicit","values":["1"]},
      "orders":{"kind":"progression","start":21,"step":2}}}})");
  RunResult over = run_cli("--config " + ovf.string());
  CHECK(over.exit_code == 3);
  CHECK(Json::parse(over.out).at("error").at("type") == "overflow");

  fs::path schema = scratch_file("schema.json");
  write_text(schema, R"({"schema":2,"command":"exact"})");
  CHECK(run_cli("--config " + schema.string()).exit_code == 2);

  fs::path family = scratch_file("family.json");
  write_text(family, R"({"schema":1,"command":"check-criterium",
    "family":"my-own","c":3})");
  RunResult fam = run_cli("--config " + family.string());
  CHECK(fam.exit_code == 2);
  CHECK(Json::parse(fam.out).at("error").at("message").get<std::string>().find(
            "tail rule") != std::string::npos);
}

TEST_CASE("cli: reruns of one config are byte-identical, flags perturb them") {
  std::string base = "--config " + config_path("simulate_window.json");
  RunResult a = run_cli(base);
  RunResult b = run_cli(base);
  REQUIRE(a.exit_code == 0);
  CHECK(a.out == b.out);
  RunResult reseeded = run_cli(base + " --seed 555");
  REQUIRE(reseeded.exit_code == 0);
  CHECK(reseeded.out != a.out);
  CHECK(Json::parse(reseeded.out).at("seed") == 555);
}

TEST_CASE("cli: estimator outputs are invariant to the worker count") {
  std::string base = "--config " + config_path("eta_theta.json");
  RunResult w1 = run_cli(base + " --workers 1");
  RunResult w3 = run_cli(base + " --workers 3");
  REQUIRE(w1.exit_code == 0);
  REQUIRE(w3.exit_code == 0);
  CHECK(w1.out == w3.out);
  Json doc = Json::parse(w1.out);
  double eta = doc.at("estimates").at("eta_theta").at("eta_mean").at("point");
  double bound =
      doc.at("estimates").at("eta_theta").at("eta_mean_bound").at("approx");
  CHECK(eta <= bound);
}

TEST_CASE("cli: order-0 trajectory has empirical mean near the contrast") {
  Json doc = Json::parse(
      run_cli("--config " + config_path("simulate_coin.json")).out);
  double mean = doc.at("empirical_mean");
  // 500 coin flips with mean 1 - 2 eps = 1/2; 99.99% band ~ 0.18.
  CHECK(mean > 0.5 - 0.18);
  CHECK(mean < 0.5 + 0.18);
  CHECK(doc.at("results")[0].at("symbols").get<std::string>().size() == 500);
}

TEST_CASE("cli: trajectory files round-trip through both formats") {
  fs::path csv = scratch_file("traj.csv");
  fs::path bin = scratch_file("traj.bktrj");
  std::string base = "--config " + config_path("simulate_coin.json") + " --out ";
  Json jcsv = Json::parse(run_cli(base + csv.string()).out);
  Json jbin = Json::parse(run_cli(base + bin.string()).out);
  REQUIRE(jcsv.at("files")[0] == csv.string());
  REQUIRE(jbin.at("files")[0] == bin.string());

  std::string text = slurp(csv);
  CHECK(text.rfind("position,symbol\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 501);  // header + rows

  std::string raw = slurp(bin);
  std::vector<std::uint8_t> bytes(raw.begin(), raw.end());
  TrajectoryWindow w = trajectory_from_binary(bytes);
  CHECK(w.start == -499);
  CHECK(w.symbols.size() == 500);
  CHECK(symbols_str(w.symbols) ==
        jbin.at("results")[0].at("symbols").get<std::string>());
}

TEST_CASE("cli: dbar CSV hand-off appends labeled rows") {
  fs::path csv = scratch_file("results.csv");
  fs::path cfg = scratch_file("dbar_small.json");
  std::error_code ec;
  fs::remove(csv, ec);
  write_text(cfg, R"({"schema":1,"command":"dbar","replicates":400,"seed":5,
    "experiment":"trial-a",
    "kernel_a":{"variant":"lower","k":1,"params":{"epsilon":"1/4",
      "window":"most-recent","weights":{"kind":"geometric","scale":"1/2","ratio":"2/3"},
      "orders":{"kind":"progression","start":1,"step":2}}},
    "kernel_b":{"variant":"upper","k":1,"params":{"epsilon":"1/4",
      "window":"most-recent","weights":{"kind":"geometric","scale":"1/2","ratio":"2/3"},
      "orders":{"kind":"progression","start":1,"step":2}}}})");
  std::string invocation = "--config " + cfg.string() + " --out " + csv.string();
  REQUIRE(run_cli(invocation).exit_code == 0);
  REQUIRE(run_cli(invocation).exit_code == 0);  // second run appends
  std::string text = slurp(csv);
  CHECK(std::count(text.begin(), text.end(), '\n') == 3);  // header + 2 rows
  CHECK(text.find("\"trial-a\"") != std::string::npos);
  CHECK(text.find("\"P(X^A_0 != X^B_0)\"") != std::string::npos);
}

TEST_CASE("cli: generated parameter files parse back into the library") {
  fs::path out = scratch_file("params.json");
  Json doc = Json::parse(run_cli("--config " + config_path("gen_tower.json") +
                                 " --out " + out.string())
                             .out);
  CHECK(doc.at("params").at("orders").at("base") == 577);
  ModelParams p = model_params_from_json(Json::parse(slurp(out)));
  CHECK(p.epsilon == Rational(1, 4));
  CHECK(p.orders.order(1).to_u64() == 217);

  Json rnd = Json::parse(run_cli("--config " + config_path("gen_random.json")).out);
  ModelParams q = model_params_from_json(rnd.at("params"));
  auto top = q.weights.max_index();
  REQUIRE(top.has_value());
  Rational sum(0);
  for (std::uint64_t j = 1; j <= *top; ++j) sum += q.weights.lambda(j);
  CHECK(sum == Rational(1));  // exact normalization survives the round trip
}

TEST_CASE("cli: probe-transition reports its truncation caveat") {
  Json doc = Json::parse(run_cli("--config " + config_path("probe_gap.json")).out);
  CHECK(doc.at("command") == "probe-transition");
  CHECK(doc.at("truncation_order") == 3);
  double gap = doc.at("gap").at("point");
  CHECK(gap > 0.0);
  CHECK(gap < 1.0);
  CHECK(doc.at("caveat").get<std::string>().find("truncation") !=
        std::string::npos);
}
