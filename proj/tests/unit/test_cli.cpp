#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <unistd.h>

#include "tinbc/commands.hpp"
#include "tinbc/config.hpp"
#include "tinbc/link.hpp"

using namespace tinbc;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("tinbc_cli_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

fs::path write(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
  return p;
}

json two_user_config() {
  return json::parse(R"({
    "schema_version": 1,
    "system": {"P": 1.0, "users": [{"N": 128, "eps": 1e-6, "snr_db": 18}, {"N": 256, "eps": 1e-4, "snr_db": 5}]},
    "samples": 2000,
    "seed": 3,
    "power_steps": 4
  })");
}

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(const std::string& cmd, const CommandOptions& opts) {
  std::ostringstream out, err;
  const int code = run_command(cmd, opts, out, err);
  return {code, out.str(), err.str()};
}

CommandOptions with_config(const fs::path& p) {
  CommandOptions o;
  o.config = p;
  return o;
}

std::size_t lines(const std::string& s) {
  std::size_t n = 0;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) n += s[i] == '\r' && s[i + 1] == '\n';
  return n;
}

}  // namespace

TEST_CASE("CSV quoting") {
  CHECK(csv_field("plain") == "plain");
  CHECK(csv_field("a,b") == "\"a,b\"");
  CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
  CHECK(csv_field("two\nlines") == "\"two\nlines\"");
  std::ostringstream os;
  write_csv_row(os, {"x", "[[2],[4,4]]", ""});
  CHECK(os.str() == "x,\"[[2],[4,4]]\",\r\n");
  CHECK_FALSE(build_id().empty());
}

TEST_CASE("system JSON forms") {
  const auto s = system_from_json(json::parse(R"({"P": 2.0, "users": [{"N": 10, "eps": 0.01, "snr_db": 10}]})"));
  CHECK(std::abs(s.users[0].h) == doctest::Approx(std::sqrt(10.0 / 2.0)));
  const auto t = system_from_json(json::parse(R"({"P": 1.0, "users": [{"N": 10, "eps": 0.01, "h_re": 0.0, "h_im": 3.0}]})"));
  CHECK(t.users[0].h == cdouble(0.0, 3.0));
  const auto back = system_from_json(system_to_json(t));
  CHECK(back.users[0].h == t.users[0].h);
  CHECK(back.users[0].blocklength == 10);
  CHECK_THROWS_AS(system_from_json(json::parse(R"({"P": 1.0, "users": [{"N": 10, "eps": 0.01, "snr_db": 1, "h_re": 1.0}]})")),
                  ConfigError);
  CHECK_THROWS_AS(system_from_json(json::parse(R"({"P": 1.0, "users": [{"N": 10, "eps": 0.7, "snr_db": 1}]})")),
                  ConfigError);
  CHECK_THROWS_AS(system_from_json(json::parse(R"({"P": 1.0, "users": [{"N": 10, "eps": 0.1, "snr": 1}]})")),
                  ConfigError);
  CHECK_THROWS_AS(system_from_json(json::parse(R"({"P": 1.0, "users": []})")), ConfigError);
}

TEST_CASE("config validation") {
  TempDir dir;
  auto cfg = two_user_config();
  CHECK(config_from_json(cfg, dir.path).samples == 2000);
  auto bad = cfg;
  bad["schema_version"] = 2;
  CHECK_THROWS_AS(config_from_json(bad, dir.path), ConfigError);
  bad = cfg;
  bad["extra"] = 1;
  CHECK_THROWS_AS(config_from_json(bad, dir.path), ConfigError);
  bad = cfg;
  bad["samples"] = 10;
  CHECK_THROWS_AS(config_from_json(bad, dir.path), ConfigError);
  bad = cfg;
  bad["weights"] = {1.0};
  CHECK_THROWS_AS(config_from_json(bad, dir.path), ConfigError);
  bad = cfg;
  bad["llr"] = "approx";
  CHECK_THROWS_AS(config_from_json(bad, dir.path), ConfigError);
  bad = cfg;
  bad["system_file"] = "sys.json";
  CHECK_THROWS_AS(config_from_json(bad, dir.path), ConfigError);

  write(dir.path / "sys.json", cfg["system"].dump());
  auto split = cfg;
  split.erase("system");
  split["system_file"] = "sys.json";
  CHECK(config_from_json(split, dir.path).system.users.size() == 2);
}

TEST_CASE("exit code 2 on configuration problems") {
  TempDir dir;
  CHECK(run("design", {}).code == kExitConfig);
  CHECK(run("design", with_config(dir.path / "missing.json")).code == kExitConfig);
  CHECK(run("design", with_config(write(dir.path / "broken.json", "{\"schema_version\": 1,"))).code == kExitConfig);
  auto cfg = two_user_config();
  cfg["system"]["users"][1]["snr_db"] = 18;
  const auto r = run("design", with_config(write(dir.path / "tie.json", cfg.dump())));
  CHECK(r.code == kExitConfig);
  CHECK_FALSE(r.err.empty());
  auto opts = with_config(write(dir.path / "ok.json", two_user_config().dump()));
  opts.samples = 10;
  CHECK(run("design", opts).code == kExitConfig);
  CHECK(run("no-such-command", opts).code == kExitConfig);
  CHECK(run("simulate", with_config(dir.path / "ok.json")).code == kExitConfig);
}

TEST_CASE("infeasible system exits 3 with a header-only table") {
  TempDir dir;
  auto cfg = two_user_config();
  // snr_db fixes P|h|^2, so give the channel explicitly.
  cfg["system"] = json::parse(R"({"P": 1e-3, "users": [{"N": 128, "eps": 1e-6, "h_re": 2.0, "h_im": 0.0},
                                                       {"N": 256, "eps": 1e-4, "h_re": 1.0, "h_im": 0.0}]})");
  const auto r = run("design", with_config(write(dir.path / "tiny.json", cfg.dump())));
  CHECK(r.code == kExitInfeasible);
  CHECK(lines(r.out) == 1);
  CHECK(r.out.rfind("build_id,seed,samples,rank,orders", 0) == 0);
}

TEST_CASE("design table and byte-identical reruns") {
  TempDir dir;
  const auto path = write(dir.path / "cfg.json", two_user_config().dump());
  const auto a = run("design", with_config(path));
  const auto b = run("design", with_config(path));
  REQUIRE(a.code == kExitOk);
  CHECK(a.out == b.out);
  CHECK(lines(a.out) > 2);
  CHECK(a.out.find("\"[[2],[4,4]]\"") != std::string::npos);
  const std::string first_row = a.out.substr(a.out.find("\r\n") + 2);
  CHECK(first_row.rfind(build_id() + ",3,2000,1,", 0) == 0);

  auto opts = with_config(path);
  opts.seed = 4;
  const auto c = run("design", opts);
  CHECK(c.code == kExitOk);
  CHECK(c.out != a.out);
  CHECK(c.out.find("," + std::string("4,2000,1,")) != std::string::npos);
}

TEST_CASE("single-user design") {
  TempDir dir;
  auto cfg = two_user_config();
  cfg["system"]["users"] = json::parse(R"([{"N": 200, "eps": 1e-5, "snr_db": 12}])");
  const auto r = run("design", with_config(write(dir.path / "one.json", cfg.dump())));
  CHECK(r.code == kExitOk);
  CHECK(lines(r.out) == 7);
  CHECK(r.out.find(",1,[[6]],") != std::string::npos);
}

TEST_CASE("rate-region and benchmark tables") {
  TempDir dir;
  const auto path = write(dir.path / "cfg.json", two_user_config().dump());
  const auto rr = run("rate-region", with_config(path));
  CHECK(rr.code == kExitOk);
  CHECK(rr.out.rfind("build_id,seed,samples,scheme,label,pareto,R_1,R_2,V_1,V_2\r\n", 0) == 0);
  CHECK(rr.out.find("qam_tin") != std::string::npos);
  CHECK(rr.out.find("gaussian_sic") != std::string::npos);
  CHECK(rr.out.find("gaussian_tin") != std::string::npos);
  CHECK(rr.out.find("shell_sic") != std::string::npos);
  CHECK(run("rate-region", with_config(path)).out == rr.out);
  const auto bm = run("benchmark", with_config(path));
  CHECK(bm.code == kExitOk);
  CHECK(lines(bm.out) > lines(rr.out) / 4);
}

TEST_CASE("plan export, reload and corruption") {
  TempDir dir;
  auto cfg = two_user_config();
  cfg["plan_out"] = "plan.json";
  const auto r = run("design", with_config(write(dir.path / "cfg.json", cfg.dump())));
  REQUIRE(r.code == kExitOk);
  const auto pj = read_json_file(dir.path / "plan.json");
  const auto plan = plan_from_json(pj);
  CHECK(plan.codeword_length == pj["codeword_length"].get<std::vector<int>>());
  CHECK(plan_to_json(plan) == pj);

  auto tampered = pj;
  tampered["codeword_length"][0] = 1;
  CHECK_THROWS_AS(plan_from_json(tampered), ConfigError);

  auto vcfg = two_user_config();
  vcfg["plan_file"] = "bad_plan.json";
  const auto vpath = write(dir.path / "validate.json", vcfg.dump());
  write(dir.path / "bad_plan.json", tampered.dump());
  CHECK(run("validate", with_config(vpath)).code == kExitConfig);
  write(dir.path / "bad_plan.json", pj.dump().substr(0, 40));
  CHECK(run("validate", with_config(vpath)).code == kExitConfig);
  write(dir.path / "bad_plan.json", "[1, 2, 3]");
  CHECK(run("validate", with_config(vpath)).code == kExitConfig);
}

TEST_CASE("simulate writes BER rows and a readable dump") {
  TempDir dir;
  auto cfg = two_user_config();
  cfg["orders"] = json::parse("[[2], [4, 4]]");
  cfg["ber_bits"] = 2000;
  cfg["id_frames"] = 20;
  cfg["snr_offsets_db"] = {0.0, 6.0};
  cfg["dump_file"] = "frame.bin";
  const auto path = write(dir.path / "sim.json", cfg.dump());
  const auto r = run("simulate", with_config(path));
  CHECK(r.code == kExitOk);
  CHECK(r.out.find(",ber,1,,0,") != std::string::npos);
  CHECK(r.out.find(",info_density,2,2,") != std::string::npos);
  std::ifstream f(dir.path / "frame.bin", std::ios::binary);
  const auto recs = read_dump(f);
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].bits.size() == 256);
  CHECK(recs[1].y.size() == 256);
  CHECK(recs[1].llr.size() == 1024);
  CHECK(run("simulate", with_config(path)).out == r.out);

  cfg["orders"] = json::parse("[[2], [5, 4]]");
  CHECK(run("simulate", with_config(write(dir.path / "bad.json", cfg.dump()))).code == kExitConfig);
}
