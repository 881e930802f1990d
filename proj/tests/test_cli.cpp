#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include <json.hpp>

namespace {

using json = nlohmann::ordered_json;

struct CliResult {
  int exit_code;
  std::string out;
};

std::string temp_dir() {
  static std::string dir = [] {
    char tmpl[] = "/tmp/ckindex_cli_XXXXXX";
    return std::string(mkdtemp(tmpl));
  }();
  return dir;
}

std::string write_temp(const std::string& name, const std::string& content) {
  std::string path = temp_dir() + "/" + name;
  std::ofstream(path) << content;
  return path;
}

CliResult run_cli(const std::string& args) {
  std::string out_file = temp_dir() + "/out.json";
  std::string cmd = std::string(CKINDEX_CLI_PATH) + " " + args + " > " + out_file + " 2>/dev/null";
  int status = std::system(cmd.c_str());
  std::ifstream in(out_file);
  std::ostringstream ss;
  ss << in.rdbuf();
  return CliResult{WEXITSTATUS(status), ss.str()};
}

const char* kCircle = R"({"vertices":["v"],"edges":[{"id":"e","src":"v","rng":"v"}]})";
const char* kO2 =
    R"({"vertices":["v"],"edges":[{"id":"1","src":"v","rng":"v"},{"id":"2","src":"v","rng":"v"}]})";

}  // namespace

TEST_CASE("analyze reports structure and orientability") {
  std::string circle = write_temp("circle.json", kCircle);
  CliResult r = run_cli("analyze --graph " + circle);
  REQUIRE(r.exit_code == 0);
  json j = json::parse(r.out);
  CHECK(j["single_entry"]["classification"] == "NLoop(1)");
  CHECK(j["orientability"]["oriented"] == true);
  CHECK(j["graph_trace"]["faithful"] == true);

  std::string o2 = write_temp("o2.json", kO2);
  CliResult r2 = run_cli("analyze --graph " + o2);
  REQUIRE(r2.exit_code == 0);
  json j2 = json::parse(r2.out);
  CHECK(j2["single_entry"]["single_entry"] == false);
  CHECK(j2["graph_trace"]["faithful"] == false);
  CHECK(j2["graph_trace"]["certificate"]["kind"] == "loop_with_exit");
}

TEST_CASE("malformed input exits 2") {
  std::string bad = write_temp("bad.json", "{broken");
  CHECK(run_cli("analyze --graph " + bad).exit_code == 2);
  std::string dangling = write_temp("dangling.json",
                                    R"({"vertices":["v"],"edges":[{"id":"e","src":"v","rng":"w"}]})");
  CHECK(run_cli("analyze --graph " + dangling).exit_code == 2);
}

TEST_CASE("trace and ktheory outputs") {
  std::string circle = write_temp("circle.json", kCircle);
  CliResult t = run_cli("trace --graph " + circle);
  REQUIRE(t.exit_code == 0);
  CHECK(json::parse(t.out)["weights"]["v"] == "1");

  std::string tree = write_temp(
      "tree.json",
      R"({"vertices":["v0","v1","v2"],
          "edges":[{"id":"a","src":"v0","rng":"v1"},{"id":"b","src":"v0","rng":"v2"}]})");
  CliResult tt = run_cli("trace --graph " + tree);
  json tj = json::parse(tt.out);
  CHECK(tj["weights"]["v0"] == "1/2");
  CHECK(tj["weights"]["v1"] == "1/4");
  CHECK(tj["weights"]["v2"] == "1/4");

  std::string o2 = write_temp("o2.json", kO2);
  CliResult k = run_cli("ktheory --graph " + o2);
  REQUIRE(k.exit_code == 0);
  json kj = json::parse(k.out);
  CHECK(kj["k0_free_rank"] == 0);
  CHECK(kj["k0_torsion"].empty());
  CHECK(kj["k1_rank"] == 0);

  CliResult kc = run_cli("ktheory --graph " + circle);
  json kcj = json::parse(kc.out);
  CHECK(kcj["k0_free_rank"] == 1);
  CHECK(kcj["k1_rank"] == 1);
}

TEST_CASE("pair on the circle: exact channels agree") {
  std::string circle = write_temp("circle.json", kCircle);
  CliResult r =
      run_cli("pair --graph " + circle + " --unitary S[e] --depth 8 --channels toeplitz,crossings");
  REQUIRE(r.exit_code == 0);
  json j = json::parse(r.out);
  CHECK(j["toeplitz"] == "-1");
  CHECK(j["crossings"] == "-1");
  CHECK(j["agree"]["toeplitz_vs_crossings"] == true);
}

TEST_CASE("pair with all channels at depth 20") {
  std::string circle = write_temp("circle.json", kCircle);
  CliResult r = run_cli("pair --graph " + circle + " --unitary S[e] --depth 20");
  REQUIRE(r.exit_code == 0);
  json j = json::parse(r.out);
  CHECK(j["toeplitz"] == "-1");
  CHECK(j["crossings"] == "-1");
  CHECK(std::abs(j["integral"]["value"].get<double>() + 1.0) < 0.05);
  CHECK(std::abs(j["residue"]["value"].get<double>() + 1.0) < 0.05);
  for (auto& [key, val] : j["agree"].items()) CHECK(val == true);
}

TEST_CASE("pair on O_2 with a modular unitary") {
  std::string o2 = write_temp("o2.json", kO2);
  CliResult r = run_cli("pair --graph " + o2 + " --unitary umn:1:12 --depth 12");
  REQUIRE(r.exit_code == 0);
  json j = json::parse(r.out);
  CHECK(j["closed_form"] == "1/4");
  CHECK(std::abs(j["residue"]["value"].get<double>() - 0.25) < 0.01);
  CHECK(j["agree"]["residue_vs_closed"] == true);

  // window too small
  CHECK(run_cli("pair --graph " + o2 + " --unitary umn:1:12 --depth 2").exit_code == 3);
}

TEST_CASE("pair rejects non-unitary input with exit 4") {
  std::string circle = write_temp("circle.json", kCircle);
  CliResult r = run_cli("pair --graph " + circle + " --unitary \"p[v] + S[e]\" --depth 6");
  CHECK(r.exit_code == 4);
}

TEST_CASE("residue command matches 2 tau") {
  std::string o2 = write_temp("o2.json", kO2);
  CliResult r = run_cli("residue --graph " + o2 + " --element 1 --depth 8");
  REQUIRE(r.exit_code == 0);
  json j = json::parse(r.out);
  CHECK(std::abs(j["residue"]["value"].get<double>() - 2.0) < 1e-3);
  CHECK(j["two_tau"] == 2.0);
  CHECK(j["pass"] == true);

  std::string circle = write_temp("circle.json", kCircle);
  CliResult rc = run_cli("residue --graph " + circle + " --element p[v] --depth 8");
  REQUIRE(rc.exit_code == 0);
  CHECK(json::parse(rc.out)["pass"] == true);

  CliResult rs = run_cli("residue --graph " + o2 + " --element S[1] --depth 8");
  REQUIRE(rs.exit_code == 0);
  json js = json::parse(rs.out);
  CHECK(js["residue"]["value"] == 0.0);
  CHECK(js["pass"] == true);
}

TEST_CASE("modular command") {
  CliResult r = run_cli("modular --n 2 --mu 1 --nu 12 --depth 12");
  REQUIRE(r.exit_code == 0);
  json j = json::parse(r.out);
  CHECK(j["closed_form"] == "1/4");
  CHECK(j["agree"] == true);
  CHECK(j["unitary"]["verified"] == true);
}

TEST_CASE("rep export") {
  std::string circle = write_temp("circle.json", kCircle);
  CliResult r = run_cli("rep --graph " + circle + " --depth 2 --op phi:1 --op left:S[e]");
  REQUIRE(r.exit_code == 0);
  json j = json::parse(r.out);
  CHECK(j["basis"].size() == 5);
  CHECK(j["gram_diagonal"][0] == "1");
  CHECK(j["operators"].contains("phi:1"));
  CHECK(j["operators"].contains("left:S[e]"));

  // window guard on branching graphs
  std::string o2 = write_temp("o2.json", kO2);
  CHECK(run_cli("rep --graph " + o2 + " --depth 12").exit_code == 2);
}

TEST_CASE("CKINDEX_DEPTH_DEFAULT sets the window") {
  std::string o2 = write_temp("o2.json", kO2);
  // at depth 2 the modular residue window is too small, exit 3
  std::string out_file = temp_dir() + "/env_out.json";
  std::string cmd = std::string("CKINDEX_DEPTH_DEFAULT=2 ") + CKINDEX_CLI_PATH +
                    " pair --graph " + o2 + " --unitary umn:1:12 > " + out_file + " 2>/dev/null";
  CHECK(WEXITSTATUS(std::system(cmd.c_str())) == 3);
  cmd = std::string("CKINDEX_DEPTH_DEFAULT=12 ") + CKINDEX_CLI_PATH + " pair --graph " + o2 +
        " --unitary umn:1:12 > " + out_file + " 2>/dev/null";
  CHECK(WEXITSTATUS(std::system(cmd.c_str())) == 0);
}

TEST_CASE("byte-identical output for identical invocations") {
  std::string circle = write_temp("circle.json", kCircle);
  CliResult a = run_cli("pair --graph " + circle + " --unitary S[e] --depth 6 --channels toeplitz");
  CliResult b = run_cli("pair --graph " + circle + " --unitary S[e] --depth 6 --channels toeplitz");
  CHECK(a.out == b.out);
  CliResult c = run_cli("analyze --graph " + circle);
  CliResult d = run_cli("analyze --graph " + circle);
  CHECK(c.out == d.out);
}
