#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cxdiag/cli.hpp"
#include "oracles.hpp"

using namespace cxdiag::testing;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  int code = cxdiag::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> branching(std::vector<std::string> extra) {
  std::vector<std::string> args{"--model", fixture_path("branching.tra"), "--labels", fixture_path("branching.lab")};
  args.insert(args.end(), extra.begin(), extra.end());
  return args;
}

std::vector<std::string> with(const char* cmd, std::vector<std::string> rest) {
  rest.insert(rest.begin(), cmd);
  return rest;
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / "cxdiag_cli_test";
  fs::create_directories(dir);
  return dir / name;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

}  // namespace

TEST_CASE("check exit codes") {
  auto violated = run(with("check", branching({"--prop", "P<=0.5 [ (a|b) U (c&d) ]"})));
  CHECK(violated.code == 1);
  CHECK(violated.out.find("VIOLATED") != std::string::npos);
  CHECK(run(with("check", branching({"--prop", "P<=1.0 [ (a|b) U (c&d) ]"}))).code == 0);
  auto bad = run(with("check", branching({"--prop", "P<=0.5 [ (a|b) U ]"})));
  CHECK(bad.code == 2);
  CHECK(!bad.err.empty());
  CHECK(run({"check", "--model", "/nonexistent.tra", "--prop", "P<=0.5 [ a U b ]"}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run(with("check", branching({"--prop", "P<=0.5 [ a U b ]", "--epsilon", "0"}))).code == 2);
}

TEST_CASE("check with json output and a properties file") {
  auto props = scratch("two.props");
  write(props, "P<=0.5 [ (a|b) U (c&d) ]\nP<=1 [ true U a ]\n");
  auto r = run(with("check", branching({"--props-file", props.string(), "--format", "json"})));
  CHECK(r.code == 1);
  auto doc = nlohmann::json::parse(r.out);
  CHECK(doc["format_version"] == 1);
  REQUIRE(doc["results"].size() == 2);
  CHECK(doc["results"][0]["holds"] == false);
  CHECK(doc["results"][1]["holds"] == true);
}

TEST_CASE("diagnose leads with the most blamed action") {
  auto r = run(with("diagnose", branching({"--prop", "P<=0.5 [ (a|b) U (c&d) ]"})));
  CHECK(r.code == 1);
  auto first = r.out.find("[1] action");
  REQUIRE(first != std::string::npos);
  CHECK(r.out.substr(first, 40).find("alpha0 at s0  dB=0.6") != std::string::npos);
}

TEST_CASE("diagnose on a holding property") {
  auto r = run(with("diagnose", branching({"--prop", "P<=0.9 [ (a|b) U (c&d) ]"})));
  CHECK(r.code == 0);
  CHECK(r.out.find("property holds, no counterexample") != std::string::npos);
  CHECK(r.out.find("[1] action") == std::string::npos);
}

TEST_CASE("diagnose reports budget exhaustion") {
  auto r = run(with("diagnose", branching({"--prop", "P<=0.5 [ (a|b) U (c&d) ]", "--max-paths", "2"})));
  CHECK(r.code == 3);
  CHECK(r.err.find("0.45") != std::string::npos);
}

TEST_CASE("program models carry command sources") {
  auto r = run({"diagnose", "--model", fixture_path("csma.pm"), "--props-file", fixture_path("csma.props"), "--format", "json"});
  CHECK(r.code == 1);
  auto doc = nlohmann::json::parse(r.out);
  for (auto& i : doc["most_blamed"]) {
    bool found = false;
    for (auto& a : doc["actions"])
      if (a["state"] == i["state"] && a["action"] == i["action"]) {
        found = true;
        for (auto& t : a["transitions"]) CHECK(!t["source"].empty());
      }
    CHECK(found);
  }
  auto text = run({"diagnose", "--model", fixture_path("csma.pm"), "--props-file", fixture_path("csma.props")});
  CHECK(text.out.find("[bus:") != std::string::npos);
  CHECK(text.out.find("station1:") != std::string::npos);
}

TEST_CASE("constant overrides reach the program") {
  auto small = run({"check", "--model", fixture_path("zeroconf.pm"), "--props-file", fixture_path("zeroconf.props")});
  auto big = run({"check", "--model", fixture_path("zeroconf.pm"), "--props-file", fixture_path("zeroconf.props"), "--const", "T=20",
                  "--const", "K=4"});
  CHECK(small.code == 1);
  CHECK(big.code == 1);
  CHECK(small.out != big.out);
  CHECK(run({"check", "--model", fixture_path("zeroconf.pm"), "--props-file", fixture_path("zeroconf.props"), "--const", "Q=1"}).code == 2);
  CHECK(run({"check", "--model", fixture_path("zeroconf.pm"), "--props-file", fixture_path("zeroconf.props"), "--state-cap", "5"}).code == 3);
}

TEST_CASE("exported counterexample round trips through diagnose-trace") {
  auto cx = scratch("cx.json");
  auto direct = run(with("diagnose", branching({"--prop", "P<=0.5 [ (a|b) U (c&d) ]", "--format", "json", "--export-cx", cx.string()})));
  REQUIRE(direct.code == 1);
  auto traced = run({"diagnose-trace", cx.string(), "--format", "json"});
  CHECK(traced.code == 1);
  CHECK(traced.out == direct.out);
  auto with_model = run(with("diagnose-trace", branching({cx.string(), "--format", "json"})));
  CHECK(with_model.code == 1);
  CHECK(with_model.out == direct.out);

  auto program_cx = scratch("csma_cx.json");
  auto p = run({"diagnose", "--model", fixture_path("csma.pm"), "--props-file", fixture_path("csma.props"), "--format", "json",
                "--export-cx", program_cx.string()});
  auto again = run({"diagnose-trace", program_cx.string(), "--model", fixture_path("csma.pm"), "--format", "json"});
  CHECK(again.out == p.out);
}

TEST_CASE("json reports are byte identical across runs") {
  auto args = with("diagnose", branching({"--prop", "P<=0.5 [ (a|b) U (c&d) ]", "--format", "json"}));
  CHECK(run(args).out == run(args).out);
  auto serial = args;
  serial.push_back("--serial");
  CHECK(run(serial).out == run(args).out);
}

TEST_CASE("invalid traces are rejected with their violations") {
  auto cx = scratch("base.json");
  run(with("diagnose", branching({"--prop", "P<=0.5 [ (a|b) U (c&d) ]", "--export-cx", cx.string()})));
  auto doc = nlohmann::ordered_json::parse(read_file(cx.string()));

  auto light = doc;
  light["paths"].erase(light["paths"].begin());
  light["total_mass"] = 0.35;
  auto light_path = scratch("light.json");
  write(light_path, light.dump());
  auto r = run({"diagnose-trace", light_path.string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("mass below threshold") != std::string::npos);

  auto cut = doc;
  auto& p = cut["paths"][1];
  p["states"].erase(p["states"].size() - 1);
  p["actions"].erase(p["actions"].size() - 1);
  p["labels"].erase(p["labels"].size() - 1);
  auto cut_path = scratch("cut.json");
  write(cut_path, cut.dump());
  r = run({"diagnose-trace", cut_path.string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("path 1") != std::string::npos);

  auto garbage = scratch("garbage.json");
  write(garbage, "{ not json");
  CHECK(run({"diagnose-trace", garbage.string()}).code == 2);
}

TEST_CASE("output file and normalised text") {
  auto out = scratch("report.txt");
  auto r = run(with("diagnose", branching({"--prop", "P<=0.5 [ (a|b) U (c&d) ]", "--out", out.string(), "--normalize"})));
  CHECK(r.code == 1);
  CHECK(r.out.empty());
  auto text = read_file(out.string());
  CHECK(text.find("alpha0 at s0  dB=1\n") != std::string::npos);
}
