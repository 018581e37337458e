#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "qlev/cli_io.hpp"
#include "../support.hpp"

using namespace qlev;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kSource = QLEV_SOURCE_DIR;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

// Fresh scratch directory under the build tree, removed up front.
fs::path scratchDir(const std::string& name) {
  const fs::path dir = fs::current_path() / "cli_io_scratch" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

json separableConfig() {
  return json{{"m", 4},
              {"function", (kSource / "fixtures" / "separable_m4.json").string()},
              {"plane", {{"forms", {{0, 0, 1, 0}, {0, 0, 0, 1}}}, {"offsets", {0.0, 0.0}}}},
              {"levels", {1.0}},
              {"window", 1.0},
              {"gridStep", 0.05},
              {"trace", {{"step", 0.01}, {"sMax", 200}}}};
}

// Writes the config and runs the command with output under dir / "out".
int run(const std::string& command, const json& cfg, const fs::path& dir, bool svg = false) {
  spit(dir / "config.json", cfg.dump(2));
  CommandOptions opts;
  opts.outDir = dir / "out";
  opts.svg = svg;
  return runCommand(command, dir / "config.json", opts);
}

std::size_t occurrences(const std::string& text, const std::string& what) {
  std::size_t n = 0;
  for (std::size_t at = text.find(what); at != std::string::npos; at = text.find(what, at + 1)) ++n;
  return n;
}

}  // namespace

TEST_CASE("config round trip is the identity") {
  json j = separableConfig();
  j["scan"] = {{"generators", {{0.3, 0.1, 0.0, 0.0}, {-0.2, 0.25, 0.0, 0.0}}}, {"radius", 0.1}, {"resolution", 5}, {"workers", 2}};
  j["perturbation"] = {{"magnitude", 0.01}, {"count", 4}, {"seed", 9}};
  j["levelRange"] = {{"min", -1.0}, {"max", 1.0}, {"count", 3}};
  j["classifier"] = {{"maxNorm", 8}, {"tol", 2e-3}};
  j["seed"] = 12345678901234ULL;
  j["jitter"] = 1e-4;
  const RunConfig a = parseConfig(j.dump());
  const std::string once = serializeConfig(a);
  const RunConfig b = parseConfig(once);
  CHECK(serializeConfig(b) == once);
  CHECK(b.m == 4);
  CHECK(b.forms.size() == 2);
  CHECK(b.forms[0].integral);
  CHECK_FALSE(b.scan->generators[0].integral);
  CHECK(b.scan->resolution == 5);
  CHECK(b.perturbation->seed == 9);
  CHECK(b.levelRange->count == 3);
  CHECK(b.classifier.maxNorm == 8);
  CHECK(b.seed == 12345678901234ULL);
  CHECK(b.trace.sMax == 200);
}

TEST_CASE("config errors name the field") {
  json j = separableConfig();
  j.erase("m");
  try {
    parseConfig(j.dump());
    FAIL("expected a config error");
  } catch (const Error& e) {
    CHECK((e.code() == ErrorCode::Config));
    CHECK(std::string(e.what()).find("\"m\"") != std::string::npos);
  }
  json k = separableConfig();
  k["window"] = "wide";
  try {
    parseConfig(k.dump());
    FAIL("expected a config error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("window") != std::string::npos);
  }
  CHECK(testing::throwsCode([] { parseConfig("{not json"); }, ErrorCode::Config));
}

TEST_CASE("seeded jitter is deterministic") {
  json j = separableConfig();
  j["jitter"] = 1e-3;
  j["seed"] = 5;
  const RunConfig a = parseConfig(j.dump());
  const RealVector x = jitteredOffsets(a);
  CHECK(x == jitteredOffsets(a));
  for (double v : x) CHECK(std::abs(v) <= 1e-3);
  j["seed"] = 6;
  CHECK(jitteredOffsets(parseConfig(j.dump())) != x);
  j["jitter"] = 0.0;
  CHECK(jitteredOffsets(parseConfig(j.dump())) == RealVector{0.0, 0.0});
}

TEST_CASE("trace exit codes") {
  const fs::path dir = scratchDir("trace");
  SUBCASE("closed ovals at c = 1") {
    CHECK(run("trace", separableConfig(), dir) == 0);
    const json doc = json::parse(slurp(dir / "out" / "trajectories.json"));
    CHECK(doc.at("type") == "trajectories");
    const auto& trajs = doc.at("levels").at(0).at("trajectories");
    CHECK(trajs.size() == 9);
    // Components met in the window are traced whole, so the cut ovals close too.
    for (const auto& t : trajs) {
      CHECK(t.at("termination") == "Closed");
      CHECK(t.at("label").at("kind") == "Compact");
    }
  }
  SUBCASE("every component closes when the window holds whole ovals") {
    json j = separableConfig();
    j["levels"] = {1.5};
    j["window"] = 1.2;
    CHECK(run("trace", j, dir) == 0);
    const json doc = json::parse(slurp(dir / "out" / "trajectories.json"));
    const auto& trajs = doc.at("levels").at(0).at("trajectories");
    CHECK(trajs.size() == 9);
    for (const auto& t : trajs) {
      CHECK(t.at("termination") == "Closed");
      CHECK(t.at("label").at("kind") == "Compact");
    }
  }
  SUBCASE("empty level") {
    json j = separableConfig();
    j["levels"] = {3.0};
    CHECK(run("trace", j, dir) == 2);
  }
  SUBCASE("missing m") {
    json j = separableConfig();
    j.erase("m");
    CHECK(run("trace", j, dir) == 1);
  }
  SUBCASE("dependent forms") {
    json j = separableConfig();
    j["plane"]["forms"] = {{0, 0, 1, 0}, {0, 0, 2, 0}};
    CHECK(run("trace", j, dir) == 3);
  }
  SUBCASE("function of the wrong dimension") {
    json j = separableConfig();
    j["function"] = (kSource / "fixtures" / "generic_m3.json").string();
    CHECK(run("trace", j, dir) == 1);
  }
}

TEST_CASE("scan writes one row per sample and reruns byte-identically") {
  const fs::path dir = scratchDir("scan");
  json j = separableConfig();
  j["levels"] = {1.9};
  j["window"] = 0.6;
  j["gridStep"] = 0.02;
  j["scan"] = {{"generators", {{0.3, 0.1414213562, 0.0, 0.0}, {-0.1732050808, 0.2, 0.0, 0.0}}},
               {"radius", 0.1},
               {"resolution", 3}};
  REQUIRE(run("scan", j, dir, true) == 0);
  const std::string csv = slurp(dir / "out" / "scan.csv");
  CHECK(occurrences(csv, "\n") == 10);
  const std::string header = csv.substr(0, csv.find('\n') + 1);
  CHECK(header == slurp(kSource / "tests" / "golden" / "scan_header.csv"));
  CHECK(occurrences(csv, ",Compact,") == 9);

  const json zones = json::parse(slurp(dir / "out" / "zonemap.json"));
  CHECK(zones.at("maps").size() == 1);
  CHECK(zones.at("maps").at(0).at("legend").at(0).at("kind") == "AllCompact");
  const std::string svg = slurp(dir / "out" / "zonemap_0.svg");
  CHECK(occurrences(svg, "<rect") == 9 + 1);

  const fs::path again = scratchDir("scan_again");
  REQUIRE(run("scan", j, again, true) == 0);
  CHECK(slurp(again / "out" / "scan.csv") == csv);
  CHECK(slurp(again / "out" / "zonemap.json") == slurp(dir / "out" / "zonemap.json"));
  CHECK(slurp(again / "out" / "zonemap_0.svg") == svg);
}

TEST_CASE("scan CSV columns for m = 3 leave n4 empty") {
  ScanRecord r;
  r.kind = RecordKind::OpenStrip;
  r.normal = IntegerVector{1, 0, -2};
  r.residual = 1.5e-7;
  r.orientationSign = -1;
  r.seedCount = 3;
  const std::string csv = scanCsv({r}, 3);
  CHECK(csv.substr(csv.find('\n') + 1) == "0,0,0,0,0,OpenStrip,1,0,-2,,1.500000e-07,-1,3,0\n");
}

TEST_CASE("crit on the separable function") {
  const fs::path dir = scratchDir("crit");
  json j = separableConfig();
  j["window"] = 0.6;
  j.erase("levels");
  REQUIRE(run("crit", j, dir) == 0);
  const json doc = json::parse(slurp(dir / "out" / "critical.json"));
  CHECK(doc.at("degenerate") == false);
  int count[3] = {0, 0, 0};
  for (const auto& p : doc.at("morse")) {
    const double v = p.at("value");
    const int index = p.at("morseIndex");
    const double y0 = p.at("y").at(0);
    const double y1 = p.at("y").at(1);
    CHECK(std::cos(2 * std::numbers::pi * y0) + std::cos(2 * std::numbers::pi * y1) == doctest::Approx(v).epsilon(1e-12));
    // Maxima value 2 index 2, saddles value 0 index 1, minima value -2 index 0.
    CHECK(v == doctest::Approx(2.0 * index - 2.0).epsilon(1e-9));
    CHECK(static_cast<double>(p.at("gradNorm")) < 1e-9);
    ++count[index];
  }
  CHECK(count[0] == 4);
  CHECK(count[1] == 4);
  CHECK(count[2] == 1);
}

TEST_CASE("crit on a constant restriction sets the degenerate flag") {
  const fs::path dir = scratchDir("crit_constant");
  spit(dir / "constant.json", R"({"m": 4, "harmonics": [{"k": [0, 0, 1, 0], "a": 1.0, "phi": 0.0}]})");
  json j = separableConfig();
  j["function"] = "constant.json";
  j["plane"]["offsets"] = {0.25, 0.0};
  j["window"] = 0.6;
  REQUIRE(run("crit", j, dir) == 0);
  const json doc = json::parse(slurp(dir / "out" / "critical.json"));
  CHECK(doc.at("degenerate") == true);
  CHECK(doc.at("morse").empty());
}

TEST_CASE("svg of one closed curve has one closed path") {
  RenderCurve c;
  for (int k = 0; k < 40; ++k) {
    const double th = 2 * std::numbers::pi * k / 40;
    c.points.push_back({0.1 * std::cos(th), 0.1 * std::sin(th)});
  }
  c.closed = true;
  const std::string svg = renderSvg({c}, RenderSpec{});
  CHECK(occurrences(svg, "<path") == 1);
  CHECK(occurrences(svg, " Z\"") == 1);
  CHECK(occurrences(svg, "<line") == 0);
  CHECK(svg == renderSvg({c}, RenderSpec{}));
}

TEST_CASE("svg of an open strip draws both strip boundaries") {
  RenderCurve c;
  for (int k = 0; k <= 50; ++k) c.points.push_back({0.1 * k, 0.2 * std::sin(0.7 * k)});
  c.kind = LabelKind::OpenStrip;
  c.normal = IntegerVector{0, 0, 0, 1};
  c.fit = stripFit(c.points);
  RenderSpec spec;
  const std::string svg = renderSvg({c}, spec);
  CHECK(occurrences(svg, "<path") == 1);
  CHECK(occurrences(svg, " Z\"") == 0);
  CHECK(occurrences(svg, "<line") == 2);
  CHECK(svg.find(colorFor(LabelKind::OpenStrip, c.normal)) != std::string::npos);
  spec.stripBoundaries = false;
  CHECK(occurrences(renderSvg({c}, spec), "<line") == 0);
}

TEST_CASE("svg of nothing is an error") {
  CHECK(testing::throwsCode([] { renderSvg(std::vector<RenderCurve>{}, RenderSpec{}); }, ErrorCode::EmptyInput));
}

TEST_CASE("colors are deterministic and distinguish kinds") {
  const IntegerVector n{0, 0, 0, 1};
  CHECK(colorFor(LabelKind::OpenStrip, n) == colorFor(LegendEntry{LegendKind::Normal, n}));
  CHECK(colorFor(LabelKind::Compact, std::nullopt) != colorFor(LabelKind::Unresolved, std::nullopt));
  CHECK(colorFor(LabelKind::OpenStrip, n) != colorFor(LabelKind::Compact, std::nullopt));
}

TEST_CASE("render reproduces the trace figures") {
  const fs::path dir = scratchDir("render");
  REQUIRE(run("trace", separableConfig(), dir, true) == 0);
  const std::string direct = slurp(dir / "out" / "trajectories_0.svg");
  CHECK(occurrences(direct, "<path") == 9);
  json r{{"m", 4},
         {"function", (kSource / "fixtures" / "separable_m4.json").string()},
         {"render", {{"input", (dir / "out" / "trajectories.json").string()}}}};
  const fs::path rdir = dir / "render";
  spit(rdir / "config.json", r.dump(2));
  CommandOptions opts;
  opts.outDir = rdir / "out";
  REQUIRE(runCommand("render", rdir / "config.json", opts) == 0);
  CHECK(slurp(rdir / "out" / "trajectories_0.svg") == direct);

  spit(rdir / "bad.json", R"({"type": "trajectories", "levels": []})");
  r["render"]["input"] = (rdir / "bad.json").string();
  spit(rdir / "config.json", r.dump(2));
  CHECK(runCommand("render", rdir / "config.json", opts) == 1);
}

TEST_CASE("label JSON carries a normal only once resolved") {
  StripLabel l;
  l.kind = LabelKind::OpenStrip;
  l.fit = StripFit{{1.0, 0.0}, 0.5, {1.0, 0.0, 0.0, 0.0}};
  l.normals = {NormalCandidate{IntegerVector{0, 1, 0, 0}, 0.0}};
  CHECK(json::parse(labelJson(l)).at("normal").is_null());
  l.normalResolved = true;
  const json j = json::parse(labelJson(l));
  CHECK(j.at("normal") == json({0, 1, 0, 0}));
  CHECK(j.at("kind") == "OpenStrip");
  CHECK(j.at("width") == 0.5);
}
