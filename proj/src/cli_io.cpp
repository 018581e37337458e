#include "qlev/cli_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "qlev/error.hpp"

namespace qlev {

using nlohmann::json;

namespace {

[[noreturn]] void configError(const std::string& msg) { throw Error(ErrorCode::Config, msg); }

const json& field(const json& j, const char* key, const std::string& path) {
  if (!j.is_object()) configError(fmt::format("\"{}\" must be an object", path.empty() ? "config" : path));
  auto it = j.find(key);
  if (it == j.end()) {
    configError(fmt::format("missing required field \"{}\"", path.empty() ? key : path + "." + key));
  }
  return *it;
}

std::string join(const std::string& path, const char* key) { return path.empty() ? key : path + "." + key; }

double number(const json& j, const std::string& name) {
  if (!j.is_number()) configError(fmt::format("field \"{}\" must be a number", name));
  return j.get<double>();
}

std::int64_t integer(const json& j, const std::string& name) {
  if (!j.is_number_integer()) configError(fmt::format("field \"{}\" must be an integer", name));
  return j.get<std::int64_t>();
}

void readNumber(const json& j, const char* key, const std::string& path, double& out) {
  if (j.contains(key)) out = number(j[key], join(path, key));
}

void readInt(const json& j, const char* key, const std::string& path, int& out) {
  if (j.contains(key)) out = static_cast<int>(integer(j[key], join(path, key)));
}

void readBool(const json& j, const char* key, const std::string& path, bool& out) {
  if (!j.contains(key)) return;
  if (!j[key].is_boolean()) configError(fmt::format("field \"{}\" must be true or false", join(path, key)));
  out = j[key].get<bool>();
}

void readString(const json& j, const char* key, const std::string& path, std::string& out) {
  if (!j.contains(key)) return;
  if (!j[key].is_string()) configError(fmt::format("field \"{}\" must be a string", join(path, key)));
  out = j[key].get<std::string>();
}

std::uint64_t unsignedInt(const json& j, const std::string& name) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0)) {
    configError(fmt::format("field \"{}\" must be a non-negative integer", name));
  }
  return j.get<std::uint64_t>();
}

RealVector numbers(const json& j, const std::string& name) {
  if (!j.is_array()) configError(fmt::format("field \"{}\" must be an array of numbers", name));
  RealVector out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], fmt::format("{}[{}]", name, i)));
  return out;
}

FormSpec formSpec(const json& j, const std::string& name, int m) {
  if (!j.is_array()) configError(fmt::format("field \"{}\" must be an array of numbers", name));
  FormSpec f;
  f.integral = std::all_of(j.begin(), j.end(), [](const json& e) { return e.is_number_integer(); });
  f.coefficients = numbers(j, name);
  if (static_cast<int>(f.coefficients.size()) != m) {
    configError(fmt::format("field \"{}\" must have {} entries", name, m));
  }
  return f;
}

void positive(double v, const std::string& name) {
  if (!(v > 0.0) || !std::isfinite(v)) configError(fmt::format("field \"{}\" must be positive", name));
}

json formJson(const FormSpec& f) {
  json a = json::array();
  for (double c : f.coefficients) {
    if (f.integral) {
      a.push_back(static_cast<std::int64_t>(std::llround(c)));
    } else {
      a.push_back(c);
    }
  }
  return a;
}

void writeFile(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Config, fmt::format("cannot write {}", path.string()));
  out << content;
}

std::string readFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Config, fmt::format("cannot read {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json vecJson(std::span<const double> v) { return json(std::vector<double>(v.begin(), v.end())); }

json normalJson(const std::optional<IntegerVector>& n) {
  if (!n) return nullptr;
  return json(n->entries());
}

}  // namespace

LinearForm FormSpec::toForm() const {
  if (!integral) return LinearForm::fromReal(coefficients);
  std::vector<std::int64_t> k;
  for (double c : coefficients) k.push_back(std::llround(c));
  return LinearForm::fromInteger(IntegerVector(k));
}

LevelSetConfig RunConfig::levelSet() const {
  LevelSetConfig ls;
  ls.trace = trace;
  ls.classify = classifier;
  ls.window = window;
  ls.gridStep = gridStep;
  ls.initialArc = initialArc;
  ls.directionTol = directionTol;
  return ls;
}

RunConfig parseConfig(const std::string& text, const std::filesystem::path& baseDir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    configError(fmt::format("config is not valid JSON: {}", e.what()));
  }
  RunConfig cfg;
  cfg.baseDir = baseDir;
  cfg.m = static_cast<int>(integer(field(j, "m", ""), "m"));
  if (cfg.m != 3 && cfg.m != 4) configError("field \"m\" must be 3 or 4");
  const json& fn = field(j, "function", "");
  if (!fn.is_string()) configError("field \"function\" must be a fixture path");
  cfg.function = fn.get<std::string>();

  if (j.contains("plane")) {
    const json& p = j["plane"];
    const json& forms = field(p, "forms", "plane");
    if (!forms.is_array() || static_cast<int>(forms.size()) != cfg.m - 2) {
      configError(fmt::format("field \"plane.forms\" must hold {} forms", cfg.m - 2));
    }
    for (std::size_t i = 0; i < forms.size(); ++i) {
      cfg.forms.push_back(formSpec(forms[i], fmt::format("plane.forms[{}]", i), cfg.m));
    }
    cfg.offsets = numbers(field(p, "offsets", "plane"), "plane.offsets");
    if (cfg.offsets.size() != cfg.forms.size()) configError("field \"plane.offsets\" must match plane.forms");
  }
  if (j.contains("scan")) {
    const json& s = j["scan"];
    GridSpec g;
    const json& gens = field(s, "generators", "scan");
    if (!gens.is_array() || gens.size() != 2) configError("field \"scan.generators\" must hold 2 forms");
    for (std::size_t i = 0; i < gens.size(); ++i) {
      g.generators.push_back(formSpec(gens[i], fmt::format("scan.generators[{}]", i), cfg.m));
    }
    readNumber(s, "radius", "scan", g.radius);
    readInt(s, "resolution", "scan", g.resolution);
    readInt(s, "workers", "scan", g.workers);
    if (!(g.radius >= 0.0)) configError("field \"scan.radius\" must be non-negative");
    if (g.resolution < 1) configError("field \"scan.resolution\" must be at least 1");
    if (g.workers < 1) configError("field \"scan.workers\" must be at least 1");
    cfg.scan = g;
  }
  if (j.contains("perturbation")) {
    const json& p = j["perturbation"];
    FamilySpec fam;
    readNumber(p, "magnitude", "perturbation", fam.magnitude);
    readInt(p, "count", "perturbation", fam.count);
    if (p.contains("seed")) fam.seed = unsignedInt(p["seed"], "perturbation.seed");
    positive(fam.magnitude, "perturbation.magnitude");
    if (fam.count < 1) configError("field \"perturbation.count\" must be at least 1");
    cfg.perturbation = fam;
  }
  if (j.contains("levels")) cfg.levels = numbers(j["levels"], "levels");
  if (j.contains("levelRange")) {
    const json& r = j["levelRange"];
    LevelRange lr;
    lr.min = number(field(r, "min", "levelRange"), "levelRange.min");
    lr.max = number(field(r, "max", "levelRange"), "levelRange.max");
    lr.count = static_cast<int>(integer(field(r, "count", "levelRange"), "levelRange.count"));
    if (lr.count < 2) configError("field \"levelRange.count\" must be at least 2");
    cfg.levelRange = lr;
  }
  readNumber(j, "window", "", cfg.window);
  readNumber(j, "gridStep", "", cfg.gridStep);
  positive(cfg.window, "window");
  positive(cfg.gridStep, "gridStep");
  if (cfg.gridStep >= cfg.window) configError("field \"gridStep\" must be smaller than window");

  if (j.contains("trace")) {
    const json& t = j["trace"];
    readNumber(t, "step", "trace", cfg.trace.step);
    readNumber(t, "closureTol", "trace", cfg.trace.closureTol);
    readNumber(t, "sMin", "trace", cfg.trace.sMin);
    readNumber(t, "sMax", "trace", cfg.trace.sMax);
    readNumber(t, "gradFloor", "trace", cfg.trace.gradFloor);
    readNumber(t, "maxTurn", "trace", cfg.trace.maxTurn);
    readNumber(t, "initialArc", "trace", cfg.initialArc);
    readNumber(t, "directionTol", "trace", cfg.directionTol);
  }
  positive(cfg.trace.step, "trace.step");
  positive(cfg.trace.closureTol, "trace.closureTol");
  positive(cfg.trace.sMax, "trace.sMax");
  positive(cfg.trace.gradFloor, "trace.gradFloor");
  positive(cfg.trace.maxTurn, "trace.maxTurn");
  positive(cfg.directionTol, "trace.directionTol");
  if (cfg.trace.sMin < 0.0) configError("field \"trace.sMin\" must be non-negative");
  if (cfg.initialArc < 0.0) configError("field \"trace.initialArc\" must be non-negative");

  if (j.contains("classifier")) {
    const json& c = j["classifier"];
    readInt(c, "maxNorm", "classifier", cfg.classifier.maxNorm);
    readNumber(c, "tol", "classifier", cfg.classifier.tol);
    readNumber(c, "ratioTol", "classifier", cfg.classifier.ratioTol);
    readNumber(c, "minArc", "classifier", cfg.classifier.minArc);
    readNumber(c, "growthTol", "classifier", cfg.classifier.growthTol);
    readNumber(c, "ambiguityRatio", "classifier", cfg.classifier.ambiguityRatio);
  }
  if (cfg.classifier.maxNorm < 1 || cfg.classifier.maxNorm > 50) {
    configError("field \"classifier.maxNorm\" must be in [1, 50]");
  }
  positive(cfg.classifier.tol, "classifier.tol");
  if (!(cfg.classifier.ratioTol >= 1.0)) configError("field \"classifier.ratioTol\" must be at least 1");
  positive(cfg.classifier.growthTol, "classifier.growthTol");
  if (!(cfg.classifier.ambiguityRatio >= 1.0)) configError("field \"classifier.ambiguityRatio\" must be at least 1");

  if (j.contains("output")) {
    const json& o = j["output"];
    readString(o, "dir", "output", cfg.outDir);
    readInt(o, "decimation", "output", cfg.decimation);
    if (cfg.decimation < 1) configError("field \"output.decimation\" must be at least 1");
  }
  if (j.contains("render")) {
    const json& r = j["render"];
    readString(r, "input", "render", cfg.renderInput);
    readInt(r, "width", "render", cfg.render.width);
    readInt(r, "height", "render", cfg.render.height);
    readNumber(r, "strokeWidth", "render", cfg.render.strokeWidth);
    readNumber(r, "boundaryWidth", "render", cfg.render.boundaryWidth);
    readBool(r, "stripBoundaries", "render", cfg.render.stripBoundaries);
    if (cfg.render.width < 16 || cfg.render.height < 16) configError("field \"render.width\" and height must be at least 16");
  }
  if (j.contains("seed")) cfg.seed = unsignedInt(j["seed"], "seed");
  readNumber(j, "jitter", "", cfg.jitter);
  if (!(cfg.jitter >= 0.0)) configError("field \"jitter\" must be non-negative");
  return cfg;
}

RunConfig loadConfig(const std::filesystem::path& path) {
  return parseConfig(readFile(path), path.parent_path());
}

std::string serializeConfig(const RunConfig& cfg) {
  json j;
  j["m"] = cfg.m;
  j["function"] = cfg.function;
  if (!cfg.forms.empty()) {
    json forms = json::array();
    for (const auto& f : cfg.forms) forms.push_back(formJson(f));
    j["plane"] = {{"forms", forms}, {"offsets", cfg.offsets}};
  }
  if (cfg.scan) {
    json gens = json::array();
    for (const auto& g : cfg.scan->generators) gens.push_back(formJson(g));
    j["scan"] = {{"generators", gens},
                 {"radius", cfg.scan->radius},
                 {"resolution", cfg.scan->resolution},
                 {"workers", cfg.scan->workers}};
  }
  if (cfg.perturbation) {
    j["perturbation"] = {{"magnitude", cfg.perturbation->magnitude},
                         {"count", cfg.perturbation->count},
                         {"seed", cfg.perturbation->seed}};
  }
  j["levels"] = cfg.levels;
  if (cfg.levelRange) {
    j["levelRange"] = {{"min", cfg.levelRange->min}, {"max", cfg.levelRange->max}, {"count", cfg.levelRange->count}};
  }
  j["window"] = cfg.window;
  j["gridStep"] = cfg.gridStep;
  j["trace"] = {{"step", cfg.trace.step},         {"closureTol", cfg.trace.closureTol},
                {"sMin", cfg.trace.sMin},         {"sMax", cfg.trace.sMax},
                {"gradFloor", cfg.trace.gradFloor}, {"maxTurn", cfg.trace.maxTurn},
                {"initialArc", cfg.initialArc},   {"directionTol", cfg.directionTol}};
  j["classifier"] = {{"maxNorm", cfg.classifier.maxNorm},     {"tol", cfg.classifier.tol},
                     {"ratioTol", cfg.classifier.ratioTol},   {"minArc", cfg.classifier.minArc},
                     {"growthTol", cfg.classifier.growthTol}, {"ambiguityRatio", cfg.classifier.ambiguityRatio}};
  j["output"] = {{"dir", cfg.outDir}, {"decimation", cfg.decimation}};
  j["render"] = {{"input", cfg.renderInput},
                 {"width", cfg.render.width},
                 {"height", cfg.render.height},
                 {"strokeWidth", cfg.render.strokeWidth},
                 {"boundaryWidth", cfg.render.boundaryWidth},
                 {"stripBoundaries", cfg.render.stripBoundaries}};
  j["seed"] = cfg.seed;
  j["jitter"] = cfg.jitter;
  return j.dump(2) + "\n";
}

TrigPolynomial parseFunction(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    configError(fmt::format("function fixture is not valid JSON: {}", e.what()));
  }
  const int m = static_cast<int>(integer(field(j, "m", ""), "m"));
  if (m != 3 && m != 4) configError("field \"m\" must be 3 or 4");
  const json& hs = field(j, "harmonics", "");
  if (!hs.is_array()) configError("field \"harmonics\" must be an array");
  std::vector<Harmonic> harmonics;
  for (std::size_t i = 0; i < hs.size(); ++i) {
    const std::string name = fmt::format("harmonics[{}]", i);
    const json& k = field(hs[i], "k", name);
    if (!k.is_array() || static_cast<int>(k.size()) != m) configError(fmt::format("field \"{}.k\" must have {} entries", name, m));
    std::vector<std::int64_t> freq;
    for (std::size_t q = 0; q < k.size(); ++q) freq.push_back(integer(k[q], fmt::format("{}.k[{}]", name, q)));
    Harmonic h{IntegerVector(freq), number(field(hs[i], "a", name), name + ".a"), 0.0};
    if (hs[i].contains("phi")) h.phase = number(hs[i]["phi"], name + ".phi");
    harmonics.push_back(std::move(h));
  }
  return TrigPolynomial(m, std::move(harmonics));
}

TrigPolynomial loadFunction(const RunConfig& cfg) {
  const std::filesystem::path p = cfg.baseDir / cfg.function;
  TrigPolynomial f = parseFunction(readFile(p));
  if (f.dim() != cfg.m) configError(fmt::format("field \"m\" is {} but the fixture has m = {}", cfg.m, f.dim()));
  return f;
}

RealVector jitteredOffsets(const RunConfig& cfg) {
  RealVector out = cfg.offsets;
  if (cfg.jitter == 0.0) return out;
  std::mt19937_64 rng(cfg.seed);
  for (double& b : out) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    b += cfg.jitter * (2.0 * u - 1.0);
  }
  return out;
}

namespace {

json trajectoryObject(const Trajectory& t, int decimation) {
  json pts = json::array();
  for (std::size_t i = 0; i < t.points.size(); i += static_cast<std::size_t>(decimation)) {
    pts.push_back({t.points[i][0], t.points[i][1]});
  }
  json o;
  o["level"] = t.level;
  o["termination"] = std::string(toString(t.termination));
  o["arcLength"] = t.arcLength;
  o["pointCount"] = t.points.size();
  o["decimation"] = decimation;
  if (t.points.empty()) {
    o["start"] = nullptr;
    o["end"] = nullptr;
  } else {
    o["start"] = {t.points.front()[0], t.points.front()[1]};
    o["end"] = {t.points.back()[0], t.points.back()[1]};
  }
  o["points"] = std::move(pts);
  return o;
}

json labelObject(const StripLabel& l) {
  json o;
  o["kind"] = std::string(toString(l.kind));
  o["cause"] = std::string(toString(l.cause));
  o["arcLength"] = l.arcLength;
  if (l.fit) {
    o["width"] = l.fit->width;
    o["direction2"] = {l.fit->direction2[0], l.fit->direction2[1]};
    o["liftedDirection"] = vecJson(l.fit->liftedDirection);
  } else {
    o["width"] = nullptr;
    o["direction2"] = nullptr;
    o["liftedDirection"] = nullptr;
  }
  if (l.normalResolved && l.best() != nullptr) {
    o["normal"] = l.best()->normal.entries();
    o["residual"] = l.best()->residual;
  } else {
    o["normal"] = nullptr;
    o["residual"] = nullptr;
  }
  o["orientationSign"] = l.orientationSign;
  o["widthHalf"] = l.width.widthHalf;
  o["widthFull"] = l.width.widthFull;
  o["widthConverged"] = l.width.converged;
  return o;
}

json planeObject(const std::vector<FormSpec>& forms, const RealVector& offsets) {
  json fs = json::array();
  for (const auto& f : forms) fs.push_back(formJson(f));
  return {{"forms", fs}, {"offsets", offsets}};
}

}  // namespace

std::string trajectoryJson(const Trajectory& t, int decimation) { return trajectoryObject(t, decimation).dump(2) + "\n"; }

std::string labelJson(const StripLabel& label) { return labelObject(label).dump(2) + "\n"; }

std::string scanCsv(const std::vector<ScanRecord>& records, int m) {
  std::string out = "i,j,s,t,level,kind,n1,n2,n3,n4,residual,orientationSign,seeds,unresolved\n";
  for (const auto& r : records) {
    std::string n[4];
    std::string residual;
    if (r.normal) {
      for (int q = 0; q < r.normal->dim() && q < 4; ++q) n[q] = fmt::format("{}", (*r.normal)[q]);
      residual = fmt::format("{:.6e}", r.residual);
    }
    if (m == 3) n[3].clear();
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", r.i, r.j, r.s, r.t, r.level, toString(r.kind), n[0],
                       n[1], n[2], n[3], residual, r.orientationSign, r.seedCount, r.unresolvedCount);
  }
  return out;
}

std::string zoneMapJson(const std::vector<ZoneMap>& maps, const DirectionGrid& grid) {
  json out;
  out["type"] = "zonemap";
  out["radius"] = grid.radius;
  out["resolution"] = grid.resolution;
  json arr = json::array();
  for (const auto& zm : maps) {
    json o;
    o["level"] = zm.level;
    json zones = json::array();
    json boundary = json::array();
    for (int i = 0; i < zm.resolution; ++i) {
      json zr = json::array();
      json br = json::array();
      for (int jj = 0; jj < zm.resolution; ++jj) {
        zr.push_back(zm.zoneAt(i, jj));
        br.push_back(zm.boundaryAt(i, jj) ? 1 : 0);
      }
      zones.push_back(zr);
      boundary.push_back(br);
    }
    json legend = json::array();
    for (std::size_t id = 0; id < zm.legend.size(); ++id) {
      legend.push_back({{"id", id},
                        {"kind", std::string(toString(zm.legend[id].kind))},
                        {"normal", normalJson(zm.legend[id].normal)},
                        {"area", zm.area(static_cast<int>(id))}});
    }
    o["zones"] = std::move(zones);
    o["boundary"] = std::move(boundary);
    o["legend"] = std::move(legend);
    if (zm.resolution % 2 == 1) {
      const int mid = zm.resolution / 2;
      const int id = zm.zoneAt(mid, mid);
      const auto& e = zm.legend[static_cast<std::size_t>(id)];
      o["center"] = {{"zone", id}, {"kind", std::string(toString(e.kind))}, {"normal", normalJson(e.normal)}};
    }
    arr.push_back(std::move(o));
  }
  out["maps"] = std::move(arr);
  return out.dump(2) + "\n";
}

namespace {

constexpr const char* kCompactColor = "#1f77b4";
constexpr const char* kUnresolvedColor = "#999999";
constexpr const char* kUnlabeledColor = "#555555";
constexpr const char* kEmptyColor = "#ffffff";
constexpr const char* kInvalidColor = "#000000";
constexpr const char* kPalette[] = {"#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#bcbd22", "#17becf"};

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

std::string normalColor(const IntegerVector& n) { return kPalette[fnv1a(primitiveNormalize(n).str()) % 8]; }

std::string svgHeader(int w, int h) {
  return fmt::format(
      "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\">\n"
      "<rect x=\"0\" y=\"0\" width=\"{0}\" height=\"{1}\" fill=\"#ffffff\"/>\n",
      w, h);
}

}  // namespace

std::string colorFor(LabelKind kind, const std::optional<IntegerVector>& normal) {
  switch (kind) {
    case LabelKind::Compact: return kCompactColor;
    case LabelKind::Unresolved: return kUnresolvedColor;
    case LabelKind::OpenStrip: return normal ? normalColor(*normal) : kUnlabeledColor;
  }
  return kUnresolvedColor;
}

std::string colorFor(const LegendEntry& e) {
  switch (e.kind) {
    case LegendKind::Normal: return e.normal ? normalColor(*e.normal) : kUnlabeledColor;
    case LegendKind::AllCompact: return kCompactColor;
    case LegendKind::Unlabeled: return kUnlabeledColor;
    case LegendKind::Unresolved: return kUnresolvedColor;
    case LegendKind::Empty: return kEmptyColor;
    case LegendKind::Invalid: return kInvalidColor;
  }
  return kUnresolvedColor;
}

std::string renderSvg(const std::vector<RenderCurve>& curves, const RenderSpec& spec) {
  double lo[2] = {INFINITY, INFINITY};
  double hi[2] = {-INFINITY, -INFINITY};
  for (const auto& c : curves) {
    for (const auto& p : c.points) {
      for (int a = 0; a < 2; ++a) {
        lo[a] = std::min(lo[a], p[a]);
        hi[a] = std::max(hi[a], p[a]);
      }
    }
  }
  if (!(lo[0] <= hi[0])) throw Error(ErrorCode::EmptyInput, "renderSvg: no points");
  const double margin = 20.0;
  const double span = std::max({hi[0] - lo[0], hi[1] - lo[1], 1e-9});
  const double scale = std::min(spec.width - 2 * margin, spec.height - 2 * margin) / span;
  auto px = [&](const Point2& p) {
    return std::array<double, 2>{margin + (p[0] - lo[0]) * scale, spec.height - margin - (p[1] - lo[1]) * scale};
  };

  std::string out = svgHeader(spec.width, spec.height);
  for (const auto& c : curves) {
    if (c.points.empty()) continue;
    const std::string color = colorFor(c.kind, c.normal);
    std::string d;
    for (std::size_t i = 0; i < c.points.size(); ++i) {
      const auto q = px(c.points[i]);
      d += fmt::format("{}{:.2f},{:.2f}", i == 0 ? "M" : " L", q[0], q[1]);
    }
    if (c.closed) d += " Z";
    out += fmt::format("<path d=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"{:.2f}\"/>\n", d, color,
                       spec.strokeWidth);
    if (!spec.stripBoundaries || c.kind != LabelKind::OpenStrip || !c.fit) continue;
    const Point2 dir = c.fit->direction2;
    const Point2 nrm = rot90(dir);
    double a0 = INFINITY, a1 = -INFINITY, b0 = INFINITY, b1 = -INFINITY;
    for (const auto& p : c.points) {
      a0 = std::min(a0, dot2(p, dir));
      a1 = std::max(a1, dot2(p, dir));
      b0 = std::min(b0, dot2(p, nrm));
      b1 = std::max(b1, dot2(p, nrm));
    }
    const double mid = 0.5 * (b0 + b1);
    for (double side : {-0.5, 0.5}) {
      const double off = mid + side * c.fit->width;
      const auto p0 = px({a0 * dir[0] + off * nrm[0], a0 * dir[1] + off * nrm[1]});
      const auto p1 = px({a1 * dir[0] + off * nrm[0], a1 * dir[1] + off * nrm[1]});
      out += fmt::format(
          "<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"{}\" stroke-width=\"{:.2f}\" "
          "stroke-dasharray=\"4 3\"/>\n",
          p0[0], p0[1], p1[0], p1[1], color, spec.boundaryWidth);
    }
  }
  out += "</svg>\n";
  return out;
}

std::string renderSvg(const ZoneMap& map, const RenderSpec& spec) {
  if (map.resolution < 1 || map.zone.empty()) throw Error(ErrorCode::EmptyInput, "renderSvg: empty zone map");
  const double margin = 20.0;
  const double cell = std::min(spec.width - 2 * margin, spec.height - 2 * margin) / map.resolution;
  std::string out = svgHeader(spec.width, spec.height);
  // s runs left to right, t bottom to top.
  for (int i = 0; i < map.resolution; ++i) {
    for (int j = 0; j < map.resolution; ++j) {
      const auto& e = map.legend[static_cast<std::size_t>(map.zoneAt(i, j))];
      const double x = margin + i * cell;
      const double y = margin + (map.resolution - 1 - j) * cell;
      out += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"{}\"", x, y, cell,
                         cell, colorFor(e));
      if (map.boundaryAt(i, j)) out += fmt::format(" stroke=\"#000000\" stroke-width=\"{:.2f}\"", spec.boundaryWidth);
      out += "/>\n";
    }
  }
  out += "</svg>\n";
  return out;
}

namespace {

std::filesystem::path outputDir(const RunConfig& cfg, const CommandOptions& opts) {
  std::filesystem::path dir = opts.outDir ? *opts.outDir : cfg.baseDir / cfg.outDir;
  std::filesystem::create_directories(dir);
  return dir;
}

RunConfig withSeed(RunConfig cfg, const CommandOptions& opts) {
  if (opts.seed) cfg.seed = *opts.seed;
  return cfg;
}

PlaneSpec planeOf(const RunConfig& cfg) {
  if (cfg.forms.empty()) configError("missing required field \"plane\"");
  std::vector<LinearForm> forms;
  for (const auto& f : cfg.forms) forms.push_back(f.toForm());
  return buildPlane(std::move(forms), jitteredOffsets(cfg));
}

std::vector<RenderCurve> curvesFromJson(const json& level) {
  std::vector<RenderCurve> curves;
  for (const auto& t : level.at("trajectories")) {
    RenderCurve c;
    for (const auto& p : t.at("points")) c.points.push_back({p[0].get<double>(), p[1].get<double>()});
    if (!t.at("end").is_null()) {
      const Point2 end{t["end"][0].get<double>(), t["end"][1].get<double>()};
      if (c.points.empty() || c.points.back() != end) c.points.push_back(end);
    }
    c.closed = t.at("termination").get<std::string>() == "Closed";
    const json& l = t.at("label");
    const std::string kind = l.at("kind").get<std::string>();
    c.kind = kind == "Compact" ? LabelKind::Compact : kind == "OpenStrip" ? LabelKind::OpenStrip : LabelKind::Unresolved;
    if (!l.at("normal").is_null()) c.normal = IntegerVector(l["normal"].get<std::vector<std::int64_t>>());
    if (!l.at("width").is_null()) {
      StripFit fit;
      fit.width = l["width"].get<double>();
      fit.direction2 = {l["direction2"][0].get<double>(), l["direction2"][1].get<double>()};
      c.fit = fit;
    }
    curves.push_back(std::move(c));
  }
  return curves;
}

ZoneMap zoneMapFromJson(const json& o) {
  ZoneMap zm;
  zm.level = o.at("level").get<double>();
  const json& zones = o.at("zones");
  zm.resolution = static_cast<int>(zones.size());
  for (const auto& row : zones) {
    for (const auto& v : row) zm.zone.push_back(v.get<int>());
  }
  for (const auto& row : o.at("boundary")) {
    for (const auto& v : row) zm.boundary.push_back(v.get<int>() != 0);
  }
  for (const auto& e : o.at("legend")) {
    LegendEntry le;
    const std::string k = e.at("kind").get<std::string>();
    for (LegendKind cand : {LegendKind::Normal, LegendKind::AllCompact, LegendKind::Unlabeled, LegendKind::Unresolved,
                            LegendKind::Empty, LegendKind::Invalid}) {
      if (toString(cand) == k) le.kind = cand;
    }
    if (!e.at("normal").is_null()) le.normal = IntegerVector(e["normal"].get<std::vector<std::int64_t>>());
    zm.legend.push_back(std::move(le));
  }
  return zm;
}

json reportObject(const LevelReport& r) {
  return {{"level", r.level},
          {"consistent", r.consistent},
          {"sharedNormal", normalJson(r.sharedNormal)},
          {"positiveCount", r.positiveCount},
          {"negativeCount", r.negativeCount},
          {"signBalanced", r.signBalanced}};
}

}  // namespace

int commandTrace(const RunConfig& in, const CommandOptions& opts) {
  const RunConfig cfg = withSeed(in, opts);
  if (cfg.levels.empty()) configError("missing required field \"levels\"");
  const TrigPolynomial f = loadFunction(cfg);
  const PlaneSpec plane = planeOf(cfg);
  const RestrictedFunction g = restrict(f, plane);
  if (g.isConstant()) throw Error(ErrorCode::DegeneratePlane, "trace: f is constant on the plane");
  const LevelSetConfig ls = cfg.levelSet();
  const auto dir = outputDir(cfg, opts);

  std::vector<PlaneSpec> family;
  if (cfg.perturbation) {
    family = perturbationFamily(plane, cfg.perturbation->magnitude, cfg.perturbation->count, cfg.perturbation->seed);
  }

  json trajDoc;
  trajDoc["type"] = "trajectories";
  trajDoc["m"] = cfg.m;
  trajDoc["plane"] = planeObject(cfg.forms, plane.offsets);
  trajDoc["seed"] = cfg.seed;
  json labelDoc;
  labelDoc["type"] = "labels";
  json trajLevels = json::array();
  json labelLevels = json::array();
  std::vector<double> empty;
  for (double c : cfg.levels) {
    std::vector<Trajectory> trajs;
    LevelAnalysis a = analyzeLevel(g, c, ls, &trajs);
    if (a.pieces.empty()) empty.push_back(c);
    if (!family.empty() && !a.labels.empty()) {
      std::vector<LevelAnalysis> others;
      for (const auto& p : family) others.push_back(analyzeLevel(restrict(f, p), c, ls));
      for (auto& label : a.labels) labelByTransport(f, c, others, ls, label);
    }
    json tl = json::array();
    json ll = json::array();
    for (std::size_t k = 0; k < a.labels.size(); ++k) {
      json t = trajectoryObject(trajs[k], cfg.decimation);
      t["label"] = labelObject(a.labels[k]);
      tl.push_back(std::move(t));
      ll.push_back(labelObject(a.labels[k]));
    }
    json level = {{"level", c}, {"empty", a.pieces.empty()}, {"trajectories", tl}};
    if (opts.svg && !a.labels.empty()) {
      writeFile(dir / fmt::format("trajectories_{}.svg", trajLevels.size()), renderSvg(curvesFromJson(level), cfg.render));
    }
    trajLevels.push_back(std::move(level));
    json lo = {{"level", c}, {"labels", ll}};
    if (family.empty()) {
      lo["report"] = nullptr;
    } else {
      lo["report"] = reportObject(levelConsistency(c, a.labels));
    }
    labelLevels.push_back(std::move(lo));
  }
  trajDoc["levels"] = std::move(trajLevels);
  labelDoc["levels"] = std::move(labelLevels);
  writeFile(dir / "trajectories.json", trajDoc.dump(2) + "\n");
  writeFile(dir / "labels.json", labelDoc.dump(2) + "\n");
  if (!empty.empty()) {
    throw Error(ErrorCode::EmptyLevel, fmt::format("level {} does not meet the window", empty.front()));
  }
  return 0;
}

int commandScan(const RunConfig& in, const CommandOptions& opts) {
  const RunConfig cfg = withSeed(in, opts);
  if (!cfg.scan) configError("missing required field \"scan\"");
  if (cfg.forms.empty()) configError("missing required field \"plane\"");
  if (cfg.levels.empty()) configError("missing required field \"levels\"");
  const TrigPolynomial f = loadFunction(cfg);
  DirectionGrid grid;
  for (const auto& fs : cfg.forms) grid.baseForms.push_back(fs.toForm());
  for (const auto& fs : cfg.scan->generators) grid.generators.push_back(fs.toForm());
  grid.offsets = jitteredOffsets(cfg);
  grid.radius = cfg.scan->radius;
  grid.resolution = cfg.scan->resolution;
  ScanConfig sc;
  sc.levelSet = cfg.levelSet();
  sc.workers = cfg.scan->workers;
  const auto dir = outputDir(cfg, opts);

  const auto records = scanDirections(f, grid, cfg.levels, sc);
  writeFile(dir / "scan.csv", scanCsv(records, cfg.m));
  std::vector<ZoneMap> maps;
  for (double c : cfg.levels) maps.push_back(buildZoneMap(records, c, &grid));
  writeFile(dir / "zonemap.json", zoneMapJson(maps, grid));
  if (opts.svg) {
    for (std::size_t q = 0; q < maps.size(); ++q) {
      writeFile(dir / fmt::format("zonemap_{}.svg", q), renderSvg(maps[q], cfg.render));
    }
  }
  return 0;
}

int commandCrit(const RunConfig& in, const CommandOptions& opts) {
  const RunConfig cfg = withSeed(in, opts);
  const TrigPolynomial f = loadFunction(cfg);
  const PlaneSpec plane = planeOf(cfg);
  const RestrictedFunction g = restrict(f, plane);
  const auto dir = outputDir(cfg, opts);
  const CriticalScan scan = findCriticalPoints(g, cfg.window, cfg.gridStep);
  auto points = [&](const std::vector<CriticalPoint2D>& v) {
    json a = json::array();
    for (const auto& p : v) {
      a.push_back({{"y", {p.y[0], p.y[1]}},
                   {"value", p.value},
                   {"morseIndex", p.morseIndex},
                   {"hessianDet", p.hessianDet},
                   {"gradNorm", norm2(g.gradient(p.y))}});
    }
    return a;
  };
  json doc;
  doc["type"] = "critical";
  doc["plane"] = planeObject(cfg.forms, plane.offsets);
  doc["window"] = cfg.window;
  doc["degenerate"] = scan.degenerate;
  doc["morse"] = points(scan.morse);
  doc["nonMorse"] = points(scan.nonMorse);
  if (cfg.levelRange) {
    LevelScanConfig lc;
    lc.levelSet = cfg.levelSet();
    if (cfg.perturbation) {
      lc.perturbation = cfg.perturbation->magnitude;
      lc.familySize = cfg.perturbation->count;
      lc.familySeed = cfg.perturbation->seed;
    }
    const LevelScan ls = scanLevels(f, plane, *cfg.levelRange, cfg.window, lc);
    json levels = json::array();
    for (const auto& e : ls.levels) {
      json o = {{"level", e.level}, {"nearSingular", e.nearSingular}};
      o["report"] = e.report ? reportObject(*e.report) : json(nullptr);
      levels.push_back(std::move(o));
    }
    doc["levels"] = std::move(levels);
  }
  writeFile(dir / "critical.json", doc.dump(2) + "\n");
  return 0;
}

int commandRender(const RunConfig& in, const CommandOptions& opts) {
  const RunConfig cfg = withSeed(in, opts);
  if (cfg.renderInput.empty()) configError("missing required field \"render.input\"");
  json doc;
  try {
    doc = json::parse(readFile(cfg.baseDir / cfg.renderInput));
  } catch (const json::parse_error& e) {
    configError(fmt::format("render input is not valid JSON: {}", e.what()));
  }
  const auto dir = outputDir(cfg, opts);
  const std::string type = doc.value("type", "");
  try {
    if (type == "trajectories") {
      const auto& levels = doc.at("levels");
      int written = 0;
      for (std::size_t q = 0; q < levels.size(); ++q) {
        if (levels[q].at("trajectories").empty()) continue;
        writeFile(dir / fmt::format("trajectories_{}.svg", q), renderSvg(curvesFromJson(levels[q]), cfg.render));
        ++written;
      }
      if (written == 0) throw Error(ErrorCode::EmptyInput, "render input has no trajectories");
    } else if (type == "zonemap") {
      const auto& maps = doc.at("maps");
      if (maps.empty()) throw Error(ErrorCode::EmptyInput, "render input has no zone maps");
      for (std::size_t q = 0; q < maps.size(); ++q) {
        writeFile(dir / fmt::format("zonemap_{}.svg", q), renderSvg(zoneMapFromJson(maps[q]), cfg.render));
      }
    } else {
      configError("render input must be a trajectories or zonemap document");
    }
  } catch (const json::exception& e) {
    configError(fmt::format("render input is malformed: {}", e.what()));
  }
  return 0;
}

int runCommand(const std::string& command, const std::filesystem::path& configPath, const CommandOptions& opts) {
  try {
    const RunConfig cfg = loadConfig(configPath);
    if (command == "trace") return commandTrace(cfg, opts);
    if (command == "scan") return commandScan(cfg, opts);
    if (command == "crit") return commandCrit(cfg, opts);
    if (command == "render") return commandRender(cfg, opts);
    fmt::print(stderr, "qlev: unknown command \"{}\"\n", command);
    return 1;
  } catch (const Error& e) {
    fmt::print(stderr, "qlev: {}: {}\n", toString(e.code()), e.what());
    switch (e.code()) {
      case ErrorCode::EmptyLevel: return 2;
      case ErrorCode::DegeneratePlane: return 3;
      default: return 1;
    }
  } catch (const std::filesystem::filesystem_error& e) {
    fmt::print(stderr, "qlev: {}\n", e.what());
    return 1;
  }
}

}  // namespace qlev
