#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "qlev/classifier.hpp"
#include "qlev/qpfunction.hpp"
#include "qlev/scanner.hpp"
#include "qlev/tracer.hpp"

namespace qlev {

/// A form as written in a config: integer entries make it rational.
struct FormSpec {
  RealVector coefficients;
  bool integral = false;

  LinearForm toForm() const;
};

struct GridSpec {
  std::vector<FormSpec> generators;
  double radius = 0.05;
  int resolution = 21;
  int workers = 1;
};

struct FamilySpec {
  double magnitude = 1e-2;
  int count = 4;
  std::uint64_t seed = 1;
};

struct RenderSpec {
  int width = 800;
  int height = 800;
  double strokeWidth = 1.0;
  double boundaryWidth = 0.5;
  bool stripBoundaries = true;
};

struct RunConfig {
  int m = 0;
  std::string function;  ///< fixture path, relative to the config file
  std::vector<FormSpec> forms;
  RealVector offsets;
  std::optional<GridSpec> scan;
  std::optional<FamilySpec> perturbation;
  std::vector<double> levels;
  std::optional<LevelRange> levelRange;
  double window = 1.0;
  double gridStep = 0.05;
  TraceParams trace;
  ClassifierConfig classifier;
  double initialArc = 0.0;
  double directionTol = 0.02;
  int decimation = 10;
  RenderSpec render;
  std::string renderInput;  ///< trajectories or zone-map JSON for the render command
  std::string outDir = "out";
  std::uint64_t seed = 0;
  double jitter = 0.0;  ///< offsets move by up to this much, drawn from seed

  std::filesystem::path baseDir;  ///< directory of the config file; not serialized

  LevelSetConfig levelSet() const;
};

/// Throws Error{Config} naming the offending field.
RunConfig parseConfig(const std::string& json, const std::filesystem::path& baseDir = {});
RunConfig loadConfig(const std::filesystem::path& path);
std::string serializeConfig(const RunConfig& cfg);

/// Fixture format {"m": 4, "harmonics": [{"k": [...], "a": 1.0, "phi": 0.0}, ...]}.
TrigPolynomial parseFunction(const std::string& json);
TrigPolynomial loadFunction(const RunConfig& cfg);

/// Offsets after the seeded jitter; unchanged when jitter is 0.
RealVector jitteredOffsets(const RunConfig& cfg);

std::string trajectoryJson(const Trajectory& t, int decimation);
std::string labelJson(const StripLabel& label);

/// Header plus one line per record.
std::string scanCsv(const std::vector<ScanRecord>& records, int m);
std::string zoneMapJson(const std::vector<ZoneMap>& maps, const DirectionGrid& grid);

struct RenderCurve {
  std::vector<Point2> points;
  bool closed = false;
  LabelKind kind = LabelKind::Compact;
  std::optional<IntegerVector> normal;
  std::optional<StripFit> fit;  ///< draws strip boundaries for open curves
};

/// Throws EmptyInput when there is nothing to draw.
std::string renderSvg(const std::vector<RenderCurve>& curves, const RenderSpec& spec);
std::string renderSvg(const ZoneMap& map, const RenderSpec& spec);

/// Fill color used for a legend entry or a label; identical inputs, identical colors.
std::string colorFor(LabelKind kind, const std::optional<IntegerVector>& normal);
std::string colorFor(const LegendEntry& entry);

struct CommandOptions {
  std::optional<std::filesystem::path> outDir;
  bool svg = false;
  std::optional<std::uint64_t> seed;
};

/// Exit codes: 0 ok, 1 config error, 2 empty level, 3 degenerate plane. Diagnostics go
/// to stderr.
int commandTrace(const RunConfig& cfg, const CommandOptions& opts);
int commandScan(const RunConfig& cfg, const CommandOptions& opts);
int commandCrit(const RunConfig& cfg, const CommandOptions& opts);
int commandRender(const RunConfig& cfg, const CommandOptions& opts);

/// Loads the config and runs the named command, mapping errors to exit codes.
int runCommand(const std::string& command, const std::filesystem::path& configPath, const CommandOptions& opts);

}  // namespace qlev
