#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "qlev/classifier.hpp"

namespace qlev {

/// Two-parameter slice of direction space: forms l1 + s * p1, l2 + t * p2 with
/// (s, t) on a res x res grid over [-r, r]^2.
struct DirectionGrid {
  std::vector<LinearForm> baseForms;   ///< exactly two
  std::vector<LinearForm> generators;  ///< p1, p2
  RealVector offsets;                  ///< kept fixed across the grid
  double radius = 0.05;
  int resolution = 21;

  double coordinate(int index) const;
  /// Plane at sample (i, j); nullopt when the perturbed forms are dependent.
  std::optional<PlaneSpec> planeAt(int i, int j) const;
};

enum class RecordKind { Compact, OpenStrip, Unresolved, Empty };
std::string_view toString(RecordKind k);

struct ScanRecord {
  int i = 0;
  int j = 0;
  double s = 0.0;
  double t = 0.0;
  double level = 0.0;
  RecordKind kind = RecordKind::Empty;
  std::optional<IntegerVector> normal;  ///< OpenStrip records only
  double residual = 0.0;                ///< of normal, 0 without one
  int orientationSign = 0;              ///< sign of (#positive - #negative) open labels
  int seedCount = 0;                    ///< window pieces found
  int unresolvedCount = 0;
  Cause cause = Cause::None;            ///< why an OpenStrip record has no normal
};

struct ScanConfig {
  LevelSetConfig levelSet;
  int workers = 1;
};

/// One record per valid sample and level, ordered by (i, j, level index). Each sample
/// is labeled from its own open directions together with those of its four nearest
/// valid grid neighbors (distance, then index). Failures are recorded, never thrown.
/// Output does not depend on the worker count.
std::vector<ScanRecord> scanDirections(const TrigPolynomial& f, const DirectionGrid& grid,
                                       const std::vector<double>& levels, const ScanConfig& cfg);

enum class LegendKind { Normal, AllCompact, Unlabeled, Unresolved, Empty, Invalid };
std::string_view toString(LegendKind k);

struct LegendEntry {
  LegendKind kind = LegendKind::Invalid;
  std::optional<IntegerVector> normal;

  std::string str() const;
  friend bool operator==(const LegendEntry&, const LegendEntry&) = default;
};

LegendEntry legendOf(const ScanRecord& record);

struct ZoneMap {
  int resolution = 0;
  double level = 0.0;
  std::vector<int> zone;       ///< row-major, zone[i * resolution + j]
  std::vector<LegendEntry> legend;
  std::vector<bool> boundary;  ///< 4-adjacent to a different zone

  int zoneAt(int i, int j) const { return zone[static_cast<std::size_t>(i * resolution + j)]; }
  bool boundaryAt(int i, int j) const { return boundary[static_cast<std::size_t>(i * resolution + j)]; }
  int area(int id) const;
};

/// Flood fill of 4-connected equal-legend regions for one level. Zone ids follow
/// row-major order of first sample. Samples with no record are Invalid when the grid
/// is given (and its plane is invalid); otherwise a missing sample throws IncompleteGrid.
ZoneMap buildZoneMap(const std::vector<ScanRecord>& records, double level,
                     const DirectionGrid* grid = nullptr);

struct LevelRange {
  double min = 0.0;
  double max = 0.0;
  int count = 2;
};

struct LevelScanConfig {
  LevelSetConfig levelSet;
  double perturbation = 1e-2;
  int familySize = 4;
  std::uint64_t familySeed = 1;
  double singularMargin = 1e-3;
};

struct LevelScanEntry {
  double level = 0.0;
  bool nearSingular = false;
  std::optional<LevelReport> report;  ///< absent for near-singular levels
};

struct LevelScan {
  std::vector<double> criticalValues;  ///< sorted, Morse and non-Morse
  std::vector<LevelScanEntry> levels;
};

/// Evenly spaced levels; those within singularMargin of a critical value of g in the
/// window are flagged. Every other level gets transport labels over the base plane and
/// the perturbation family, and the levelConsistency verdict.
LevelScan scanLevels(const TrigPolynomial& f, const PlaneSpec& plane, LevelRange range, double window,
                     const LevelScanConfig& cfg);

}  // namespace qlev
