#include "qlev/scanner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include <fmt/format.h>

#include "qlev/error.hpp"

namespace qlev {

double DirectionGrid::coordinate(int index) const {
  if (resolution == 1) return 0.0;
  return -radius + 2.0 * radius * index / (resolution - 1);
}

std::optional<PlaneSpec> DirectionGrid::planeAt(int i, int j) const {
  const double s = coordinate(i);
  const double t = coordinate(j);
  std::vector<LinearForm> forms;
  if (baseForms.size() == 1) {
    // m = 3: one form, both generators act on it.
    forms.push_back(baseForms[0].perturbed(generators.at(0), s).perturbed(generators.at(1), t));
  } else {
    forms.push_back(baseForms.at(0).perturbed(generators.at(0), s));
    forms.push_back(baseForms.at(1).perturbed(generators.at(1), t));
  }
  try {
    return buildPlane(std::move(forms), offsets);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::DegeneratePlane) return std::nullopt;
    throw;
  }
}

std::string_view toString(RecordKind k) {
  switch (k) {
    case RecordKind::Compact: return "Compact";
    case RecordKind::OpenStrip: return "OpenStrip";
    case RecordKind::Unresolved: return "Unresolved";
    case RecordKind::Empty: return "Empty";
  }
  return "?";
}

std::string_view toString(LegendKind k) {
  switch (k) {
    case LegendKind::Normal: return "Normal";
    case LegendKind::AllCompact: return "AllCompact";
    case LegendKind::Unlabeled: return "Unlabeled";
    case LegendKind::Unresolved: return "Unresolved";
    case LegendKind::Empty: return "Empty";
    case LegendKind::Invalid: return "Invalid";
  }
  return "?";
}

std::string LegendEntry::str() const {
  if (kind == LegendKind::Normal && normal) return normal->str();
  return std::string(toString(kind));
}

LegendEntry legendOf(const ScanRecord& r) {
  switch (r.kind) {
    case RecordKind::Compact: return {LegendKind::AllCompact, std::nullopt};
    case RecordKind::Unresolved: return {LegendKind::Unresolved, std::nullopt};
    case RecordKind::Empty: return {LegendKind::Empty, std::nullopt};
    case RecordKind::OpenStrip:
      if (r.normal) return {LegendKind::Normal, r.normal};
      return {LegendKind::Unlabeled, std::nullopt};
  }
  return {};
}

int ZoneMap::area(int id) const { return static_cast<int>(std::count(zone.begin(), zone.end(), id)); }

namespace {

struct SampleResult {
  bool valid = false;
  std::vector<LevelAnalysis> perLevel;
};

std::vector<RealVector> openDirections(const LevelAnalysis& a) {
  std::vector<RealVector> dirs;
  for (const auto& label : a.labels) {
    if (label.kind == LabelKind::OpenStrip) dirs.push_back(label.fit->liftedDirection);
  }
  return dirs;
}

// Four nearest valid samples by grid distance, ties by row-major index.
std::vector<int> nearestNeighbors(int i, int j, int res, const std::vector<SampleResult>& samples) {
  std::vector<std::pair<int, int>> cand;  // (squared distance, index)
  for (int a = 0; a < res; ++a) {
    for (int b = 0; b < res; ++b) {
      if (a == i && b == j) continue;
      const int idx = a * res + b;
      if (!samples[static_cast<std::size_t>(idx)].valid) continue;
      cand.emplace_back((a - i) * (a - i) + (b - j) * (b - j), idx);
    }
  }
  const std::size_t k = std::min<std::size_t>(4, cand.size());
  std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end());
  std::vector<int> out;
  for (std::size_t q = 0; q < k; ++q) out.push_back(cand[q].second);
  return out;
}

ScanRecord summarize(const LevelAnalysis& own, const std::vector<const LevelAnalysis*>& neighbors,
                     const ClassifierConfig& ccfg) {
  ScanRecord r;
  r.level = own.level;
  r.seedCount = static_cast<int>(own.pieces.size());
  int open = 0;
  int balance = 0;
  for (const auto& label : own.labels) {
    if (label.kind == LabelKind::Unresolved) ++r.unresolvedCount;
    if (label.kind == LabelKind::OpenStrip) {
      ++open;
      balance += label.orientationSign;
    }
  }
  r.orientationSign = (balance > 0) - (balance < 0);
  if (open > 0) {
    r.kind = RecordKind::OpenStrip;
  } else if (r.unresolvedCount > 0) {
    r.kind = RecordKind::Unresolved;
  } else {
    r.kind = own.labels.empty() ? RecordKind::Empty : RecordKind::Compact;
  }
  if (r.kind != RecordKind::OpenStrip) return r;

  std::vector<RealVector> dirs = openDirections(own);
  int contributing = 0;
  for (const LevelAnalysis* n : neighbors) {
    auto d = openDirections(*n);
    if (d.empty()) continue;
    ++contributing;
    dirs.insert(dirs.end(), d.begin(), d.end());
  }
  if (contributing < 3) {
    r.cause = Cause::NoCandidate;
    return r;
  }
  LabelResult res;
  try {
    res = labelFromDirections(dirs, ccfg);
  } catch (const Error& e) {
    r.cause = e.code() == ErrorCode::AmbiguousLabel ? Cause::AmbiguousLabel : Cause::NoCandidate;
    return r;
  }
  auto bounded = [&](const LevelAnalysis& a) {
    return std::all_of(a.labels.begin(), a.labels.end(), [&](const StripLabel& l) {
      return l.kind != LabelKind::OpenStrip || boundednessGrowth(l, res.normal) < ccfg.growthTol;
    });
  };
  bool ok = bounded(own);
  for (const LevelAnalysis* n : neighbors) ok = ok && bounded(*n);
  if (!ok) {
    r.cause = Cause::BoundednessViolation;
    return r;
  }
  r.normal = res.normal;
  r.residual = res.residual;
  return r;
}

}  // namespace

std::vector<ScanRecord> scanDirections(const TrigPolynomial& f, const DirectionGrid& grid,
                                       const std::vector<double>& levels, const ScanConfig& cfg) {
  if (levels.empty()) throw Error(ErrorCode::EmptyInput, "scanDirections: no levels");
  if (grid.resolution < 1) throw Error(ErrorCode::Config, "scanDirections: resolution < 1");
  const int res = grid.resolution;
  const std::size_t total = static_cast<std::size_t>(res) * static_cast<std::size_t>(res);
  std::vector<SampleResult> samples(total);

  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t idx = next++; idx < total; idx = next++) {
      const int i = static_cast<int>(idx) / res;
      const int j = static_cast<int>(idx) % res;
      const auto plane = grid.planeAt(i, j);
      if (!plane) continue;
      SampleResult& out = samples[idx];
      out.valid = true;
      const RestrictedFunction g = restrict(f, *plane);
      for (double c : levels) {
        try {
          out.perLevel.push_back(analyzeLevel(g, c, cfg.levelSet));
        } catch (const Error&) {
          LevelAnalysis failed;
          failed.plane = *plane;
          failed.level = c;
          failed.labels.emplace_back();
          out.perLevel.push_back(std::move(failed));
        }
      }
    }
  };
  const int workers = std::max(1, cfg.workers);
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }

  std::vector<ScanRecord> records;
  for (int i = 0; i < res; ++i) {
    for (int j = 0; j < res; ++j) {
      const auto& sample = samples[static_cast<std::size_t>(i * res + j)];
      if (!sample.valid) continue;
      const auto nb = nearestNeighbors(i, j, res, samples);
      for (std::size_t q = 0; q < levels.size(); ++q) {
        std::vector<const LevelAnalysis*> others;
        for (int n : nb) others.push_back(&samples[static_cast<std::size_t>(n)].perLevel[q]);
        ScanRecord r = summarize(sample.perLevel[q], others, cfg.levelSet.classify);
        r.i = i;
        r.j = j;
        r.s = grid.coordinate(i);
        r.t = grid.coordinate(j);
        r.level = levels[q];
        records.push_back(std::move(r));
      }
    }
  }
  return records;
}

ZoneMap buildZoneMap(const std::vector<ScanRecord>& records, double level, const DirectionGrid* grid) {
  int res = grid ? grid->resolution : 0;
  if (!grid) {
    for (const auto& r : records) {
      if (r.level == level) res = std::max({res, r.i + 1, r.j + 1});
    }
  }
  if (res == 0) throw Error(ErrorCode::IncompleteGrid, fmt::format("no records at level {}", level));
  const std::size_t total = static_cast<std::size_t>(res) * static_cast<std::size_t>(res);
  std::vector<std::optional<LegendEntry>> cells(total);
  for (const auto& r : records) {
    if (r.level != level) continue;
    if (r.i < 0 || r.j < 0 || r.i >= res || r.j >= res) {
      throw Error(ErrorCode::IncompleteGrid, fmt::format("record ({}, {}) outside the grid", r.i, r.j));
    }
    cells[static_cast<std::size_t>(r.i * res + r.j)] = legendOf(r);
  }
  for (std::size_t idx = 0; idx < total; ++idx) {
    if (cells[idx]) continue;
    const int i = static_cast<int>(idx) / res;
    const int j = static_cast<int>(idx) % res;
    if (grid && !grid->planeAt(i, j)) {
      cells[idx] = LegendEntry{LegendKind::Invalid, std::nullopt};
    } else {
      throw Error(ErrorCode::IncompleteGrid, fmt::format("no record for sample ({}, {}) at level {}", i, j, level));
    }
  }

  ZoneMap map;
  map.resolution = res;
  map.level = level;
  map.zone.assign(total, -1);
  map.boundary.assign(total, false);
  const int di[] = {-1, 1, 0, 0};
  const int dj[] = {0, 0, -1, 1};
  for (std::size_t start = 0; start < total; ++start) {
    if (map.zone[start] >= 0) continue;
    const int id = static_cast<int>(map.legend.size());
    map.legend.push_back(*cells[start]);
    std::vector<std::size_t> stack{start};
    map.zone[start] = id;
    while (!stack.empty()) {
      const std::size_t cur = stack.back();
      stack.pop_back();
      const int i = static_cast<int>(cur) / res;
      const int j = static_cast<int>(cur) % res;
      for (int k = 0; k < 4; ++k) {
        const int a = i + di[k];
        const int b = j + dj[k];
        if (a < 0 || b < 0 || a >= res || b >= res) continue;
        const auto nb = static_cast<std::size_t>(a * res + b);
        if (map.zone[nb] >= 0 || *cells[nb] != *cells[start]) continue;
        map.zone[nb] = id;
        stack.push_back(nb);
      }
    }
  }
  for (int i = 0; i < res; ++i) {
    for (int j = 0; j < res; ++j) {
      const int id = map.zoneAt(i, j);
      for (int k = 0; k < 4; ++k) {
        const int a = i + di[k];
        const int b = j + dj[k];
        if (a < 0 || b < 0 || a >= res || b >= res) continue;
        if (map.zoneAt(a, b) != id) map.boundary[static_cast<std::size_t>(i * res + j)] = true;
      }
    }
  }
  return map;
}

LevelScan scanLevels(const TrigPolynomial& f, const PlaneSpec& plane, LevelRange range, double window,
                     const LevelScanConfig& cfg) {
  if (range.count < 2) throw Error(ErrorCode::Config, "scanLevels: count < 2");
  LevelScan out;
  const RestrictedFunction g = restrict(f, plane);
  const CriticalScan crit = findCriticalPoints(g, window, cfg.levelSet.gridStep);
  for (const auto& p : crit.morse) out.criticalValues.push_back(p.value);
  for (const auto& p : crit.nonMorse) out.criticalValues.push_back(p.value);
  std::sort(out.criticalValues.begin(), out.criticalValues.end());

  LevelSetConfig lcfg = cfg.levelSet;
  lcfg.window = window;
  std::vector<PlaneSpec> family{plane};
  for (auto& p : perturbationFamily(plane, cfg.perturbation, cfg.familySize, cfg.familySeed)) {
    family.push_back(std::move(p));
  }
  for (int q = 0; q < range.count; ++q) {
    LevelScanEntry e;
    e.level = range.min + (range.max - range.min) * q / (range.count - 1);
    e.nearSingular = std::any_of(out.criticalValues.begin(), out.criticalValues.end(),
                                 [&](double v) { return std::abs(v - e.level) < cfg.singularMargin; });
    if (!e.nearSingular) {
      std::vector<LevelAnalysis> analyses;
      for (const auto& p : family) analyses.push_back(analyzeLevel(restrict(f, p), e.level, lcfg));
      e.report = levelConsistency(e.level, transportLabels(f, e.level, analyses, lcfg));
    }
    out.levels.push_back(std::move(e));
  }
  return out;
}

}  // namespace qlev
