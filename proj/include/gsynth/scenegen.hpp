#pragma once

// Random specs and programs for corpora and tests.

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "gsynth/dsl.hpp"
#include "gsynth/json_io.hpp"

namespace gsynth {

class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SceneConfig {
  int maxObjects = 12;
  bool circles = true;
  bool rectangles = true;
  bool lines = true;
  /// When false, no two commands may share a grid point of their bounding
  /// boxes.
  bool allowOverlap = true;
  /// Share of scenes drawn from a random program (rows, grids, mirrored
  /// pairs) rather than independent commands.
  double structuredFraction = 0.5;
  int gridSize = kGridSize;
  std::uint64_t seed = 0;
};

struct ProgramConfig {
  int maxDepth = 3;
  /// Relative weights of primitive / for / reflect statements.
  double primitiveWeight = 3.0;
  double loopWeight = 2.0;
  double reflectWeight = 1.0;
  /// Limit on statement nodes, counted recursively.
  int maxStatements = 6;
  int maxTopLevel = 3;
  /// Reject programs that emit more commands than this.
  int maxCommands = 24;
  int gridSize = kGridSize;
  bool circles = true;
  bool rectangles = true;
  bool lines = true;
  std::uint64_t seed = 0;
};

/// Canonical spec with 1..maxObjects commands. Throws GenerationError when
/// the overlap policy cannot be met after bounded retries.
Spec randomSpec(const SceneConfig& cfg);

/// Program in normal form (normalFormViolation is empty for the configured
/// grid) that emits at least one command.
Program randomProgram(const ProgramConfig& cfg);

/// Whether the bounding boxes of two commands share a grid point.
bool overlaps(const DrawCommand& a, const DrawCommand& b);

struct CorpusRecord {
  Spec spec;
  std::optional<Program> provenanceProgram;
  std::uint64_t seed = 0;
};

Json toJson(const CorpusRecord& r);
CorpusRecord corpusRecordFromJson(const Json& j);

/// One record per line.
void writeCorpus(const std::vector<CorpusRecord>& records, const std::string& path);
std::vector<CorpusRecord> readCorpus(const std::string& path);

}  // namespace gsynth
