#pragma once

// Minimum-cost program synthesis from a spec within a search subspace.

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "gsynth/dsl.hpp"

namespace gsynth {

/// One restriction of the DSL. There are 2 * 2 * 2 * 3 = 24 of them.
struct SearchSubspace {
  bool loops = true;
  bool reflects = true;
  bool incremental = false;
  int maxDepth = 3;

  int index() const;
  static SearchSubspace fromIndex(int index);
  static SearchSubspace full() { return {}; }
  /// The same subspace solved all at once.
  SearchSubspace whole() const {
    SearchSubspace s = *this;
    s.incremental = false;
    return s;
  }

  /// e.g. "loops,reflect,depth3" or "incremental,depth1".
  std::string name() const;
  static SearchSubspace parse(std::string_view text);
  /// Whether every program of this subspace is also in `other`.
  bool within(const SearchSubspace& other) const;

  friend bool operator==(const SearchSubspace&, const SearchSubspace&) = default;
};

inline constexpr int kSubspaceCount = 24;

/// Subspace a program belongs to at the smallest depth that admits it.
SearchSubspace subspaceOf(const Program& p);
bool inSubspace(const Program& p, const SearchSubspace& sigma);

enum class SynthStatus { Solved, Exhausted, Timeout, BudgetExpired };

const char* statusName(SynthStatus s);

struct SynthesisResult {
  std::optional<Program> program;
  std::optional<Cost> cost;
  SynthStatus status = SynthStatus::Exhausted;
  double elapsedSeconds = 0;
  std::uint64_t nodesExplored = 0;
  /// True when the search ran to exhaustion over a non-incremental subspace,
  /// so `cost` is the minimum over that subspace.
  bool minimal = false;
};

struct SynthOptions {
  DslLimits limits{};
  std::uint64_t nodeBudget = UINT64_MAX;
  std::optional<double> timeLimitSeconds;
};

/// A preemptible synthesis run. Work is counted in search nodes; `run`
/// advances by at most the given number of nodes and can be called again to
/// resume. Building the candidate universe is one indivisible step, charged
/// in full to the slice that performs it, so the first slice can overshoot.
/// Results depend only on the total node count granted.
class SynthesisTask {
 public:
  SynthesisTask(const Spec& spec, SearchSubspace sigma,
                const DslLimits& limits = {});
  ~SynthesisTask();
  SynthesisTask(SynthesisTask&&) noexcept;
  SynthesisTask& operator=(SynthesisTask&&) noexcept;

  /// Returns the number of nodes actually consumed.
  std::uint64_t run(std::uint64_t nodeBudget);
  bool finished() const;
  std::uint64_t nodesExplored() const;
  std::optional<Cost> bestCost() const;
  /// No program in the subspace that is cheaper than this remains
  /// unexplored. Equals bestCost() (or infinity) once finished.
  Cost exhaustedBelow() const;
  const SearchSubspace& subspace() const;
  SynthesisResult result() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

SynthesisResult synthesize(const Spec& spec, SearchSubspace sigma,
                           const SynthOptions& options = {});

/// execute(p) == spec as sets; execution errors count as inconsistency.
bool consistent(const Program& p, const Spec& spec, int gridSize = kGridSize);

/// Streams every program of the subspace with cost <= ceiling that satisfies
/// normalFormViolation(limits), once each, with statements of every block in
/// strictly increasing canonical order. Return false from the callback to
/// stop early. Incremental subspaces enumerate the same programs as their
/// whole counterpart.
void enumerateSubspace(const SearchSubspace& sigma, Cost ceiling,
                       const DslLimits& limits,
                       const std::function<bool(const Program&)>& visit);

/// Spatial clusters used by incremental subspaces: per command kind,
/// connected components under Chebyshev distance <= 2 between defining points.
std::vector<Spec> incrementalClusters(const Spec& spec);

/// Cost of listing every command at top level.
Cost flatCost(const Spec& spec);

}  // namespace gsynth
