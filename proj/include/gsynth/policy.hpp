#pragma once

// Search policy over the 24 subspaces: a bilinear softmax model trained on
// per-subspace solve times, a time-sharing scheduler that runs every subspace
// in proportion to the policy, and the oracle and component-prediction
// baselines it is compared against.

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gsynth/dsl.hpp"
#include "gsynth/json_io.hpp"
#include "gsynth/synth.hpp"

namespace gsynth {

inline constexpr int kSpecFeatures = 4;

using SpecFeatures = std::array<double, kSpecFeatures>;
using SubspaceVector = std::array<double, kSubspaceCount>;

/// [circles, rectangles, lines, 1]; counts are optionally log(1 + n).
SpecFeatures specFeatures(const Spec& s, bool logCounts = false);
SpecFeatures specFeatures(std::array<int, 3> kindCounts, bool logCounts = false);

struct PolicyParams {
  /// theta[sigma index][feature]
  std::array<SpecFeatures, kSubspaceCount> theta{};
  bool logCounts = false;

  double squaredNorm() const;
};

SubspaceVector policyDistribution(const PolicyParams& p, const SpecFeatures& phi);
SubspaceVector policyDistribution(const PolicyParams& p, const Spec& s);
SubspaceVector uniformPolicy();

// ---------------------------------------------------------------------------
// Timing data

struct TimingRecord {
  int specId = 0;
  SearchSubspace sigma;
  /// Search nodes divided by TimingOptions::nodesPerUnit (budget when the
  /// run did not finish).
  double t = 0;
  std::uint64_t nodes = 0;
  std::optional<Cost> solvedCost;
  std::optional<Program> program;
  bool inBest = false;
  bool timedOut = false;
};

/// A spec with one record per subspace, in subspace index order.
struct TimedSpec {
  int specId = 0;
  std::array<int, 3> kindCounts{};
  std::vector<TimingRecord> records;

  bool hasBest() const;
  std::optional<Cost> bestCost() const;
};

struct TimingOptions {
  DslLimits limits{};
  std::uint64_t nodeBudget = 2'000'000;
  double nodesPerUnit = 1e4;
};

/// Runs every subspace on the spec and marks the ones that reach the lowest
/// cost found by any of them.
TimedSpec timeSpec(const Spec& spec, int specId, const TimingOptions& opt = {});

Json toJson(const TimingRecord& r, std::array<int, 3> kindCounts);
/// Groups rows by specId; throws unless each spec has all 24 subspaces.
std::vector<TimedSpec> timedSpecsFromRows(const std::vector<Json>& rows);
void writeTimings(std::span<const TimedSpec> corpus, const std::string& path);
std::vector<TimedSpec> readTimings(const std::string& path);

// ---------------------------------------------------------------------------
// Loss and training

/// sum x_n e^{-beta x_n} / sum e^{-beta x_n}; infinite beta gives min(x).
double softMinimum(std::span<const double> x, double beta);
/// d softMinimum / d x_n.
std::vector<double> softMinimumGradient(std::span<const double> x, double beta);

struct LossValue {
  double value = 0;
  std::array<SpecFeatures, kSubspaceCount> gradient{};
};

/// Mean over specs of SoftMinimum_beta{t / pi : sigma in Best} plus
/// lambda * |theta|^2. Pass beta = infinity for the hard minimum. Throws if
/// some spec has no Best subspace.
LossValue policyLoss(const PolicyParams& p, std::span<const TimedSpec> corpus,
                     double beta, double lambda);

struct TrainConfig {
  double lambda = 0.1;
  int steps = 2000;
  double betaStart = 1.0;
  double betaEnd = 2.0;
  double learningRate = 0.05;
  double momentDecay1 = 0.9;
  double momentDecay2 = 0.999;
  double epsilon = 1e-8;
  /// Raw counts overfit held-out specs with unusual sizes.
  bool logCounts = true;
};

struct TrainLog {
  std::vector<double> loss;  // softened objective per step
  double initialHardLoss = 0;
  double finalHardLoss = 0;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

PolicyParams trainPolicy(std::span<const TimedSpec> corpus, const TrainConfig& cfg,
                         TrainLog* log = nullptr);

/// min over Best of t / pi: the bias-optimal time under pi.
double expectedSolveTime(const SubspaceVector& pi, const TimedSpec& s);
/// Quickest Best subspace, ignoring any policy.
int oracleChoice(const TimedSpec& s);
double oracleTime(const TimedSpec& s);

Json toJson(const PolicyParams& p);
PolicyParams policyFromJson(const Json& j);

// ---------------------------------------------------------------------------
// Component-prediction baseline

enum class Component { Loop, Reflect, DepthAtLeast2, Depth3, Incremental };
inline constexpr int kComponentCount = 5;
const char* componentName(Component c);

/// Component labels of a Best subspace's program.
using ComponentLabels = std::array<bool, kComponentCount>;

struct DeepCoderModel {
  std::array<SpecFeatures, kComponentCount> weights{};
  bool logCounts = false;

  /// Probabilities clamped to [eps, 1 - eps].
  std::array<double, kComponentCount> predict(const SpecFeatures& phi) const;
};

inline constexpr double kComponentEpsilon = 1e-4;

/// Labels per Best subspace of the spec: which components its minimum-cost
/// program uses (the incremental flag comes from the subspace itself).
std::vector<ComponentLabels> bestLabels(const TimedSpec& s);

struct LabeledSpec {
  SpecFeatures phi{};
  std::vector<ComponentLabels> best;
};

LabeledSpec labeled(const TimedSpec& s, bool logCounts);

/// Mean over specs of the minimum over Best programs of the summed component
/// log-likelihoods.
double deepCoderObjective(const DeepCoderModel& m, std::span<const LabeledSpec> data);
DeepCoderModel trainDeepCoder(std::span<const LabeledSpec> data, const TrainConfig& cfg);

/// Subspace admitting exactly the given components.
SearchSubspace subspaceFor(const std::array<bool, kComponentCount>& active);

struct SortAndAddOptions {
  double initialBudget = 1.0;  // in time units
  double timeout = 1e9;
};

/// Simulated time to a minimum-cost program: start from the components
/// predicted with probability >= 0.5, run their subspace with a budget,
/// and on failure add the next most probable component and double the
/// budget. Returns timeout when it never succeeds.
double sortAndAddTime(const std::array<double, kComponentCount>& probs, const TimedSpec& s,
                      const SortAndAddOptions& opt = {});
/// The sequence of subspaces Sort-and-Add tries.
std::vector<SearchSubspace> sortAndAddOrder(const std::array<double, kComponentCount>& probs);

// ---------------------------------------------------------------------------
// Time-sharing scheduler

/// A preemptible search whose work is measured in nodes.
class SchedulableTask {
 public:
  virtual ~SchedulableTask() = default;
  virtual std::uint64_t run(std::uint64_t nodes) = 0;
  virtual bool finished() const = 0;
  virtual std::optional<Cost> bestCost() const = 0;
  /// No solution cheaper than this remains unexplored.
  virtual Cost exhaustedBelow() const = 0;
};

/// Finishes after exactly `completion` nodes, reporting `cost` (or nothing).
class SimulatedTask : public SchedulableTask {
 public:
  SimulatedTask(std::uint64_t completion, std::optional<Cost> cost)
      : completion_(completion), cost_(cost) {}
  std::uint64_t run(std::uint64_t nodes) override;
  bool finished() const override { return consumed_ >= completion_; }
  std::optional<Cost> bestCost() const override;
  Cost exhaustedBelow() const override;

 private:
  std::uint64_t completion_;
  std::optional<Cost> cost_;
  std::uint64_t consumed_ = 0;
};

struct ScheduleEvent {
  std::uint64_t elapsed = 0;
  int task = 0;
  Cost cost;
};

struct ScheduleTrace {
  std::vector<std::uint64_t> consumed;
  std::vector<int> slices;
  std::uint64_t elapsed = 0;
  /// Each strict improvement of the best cost, in order.
  std::vector<ScheduleEvent> improvements;
  std::optional<std::uint64_t> certifiedAt;
  bool timedOut = false;
};

struct ScheduleOutcome {
  std::optional<int> bestTask;
  std::optional<Cost> bestCost;
  /// Every task is finished or has exhausted all costs below bestCost.
  bool certified = false;
  ScheduleTrace trace;
};

struct SchedulerOptions {
  std::uint64_t quantum = 10'000;
  std::uint64_t nodeBudget = UINT64_MAX;
  /// Wall-clock limit, checked between slices.
  std::optional<double> timeLimitSeconds;
  /// Stop at the first certified solution (otherwise run until all finish).
  bool stopWhenCertified = true;
};

/// Rounds of `quantum` nodes split among unfinished tasks in proportion to
/// pi (renormalized over the unfinished ones), with fractional shares
/// carried between rounds.
ScheduleOutcome timeShare(std::span<SchedulableTask* const> tasks, std::span<const double> pi,
                          const SchedulerOptions& opt = {});

struct BiasOptimalResult {
  SynthesisResult result;
  std::optional<SearchSubspace> sigma;
  bool certified = false;
  ScheduleTrace trace;
};

/// Runs all 24 subspaces under the time-sharing scheduler.
BiasOptimalResult biasOptimalSearch(const Spec& spec, const SubspaceVector& pi,
                                    const SchedulerOptions& opt = {},
                                    const DslLimits& limits = {});

// ---------------------------------------------------------------------------
// Evaluation

struct PolicyComparison {
  /// Per spec, in corpus order (held-out fold predictions).
  std::vector<double> learned;
  std::vector<double> uniform;
  std::vector<double> oracle;
  std::vector<double> fullSpace;  // whole problem in the largest subspace
  std::vector<double> deepCoder;
};

/// k-fold cross validation: train on k - 1 folds (contiguous, in corpus
/// order), evaluate on the held-out one.
PolicyComparison crossValidate(std::span<const TimedSpec> corpus, int folds,
                               const TrainConfig& cfg, double timeout);

struct MethodSummary {
  std::string name;
  double median = 0;
  double mean = 0;
  double timeoutFraction = 0;
};

std::vector<MethodSummary> summarize(const PolicyComparison& c, double timeout);

}  // namespace gsynth
