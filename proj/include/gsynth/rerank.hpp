#pragma once

// Reranking of candidate specs for one image by image likelihood, inference
// score and a log-linear prior over each candidate's synthesized program.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gsynth/dsl.hpp"
#include "gsynth/json_io.hpp"
#include "gsynth/synth.hpp"

namespace gsynth {

inline constexpr int kProgramFeatures = 6;

/// [statements, loops, reflects, max depth, distinct coefficients,
///  loops of constant length 2]
using ProgramFeatures = std::array<double, kProgramFeatures>;

ProgramFeatures programFeatures(const Program& p);
const std::array<const char*, kProgramFeatures>& programFeatureNames();

struct PriorParams {
  ProgramFeatures beta{};
};

Json toJson(const PriorParams& p);
PriorParams priorFromJson(const Json& j);

struct Candidate {
  Spec spec;
  /// Logs of the inference score and of the image likelihood.
  double logInferenceScore = 0;
  double logImageLikelihood = 0;
  std::optional<Program> program;
};

struct CandidateSet {
  std::string image;
  std::vector<Candidate> candidates;
};

Json toJson(const CandidateSet& c);
CandidateSet candidateSetFromJson(const Json& j);

struct RankedCandidate {
  std::size_t index = 0;
  /// log of likelihood x score x exp(beta . phi)
  double logScore = 0;
  double logPrior = 0;
  /// No program: given the smallest prior among the other candidates.
  bool priorImputed = false;
};

/// Best first. Ties go to the smaller canonical spec serialization. Throws
/// on an empty set.
std::vector<RankedCandidate> rerankSpecs(const CandidateSet& c, const PriorParams& prior);

struct TrainingPair {
  CandidateSet candidates;
  Spec truth;
};

Json toJson(const TrainingPair& p);
TrainingPair trainingPairFromJson(const Json& j);
std::vector<TrainingPair> readTrainingPairs(const std::string& path);
void writeTrainingPairs(std::span<const TrainingPair> pairs, const std::string& path);

struct FitConfig {
  int maxIterations = 500;
  double initialStep = 1.0;
  double tolerance = 1e-8;
  /// Small ridge term that keeps separable data from diverging.
  double l2 = 1e-3;
};

struct FitResult {
  PriorParams prior;
  double initialObjective = 0;
  double objective = 0;
  int iterations = 0;
  /// Training sets whose truth was not among the candidates.
  int dropped = 0;
};

/// Mean log of the softmax probability of the truth minus l2 |beta|^2, and
/// its gradient. Pairs must already contain their truth.
double priorObjective(const PriorParams& p, std::span<const TrainingPair> pairs, double l2,
                      ProgramFeatures* gradient = nullptr);

/// Gradient ascent with backtracking from beta = 0. Throws if every pair is
/// dropped.
FitResult fitPrior(std::span<const TrainingPair> pairs, const FitConfig& cfg = {});

/// Share of sets whose top-ranked candidate equals the truth.
double topOneAccuracy(std::span<const TrainingPair> pairs, const PriorParams& prior);

struct RerankCorpusConfig {
  int sets = 60;
  /// Perturbed candidates per set, besides the truth.
  int perturbations = 5;
  /// Spread of the shared likelihood x score term.
  double scoreNoise = 1.0;
  int gridSize = kGridSize;
  int maxCommands = 8;
  SearchSubspace sigma{true, true, false, 2};
  std::uint64_t nodeBudget = 400'000;
  std::uint64_t seed = 0;
};

/// Truths are specs of random structured programs. Each perturbation moves,
/// drops or adds one command, so it usually breaks the structure. All
/// candidates get scores drawn from the same distribution, and every
/// candidate is synthesized in `sigma` (missing on budget expiry).
std::vector<TrainingPair> syntheticRerankCorpus(const RerankCorpusConfig& cfg);

}  // namespace gsynth
