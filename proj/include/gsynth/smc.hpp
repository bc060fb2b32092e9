#pragma once

// Image -> spec inference: SMC and beam search over drawing commands with a
// pixel likelihood and pluggable non-neural proposals.

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "gsynth/dsl.hpp"
#include "gsynth/raster.hpp"

namespace gsynth {

enum class ProposalKind { Uniform, Residual };

const char* proposalName(ProposalKind k);
ProposalKind parseProposal(std::string_view text);

/// Likelihood scale at which one extra or missing circle at 256 px moves the
/// log-likelihood by -5.
double defaultGamma();

struct SamplerConfig {
  int particleCount = 100;
  int maxCommands = 12;
  double gamma = defaultGamma();
  ProposalKind proposal = ProposalKind::Residual;
  /// Resample when the effective sample size drops below this fraction.
  double essThreshold = 0.5;
  /// Softmax temperature on residual scores, in pixels.
  double temperature = 4.0;
  /// STOP logit is (stopThreshold - residual ink pixels) / temperature.
  double stopThreshold = 24.0;
  /// Candidates need this share of their pixels on target ink.
  double minInkCoverage = 0.9;
  std::uint64_t seed = 0;
};

struct Particle {
  Spec partial;
  double logWeight = 0;
  double logProposal = 0;  // log q of the command sequence so far
  bool finished = false;
};

struct RankedSpec {
  Spec spec;
  /// -gamma * pixelDistance + log q(spec)
  double score = 0;
  bool complete = true;
};

/// A proposal distribution over candidate indices plus STOP.
struct Proposal {
  std::vector<int> candidates;
  std::vector<double> probs;
  double stopProb = 0;
};

/// Per-image state: the candidate commands consistent with the target ink
/// and their pixel sets.
class DerenderContext {
 public:
  DerenderContext(const Bitmap& target, const SamplerConfig& cfg);
  ~DerenderContext();
  DerenderContext(DerenderContext&&) noexcept;
  DerenderContext& operator=(DerenderContext&&) noexcept;

  const std::vector<DrawCommand>& candidates() const;
  /// Distribution over the next command given a partial spec built from
  /// candidates.
  Proposal propose(const Spec& partial, ProposalKind kind) const;
  /// Residual score of every candidate: +1 per uncovered target ink pixel,
  /// 0 per covered one, -2 per pixel off the target ink.
  std::vector<std::int32_t> residualScores(const Spec& partial) const;
  double logLikelihood(const Spec& s) const;

  struct Impl;  // opaque; shared with the samplers
  const Impl& impl() const { return *impl_; }

 private:
  std::unique_ptr<Impl> impl_;
};

/// Final particle population after at most maxCommands steps.
std::vector<Particle> smcRun(const DerenderContext& ctx, const SamplerConfig& cfg);
std::vector<RankedSpec> smcInfer(const Bitmap& image, const SamplerConfig& cfg);
/// Keeps the beamWidth partial specs of highest log q per step.
std::vector<RankedSpec> beamInfer(const Bitmap& image, int beamWidth,
                                  const SamplerConfig& cfg);

/// 1 / sum(w^2) for normalized weights given as logs.
double effectiveSampleSize(std::span<const double> logWeights);
/// Systematic resampling of normalized weights with offset u in [0, 1).
std::vector<std::size_t> systematicResample(std::span<const double> weights,
                                            double u);

}  // namespace gsynth
