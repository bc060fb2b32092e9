#include "gsynth/smc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>

#include "gsynth/kernels.hpp"

namespace gsynth {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Pixels count as ink above this intensity.
constexpr float kInk = 0.5f;

using Ids = std::vector<int>;  // sorted candidate indices

std::mt19937_64 streamRng(std::uint64_t seed, std::uint64_t step, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

double logSumExp(std::span<const double> xs) {
  double m = kNegInf;
  for (double x : xs) m = std::max(m, x);
  if (m == kNegInf) return kNegInf;
  double s = 0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

// Softmax over logits; the last entry is STOP.
void normalizeInto(std::vector<double>& logits, Proposal& out) {
  const double z = logSumExp(logits);
  out.probs.resize(logits.size() - 1);
  for (std::size_t k = 0; k + 1 < logits.size(); ++k) out.probs[k] = std::exp(logits[k] - z);
  out.stopProb = std::exp(logits.back() - z);
}

}  // namespace

const char* proposalName(ProposalKind k) {
  return k == ProposalKind::Uniform ? "uniform" : "residual";
}

ProposalKind parseProposal(std::string_view text) {
  if (text == "uniform") return ProposalKind::Uniform;
  if (text == "residual") return ProposalKind::Residual;
  throw std::invalid_argument("unknown proposal '" + std::string(text) + "'");
}

double defaultGamma() {
  static const double gamma = [] {
    const Bitmap blank(kDefaultResolution, kDefaultResolution);
    const Bitmap one = render(Spec({DrawCommand::circle(7, 7)}));
    return 5.0 / pixelDistance(one, blank);
  }();
  return gamma;
}

double effectiveSampleSize(std::span<const double> logWeights) {
  const double z = logSumExp(logWeights);
  if (z == kNegInf) return 0.0;
  double s = 0;
  for (double l : logWeights) {
    const double w = std::exp(l - z);
    s += w * w;
  }
  return 1.0 / s;
}

std::vector<std::size_t> systematicResample(std::span<const double> weights, double u) {
  const std::size_t n = weights.size();
  std::vector<std::size_t> out;
  out.reserve(n);
  if (n == 0) return out;
  double cum = weights[0];
  std::size_t i = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double pos = (static_cast<double>(k) + u) / static_cast<double>(n);
    while (pos > cum && i + 1 < n) cum += weights[++i];
    out.push_back(i);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Candidate context

struct DerenderContext::Impl {
  int resolution = kDefaultResolution;
  std::vector<float> target;
  std::vector<std::uint8_t> ink;
  double baseSquares = 0;  // sum of target^2, the distance to a blank canvas
  std::size_t inkCount = 0;
  std::vector<DrawCommand> candidates;
  std::vector<kernels::PixelList> pixels;
  std::unordered_map<std::uint64_t, int> index;
  double temperature = 4.0;
  double stopThreshold = 24.0;

  Impl(const Bitmap& image, const SamplerConfig& cfg)
      : resolution(image.width),
        target(image.pixels),
        temperature(cfg.temperature),
        stopThreshold(cfg.stopThreshold) {
    if (image.width != image.height || image.width <= 0) {
      throw std::invalid_argument("derendering needs a square image");
    }
    ink.resize(target.size());
    for (std::size_t p = 0; p < target.size(); ++p) {
      ink[p] = target[p] > kInk;
      inkCount += ink[p];
      baseSquares += double(target[p]) * target[p];
    }
    buildCandidates(cfg.minInkCoverage);
  }

  bool pixelNearInk(double fx, double fy, int r) const {
    const int cx = int(fx);
    const int cy = int(fy);
    for (int py = cy - r; py <= cy + r; ++py) {
      for (int px = cx - r; px <= cx + r; ++px) {
        if (px < 0 || py < 0 || px >= resolution || py >= resolution) continue;
        if (ink[std::size_t(py) * resolution + px]) return true;
      }
    }
    return false;
  }

  // Cheap test before rasterizing a line: points along the segment must lie
  // within a dash gap of ink.
  bool segmentNearInk(int x1, int y1, int x2, int y2) const {
    const double cell = double(resolution) / kGridSize;
    const int r = std::max(1, int(std::lround(4 * cell / 16)));
    for (int k = 1; k < 8; ++k) {
      const double t = k / 8.0;
      if (!pixelNearInk((x1 + t * (x2 - x1) + 0.5) * cell, (y1 + t * (y2 - y1) + 0.5) * cell, r)) {
        return false;
      }
    }
    return true;
  }

  // Whether any ink lies within a few pixels of grid point (x, y).
  bool inkNear(int x, int y) const {
    const double cell = double(resolution) / kGridSize;
    return pixelNearInk((x + 0.5) * cell, (y + 0.5) * cell,
                        std::max(1, int(std::lround(2 * cell / 16))));
  }

  void consider(const DrawCommand& c, double minCoverage) {
    if (index.contains(c.key())) return;
    auto px = commandPixels(c, resolution);
    if (px.empty()) return;
    std::size_t on = 0;
    for (auto p : px) on += ink[p];
    if (double(on) < minCoverage * double(px.size())) return;
    index.emplace(c.key(), int(candidates.size()));
    candidates.push_back(c);
    pixels.push_back(std::move(px));
  }

  void buildCandidates(double minCoverage) {
    if (inkCount == 0) return;
    const int g = kGridSize;
    std::vector<std::pair<int, int>> inked;
    for (int y = 0; y < g; ++y) {
      for (int x = 0; x < g; ++x) {
        consider(DrawCommand::circle(x, y), minCoverage);
        if (inkNear(x, y)) inked.emplace_back(x, y);
      }
    }
    std::vector<std::uint8_t> near(std::size_t(g) * g, 0);
    for (auto [x, y] : inked) near[std::size_t(y) * g + x] = 1;
    auto isNear = [&](int x, int y) { return near[std::size_t(y) * g + x] != 0; };
    for (auto [x1, y1] : inked) {
      for (auto [x2, y2] : inked) {
        if (x2 > x1 && y2 > y1 && isNear(x1, y2) && isNear(x2, y1)) {
          consider(DrawCommand::rectangle(x1, y1, x2, y2), minCoverage);
        }
        if ((x1 == x2 && y1 == y2) || !segmentNearInk(x1, y1, x2, y2)) continue;
        for (int arrow = 0; arrow < 2; ++arrow) {
          if (auto c = DrawCommand::fromRaw(CommandKind::Line, {x1, y1, x2, y2}, arrow, false)) {
            consider(*c, minCoverage);
          }
        }
      }
    }
    // A dash may leave one endpoint bare.
    for (auto [x1, y1] : inked) {
      for (int y2 = 0; y2 < g; ++y2) {
        for (int x2 = 0; x2 < g; ++x2) {
          if ((x1 == x2 && y1 == y2) || !segmentNearInk(x1, y1, x2, y2)) continue;
          for (int arrow = 0; arrow < 2; ++arrow) {
            if (auto c = DrawCommand::fromRaw(CommandKind::Line, {x1, y1, x2, y2}, arrow, true)) {
              consider(*c, minCoverage);
            }
            if (auto c = DrawCommand::fromRaw(CommandKind::Line, {x2, y2, x1, y1}, arrow, true)) {
              consider(*c, minCoverage);
            }
          }
        }
      }
    }
  }

  std::vector<std::uint8_t> coverage(const Ids& ids) const {
    std::vector<std::uint8_t> cov(target.size(), 0);
    for (int id : ids) {
      for (auto p : pixels[std::size_t(id)]) cov[p] = 1;
    }
    return cov;
  }

  double distance(const std::vector<std::uint8_t>& cov) const {
    double s = baseSquares;
    for (std::size_t p = 0; p < cov.size(); ++p) {
      if (cov[p]) s += 1.0 - 2.0 * target[p];
    }
    return s / double(target.size());
  }

  double distance(const Ids& ids) const { return distance(coverage(ids)); }

  std::vector<std::int32_t> scores(const std::vector<std::uint8_t>& cov,
                                   std::size_t* residual) const {
    std::vector<std::int8_t> w(target.size());
    std::size_t left = 0;
    for (std::size_t p = 0; p < w.size(); ++p) {
      if (!ink[p]) {
        w[p] = -2;
      } else if (cov[p]) {
        w[p] = 0;
      } else {
        w[p] = 1;
        ++left;
      }
    }
    if (residual) *residual = left;
    std::vector<std::int32_t> out(candidates.size());
    kernels::scoreCandidatesParallel(w, pixels, out);
    return out;
  }

  Proposal propose(const std::vector<std::uint8_t>& cov, const std::vector<bool>& used,
                   ProposalKind kind) const {
    Proposal out;
    std::vector<double> logits;
    if (kind == ProposalKind::Uniform) {
      for (std::size_t k = 0; k < candidates.size(); ++k) {
        if (!used[k]) out.candidates.push_back(int(k));
      }
      logits.assign(out.candidates.size() + 1, 0.0);
    } else {
      std::size_t residual = 0;
      const auto sc = scores(cov, &residual);
      for (std::size_t k = 0; k < candidates.size(); ++k) {
        // Commands that explain no new ink never help the likelihood.
        if (used[k] || sc[k] <= 0) continue;
        out.candidates.push_back(int(k));
        logits.push_back(sc[k] / temperature);
      }
      logits.push_back((stopThreshold - double(residual)) / temperature);
    }
    normalizeInto(logits, out);
    return out;
  }

  Proposal propose(const Ids& ids, ProposalKind kind) const {
    std::vector<bool> used(candidates.size(), false);
    for (int id : ids) used[std::size_t(id)] = true;
    return propose(coverage(ids), used, kind);
  }

  Spec toSpec(const Ids& ids) const {
    Spec s;
    for (int id : ids) s.insert(candidates[std::size_t(id)]);
    return s;
  }
};

DerenderContext::DerenderContext(const Bitmap& target, const SamplerConfig& cfg)
    : impl_(std::make_unique<Impl>(target, cfg)) {}
DerenderContext::~DerenderContext() = default;
DerenderContext::DerenderContext(DerenderContext&&) noexcept = default;
DerenderContext& DerenderContext::operator=(DerenderContext&&) noexcept = default;

const std::vector<DrawCommand>& DerenderContext::candidates() const { return impl_->candidates; }

Proposal DerenderContext::propose(const Spec& partial, ProposalKind kind) const {
  const Bitmap drawn = render(partial, impl_->resolution);
  std::vector<std::uint8_t> cov(drawn.size());
  for (std::size_t p = 0; p < cov.size(); ++p) cov[p] = drawn.pixels[p] > kInk;
  std::vector<bool> used(impl_->candidates.size(), false);
  for (const auto& c : partial) {
    if (auto it = impl_->index.find(c.key()); it != impl_->index.end()) {
      used[std::size_t(it->second)] = true;
    }
  }
  return impl_->propose(cov, used, kind);
}

std::vector<std::int32_t> DerenderContext::residualScores(const Spec& partial) const {
  const Bitmap drawn = render(partial, impl_->resolution);
  std::vector<std::uint8_t> cov(drawn.size());
  for (std::size_t p = 0; p < cov.size(); ++p) cov[p] = drawn.pixels[p] > kInk;
  return impl_->scores(cov, nullptr);
}

double DerenderContext::logLikelihood(const Spec& s) const {
  const Bitmap drawn = render(s, impl_->resolution);
  Bitmap target(impl_->resolution, impl_->resolution);
  target.pixels = impl_->target;
  return -defaultGamma() * pixelDistance(target, drawn);
}

// ---------------------------------------------------------------------------
// Inference

namespace {

struct State {
  Ids ids;
  double logWeight = 0;
  double logProposal = 0;
  bool finished = false;
};

// Caches proposals and distances per partial spec.
class Memo {
 public:
  Memo(const DerenderContext::Impl& ctx, ProposalKind kind) : ctx_(ctx), kind_(kind) {}

  // Fills the cache for every distinct unfinished partial, in parallel.
  void prepare(const std::vector<State>& states) {
    std::vector<const Ids*> todo;
    for (const auto& s : states) {
      if (!s.finished && !proposals_.contains(s.ids) &&
          std::find_if(todo.begin(), todo.end(), [&](const Ids* t) { return *t == s.ids; }) ==
              todo.end()) {
        todo.push_back(&s.ids);
      }
    }
    std::vector<Proposal> out(todo.size());
    const auto n = static_cast<std::ptrdiff_t>(todo.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t k = 0; k < n; ++k) {
      out[std::size_t(k)] = ctx_.propose(*todo[std::size_t(k)], kind_);
    }
    for (std::size_t k = 0; k < todo.size(); ++k) proposals_.emplace(*todo[k], std::move(out[k]));
  }

  const Proposal& proposal(const Ids& ids) {
    auto it = proposals_.find(ids);
    if (it == proposals_.end()) it = proposals_.emplace(ids, ctx_.propose(ids, kind_)).first;
    return it->second;
  }

  double distance(const Ids& ids) {
    auto it = distances_.find(ids);
    if (it == distances_.end()) it = distances_.emplace(ids, ctx_.distance(ids)).first;
    return it->second;
  }

 private:
  const DerenderContext::Impl& ctx_;
  ProposalKind kind_;
  std::map<Ids, Proposal> proposals_;
  std::map<Ids, double> distances_;
};

Ids withId(const Ids& ids, int id) {
  Ids out = ids;
  out.insert(std::upper_bound(out.begin(), out.end(), id), id);
  return out;
}

// Ranks final states by -gamma * distance + log q, keeping the best score
// per distinct spec.
std::vector<RankedSpec> rank(const DerenderContext::Impl& ctx, Memo& memo,
                             const std::vector<State>& states, double gamma) {
  const bool anyFinished =
      std::any_of(states.begin(), states.end(), [](const State& s) { return s.finished; });
  std::map<Ids, RankedSpec> best;
  for (const auto& s : states) {
    if (anyFinished && !s.finished) continue;
    const double score = -gamma * memo.distance(s.ids) + s.logProposal;
    auto it = best.find(s.ids);
    if (it == best.end()) {
      best.emplace(s.ids, RankedSpec{ctx.toSpec(s.ids), score, s.finished});
    } else {
      it->second.score = std::max(it->second.score, score);
    }
  }
  std::vector<RankedSpec> out;
  for (auto& [ids, r] : best) out.push_back(std::move(r));
  std::stable_sort(out.begin(), out.end(),
                   [](const RankedSpec& a, const RankedSpec& b) { return a.score > b.score; });
  return out;
}

void validate(const SamplerConfig& cfg) {
  if (cfg.particleCount < 1) throw std::invalid_argument("particleCount must be >= 1");
  if (cfg.maxCommands < 0) throw std::invalid_argument("maxCommands must be >= 0");
  if (!(cfg.gamma > 0)) throw std::invalid_argument("gamma must be positive");
  if (!(cfg.temperature > 0)) throw std::invalid_argument("temperature must be positive");
}

std::vector<State> runStates(Memo& memo, const SamplerConfig& cfg) {
  const auto n = std::size_t(cfg.particleCount);
  std::vector<State> states(n);
  for (int step = 0; step < cfg.maxCommands; ++step) {
    if (std::all_of(states.begin(), states.end(), [](const State& s) { return s.finished; })) {
      break;
    }
    memo.prepare(states);
    // Sampling reads the cache only; each particle has its own stream.
    std::vector<int> picks(n, -2);
    const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
      const auto& s = states[std::size_t(i)];
      if (s.finished) continue;
      const Proposal& q = memo.proposal(s.ids);
      auto rng = streamRng(cfg.seed, std::uint64_t(step), std::uint64_t(i));
      double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
      int pick = -1;  // STOP
      for (std::size_t k = 0; k < q.probs.size(); ++k) {
        u -= q.probs[k];
        if (u < 0) {
          pick = int(k);
          break;
        }
      }
      picks[std::size_t(i)] = pick;
    }
    for (std::size_t i = 0; i < n; ++i) {
      auto& s = states[i];
      if (s.finished) continue;
      const Proposal& q = memo.proposal(s.ids);
      if (picks[i] < 0) {
        s.finished = true;
        s.logProposal += std::log(q.stopProb);
        continue;
      }
      const int id = q.candidates[std::size_t(picks[i])];
      s.logProposal += std::log(q.probs[std::size_t(picks[i])]);
      const double before = memo.distance(s.ids);
      s.ids = withId(s.ids, id);
      // Target is likelihood times proposal, so only the likelihood ratio
      // survives in the incremental weight.
      s.logWeight += -cfg.gamma * (memo.distance(s.ids) - before);
    }
    std::vector<double> logW(n);
    for (std::size_t i = 0; i < n; ++i) logW[i] = states[i].logWeight;
    const double z = logSumExp(logW);
    for (std::size_t i = 0; i < n; ++i) states[i].logWeight -= z;
    if (effectiveSampleSize(logW) < cfg.essThreshold * double(n)) {
      std::vector<double> w(n);
      for (std::size_t i = 0; i < n; ++i) w[i] = std::exp(states[i].logWeight);
      auto rng = streamRng(cfg.seed, std::uint64_t(step), ~std::uint64_t{0});
      const auto idx = systematicResample(w, std::uniform_real_distribution<double>(0, 1)(rng));
      std::vector<State> next;
      next.reserve(n);
      for (auto k : idx) {
        next.push_back(states[k]);
        next.back().logWeight = -std::log(double(n));
      }
      states = std::move(next);
    }
  }
  return states;
}

}  // namespace

std::vector<Particle> smcRun(const DerenderContext& context, const SamplerConfig& cfg) {
  validate(cfg);
  const auto& ctx = context.impl();
  Memo memo(ctx, cfg.proposal);
  std::vector<Particle> out;
  for (const auto& s : runStates(memo, cfg)) {
    out.push_back(Particle{ctx.toSpec(s.ids), s.logWeight, s.logProposal, s.finished});
  }
  return out;
}

std::vector<RankedSpec> smcInfer(const Bitmap& image, const SamplerConfig& cfg) {
  validate(cfg);
  const DerenderContext context(image, cfg);
  const auto& ctx = context.impl();
  Memo memo(ctx, cfg.proposal);
  return rank(ctx, memo, runStates(memo, cfg), cfg.gamma);
}

std::vector<RankedSpec> beamInfer(const Bitmap& image, int beamWidth, const SamplerConfig& cfg) {
  validate(cfg);
  if (beamWidth < 1) throw std::invalid_argument("beamWidth must be >= 1");
  const DerenderContext context(image, cfg);
  const auto& ctx = context.impl();
  Memo memo(ctx, cfg.proposal);
  std::vector<State> beam(1);
  std::vector<State> done;
  for (int step = 0; step <= cfg.maxCommands && !beam.empty(); ++step) {
    memo.prepare(beam);
    std::vector<State> children;
    for (const auto& s : beam) {
      const Proposal& q = memo.proposal(s.ids);
      State stop = s;
      stop.finished = true;
      stop.logProposal += std::log(q.stopProb);
      children.push_back(std::move(stop));
      if (step == cfg.maxCommands) continue;
      // Only the beamWidth best extensions of a state can survive.
      std::vector<std::size_t> order(q.probs.size());
      std::iota(order.begin(), order.end(), 0);
      const auto keep = std::min(order.size(), std::size_t(beamWidth));
      std::partial_sort(order.begin(), order.begin() + std::ptrdiff_t(keep), order.end(),
                        [&](std::size_t a, std::size_t b) {
                          return q.probs[a] != q.probs[b] ? q.probs[a] > q.probs[b] : a < b;
                        });
      for (std::size_t k = 0; k < keep; ++k) {
        State c = s;
        c.ids = withId(s.ids, q.candidates[order[k]]);
        c.logProposal += std::log(q.probs[order[k]]);
        children.push_back(std::move(c));
      }
    }
    std::stable_sort(children.begin(), children.end(), [](const State& a, const State& b) {
      return a.logProposal > b.logProposal;
    });
    // Drop duplicate partials reached in a different order.
    std::vector<State> unique;
    for (auto& c : children) {
      const bool dup = std::any_of(unique.begin(), unique.end(), [&](const State& u) {
        return u.finished == c.finished && u.ids == c.ids;
      });
      if (!dup) unique.push_back(std::move(c));
      if (unique.size() == std::size_t(beamWidth)) break;
    }
    beam.clear();
    for (auto& c : unique) (c.finished ? done : beam).push_back(std::move(c));
  }
  for (auto& s : beam) done.push_back(std::move(s));
  return rank(ctx, memo, done, cfg.gamma);
}

}  // namespace gsynth
