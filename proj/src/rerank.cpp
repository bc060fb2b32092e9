#include "gsynth/rerank.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <stdexcept>

#include "gsynth/scenegen.hpp"

namespace gsynth {

namespace {

void countNodes(const Program& p, int level, ProgramFeatures& f) {
  for (const auto& s : p.statements) {
    f[0] += 1;
    f[3] = std::max(f[3], double(level));
    if (const auto* loop = std::get_if<For>(&s.node)) {
      f[1] += 1;
      countNodes(loop->guarded, level + 1, f);
      countNodes(loop->body, level + 1, f);
    } else if (const auto* r = std::get_if<Reflect>(&s.node)) {
      f[2] += 1;
      countNodes(r->body, level + 1, f);
    }
  }
}

double dot(const ProgramFeatures& a, const ProgramFeatures& b) {
  double s = 0;
  for (int i = 0; i < kProgramFeatures; ++i) s += a[i] * b[i];
  return s;
}

// Prior feature vector per candidate: missing programs borrow the features
// of the present candidate with the smallest prior.
struct Scored {
  std::vector<ProgramFeatures> phi;
  std::vector<bool> imputed;
};

Scored priorFeatures(const CandidateSet& c, const PriorParams& prior) {
  Scored out;
  std::optional<ProgramFeatures> lowest;
  double lowestPrior = std::numeric_limits<double>::infinity();
  for (const auto& cand : c.candidates) {
    out.phi.push_back(cand.program ? programFeatures(*cand.program) : ProgramFeatures{});
    out.imputed.push_back(!cand.program);
    if (cand.program) {
      const double lp = dot(prior.beta, out.phi.back());
      if (lp < lowestPrior) {
        lowestPrior = lp;
        lowest = out.phi.back();
      }
    }
  }
  for (std::size_t i = 0; i < out.phi.size(); ++i) {
    // With no program anywhere the prior is a constant and drops out.
    if (out.imputed[i]) out.phi[i] = lowest.value_or(ProgramFeatures{});
  }
  return out;
}

double logSumExp(const std::vector<double>& xs) {
  const double m = *std::max_element(xs.begin(), xs.end());
  double s = 0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

std::optional<std::size_t> truthIndex(const TrainingPair& p) {
  for (std::size_t i = 0; i < p.candidates.candidates.size(); ++i) {
    if (p.candidates.candidates[i].spec == p.truth) return i;
  }
  return std::nullopt;
}

}  // namespace

ProgramFeatures programFeatures(const Program& p) {
  ProgramFeatures f{};
  countNodes(p, 1, f);
  const auto b = costBreakdown(p);
  f[4] = b.distinctCoefficients;
  f[5] = b.lengthTwoLoops;
  return f;
}

const std::array<const char*, kProgramFeatures>& programFeatureNames() {
  static const std::array<const char*, kProgramFeatures> names{
      "statements", "loops", "reflects", "maxDepth", "distinctCoefficients", "lengthTwoLoops"};
  return names;
}

Json toJson(const PriorParams& p) {
  Json j;
  j["schema"] = 1;
  j["features"] = programFeatureNames();
  j["beta"] = p.beta;
  return j;
}

PriorParams priorFromJson(const Json& j) {
  PriorParams p;
  const auto names = j.at("features").get<std::vector<std::string>>();
  const auto beta = j.at("beta").get<std::vector<double>>();
  if (names.size() != beta.size()) throw std::runtime_error("prior features and beta differ in length");
  const auto& known = programFeatureNames();
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto it = std::find(known.begin(), known.end(), names[i]);
    if (it == known.end()) throw std::runtime_error("unknown prior feature '" + names[i] + "'");
    p.beta[std::size_t(it - known.begin())] = beta[i];
  }
  return p;
}

Json toJson(const CandidateSet& c) {
  Json j;
  j["image"] = c.image;
  j["candidates"] = Json::array();
  for (const auto& cand : c.candidates) {
    Json k;
    k["spec"] = toJson(cand.spec);
    k["logInferenceScore"] = cand.logInferenceScore;
    k["logImageLikelihood"] = cand.logImageLikelihood;
    k["program"] = cand.program ? toJson(*cand.program) : Json(nullptr);
    j["candidates"].push_back(std::move(k));
  }
  return j;
}

CandidateSet candidateSetFromJson(const Json& j) {
  CandidateSet c;
  c.image = j.value("image", std::string{});
  for (const auto& k : j.at("candidates")) {
    Candidate cand;
    cand.spec = specFromJson(k.at("spec"));
    cand.logInferenceScore = k.at("logInferenceScore").get<double>();
    cand.logImageLikelihood = k.at("logImageLikelihood").get<double>();
    if (k.contains("program") && !k["program"].is_null()) cand.program = programFromJson(k["program"]);
    if (!std::isfinite(cand.logInferenceScore) || !std::isfinite(cand.logImageLikelihood)) {
      throw std::runtime_error("candidate scores must be finite");
    }
    c.candidates.push_back(std::move(cand));
  }
  return c;
}

std::vector<RankedCandidate> rerankSpecs(const CandidateSet& c, const PriorParams& prior) {
  if (c.candidates.empty()) throw std::invalid_argument("empty candidate set");
  const auto scored = priorFeatures(c, prior);
  std::vector<RankedCandidate> out;
  std::vector<std::string> keys;
  for (std::size_t i = 0; i < c.candidates.size(); ++i) {
    const auto& cand = c.candidates[i];
    RankedCandidate r;
    r.index = i;
    r.logPrior = dot(prior.beta, scored.phi[i]);
    r.logScore = cand.logImageLikelihood + cand.logInferenceScore + r.logPrior;
    r.priorImputed = scored.imputed[i];
    out.push_back(r);
    keys.push_back(toJson(cand.spec).dump());
  }
  std::sort(out.begin(), out.end(), [&](const RankedCandidate& a, const RankedCandidate& b) {
    if (a.logScore != b.logScore) return a.logScore > b.logScore;
    return keys[a.index] < keys[b.index];
  });
  return out;
}

Json toJson(const TrainingPair& p) {
  return Json{{"candidates", toJson(p.candidates)}, {"truth", toJson(p.truth)}};
}

TrainingPair trainingPairFromJson(const Json& j) {
  return {candidateSetFromJson(j.at("candidates")), specFromJson(j.at("truth"))};
}

std::vector<TrainingPair> readTrainingPairs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::vector<TrainingPair> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(trainingPairFromJson(Json::parse(line)));
  }
  return out;
}

void writeTrainingPairs(std::span<const TrainingPair> pairs, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& p : pairs) out << toJson(p).dump() << "\n";
}

double priorObjective(const PriorParams& p, std::span<const TrainingPair> pairs, double l2,
                      ProgramFeatures* gradient) {
  if (gradient) gradient->fill(0.0);
  double total = 0;
  std::size_t used = 0;
  std::vector<double> logits;
  for (const auto& pair : pairs) {
    const auto truth = truthIndex(pair);
    if (!truth) continue;
    ++used;
    const auto& cands = pair.candidates.candidates;
    const auto scored = priorFeatures(pair.candidates, p);
    logits.clear();
    for (std::size_t i = 0; i < cands.size(); ++i) {
      logits.push_back(cands[i].logImageLikelihood + cands[i].logInferenceScore +
                       dot(p.beta, scored.phi[i]));
    }
    const double z = logSumExp(logits);
    total += logits[*truth] - z;
    if (gradient) {
      for (std::size_t i = 0; i < cands.size(); ++i) {
        const double w = std::exp(logits[i] - z);
        for (int k = 0; k < kProgramFeatures; ++k) (*gradient)[k] -= w * scored.phi[i][k];
      }
      for (int k = 0; k < kProgramFeatures; ++k) (*gradient)[k] += scored.phi[*truth][k];
    }
  }
  if (used == 0) return 0;
  total /= double(used);
  if (gradient) {
    for (int k = 0; k < kProgramFeatures; ++k) {
      (*gradient)[k] = (*gradient)[k] / double(used) - 2 * l2 * p.beta[k];
    }
  }
  return total - l2 * dot(p.beta, p.beta);
}

FitResult fitPrior(std::span<const TrainingPair> all, const FitConfig& cfg) {
  FitResult out;
  std::vector<TrainingPair> pairs;
  for (const auto& p : all) {
    if (truthIndex(p)) {
      pairs.push_back(p);
    } else {
      ++out.dropped;
    }
  }
  if (pairs.empty()) throw std::invalid_argument("no training set contains its truth");
  ProgramFeatures g{};
  double f = priorObjective(out.prior, pairs, cfg.l2, &g);
  out.initialObjective = f;
  double step = cfg.initialStep;
  for (out.iterations = 0; out.iterations < cfg.maxIterations; ++out.iterations) {
    const double gg = dot(g, g);
    if (gg < cfg.tolerance * cfg.tolerance) break;
    bool moved = false;
    while (step > 1e-12) {
      PriorParams next = out.prior;
      for (int k = 0; k < kProgramFeatures; ++k) next.beta[k] += step * g[k];
      ProgramFeatures ng{};
      const double nf = priorObjective(next, pairs, cfg.l2, &ng);
      if (nf >= f + 1e-4 * step * gg) {
        moved = nf - f > cfg.tolerance;
        out.prior = next;
        f = nf;
        g = ng;
        step *= 1.5;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
  }
  out.objective = f;
  return out;
}

double topOneAccuracy(std::span<const TrainingPair> pairs, const PriorParams& prior) {
  if (pairs.empty()) return 0;
  int hits = 0;
  for (const auto& p : pairs) {
    const auto ranked = rerankSpecs(p.candidates, prior);
    hits += p.candidates.candidates[ranked.front().index].spec == p.truth;
  }
  return double(hits) / double(pairs.size());
}

namespace {

std::optional<Spec> perturb(const Spec& truth, std::mt19937_64& rng, int g) {
  auto uniform = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  std::vector<DrawCommand> cmds = truth.commands();
  switch (uniform(0, 2)) {
    case 0: {  // move one coordinate by one cell
      auto& c = cmds[std::size_t(uniform(0, int(cmds.size()) - 1))];
      auto raw = c.coords();
      raw[std::size_t(uniform(0, c.arity() - 1))] += uniform(0, 1) ? 1 : -1;
      const auto moved = DrawCommand::fromRaw(c.kind, raw, c.arrow, c.dashed);
      if (!moved || !moved->onGrid(g)) return std::nullopt;
      c = *moved;
      break;
    }
    case 1:  // drop one
      if (cmds.size() < 2) return std::nullopt;
      cmds.erase(cmds.begin() + uniform(0, int(cmds.size()) - 1));
      break;
    default: {  // add one
      SceneConfig sc;
      sc.maxObjects = 1;
      sc.structuredFraction = 0;
      sc.gridSize = g;
      sc.seed = rng();
      cmds.push_back(randomSpec(sc)[0]);
      break;
    }
  }
  Spec s(cmds);
  if (s == truth) return std::nullopt;
  return s;
}

}  // namespace

std::vector<TrainingPair> syntheticRerankCorpus(const RerankCorpusConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> noise(0.0, cfg.scoreNoise);
  SynthOptions so;
  so.limits.gridSize = cfg.gridSize;
  so.nodeBudget = cfg.nodeBudget;
  std::vector<TrainingPair> out;
  while (int(out.size()) < cfg.sets) {
    ProgramConfig pc;
    pc.gridSize = cfg.gridSize;
    pc.maxDepth = 2;
    pc.maxStatements = 4;
    pc.maxCommands = cfg.maxCommands;
    pc.primitiveWeight = 1;
    pc.loopWeight = 4;
    pc.reflectWeight = 1;
    pc.seed = rng();
    const Spec truth = execute(randomProgram(pc), ExecOptions{cfg.gridSize});
    std::vector<Spec> specs{truth};
    for (int attempt = 0; int(specs.size()) <= cfg.perturbations && attempt < 50; ++attempt) {
      auto s = perturb(truth, rng, cfg.gridSize);
      if (s && std::find(specs.begin(), specs.end(), *s) == specs.end()) specs.push_back(*s);
    }
    // Random order so that position carries no signal.
    std::shuffle(specs.begin(), specs.end(), rng);
    TrainingPair pair;
    pair.truth = truth;
    pair.candidates.image = "synthetic-" + std::to_string(out.size());
    for (const auto& s : specs) {
      Candidate c;
      c.spec = s;
      c.logInferenceScore = noise(rng);
      c.logImageLikelihood = noise(rng);
      const auto r = synthesize(s, cfg.sigma, so);
      if (r.status == SynthStatus::Solved) c.program = r.program;
      pair.candidates.candidates.push_back(std::move(c));
    }
    out.push_back(std::move(pair));
  }
  return out;
}

}  // namespace gsynth
