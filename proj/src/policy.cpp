#include "gsynth/policy.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace gsynth {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool usesNode(const Program& p, bool wantLoop) {
  for (const auto& s : p.statements) {
    if (const auto* f = std::get_if<For>(&s.node)) {
      if (wantLoop || usesNode(f->guarded, wantLoop) || usesNode(f->body, wantLoop)) return true;
    } else if (const auto* r = std::get_if<Reflect>(&s.node)) {
      if (!wantLoop || usesNode(r->body, wantLoop)) return true;
    }
  }
  return false;
}

SubspaceVector softmax(const SubspaceVector& logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  SubspaceVector out{};
  double z = 0;
  for (int k = 0; k < kSubspaceCount; ++k) {
    out[k] = std::exp(logits[k] - m);
    z += out[k];
  }
  for (auto& v : out) v /= z;
  return out;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

SpecFeatures specFeatures(std::array<int, 3> counts, bool logCounts) {
  SpecFeatures phi{};
  for (int k = 0; k < 3; ++k) {
    phi[k] = logCounts ? std::log1p(double(counts[k])) : double(counts[k]);
  }
  phi[3] = 1.0;
  return phi;
}

SpecFeatures specFeatures(const Spec& s, bool logCounts) {
  return specFeatures(s.kindCounts(), logCounts);
}

double PolicyParams::squaredNorm() const {
  double s = 0;
  for (const auto& row : theta) {
    for (double v : row) s += v * v;
  }
  return s;
}

SubspaceVector policyDistribution(const PolicyParams& p, const SpecFeatures& phi) {
  SubspaceVector logits{};
  for (int k = 0; k < kSubspaceCount; ++k) {
    for (int i = 0; i < kSpecFeatures; ++i) logits[k] += p.theta[k][i] * phi[i];
  }
  return softmax(logits);
}

SubspaceVector policyDistribution(const PolicyParams& p, const Spec& s) {
  return policyDistribution(p, specFeatures(s, p.logCounts));
}

SubspaceVector uniformPolicy() {
  SubspaceVector u;
  u.fill(1.0 / kSubspaceCount);
  return u;
}

// ---------------------------------------------------------------------------
// Timing data

bool TimedSpec::hasBest() const {
  return std::any_of(records.begin(), records.end(), [](const TimingRecord& r) { return r.inBest; });
}

std::optional<Cost> TimedSpec::bestCost() const {
  std::optional<Cost> best;
  for (const auto& r : records) {
    if (r.inBest) best = r.solvedCost;
  }
  return best;
}

TimedSpec timeSpec(const Spec& spec, int specId, const TimingOptions& opt) {
  TimedSpec out;
  out.specId = specId;
  out.kindCounts = spec.kindCounts();
  SynthOptions so;
  so.limits = opt.limits;
  so.nodeBudget = opt.nodeBudget;
  std::optional<Cost> best;
  for (int k = 0; k < kSubspaceCount; ++k) {
    TimingRecord r;
    r.specId = specId;
    r.sigma = SearchSubspace::fromIndex(k);
    const auto res = synthesize(spec, r.sigma, so);
    r.nodes = res.nodesExplored;
    r.timedOut = res.status != SynthStatus::Solved && res.status != SynthStatus::Exhausted;
    r.t = double(r.timedOut ? opt.nodeBudget : res.nodesExplored) / opt.nodesPerUnit;
    r.solvedCost = res.cost;
    r.program = res.program;
    if (!r.timedOut && r.solvedCost && (!best || *r.solvedCost < *best)) best = r.solvedCost;
    out.records.push_back(std::move(r));
  }
  for (auto& r : out.records) r.inBest = !r.timedOut && best && r.solvedCost == best;
  return out;
}

Json toJson(const TimingRecord& r, std::array<int, 3> kindCounts) {
  Json j;
  j["specId"] = r.specId;
  j["sigma"] = r.sigma.name();
  j["sigmaIndex"] = r.sigma.index();
  j["t"] = r.t;
  j["nodes"] = r.nodes;
  j["solvedCostThirds"] = r.solvedCost ? Json(r.solvedCost->thirds()) : Json(nullptr);
  j["program"] = r.program ? toJson(*r.program) : Json(nullptr);
  j["inBest"] = r.inBest;
  j["timedOut"] = r.timedOut;
  j["kindCounts"] = kindCounts;
  return j;
}

std::vector<TimedSpec> timedSpecsFromRows(const std::vector<Json>& rows) {
  std::map<int, TimedSpec> bySpec;
  std::vector<int> order;
  for (const auto& j : rows) {
    TimingRecord r;
    r.specId = j.at("specId").get<int>();
    r.sigma = SearchSubspace::parse(j.at("sigma").get<std::string>());
    r.t = j.at("t").get<double>();
    r.nodes = j.value("nodes", std::uint64_t{0});
    if (j.contains("solvedCostThirds") && !j["solvedCostThirds"].is_null()) {
      r.solvedCost = Cost::fromThirds(j["solvedCostThirds"].get<std::int64_t>());
    }
    if (j.contains("program") && !j["program"].is_null()) r.program = programFromJson(j["program"]);
    r.inBest = j.at("inBest").get<bool>();
    r.timedOut = j.value("timedOut", false);
    auto [it, fresh] = bySpec.try_emplace(r.specId);
    if (fresh) {
      order.push_back(r.specId);
      it->second.specId = r.specId;
      it->second.kindCounts = j.at("kindCounts").get<std::array<int, 3>>();
      it->second.records.resize(kSubspaceCount);
    }
    it->second.records[std::size_t(r.sigma.index())] = r;
  }
  std::vector<TimedSpec> out;
  for (int id : order) {
    auto& s = bySpec[id];
    for (int k = 0; k < kSubspaceCount; ++k) {
      if (s.records[std::size_t(k)].sigma.index() != k ||
          s.records[std::size_t(k)].specId != id) {
        throw std::runtime_error("spec " + std::to_string(id) + " lacks subspace " +
                                 SearchSubspace::fromIndex(k).name());
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

void writeTimings(std::span<const TimedSpec> corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& s : corpus) {
    for (const auto& r : s.records) out << toJson(r, s.kindCounts).dump() << "\n";
  }
}

std::vector<TimedSpec> readTimings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::vector<Json> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    rows.push_back(Json::parse(line));
  }
  return timedSpecsFromRows(rows);
}

// ---------------------------------------------------------------------------
// Loss and training

double softMinimum(std::span<const double> x, double beta) {
  if (x.empty()) throw std::invalid_argument("softMinimum of nothing");
  const double lo = *std::min_element(x.begin(), x.end());
  if (std::isinf(beta)) return lo;
  double z = 0;
  double s = 0;
  for (double v : x) {
    const double w = std::exp(-beta * (v - lo));
    z += w;
    s += w * v;
  }
  return s / z;
}

std::vector<double> softMinimumGradient(std::span<const double> x, double beta) {
  std::vector<double> g(x.size(), 0.0);
  if (x.empty()) return g;
  const auto argmin = std::min_element(x.begin(), x.end()) - x.begin();
  if (std::isinf(beta)) {
    g[std::size_t(argmin)] = 1.0;
    return g;
  }
  const double lo = x[std::size_t(argmin)];
  double z = 0;
  for (std::size_t n = 0; n < x.size(); ++n) {
    g[n] = std::exp(-beta * (x[n] - lo));
    z += g[n];
  }
  double s = 0;
  for (std::size_t n = 0; n < x.size(); ++n) {
    g[n] /= z;
    s += g[n] * x[n];
  }
  for (std::size_t n = 0; n < x.size(); ++n) g[n] *= 1.0 - beta * (x[n] - s);
  return g;
}

LossValue policyLoss(const PolicyParams& p, std::span<const TimedSpec> corpus, double beta,
                     double lambda) {
  if (corpus.empty()) throw std::invalid_argument("empty corpus");
  LossValue out;
  const double scale = 1.0 / double(corpus.size());
  std::vector<int> best;
  std::vector<double> x;
  for (const auto& s : corpus) {
    const auto phi = specFeatures(s.kindCounts, p.logCounts);
    const auto pi = policyDistribution(p, phi);
    best.clear();
    x.clear();
    for (int k = 0; k < kSubspaceCount; ++k) {
      if (s.records[std::size_t(k)].inBest) {
        best.push_back(k);
        x.push_back(s.records[std::size_t(k)].t / pi[k]);
      }
    }
    if (best.empty()) {
      throw std::invalid_argument("spec " + std::to_string(s.specId) + " has no Best subspace");
    }
    out.value += scale * softMinimum(x, beta);
    const auto g = softMinimumGradient(x, beta);
    // x_n = t_n / pi_n and d(1/pi_n)/d logit_k = -(delta_nk - pi_k) / pi_n.
    double mixed = 0;
    for (std::size_t n = 0; n < best.size(); ++n) mixed += g[n] * x[n];
    SubspaceVector dLogit{};
    for (int k = 0; k < kSubspaceCount; ++k) dLogit[k] = pi[k] * mixed;
    for (std::size_t n = 0; n < best.size(); ++n) dLogit[best[n]] -= g[n] * x[n];
    for (int k = 0; k < kSubspaceCount; ++k) {
      for (int i = 0; i < kSpecFeatures; ++i) out.gradient[k][i] += scale * dLogit[k] * phi[i];
    }
  }
  out.value += lambda * p.squaredNorm();
  for (int k = 0; k < kSubspaceCount; ++k) {
    for (int i = 0; i < kSpecFeatures; ++i) out.gradient[k][i] += 2 * lambda * p.theta[k][i];
  }
  return out;
}

namespace {

// Adam over a flat parameter view.
class Adam {
 public:
  Adam(std::size_t n, const TrainConfig& cfg) : cfg_(cfg), m_(n, 0.0), v_(n, 0.0) {}

  void step(std::span<double> params, std::span<const double> grad) {
    ++t_;
    const double b1 = cfg_.momentDecay1;
    const double b2 = cfg_.momentDecay2;
    const double c1 = 1 - std::pow(b1, t_);
    const double c2 = 1 - std::pow(b2, t_);
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = b1 * m_[i] + (1 - b1) * grad[i];
      v_[i] = b2 * v_[i] + (1 - b2) * grad[i] * grad[i];
      params[i] -= cfg_.learningRate * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + cfg_.epsilon);
    }
  }

 private:
  const TrainConfig& cfg_;
  std::vector<double> m_;
  std::vector<double> v_;
  int t_ = 0;
};

template <std::size_t R>
std::span<double> flat(std::array<SpecFeatures, R>& a) {
  return {a[0].data(), R * kSpecFeatures};
}

template <std::size_t R>
std::span<const double> flat(const std::array<SpecFeatures, R>& a) {
  return {a[0].data(), R * kSpecFeatures};
}

double betaAt(const TrainConfig& cfg, int step) {
  if (cfg.steps <= 1) return cfg.betaStart;
  return cfg.betaStart + (cfg.betaEnd - cfg.betaStart) * step / double(cfg.steps - 1);
}

}  // namespace

PolicyParams trainPolicy(std::span<const TimedSpec> corpus, const TrainConfig& cfg,
                         TrainLog* log) {
  if (corpus.empty()) throw std::invalid_argument("empty training corpus");
  if (cfg.lambda < 0 || cfg.betaStart > cfg.betaEnd) {
    throw std::invalid_argument("invalid training configuration");
  }
  PolicyParams p;
  p.logCounts = cfg.logCounts;
  if (log) log->initialHardLoss = policyLoss(p, corpus, kInf, cfg.lambda).value;
  Adam adam(kSubspaceCount * kSpecFeatures, cfg);
  for (int step = 0; step < cfg.steps; ++step) {
    const auto l = policyLoss(p, corpus, betaAt(cfg, step), cfg.lambda);
    if (!std::isfinite(l.value)) {
      std::ostringstream os;
      os << "policy training diverged at step " << step << " (beta " << betaAt(cfg, step)
         << ", |theta|^2 " << p.squaredNorm() << ")";
      throw TrainingDiverged(os.str());
    }
    if (log) log->loss.push_back(l.value);
    adam.step(flat(p.theta), flat(l.gradient));
  }
  if (log) log->finalHardLoss = policyLoss(p, corpus, kInf, cfg.lambda).value;
  return p;
}

double expectedSolveTime(const SubspaceVector& pi, const TimedSpec& s) {
  double best = kInf;
  for (int k = 0; k < kSubspaceCount; ++k) {
    const auto& r = s.records[std::size_t(k)];
    if (r.inBest) best = std::min(best, r.t / pi[k]);
  }
  return best;
}

int oracleChoice(const TimedSpec& s) {
  int pick = -1;
  for (int k = 0; k < kSubspaceCount; ++k) {
    const auto& r = s.records[std::size_t(k)];
    if (r.inBest && (pick < 0 || r.t < s.records[std::size_t(pick)].t)) pick = k;
  }
  return pick;
}

double oracleTime(const TimedSpec& s) {
  const int k = oracleChoice(s);
  return k < 0 ? kInf : s.records[std::size_t(k)].t;
}

Json toJson(const PolicyParams& p) {
  Json j;
  j["features"] = {"circles", "rectangles", "lines", "bias"};
  j["logCounts"] = p.logCounts;
  Json names = Json::array();
  for (int k = 0; k < kSubspaceCount; ++k) names.push_back(SearchSubspace::fromIndex(k).name());
  j["subspaces"] = names;
  j["theta"] = p.theta;
  return j;
}

PolicyParams policyFromJson(const Json& j) {
  PolicyParams p;
  p.logCounts = j.value("logCounts", false);
  const auto& names = j.at("subspaces");
  const auto& theta = j.at("theta");
  if (names.size() != kSubspaceCount || theta.size() != kSubspaceCount) {
    throw std::runtime_error("policy must have 24 rows");
  }
  // Rows are keyed by name so files survive a change of index order.
  for (int r = 0; r < kSubspaceCount; ++r) {
    const int k = SearchSubspace::parse(names[std::size_t(r)].get<std::string>()).index();
    p.theta[std::size_t(k)] = theta[std::size_t(r)].get<SpecFeatures>();
  }
  return p;
}

// ---------------------------------------------------------------------------
// Component-prediction baseline

const char* componentName(Component c) {
  switch (c) {
    case Component::Loop: return "loop";
    case Component::Reflect: return "reflect";
    case Component::DepthAtLeast2: return "depth>=2";
    case Component::Depth3: return "depth3";
    case Component::Incremental: return "incremental";
  }
  return "?";
}

std::array<double, kComponentCount> DeepCoderModel::predict(const SpecFeatures& phi) const {
  std::array<double, kComponentCount> out{};
  for (int c = 0; c < kComponentCount; ++c) {
    double z = 0;
    for (int i = 0; i < kSpecFeatures; ++i) z += weights[c][i] * phi[i];
    out[c] = std::clamp(sigmoid(z), kComponentEpsilon, 1 - kComponentEpsilon);
  }
  return out;
}

std::vector<ComponentLabels> bestLabels(const TimedSpec& s) {
  std::vector<ComponentLabels> out;
  for (const auto& r : s.records) {
    if (!r.inBest || !r.program) continue;
    const int d = depth(*r.program);
    out.push_back({usesNode(*r.program, true), usesNode(*r.program, false), d >= 2, d >= 3,
                   r.sigma.incremental});
  }
  return out;
}

LabeledSpec labeled(const TimedSpec& s, bool logCounts) {
  return {specFeatures(s.kindCounts, logCounts), bestLabels(s)};
}

namespace {

double labelLogLikelihood(const std::array<double, kComponentCount>& p, const ComponentLabels& y) {
  double s = 0;
  for (int c = 0; c < kComponentCount; ++c) s += std::log(y[c] ? p[c] : 1 - p[c]);
  return s;
}

}  // namespace

double deepCoderObjective(const DeepCoderModel& m, std::span<const LabeledSpec> data) {
  if (data.empty()) return 0;
  double total = 0;
  for (const auto& d : data) {
    const auto p = m.predict(d.phi);
    double worst = kInf;
    for (const auto& y : d.best) worst = std::min(worst, labelLogLikelihood(p, y));
    total += d.best.empty() ? 0.0 : worst;
  }
  return total / double(data.size());
}

DeepCoderModel trainDeepCoder(std::span<const LabeledSpec> data, const TrainConfig& cfg) {
  DeepCoderModel m;
  m.logCounts = cfg.logCounts;
  if (data.empty()) return m;
  Adam adam(kComponentCount * kSpecFeatures, cfg);
  std::array<SpecFeatures, kComponentCount> grad{};
  for (int step = 0; step < cfg.steps; ++step) {
    grad = {};
    for (const auto& d : data) {
      if (d.best.empty()) continue;
      const auto p = m.predict(d.phi);
      // Subgradient through the inner minimum.
      const ComponentLabels* worst = &d.best.front();
      double lo = kInf;
      for (const auto& y : d.best) {
        const double l = labelLogLikelihood(p, y);
        if (l < lo) {
          lo = l;
          worst = &y;
        }
      }
      for (int c = 0; c < kComponentCount; ++c) {
        // Clamped predictions have zero gradient.
        if (p[c] <= kComponentEpsilon || p[c] >= 1 - kComponentEpsilon) continue;
        const double r = ((*worst)[c] ? 1.0 : 0.0) - p[c];
        for (int i = 0; i < kSpecFeatures; ++i) grad[c][i] -= r * d.phi[i] / double(data.size());
      }
    }
    adam.step(flat(m.weights), flat(grad));
  }
  return m;
}

SearchSubspace subspaceFor(const std::array<bool, kComponentCount>& active) {
  SearchSubspace s;
  s.loops = active[int(Component::Loop)];
  s.reflects = active[int(Component::Reflect)];
  s.maxDepth = active[int(Component::Depth3)] ? 3 : active[int(Component::DepthAtLeast2)] ? 2 : 1;
  s.incremental = active[int(Component::Incremental)];
  return s;
}

std::vector<SearchSubspace> sortAndAddOrder(const std::array<double, kComponentCount>& probs) {
  // Components that widen the space are added in order of probability; the
  // incremental flag narrows it, so it is kept while widening and dropped
  // last.
  std::array<bool, kComponentCount> active{};
  std::vector<int> pending;
  for (int c = 0; c < kComponentCount; ++c) {
    if (probs[c] >= 0.5) {
      active[c] = true;
    } else if (c != int(Component::Incremental)) {
      pending.push_back(c);
    }
  }
  std::stable_sort(pending.begin(), pending.end(),
                   [&](int a, int b) { return probs[a] > probs[b]; });
  std::vector<SearchSubspace> order{subspaceFor(active)};
  auto push = [&] {
    const auto s = subspaceFor(active);
    if (!(s == order.back())) order.push_back(s);
  };
  for (int c : pending) {
    active[c] = true;
    push();
  }
  active[int(Component::Incremental)] = false;
  push();
  return order;
}

double sortAndAddTime(const std::array<double, kComponentCount>& probs, const TimedSpec& s,
                      const SortAndAddOptions& opt) {
  const auto order = sortAndAddOrder(probs);
  double total = 0;
  double budget = opt.initialBudget;
  for (std::size_t step = 0; total < opt.timeout; ++step) {
    const auto& r = s.records[std::size_t(order[std::min(step, order.size() - 1)].index())];
    const bool last = step + 1 >= order.size();
    if (!r.timedOut && r.t <= budget) {
      total += r.t;
      if (r.inBest) return std::min(total, opt.timeout);
      if (last) return opt.timeout;  // the widest subspace finished without the minimum
    } else {
      total += budget;
      // A run that timed out while collecting timings never finishes.
      if (last && r.timedOut && budget >= r.t) return opt.timeout;
    }
    budget *= 2;
  }
  return opt.timeout;
}

// ---------------------------------------------------------------------------
// Scheduler

std::uint64_t SimulatedTask::run(std::uint64_t nodes) {
  const std::uint64_t used = std::min(nodes, completion_ - std::min(completion_, consumed_));
  consumed_ += used;
  return used;
}

std::optional<Cost> SimulatedTask::bestCost() const {
  return finished() ? cost_ : std::nullopt;
}

Cost SimulatedTask::exhaustedBelow() const {
  if (!finished()) return Cost{};
  return cost_ ? *cost_ : Cost::fromThirds(std::numeric_limits<std::int64_t>::max() / 4);
}

ScheduleOutcome timeShare(std::span<SchedulableTask* const> tasks, std::span<const double> pi,
                          const SchedulerOptions& opt) {
  if (tasks.size() != pi.size()) throw std::invalid_argument("one weight per task");
  for (double w : pi) {
    if (!(w > 0)) throw std::invalid_argument("scheduler weights must be positive");
  }
  const std::size_t n = tasks.size();
  ScheduleOutcome out;
  auto& tr = out.trace;
  tr.consumed.assign(n, 0);
  tr.slices.assign(n, 0);
  std::vector<double> entitled(n, 0.0);
  std::vector<std::uint64_t> granted(n, 0);

  auto certified = [&] {
    if (!out.bestCost) return false;
    for (auto* t : tasks) {
      if (!t->finished() && t->exhaustedBelow() < *out.bestCost) return false;
    }
    return true;
  };
  auto note = [&](std::size_t j) {
    const auto c = tasks[j]->bestCost();
    if (c && (!out.bestCost || *c < *out.bestCost)) {
      out.bestCost = c;
      out.bestTask = int(j);
      tr.improvements.push_back({tr.elapsed, int(j), *c});
    }
    if (!out.certified && certified()) {
      out.certified = true;
      tr.certifiedAt = tr.elapsed;
    }
  };
  for (std::size_t j = 0; j < n; ++j) note(j);

  const auto start = std::chrono::steady_clock::now();
  auto outOfTime = [&] {
    if (!opt.timeLimitSeconds) return false;
    const std::chrono::duration<double> d = std::chrono::steady_clock::now() - start;
    return tr.timedOut = d.count() > *opt.timeLimitSeconds;
  };
  while (tr.elapsed < opt.nodeBudget && !(out.certified && opt.stopWhenCertified) && !outOfTime()) {
    double z = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (!tasks[j]->finished()) z += pi[j];
    }
    if (z == 0) break;
    for (std::size_t j = 0; j < n && tr.elapsed < opt.nodeBudget; ++j) {
      if (tasks[j]->finished()) continue;
      entitled[j] += double(opt.quantum) * pi[j] / z;
      const auto target = std::uint64_t(std::floor(entitled[j]));
      if (target <= granted[j]) continue;
      const std::uint64_t grant = std::min(target - granted[j], opt.nodeBudget - tr.elapsed);
      granted[j] = target;
      const std::uint64_t used = tasks[j]->run(grant);
      tr.consumed[j] += used;
      tr.elapsed += used;
      ++tr.slices[j];
      note(j);
      if ((out.certified && opt.stopWhenCertified) || outOfTime()) break;
    }
  }
  return out;
}

namespace {

class SynthesisSlot : public SchedulableTask {
 public:
  SynthesisSlot(const Spec& spec, SearchSubspace sigma, const DslLimits& limits)
      : task_(spec, sigma, limits) {}
  std::uint64_t run(std::uint64_t nodes) override { return task_.run(nodes); }
  bool finished() const override { return task_.finished(); }
  std::optional<Cost> bestCost() const override { return task_.bestCost(); }
  Cost exhaustedBelow() const override { return task_.exhaustedBelow(); }
  const SynthesisTask& task() const { return task_; }

 private:
  SynthesisTask task_;
};

}  // namespace

BiasOptimalResult biasOptimalSearch(const Spec& spec, const SubspaceVector& pi,
                                    const SchedulerOptions& opt, const DslLimits& limits) {
  std::vector<std::unique_ptr<SynthesisSlot>> slots;
  std::vector<SchedulableTask*> view;
  for (int k = 0; k < kSubspaceCount; ++k) {
    slots.push_back(std::make_unique<SynthesisSlot>(spec, SearchSubspace::fromIndex(k), limits));
    view.push_back(slots.back().get());
  }
  auto outcome = timeShare(view, pi, opt);
  BiasOptimalResult out;
  out.certified = outcome.certified;
  out.trace = std::move(outcome.trace);
  if (outcome.bestTask) {
    const auto& t = slots[std::size_t(*outcome.bestTask)]->task();
    out.result = t.result();
    out.sigma = t.subspace();
  } else {
    out.result.status = out.trace.timedOut                 ? SynthStatus::Timeout
                        : out.trace.elapsed >= opt.nodeBudget ? SynthStatus::BudgetExpired
                                                              : SynthStatus::Exhausted;
  }
  if (outcome.bestTask && !out.certified) {
    out.result.status = out.trace.timedOut ? SynthStatus::Timeout : SynthStatus::BudgetExpired;
  }
  out.result.nodesExplored = out.trace.elapsed;
  out.result.minimal = out.certified;
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation

PolicyComparison crossValidate(std::span<const TimedSpec> corpus, int folds,
                               const TrainConfig& cfg, double timeout) {
  if (folds < 2 || std::size_t(folds) > corpus.size()) {
    throw std::invalid_argument("need 2 <= folds <= corpus size");
  }
  const std::size_t n = corpus.size();
  PolicyComparison out;
  out.learned.resize(n);
  out.uniform.resize(n);
  out.oracle.resize(n);
  out.fullSpace.resize(n);
  out.deepCoder.resize(n);
  const int full = SearchSubspace::full().index();
  auto cap = [&](double t) { return std::min(t, timeout); };
  for (int f = 0; f < folds; ++f) {
    const std::size_t lo = n * std::size_t(f) / std::size_t(folds);
    const std::size_t hi = n * std::size_t(f + 1) / std::size_t(folds);
    std::vector<TimedSpec> train;
    std::vector<LabeledSpec> dcTrain;
    for (std::size_t i = 0; i < n; ++i) {
      if ((i >= lo && i < hi) || !corpus[i].hasBest()) continue;
      train.push_back(corpus[i]);
      dcTrain.push_back(labeled(corpus[i], cfg.logCounts));
    }
    if (train.empty()) throw std::invalid_argument("a training fold has no solvable spec");
    const auto theta = trainPolicy(train, cfg);
    const auto dc = trainDeepCoder(dcTrain, cfg);
    SortAndAddOptions sa;
    sa.timeout = timeout;
    for (std::size_t i = lo; i < hi; ++i) {
      const auto& s = corpus[i];
      const auto phi = specFeatures(s.kindCounts, cfg.logCounts);
      out.learned[i] = cap(expectedSolveTime(policyDistribution(theta, phi), s));
      out.uniform[i] = cap(expectedSolveTime(uniformPolicy(), s));
      out.oracle[i] = cap(oracleTime(s));
      const auto& r = s.records[std::size_t(full)];
      out.fullSpace[i] = r.inBest ? cap(r.t) : timeout;
      out.deepCoder[i] = sortAndAddTime(dc.predict(phi), s, sa);
    }
  }
  return out;
}

std::vector<MethodSummary> summarize(const PolicyComparison& c, double timeout) {
  auto one = [&](const std::string& name, std::vector<double> v) {
    MethodSummary m;
    m.name = name;
    if (v.empty()) return m;
    std::sort(v.begin(), v.end());
    const std::size_t k = v.size();
    m.median = k % 2 ? v[k / 2] : 0.5 * (v[k / 2 - 1] + v[k / 2]);
    m.mean = std::accumulate(v.begin(), v.end(), 0.0) / double(k);
    m.timeoutFraction =
        double(std::count_if(v.begin(), v.end(), [&](double t) { return t >= timeout; })) /
        double(k);
    return m;
  };
  return {one("full-space", c.fullSpace), one("component-prediction", c.deepCoder),
          one("oracle", c.oracle), one("uniform", c.uniform), one("learned", c.learned)};
}

}  // namespace gsynth
