#include "gsynth/scenegen.hpp"

#include <algorithm>
#include <fstream>

namespace gsynth {

namespace {

constexpr int kRetries = 2000;

int uniform(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

bool coin(std::mt19937_64& rng, double p) {
  return std::bernoulli_distribution(p)(rng);
}

std::vector<CommandKind> allowedKinds(bool circles, bool rectangles, bool lines) {
  std::vector<CommandKind> out;
  if (circles) out.push_back(CommandKind::Circle);
  if (rectangles) out.push_back(CommandKind::Rectangle);
  if (lines) out.push_back(CommandKind::Line);
  if (out.empty()) throw std::invalid_argument("no command kinds allowed");
  return out;
}

DrawCommand randomCommand(std::mt19937_64& rng, CommandKind kind, int g) {
  while (true) {
    const int x1 = uniform(rng, 0, g - 1);
    const int y1 = uniform(rng, 0, g - 1);
    if (kind == CommandKind::Circle) return DrawCommand::circle(x1, y1);
    // Keep shapes small so scenes look like diagrams.
    const int x2 = std::clamp(x1 + uniform(rng, -4, 4), 0, g - 1);
    const int y2 = std::clamp(y1 + uniform(rng, -4, 4), 0, g - 1);
    if (kind == CommandKind::Line) {
      const bool arrow = coin(rng, 0.25);
      const bool dashed = coin(rng, 0.15);
      if (auto c = DrawCommand::fromRaw(kind, {x1, y1, x2, y2}, arrow, dashed)) {
        return *c;
      }
    } else if (auto c = DrawCommand::fromRaw(kind, {x1, y1, x2, y2}, false, false)) {
      return *c;
    }
  }
}

// ---------------------------------------------------------------------------
// Programs

class ProgramSampler {
 public:
  ProgramSampler(const ProgramConfig& cfg, std::mt19937_64& rng)
      : cfg_(cfg), rng_(rng), kinds_(allowedKinds(cfg.circles, cfg.rectangles, cfg.lines)) {}

  Program sample() {
    budget_ = cfg_.maxStatements;
    Program p;
    const int top = uniform(rng_, 1, std::max(1, cfg_.maxTopLevel));
    for (int k = 0; k < top && budget_ > 0; ++k) {
      p.statements.push_back(statement(0, cfg_.maxDepth, false));
    }
    return p;
  }

 private:
  const ProgramConfig& cfg_;
  std::mt19937_64& rng_;
  std::vector<CommandKind> kinds_;
  int budget_ = 0;
  std::vector<int> maxVal_;  // largest value of each loop variable, outermost first

  // A statement at `loops` enclosing loops with `depthLeft` levels available.
  // `mustUseInner` forces a primitive to reference the innermost variable.
  Statement statement(int loops, int depthLeft, bool mustUseInner) {
    --budget_;
    double wp = cfg_.primitiveWeight;
    double wl = depthLeft >= 2 && budget_ >= 1 ? cfg_.loopWeight : 0.0;
    double wr = depthLeft >= 2 && budget_ >= 1 && !mustUseInner ? cfg_.reflectWeight : 0.0;
    if (mustUseInner) wl = 0.0;
    std::discrete_distribution<int> pick({wp, wl, wr});
    switch (pick(rng_)) {
      case 1:
        return loop(loops, depthLeft);
      case 2:
        return reflect(loops, depthLeft);
      default:
        return Statement{primitive(loops, mustUseInner)};
    }
  }

  // Picks scale and offset so the coordinate stays on the grid over the
  // variable's range when possible.
  Expression coordinate(int anchor, bool useVar, int var) {
    if (!useVar) return Expression::constant(anchor);
    const int g = cfg_.gridSize;
    const int m = std::max(1, maxVal_[maxVal_.size() - 1 - static_cast<std::size_t>(var)]);
    const int reach = std::max(1, (g - 1) / m);
    const int limit = std::min(3, reach);
    int scale = 0;
    while (scale == 0) scale = uniform(rng_, -limit, limit);
    const int lo = std::max(0, -scale * m);
    const int hi = std::min(g - 1, g - 1 - scale * m);
    if (lo <= hi) anchor = uniform(rng_, lo, hi);
    return Expression::affine(scale, var, anchor);
  }

  Primitive primitive(int loops, bool mustUseInner) {
    const auto kind = kinds_[static_cast<std::size_t>(
        uniform(rng_, 0, static_cast<int>(kinds_.size()) - 1))];
    const DrawCommand c = randomCommand(rng_, kind, cfg_.gridSize);
    Primitive p;
    p.kind = c.kind;
    p.arrow = c.arrow;
    p.dashed = c.dashed;
    const auto raw = c.coords();
    // Each coordinate may follow a loop variable; at least one follows the
    // innermost one when required.
    const int forced = mustUseInner ? uniform(rng_, 0, c.arity() - 1) : -1;
    for (int k = 0; k < c.arity(); ++k) {
      const bool use = loops > 0 && (k == forced || coin(rng_, 0.35));
      const int var = k == forced ? 0 : uniform(rng_, 0, std::max(0, loops - 1));
      p.args[k] = coordinate(raw[k], use, var);
    }
    return p;
  }

  Statement loop(int loops, int depthLeft) {
    For f;
    if (loops > 0 && coin(rng_, 0.3)) {
      f.bound = Expression::affine(1, 0, uniform(rng_, 0, 1));
      maxVal_.push_back(maxVal_.back() + f.bound.offset - 1);
    } else {
      f.bound = Expression::constant(uniform(rng_, 2, 5));
      maxVal_.push_back(f.bound.offset - 1);
    }
    const int inner = uniform(rng_, 1, std::max(1, std::min(2, budget_)));
    for (int k = 0; k < inner && budget_ > 0; ++k) {
      Program& target = coin(rng_, 0.2) ? f.guarded : f.body;
      const bool first = f.guarded.empty() && f.body.empty();
      target.statements.push_back(statement(loops + 1, depthLeft - 1, first));
    }
    maxVal_.pop_back();
    return Statement{std::move(f)};
  }

  Statement reflect(int loops, int depthLeft) {
    Reflect r;
    const int g = cfg_.gridSize;
    r.axis = {coin(rng_, 0.5) ? Axis::Dim::X : Axis::Dim::Y,
              uniform(rng_, g - 1 - g / 4, g - 1 + g / 4)};
    r.body.statements.push_back(statement(loops, depthLeft - 1, false));
    return Statement{std::move(r)};
  }
};

int countStatements(const Program& p) {
  int n = 0;
  for (const auto& s : p.statements) {
    ++n;
    if (const auto* f = std::get_if<For>(&s.node)) {
      n += countStatements(f->guarded) + countStatements(f->body);
    } else if (const auto* r = std::get_if<Reflect>(&s.node)) {
      n += countStatements(r->body);
    }
  }
  return n;
}

}  // namespace

Program randomProgram(const ProgramConfig& cfg) {
  if (cfg.maxDepth < 1 || cfg.maxStatements < 1) {
    throw std::invalid_argument("program config needs depth and statements");
  }
  std::mt19937_64 rng(cfg.seed);
  DslLimits limits;
  limits.gridSize = cfg.gridSize;
  limits.maxDepth = cfg.maxDepth;
  for (int attempt = 0; attempt < 20 * kRetries; ++attempt) {
    Program p = ProgramSampler(cfg, rng).sample();
    if (countStatements(p) > cfg.maxStatements) continue;
    if (normalFormViolation(p, limits)) continue;
    const Spec s = execute(p, ExecOptions{cfg.gridSize});
    if (s.empty() || static_cast<int>(s.size()) > cfg.maxCommands) continue;
    return p;
  }
  throw GenerationError("no program met the configuration");
}

bool overlaps(const DrawCommand& a, const DrawCommand& b) {
  auto box = [](const DrawCommand& c) {
    if (c.kind == CommandKind::Circle) return std::array<int, 4>{c.x1, c.y1, c.x1, c.y1};
    return std::array<int, 4>{std::min(c.x1, c.x2), std::min(c.y1, c.y2),
                              std::max(c.x1, c.x2), std::max(c.y1, c.y2)};
  };
  const auto p = box(a);
  const auto q = box(b);
  return p[0] <= q[2] && q[0] <= p[2] && p[1] <= q[3] && q[1] <= p[3];
}

Spec randomSpec(const SceneConfig& cfg) {
  if (cfg.maxObjects < 1) throw std::invalid_argument("maxObjects must be >= 1");
  std::mt19937_64 rng(cfg.seed);
  const auto kinds = allowedKinds(cfg.circles, cfg.rectangles, cfg.lines);
  auto acceptable = [&](const Spec& s) {
    if (s.empty() || static_cast<int>(s.size()) > cfg.maxObjects) return false;
    if (cfg.allowOverlap) return true;
    for (std::size_t i = 0; i < s.size(); ++i) {
      for (std::size_t j = i + 1; j < s.size(); ++j) {
        if (overlaps(s[i], s[j])) return false;
      }
    }
    return true;
  };
  if (coin(rng, cfg.structuredFraction)) {
    ProgramConfig pc;
    pc.gridSize = cfg.gridSize;
    pc.maxCommands = cfg.maxObjects;
    pc.circles = cfg.circles;
    pc.rectangles = cfg.rectangles;
    pc.lines = cfg.lines;
    for (int attempt = 0; attempt < 50; ++attempt) {
      pc.seed = rng();
      try {
        Spec s = execute(randomProgram(pc), ExecOptions{cfg.gridSize});
        if (acceptable(s)) return s;
      } catch (const GenerationError&) {
      }
    }
  }
  const int target = uniform(rng, 1, cfg.maxObjects);
  for (int attempt = 0; attempt < kRetries; ++attempt) {
    Spec s;
    int misses = 0;
    while (static_cast<int>(s.size()) < target && misses < 200) {
      const auto kind = kinds[static_cast<std::size_t>(
          uniform(rng, 0, static_cast<int>(kinds.size()) - 1))];
      const DrawCommand c = randomCommand(rng, kind, cfg.gridSize);
      bool clash = s.contains(c);
      if (!cfg.allowOverlap) {
        for (const auto& d : s) clash = clash || overlaps(c, d);
      }
      if (clash) {
        ++misses;
        continue;
      }
      s.insert(c);
    }
    if (static_cast<int>(s.size()) == target) return s;
  }
  throw GenerationError("could not place " + std::to_string(target) +
                        " non-overlapping commands");
}

Json toJson(const CorpusRecord& r) {
  Json j;
  j["spec"] = toJson(r.spec);
  if (r.provenanceProgram) j["provenanceProgram"] = toJson(*r.provenanceProgram);
  j["seed"] = r.seed;
  return j;
}

CorpusRecord corpusRecordFromJson(const Json& j) {
  CorpusRecord r;
  r.spec = specFromJson(j.at("spec"));
  if (j.contains("provenanceProgram") && !j["provenanceProgram"].is_null()) {
    r.provenanceProgram = programFromJson(j["provenanceProgram"]);
  }
  r.seed = j.value("seed", std::uint64_t{0});
  return r;
}

void writeCorpus(const std::vector<CorpusRecord>& records, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& r : records) out << toJson(r).dump() << "\n";
}

std::vector<CorpusRecord> readCorpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::vector<CorpusRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(corpusRecordFromJson(Json::parse(line)));
  }
  return out;
}

}  // namespace gsynth
