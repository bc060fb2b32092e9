// Command-line front end: corpus generation, rendering, derendering,
// synthesis, policy training and the applications.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "gsynth/apps.hpp"
#include "gsynth/dsl.hpp"
#include "gsynth/json_io.hpp"
#include "gsynth/policy.hpp"
#include "gsynth/raster.hpp"
#include "gsynth/rerank.hpp"
#include "gsynth/scenegen.hpp"
#include "gsynth/smc.hpp"
#include "gsynth/synth.hpp"
#include "gsynth/syntax.hpp"

using namespace gsynth;

namespace {

Json readJson(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  return Json::parse(in);
}

void writeText(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

bool endsWith(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// A program given inline, as a JSON file, or as a source file.
Program loadProgram(const std::string& source, const std::string& file) {
  if (!source.empty()) return parseProgram(source);
  if (file.empty()) throw std::runtime_error("give --program or --program-file");
  if (endsWith(file, ".json")) return programFromJson(readJson(file));
  return parseProgram(slurp(file));
}

// Accepts a bare spec or derender output, which is ranked, so the first result is taken.
Spec loadSpec(const std::string& path) {
  const Json j = readJson(path);
  if (j.is_object() && j.contains("spec")) return specFromJson(j.at("spec"));
  if (j.is_array() && !j.empty() && j.front().is_object() && j.front().contains("spec")) {
    return specFromJson(j.front().at("spec"));
  }
  return specFromJson(j);
}

// Picks the output format from the extension.
void writeDrawing(const Spec& s, const std::string& path, int resolution, const Viewport& view) {
  if (endsWith(path, ".tex")) {
    writeText(path, emitTikz(s, view.cells > kGridSize ? double(kGridSize) / view.cells : 1.0));
  } else if (endsWith(path, ".svg")) {
    writeText(path, emitSvg(s, resolution));
  } else if (endsWith(path, ".pgm")) {
    writePgm(render(s, resolution, view), path);
  } else {
    writePng(render(s, resolution, view), path);
  }
}

double parseSeconds(std::string text) {
  if (!text.empty() && text.back() == 's') text.pop_back();
  double scale = 1;
  if (!text.empty() && text.back() == 'm') {
    text.pop_back();
    scale = 60;
  }
  return std::stod(text) * scale;
}

std::string oneLine(const Spec& s) {
  std::string out;
  for (const auto& c : s) out += (out.empty() ? "" : " ") + formatCommand(c);
  return out.empty() ? "(empty)" : out;
}

std::string costText(const std::optional<Cost>& c) { return c ? c->str() : "-"; }

// Histogram of solve times on a log scale, one bar per decade bucket.
std::string histogramSvg(const std::vector<std::pair<std::string, std::vector<double>>>& series,
                         const std::vector<double>& edges) {
  const int w = 640;
  const int h = 80 * int(series.size()) + 40;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
  const double barW = double(w - 160) / double(edges.size());
  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto& [name, values] = series[s];
    const int top = 20 + 80 * int(s);
    os << "<text x=\"4\" y=\"" << top + 40 << "\" font-size=\"12\">" << name << "</text>\n";
    std::vector<int> counts(edges.size(), 0);
    for (double v : values) {
      const auto b = std::size_t(std::upper_bound(edges.begin(), edges.end(), v) - edges.begin());
      ++counts[std::min(b, edges.size() - 1)];
    }
    const int peak = std::max(1, *std::max_element(counts.begin(), counts.end()));
    for (std::size_t b = 0; b < counts.size(); ++b) {
      const double bh = 60.0 * counts[b] / peak;
      os << "<rect x=\"" << 150 + barW * double(b) << "\" y=\"" << top + 60 - bh << "\" width=\""
         << barW - 2 << "\" height=\"" << bh << "\" fill=\"steelblue\"/>\n";
    }
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Program synthesis for graphics specs"};
  app.require_subcommand(1);

  // generate ------------------------------------------------------------
  auto* gen = app.add_subcommand("generate", "random scenes, programs or rerank training pairs");
  std::string genKind = "scenes", genOut;
  int genCount = 100, genMaxObjects = 12;
  double genStructured = 0.5;
  std::uint64_t genSeed = 0;
  bool genNoOverlap = false;
  gen->add_option("--kind", genKind, "scenes | programs | rerank")->check(CLI::IsMember({"scenes", "programs", "rerank"}));
  gen->add_option("--count", genCount);
  gen->add_option("--max-objects", genMaxObjects);
  gen->add_option("--structured", genStructured, "share of scenes drawn from programs");
  gen->add_flag("--no-overlap", genNoOverlap);
  gen->add_option("--seed", genSeed);
  gen->add_option("--out", genOut)->required();

  // render --------------------------------------------------------------
  auto* ren = app.add_subcommand("render", "draw a spec or program to png/pgm/svg/tex");
  std::string renSpec, renProgram, renProgramFile, renOut;
  int renResolution = kDefaultResolution;
  ren->add_option("--spec", renSpec);
  ren->add_option("--program", renProgram);
  ren->add_option("--program-file", renProgramFile);
  ren->add_option("--resolution", renResolution);
  ren->add_option("--out", renOut)->required();

  // derender ------------------------------------------------------------
  auto* der = app.add_subcommand("derender", "infer specs from an image");
  std::string derImage, derProposal = "residual", derOut;
  int derParticles = 100, derTop = 5, derBeam = 0, derMaxCommands = 12;
  std::uint64_t derSeed = 0;
  der->add_option("--image", derImage)->required();
  der->add_option("--particles", derParticles);
  der->add_option("--proposal", derProposal)->check(CLI::IsMember({"residual", "uniform"}));
  der->add_option("--beam", derBeam, "beam width; 0 runs SMC");
  der->add_option("--max-commands", derMaxCommands);
  der->add_option("--seed", derSeed);
  der->add_option("--top", derTop);
  der->add_option("--out", derOut);

  // synthesize ----------------------------------------------------------
  auto* syn = app.add_subcommand("synthesize", "minimum-cost program in one subspace");
  std::string synSpec, synSigma = "loops,reflect,depth3", synOut;
  std::uint64_t synNodes = UINT64_MAX;
  double synSeconds = 0;
  syn->add_option("--spec", synSpec)->required();
  syn->add_option("--sigma", synSigma, "e.g. loops,reflect,depth3 or incremental,depth1");
  syn->add_option("--nodes", synNodes, "search node budget");
  syn->add_option("--seconds", synSeconds, "wall-clock limit");
  syn->add_option("--out", synOut, "program JSON");

  // solve ---------------------------------------------------------------
  auto* sol = app.add_subcommand("solve", "time-share all subspaces under a policy");
  std::string solSpec, solPolicy, solBudget = "60s", solOut;
  std::uint64_t solQuantum = 10'000;
  sol->add_option("--spec", solSpec)->required();
  sol->add_option("--policy", solPolicy, "policy JSON; uniform when omitted");
  sol->add_option("--budget", solBudget, "wall clock, e.g. 60s or 2m");
  sol->add_option("--quantum", solQuantum, "nodes per scheduling round");
  sol->add_option("--out", solOut, "program JSON");

  // train-policy --------------------------------------------------------
  auto* tp = app.add_subcommand("train-policy", "time every subspace on a corpus and fit the policy");
  std::string tpCorpus, tpTimings, tpTimingsOut = "timings.jsonl", tpOut = "policy.json";
  int tpFolds = 20, tpSteps = 2000;
  std::uint64_t tpNodes = 2'000'000;
  bool tpRaw = false;
  tp->add_option("--corpus", tpCorpus, "corpus.jsonl of specs");
  tp->add_option("--timings", tpTimings, "reuse timings.jsonl instead of timing the corpus");
  tp->add_option("--timings-out", tpTimingsOut);
  tp->add_option("--folds", tpFolds, "cross-validation folds; 0 skips");
  tp->add_option("--steps", tpSteps);
  tp->add_option("--node-budget", tpNodes, "per subspace while timing");
  tp->add_flag("--raw-counts", tpRaw, "raw instead of log(1 + n) spec features");
  tp->add_option("--out", tpOut);

  // fit-prior -----------------------------------------------------------
  auto* fp = app.add_subcommand("fit-prior", "fit the program prior for reranking");
  std::string fpTrain, fpOut = "beta.json";
  fp->add_option("--train", fpTrain, "pairs.jsonl")->required();
  fp->add_option("--out", fpOut);

  // rerank --------------------------------------------------------------
  auto* rr = app.add_subcommand("rerank", "rank candidate specs for an image");
  std::string rrCandidates, rrPrior;
  rr->add_option("--candidates", rrCandidates)->required();
  rr->add_option("--prior", rrPrior, "beta.json; zero prior when omitted");

  // similar -------------------------------------------------------------
  auto* sim = app.add_subcommand("similar", "nearest programs in feature space");
  std::string simPrograms;
  int simQuery = 0, simTop = 5;
  sim->add_option("--programs", simPrograms, "one program per line (source or JSON)")->required();
  sim->add_option("--query", simQuery, "line index of the query program");
  sim->add_option("--top", simTop);

  // extrapolate ---------------------------------------------------------
  auto* ext = app.add_subcommand("extrapolate", "run loops for more iterations");
  std::string extProgram, extProgramFile, extOut, extTikz;
  std::vector<std::string> extLoops;
  int extAll = 0;
  ext->add_option("--program", extProgram);
  ext->add_option("--program-file", extProgramFile);
  ext->add_option("--loop", extLoops, "INDEX:DELTA, loops numbered in preorder");
  ext->add_option("--all", extAll, "add DELTA to every loop bound");
  ext->add_option("--out", extOut, "drawing of the extrapolated program");
  ext->add_option("--tikz", extTikz);

  // report --------------------------------------------------------------
  auto* rep = app.add_subcommand("report", "policy comparison table and histogram");
  std::string repTimings, repPrefix = "report";
  int repFolds = 20;
  double repTimeout = 360;
  rep->add_option("--timings", repTimings)->required();
  rep->add_option("--folds", repFolds);
  rep->add_option("--timeout", repTimeout, "in time units (1e4 nodes)");
  rep->add_option("--out-prefix", repPrefix, "writes PREFIX.csv and PREFIX.svg");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      std::mt19937_64 rng(genSeed);
      if (genKind == "rerank") {
        RerankCorpusConfig rc;
        rc.sets = genCount;
        rc.seed = genSeed;
        writeTrainingPairs(syntheticRerankCorpus(rc), genOut);
      } else {
        std::vector<CorpusRecord> records;
        for (int i = 0; i < genCount; ++i) {
          CorpusRecord r;
          r.seed = rng();
          if (genKind == "programs") {
            ProgramConfig pc;
            pc.seed = r.seed;
            pc.maxCommands = genMaxObjects;
            r.provenanceProgram = randomProgram(pc);
            r.spec = execute(*r.provenanceProgram);
          } else {
            SceneConfig sc;
            sc.seed = r.seed;
            sc.maxObjects = genMaxObjects;
            sc.structuredFraction = genStructured;
            sc.allowOverlap = !genNoOverlap;
            r.spec = randomSpec(sc);
          }
          records.push_back(std::move(r));
        }
        writeCorpus(records, genOut);
      }
      std::printf("wrote %d records to %s\n", genCount, genOut.c_str());
    } else if (ren->parsed()) {
      Spec s = !renSpec.empty() ? loadSpec(renSpec)
                                : execute(loadProgram(renProgram, renProgramFile), ExecOptions{std::nullopt});
      writeDrawing(s, renOut, renResolution, fitViewport(s));
    } else if (der->parsed()) {
      const Bitmap image = readImage(derImage);
      SamplerConfig cfg;
      cfg.particleCount = derParticles;
      cfg.maxCommands = derMaxCommands;
      cfg.proposal = parseProposal(derProposal);
      cfg.seed = derSeed;
      const auto ranked = derBeam > 0 ? beamInfer(image, derBeam, cfg) : smcInfer(image, cfg);
      Json out = Json::array();
      for (std::size_t i = 0; i < ranked.size() && int(i) < derTop; ++i) {
        out.push_back({{"spec", toJson(ranked[i].spec)},
                       {"score", ranked[i].score},
                       {"complete", ranked[i].complete}});
        std::printf("%2zu  %10.3f  %s%s\n", i + 1, ranked[i].score, oneLine(ranked[i].spec).c_str(),
                    ranked[i].complete ? "" : "  (incomplete)");
      }
      if (!derOut.empty()) writeText(derOut, out.dump(2) + "\n");
    } else if (syn->parsed()) {
      SynthOptions opt;
      opt.nodeBudget = synNodes;
      if (synSeconds > 0) opt.timeLimitSeconds = synSeconds;
      const auto r = synthesize(loadSpec(synSpec), SearchSubspace::parse(synSigma), opt);
      std::printf("status %s  cost %s  nodes %llu  %.2fs\n", statusName(r.status), costText(r.cost).c_str(),
                  static_cast<unsigned long long>(r.nodesExplored), r.elapsedSeconds);
      if (r.program) {
        std::printf("%s", formatProgram(*r.program, SourceStyle::Indented).c_str());
        if (!synOut.empty()) writeText(synOut, toJson(*r.program).dump(2) + "\n");
      }
      return r.program ? 0 : 1;
    } else if (sol->parsed()) {
      const Spec spec = loadSpec(solSpec);
      const auto pi = solPolicy.empty() ? uniformPolicy()
                                        : policyDistribution(policyFromJson(readJson(solPolicy)), spec);
      SchedulerOptions opt;
      opt.quantum = solQuantum;
      opt.timeLimitSeconds = parseSeconds(solBudget);
      const auto r = biasOptimalSearch(spec, pi, opt);
      std::printf("status %s  cost %s  certified %s  nodes %llu\n", statusName(r.result.status),
                  costText(r.result.cost).c_str(), r.certified ? "yes" : "no",
                  static_cast<unsigned long long>(r.trace.elapsed));
      if (r.sigma) std::printf("found in %s\n", r.sigma->name().c_str());
      if (r.result.program) {
        std::printf("%s", formatProgram(*r.result.program, SourceStyle::Indented).c_str());
        if (!solOut.empty()) writeText(solOut, toJson(*r.result.program).dump(2) + "\n");
      }
      return r.result.program ? 0 : 1;
    } else if (tp->parsed()) {
      std::vector<TimedSpec> timed;
      if (!tpTimings.empty()) {
        timed = readTimings(tpTimings);
      } else {
        if (tpCorpus.empty()) throw std::runtime_error("give --corpus or --timings");
        const auto corpus = readCorpus(tpCorpus);
        TimingOptions to;
        to.nodeBudget = tpNodes;
        for (std::size_t i = 0; i < corpus.size(); ++i) {
          timed.push_back(timeSpec(corpus[i].spec, int(i), to));
          std::fprintf(stderr, "\rtimed %zu/%zu", i + 1, corpus.size());
        }
        std::fprintf(stderr, "\n");
        writeTimings(timed, tpTimingsOut);
      }
      TrainConfig cfg;
      cfg.steps = tpSteps;
      cfg.logCounts = !tpRaw;
      std::vector<TimedSpec> usable;
      for (const auto& s : timed) {
        if (s.hasBest()) usable.push_back(s);
      }
      std::printf("%zu specs, %zu with a solved subspace\n", timed.size(), usable.size());
      TrainLog log;
      const auto policy = trainPolicy(usable, cfg, &log);
      std::printf("training loss (hard min): %.4f -> %.4f\n", log.initialHardLoss, log.finalHardLoss);
      writeText(tpOut, toJson(policy).dump(2) + "\n");
      if (tpFolds > 1) {
        const double timeout = double(tpNodes) / 1e4;
        const auto cmp = crossValidate(usable, tpFolds, cfg, timeout);
        std::printf("%d-fold held-out solve time (units of 1e4 nodes):\n", tpFolds);
        for (const auto& m : summarize(cmp, timeout)) {
          std::printf("  %-22s median %9.4f  mean %9.4f\n", m.name.c_str(), m.median, m.mean);
        }
      }
    } else if (fp->parsed()) {
      const auto pairs = readTrainingPairs(fpTrain);
      const auto fit = fitPrior(pairs);
      if (fit.dropped > 0) {
        std::fprintf(stderr, "warning: dropped %d sets without their truth\n", fit.dropped);
      }
      std::printf("objective %.6f -> %.6f after %d iterations\nbeta:", fit.initialObjective, fit.objective,
                  fit.iterations);
      for (int k = 0; k < kProgramFeatures; ++k) {
        std::printf(" %s=%.4f", programFeatureNames()[std::size_t(k)], fit.prior.beta[std::size_t(k)]);
      }
      std::printf("\ntop-1 on training sets: %.3f (zero prior %.3f)\n", topOneAccuracy(pairs, fit.prior),
                  topOneAccuracy(pairs, PriorParams{}));
      writeText(fpOut, toJson(fit.prior).dump(2) + "\n");
    } else if (rr->parsed()) {
      const auto set = candidateSetFromJson(readJson(rrCandidates));
      const PriorParams prior = rrPrior.empty() ? PriorParams{} : priorFromJson(readJson(rrPrior));
      const auto ranked = rerankSpecs(set, prior);
      for (std::size_t i = 0; i < ranked.size(); ++i) {
        const auto& r = ranked[i];
        std::printf("%2zu  %10.4f  prior %8.4f%s  %s\n", i + 1, r.logScore, r.logPrior,
                    r.priorImputed ? "*" : " ", oneLine(set.candidates[r.index].spec).c_str());
      }
    } else if (sim->parsed()) {
      std::vector<Program> programs;
      std::ifstream in(simPrograms);
      if (!in) throw std::runtime_error("cannot read " + simPrograms);
      std::string line;
      while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        programs.push_back(line.front() == '{' ? programFromJson(Json::parse(line)) : parseProgram(line));
      }
      if (simQuery < 0 || simQuery >= int(programs.size())) throw std::runtime_error("query out of range");
      const auto& q = programs[std::size_t(simQuery)];
      int shown = 0;
      for (auto i : nearestPrograms(q, programs)) {
        if (int(i) == simQuery) continue;
        if (shown++ >= simTop) break;
        std::printf("%4zu  %6.1f  %s\n", i, programDistance(q, programs[i]), formatProgram(programs[i]).c_str());
      }
    } else if (ext->parsed()) {
      ExtrapolationRequest req;
      req.program = loadProgram(extProgram, extProgramFile);
      if (extAll != 0) req.changes = allLoops(req.program, extAll);
      for (const auto& l : extLoops) {
        const auto colon = l.find(':');
        if (colon == std::string::npos) throw std::runtime_error("--loop wants INDEX:DELTA");
        req.changes.push_back({std::stoi(l.substr(0, colon)), std::stoi(l.substr(colon + 1))});
      }
      const auto r = extrapolate(req);
      std::printf("%s%zu commands on a %d-cell canvas\n", formatProgram(r.program, SourceStyle::Indented).c_str(),
                  r.spec.size(), r.view.cells);
      if (!extOut.empty()) writeDrawing(r.spec, extOut, kDefaultResolution, r.view);
      if (!extTikz.empty()) writeText(extTikz, r.tikz);
    } else if (rep->parsed()) {
      std::vector<TimedSpec> usable;
      for (const auto& s : readTimings(repTimings)) {
        if (s.hasBest()) usable.push_back(s);
      }
      const auto cmp = crossValidate(usable, repFolds, TrainConfig{}, repTimeout);
      std::printf("%-22s %12s %12s %10s\n", "method", "median", "mean", "timeouts");
      for (const auto& m : summarize(cmp, repTimeout)) {
        std::printf("%-22s %12.4f %12.4f %9.1f%%\n", m.name.c_str(), m.median, m.mean, 100 * m.timeoutFraction);
      }
      const std::vector<std::pair<std::string, std::vector<double>>> series{
          {"full-space", cmp.fullSpace}, {"component-prediction", cmp.deepCoder}, {"oracle", cmp.oracle},
          {"learned", cmp.learned}};
      std::vector<double> edges;
      for (int e = -4; e <= 3; ++e) edges.push_back(std::pow(10.0, e));
      edges.push_back(repTimeout);
      std::ostringstream csv;
      csv << "specId,method,time\n";
      for (const auto& [name, values] : series) {
        for (std::size_t i = 0; i < values.size(); ++i) {
          csv << usable[i].specId << "," << name << "," << values[i] << "\n";
        }
      }
      writeText(repPrefix + ".csv", csv.str());
      writeText(repPrefix + ".svg", histogramSvg(series, edges));
      std::printf("wrote %s.csv and %s.svg\n", repPrefix.c_str(), repPrefix.c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
