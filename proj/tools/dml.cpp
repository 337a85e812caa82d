// Command-line front door for the data-monoid / guarded-MSO toolkit.
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "dml/analysis.hpp"
#include "dml/compile.hpp"
#include "dml/fma.hpp"
#include "dml/io.hpp"
#include "dml/morphism.hpp"
#include "dml/msoclassic.hpp"
#include "dml/rigidity.hpp"
#include "dml/selftest.hpp"

using nlohmann::json;
using namespace dml;

namespace {

constexpr int kSchemaVersion = 1;

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DmlError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

struct Common {
  bool jsonOut = false;
  std::vector<std::string> tags = {"a"};
  std::size_t maxWordLen = 5;
  bool maxWordLenSet = false;
  unsigned maxValues = 4;
  std::size_t stateBudget = 200000;

  MsoLimits limits() const {
    MsoLimits l;
    l.stateBudget = stateBudget;
    return l;
  }
};

void emit(const Common& c, const json& j, const std::string& human) {
  if (c.jsonOut)
    std::cout << j.dump(2) << "\n";
  else
    std::cout << human;
}

FormulaPtr load_formula(const std::string& path) { return parse_formula(slurp(path)); }

Recognizer load_recognizer(const std::string& path) {
  auto l = load_monoid_file(path);
  if (!l.morphism) throw DmlError("'" + path + "' declares no letter images");
  return Recognizer{*l.morphism, l.accepting};
}

int cmd_parse(const Common& c, const std::string& path) {
  FormulaPtr f = load_formula(path);
  json j{{"schema_version", kSchemaVersion},
         {"formula", to_string(f)},
         {"free_fo", free_fo(f)},
         {"free_so", free_so(f)},
         {"data_test_free", data_test_free(f)}};
  std::ostringstream h;
  h << to_string(f) << "\n";
  emit(c, j, h.str());
  return 0;
}

int cmd_eval(const Common& c, const std::string& path, const std::string& wordText) {
  FormulaPtr f = load_formula(path);
  DataWord w = parse_word(wordText);
  EvalOptions opt;
  opt.maxWordLen = c.maxWordLenSet ? c.maxWordLen : 18;
  bool holds = evaluate(f, w, {}, opt);
  json j{{"schema_version", kSchemaVersion}, {"word", format_word(w)}, {"holds", holds}};
  emit(c, j, std::string(holds ? "true" : "false") + "\n");
  return holds ? 0 : 1;
}

int cmd_rigid(const Common& c, const std::string& path, bool semi, bool bounded) {
  FormulaPtr f = load_formula(path);
  auto fos = free_fo(f);
  if (fos.size() != 2) throw DmlError("a guard must have exactly two free first-order variables");
  std::string x = *fos.begin(), y = *std::next(fos.begin());
  RigidityMode mode;
  mode.exact = !bounded;
  mode.boundedLen = c.maxWordLen;
  mode.boundedVals = c.maxValues;
  RigidityVerdict v = check_rigidity(f, x, y, semi, c.tags, mode, c.limits());
  const char* status = v.status == RigidityStatus::Rigid          ? "rigid"
                       : v.status == RigidityStatus::NotRigid     ? "not-rigid"
                       : v.status == RigidityStatus::SemiRigid    ? "semi-rigid"
                                                                  : "not-semi-rigid";
  json j{{"schema_version", kSchemaVersion}, {"status", status}, {"x", x}, {"y", y}};
  std::ostringstream h;
  h << status << "\n";
  if (v.counterexample) {
    j["counterexample"] = {{"word", format_word(v.counterexample->first)},
                           {"positions", v.counterexample->second}};
    h << "counterexample: " << format_word(v.counterexample->first) << " at positions";
    for (auto p : v.counterexample->second) h << " " << p;
    h << "\n";
  }
  emit(c, j, h.str());
  return v.holds() ? 0 : 1;
}

int cmd_sat(const Common& c, const std::string& path) {
  FormulaPtr f = load_formula(path);
  GrammarConfig cfg;
  cfg.tags = c.tags;
  cfg.limits = c.limits();
  if (check_grammar(f, cfg) == GrammarVerdict::Neither)
    throw DmlError("the formula is not (semi-)rigidly guarded");
  SatResult r = satisfiable(f, c.tags, c.limits());
  json j{{"schema_version", kSchemaVersion},
         {"satisfiable", r.satisfiable},
         {"nfa_states", r.nfaStates},
         {"states_before_determinization", r.statesBeforeDet},
         {"states_after_determinization", r.statesAfterDet},
         {"partition_variables", r.partitions}};
  std::ostringstream h;
  if (r.satisfiable) {
    j["witness"] = format_word(*r.witness);
    h << "SAT " << format_word(*r.witness) << "\n";
  } else {
    h << "UNSAT\n";
  }
  emit(c, j, h.str());
  return r.satisfiable ? 0 : 1;
}

int cmd_compile(const Common& c, const std::string& path, const std::string& outPath,
                bool noQuotient) {
  FormulaPtr f = load_formula(path);
  CompileOptions opts;
  opts.quotientStages = !noQuotient;
  opts.msoLimits = c.limits();
  CompileResult r = compile(f, c.tags, opts);
  std::size_t projLen = 3;
  DataValue projVals = 2;
  ProjectabilityReport proj = check_projectable(r.lang, projLen, projVals);
  bool empty = is_empty(r.lang.recognizer());
  QuotientResult q = syntactic_quotient(r.lang.recognizer(), "compiled");
  bool aperiodic = is_aperiodic(*q.recognizer.morphism.target);
  if (!outPath.empty()) {
    std::ofstream out(outPath);
    out << save_monoid_text(*r.lang.pres, &r.lang.morphism, &r.lang.accepting);
  }
  json j{{"schema_version", kSchemaVersion},
         {"orbits", r.lang.pres->orbits.size()},
         {"quotient_orbits", q.recognizer.morphism.target->orbits.size()},
         {"aperiodic", aperiodic},
         {"empty", empty},
         {"projectable", proj.ok},
         {"projectability_checked_up_to",
          {{"max_word_len", projLen}, {"max_values", projVals}}}};
  std::ostringstream h;
  h << "orbits: " << r.lang.pres->orbits.size() << " (syntactic: "
    << q.recognizer.morphism.target->orbits.size() << ")\n"
    << "aperiodic: " << (aperiodic ? "yes" : "no") << "\n"
    << "empty: " << (empty ? "yes" : "no") << "\n"
    << "projectable up to |w| <= " << projLen << ", " << unsigned(projVals)
    << " values: " << (proj.ok ? "yes" : "NO") << "\n";
  if (!outPath.empty()) h << "written to " << outPath << "\n";
  emit(c, j, h.str());
  return 0;
}

int cmd_analyze(const Common& c, const std::string& path) {
  auto loaded = load_monoid_file(path);
  const Presentation& P = *loaded.presentation;
  ValidationReport vrep = P.validate();
  DataValue c2 = std::min<DataValue>(P.support, static_cast<DataValue>(c.maxValues));
  std::vector<DataValue> vals;
  for (DataValue v = 1; v <= c2; ++v) vals.push_back(v);
  GreenSummary g = green(P, vals);
  PropertyReport prep = check_structure(P, g);
  bool aperiodic = is_aperiodic(P);

  json jg;
  auto classesJson = [&](const std::vector<std::vector<int>>& classes) {
    json out = json::array();
    for (const auto& cls : classes) {
      json one = json::array();
      for (int i : cls) one.push_back(P.term_str(g.elements[static_cast<std::size_t>(i)]));
      out.push_back(one);
    }
    return out;
  };
  jg["r"] = classesJson(g.r_classes);
  jg["l"] = classesJson(g.l_classes);
  jg["j"] = classesJson(g.j_classes);
  jg["h"] = classesJson(g.h_classes);

  json memChecks = json::array();
  bool memOk = true;
  for (const Term& t : g.elements) {
    MemoryReport m = mem_rl(P, t, g);
    std::set<DataValue> uni;
    std::set_union(m.mem_r.begin(), m.mem_r.end(), m.mem_l.begin(), m.mem_l.end(),
                   std::inserter(uni, uni.begin()));
    bool ok = uni == m.mem;
    memOk = memOk && ok;
    memChecks.push_back({{"element", P.term_str(t)},
                         {"mem", m.mem},
                         {"mem_r", m.mem_r},
                         {"mem_l", m.mem_l},
                         {"union_ok", ok}});
  }

  json orbits = json::array();
  for (const auto& o : P.orbits) orbits.push_back({{"name", o.name}, {"arity", o.arity}});
  json elements = json::array();
  for (const Term& t : g.elements) elements.push_back(P.term_str(t));

  json j{{"schema_version", kSchemaVersion},
         {"monoid", P.name},
         {"valid", vrep.ok()},
         {"orbits", orbits},
         {"elements", elements},
         {"aperiodic", aperiodic},
         {"green", jg},
         {"memory_checks", memChecks},
         {"structure_checks",
          {{"mem_union_ok", prep.mem_union_ok},
           {"stairs_ok", prep.stairs_ok},
           {"h_class_sizes", prep.h_class_sizes}}}};

  std::ostringstream h;
  h << "monoid " << P.name << ": " << P.orbits.size() << " orbits, support " << P.support << "\n";
  h << "valid: " << (vrep.ok() ? "yes" : "NO") << "\n";
  if (!vrep.ok())
    for (const auto& v : vrep.violations) h << "  violation: " << v << "\n";
  h << "aperiodic: " << (aperiodic ? "yes" : "no") << "\n";
  h << "elements over {1.." << c2 << "}: " << g.elements.size() << "\n";
  h << "green classes: R=" << g.r_classes.size() << " L=" << g.l_classes.size()
    << " J=" << g.j_classes.size() << " H=" << g.h_classes.size() << "\n";
  h << "mem = mem_R u mem_L: " << (prep.mem_union_ok ? "yes" : "NO") << "\n";
  h << "decomposition stairs: " << (prep.stairs_ok ? "yes" : "NO") << "\n";
  emit(c, j, h.str());
  return vrep.ok() && prep.ok() && memOk ? 0 : 1;
}

int cmd_quotient(const Common& c, const std::string& path, const std::string& outPath) {
  Recognizer r = load_recognizer(path);
  QuotientResult q = syntactic_quotient(r, "quotient");
  const Presentation& P = *q.recognizer.morphism.target;
  if (!outPath.empty()) {
    std::ofstream out(outPath);
    out << save_monoid_text(P, &q.recognizer.morphism, &q.recognizer.accepting);
  }
  json orbits = json::array();
  for (const auto& o : P.orbits) orbits.push_back({{"name", o.name}, {"arity", o.arity}});
  json j{{"schema_version", kSchemaVersion},
         {"orbits_before", r.morphism.target->orbits.size()},
         {"orbits_after", P.orbits.size()},
         {"orbits", orbits}};
  std::ostringstream h;
  h << r.morphism.target->orbits.size() << " orbits -> " << P.orbits.size() << " orbits\n";
  if (!outPath.empty()) h << "written to " << outPath << "\n";
  emit(c, j, h.str());
  return 0;
}

int cmd_fma_run(const Common& c, const std::string& path, const std::string& wordText,
                std::size_t countLimit) {
  Fma a = load_fma_file(path);
  DataWord w = parse_word(wordText);
  RunReport r = run(a, w, countLimit);
  json j{{"schema_version", kSchemaVersion},
         {"accepted", r.accepted},
         {"run_count", r.run_count}};
  std::ostringstream h;
  h << (r.accepted ? "accepted" : "rejected") << " (runs found: " << r.run_count << ")\n";
  if (r.trace) {
    json tr = json::array();
    for (const Config& cfg : *r.trace) {
      std::string s = a.states[static_cast<std::size_t>(cfg.state)].name + "(";
      for (std::size_t i = 0; i < cfg.registers.size(); ++i)
        s += (i ? "," : "") + std::to_string(cfg.registers[i]);
      s += ")";
      tr.push_back(s);
      h << "  " << s << "\n";
    }
    j["trace"] = tr;
  }
  emit(c, j, h.str());
  return r.accepted ? 0 : 1;
}

int cmd_fma_check(const Common& c, const std::string& path) {
  Fma a = load_fma_file(path);
  bool det = is_deterministic(a);
  UnambiguityVerdict v = unambiguity_bounded(a, c.maxWordLen, c.maxValues);
  json j{{"schema_version", kSchemaVersion},
         {"deterministic", det},
         {"unambiguous_bounded", v.unambiguous},
         {"checked_up_to", {{"max_word_len", c.maxWordLen}, {"max_values", c.maxValues}}}};
  std::ostringstream h;
  h << "deterministic: " << (det ? "yes" : "no") << "\n";
  h << "unambiguous up to (|w| <= " << c.maxWordLen << ", " << c.maxValues
    << " values): " << (v.unambiguous ? "yes" : "no") << "\n";
  if (v.counterexample) {
    j["counterexample"] = format_word(*v.counterexample);
    h << "counterexample: " << format_word(*v.counterexample) << "\n";
  }
  emit(c, j, h.str());
  return v.unambiguous ? 0 : 1;
}

int cmd_selftest(const Common& c, const std::string& filter) {
  auto results = run_acceptance(filter);
  json arr = json::array();
  bool allPass = true;
  std::ostringstream h;
  for (const auto& r : results) {
    arr.push_back({{"id", r.id},
                   {"name", r.name},
                   {"pass", r.pass},
                   {"seconds", r.seconds},
                   {"detail", r.detail}});
    char line[256];
    std::snprintf(line, sizeof line, "[%s] criterion %d %-28s (%.2fs)%s%s\n",
                  r.pass ? "PASS" : "FAIL", r.id, r.name.c_str(), r.seconds,
                  r.detail.empty() ? "" : " -- ", r.detail.c_str());
    h << line;
    allPass = allPass && r.pass;
  }
  json j{{"schema_version", kSchemaVersion}, {"criteria", arr}, {"all_pass", allPass}};
  emit(c, j, h.str());
  if (results.empty()) return 2;
  return allPass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"orbit-finite data monoids, guarded MSO with data tests, and finite memory automata"};
  app.require_subcommand(1);

  Common common;
  app.add_flag("--json", common.jsonOut, "machine-readable output");
  app.add_option("--tags", common.tags, "finite tag alphabet (default: a)");
  auto* mwl = app.add_option("--max-word-len", common.maxWordLen,
                             "bound for word and assignment enumeration");
  app.add_option("--max-values", common.maxValues, "bound for data value enumeration");
  app.add_option("--state-budget", common.stateBudget, "automaton state budget");

  std::string formulaPath, wordText, monoidPath, fmaPath, outPath, filter;
  bool semi = false, bounded = false, noQuotient = false;
  std::size_t countLimit = 1;

  CLI::App* parse = app.add_subcommand("parse", "parse a formula and print it");
  parse->add_option("--formula", formulaPath, "formula file")->required();

  CLI::App* eval = app.add_subcommand("eval", "evaluate a sentence on a data word");
  eval->add_option("--formula", formulaPath)->required();
  eval->add_option("--word", wordText, "word literal, e.g. 'a@1 b@2'")->required();

  CLI::App* rigid = app.add_subcommand("rigid", "decide (semi-)rigidity of a two-variable guard");
  rigid->add_option("--formula", formulaPath)->required();
  rigid->add_flag("--semi", semi, "check semi-rigidity only");
  rigid->add_flag("--bounded", bounded, "bounded search instead of the exact decision");

  CLI::App* sat = app.add_subcommand("sat", "decide satisfiability over data words");
  sat->add_option("--formula", formulaPath)->required();

  CLI::App* comp = app.add_subcommand("compile", "compile a rigidly guarded sentence to a monoid");
  comp->add_option("--formula", formulaPath)->required();
  comp->add_option("--out", outPath, "write the recognizer to this file");
  comp->add_flag("--no-quotient", noQuotient, "skip the per-stage syntactic quotient");

  CLI::App* analyze = app.add_subcommand("analyze", "validate and analyze a presentation");
  analyze->add_option("--monoid", monoidPath)->required();

  CLI::App* quot = app.add_subcommand("quotient", "syntactic quotient of a recognizer");
  quot->add_option("--monoid", monoidPath)->required();
  quot->add_option("--out", outPath, "write the quotient to this file");

  CLI::App* frun = app.add_subcommand("fma-run", "run a finite memory automaton on a word");
  frun->add_option("--fma", fmaPath)->required();
  frun->add_option("--word", wordText)->required();
  frun->add_option("--count-limit", countLimit, "stop after this many accepting runs");

  CLI::App* fcheck = app.add_subcommand("fma-check", "determinism and bounded unambiguity");
  fcheck->add_option("--fma", fmaPath)->required();

  CLI::App* self = app.add_subcommand("selftest", "run the acceptance suite");
  self->add_option("--filter", filter, "run only criteria whose name contains this");

  CLI11_PARSE(app, argc, argv);
  common.maxWordLenSet = mwl->count() > 0;

  try {
    if (parse->parsed()) return cmd_parse(common, formulaPath);
    if (eval->parsed()) return cmd_eval(common, formulaPath, wordText);
    if (rigid->parsed()) return cmd_rigid(common, formulaPath, semi, bounded);
    if (sat->parsed()) return cmd_sat(common, formulaPath);
    if (comp->parsed()) return cmd_compile(common, formulaPath, outPath, noQuotient);
    if (analyze->parsed()) return cmd_analyze(common, monoidPath);
    if (quot->parsed()) return cmd_quotient(common, monoidPath, outPath);
    if (frun->parsed()) return cmd_fma_run(common, fmaPath, wordText, countLimit);
    if (fcheck->parsed()) return cmd_fma_check(common, fmaPath);
    if (self->parsed()) return cmd_selftest(common, filter);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
