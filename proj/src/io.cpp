#include "rsd/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "rsd/interval_audit.hpp"
#include "rsd/partition.hpp"
#include "rsd/simulate.hpp"
#include "rsd/statistics.hpp"
#include "rsd/stepwise.hpp"

using nlohmann::json;

namespace rsd {

namespace {

// Bad flag combinations and unknown names exit with code 1.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& text, double& out) {
  const std::string t = trim(text);
  if (t.empty()) return false;
  char* end = nullptr;
  out = std::strtod(t.c_str(), &end);
  return end == t.c_str() + t.size() && std::isfinite(out);
}

std::string fmt(double v, const char* spec = "%.17g") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

}  // namespace

RawTable parse_csv_table(std::istream& in) {
  RawTable raw;
  std::string line;
  int line_no = 0;
  bool labeled = false;
  size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!ss && line.back() == ',') cells.push_back("");

    const bool first_row = raw.rows.empty();
    double probe = 0.0;
    if (first_row) labeled = !parse_double(cells[0], probe);
    size_t start = 0;
    if (labeled) {
      raw.labels.push_back(trim(cells[0]));
      start = 1;
    }
    if (cells.size() <= start)
      throw DataError("row " + std::to_string(line_no) + ": no data cells");

    std::vector<double> values;
    for (size_t c = start; c < cells.size(); ++c) {
      double v = 0.0;
      if (!parse_double(cells[c], v))
        throw DataError("row " + std::to_string(line_no) + ", column " + std::to_string(c + 1) +
                        ": '" + trim(cells[c]) + "' is not numeric");
      values.push_back(v);
    }
    if (first_row) {
      width = values.size();
    } else if (values.size() != width) {
      throw DataError("row " + std::to_string(line_no) + " has " + std::to_string(values.size()) +
                      " cells, expected " + std::to_string(width));
    }
    raw.rows.push_back(std::move(values));
  }
  if (raw.rows.empty()) throw DataError("no data rows");
  return raw;
}

RawTable parse_json_table(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("bad JSON table: ") + e.what());
  }
  const char* key = doc.contains("counts") ? "counts" : "values";
  if (!doc.contains(key) || !doc[key].is_array() || doc[key].empty())
    throw DataError("JSON table needs a nonempty 'counts' or 'values' matrix");
  RawTable raw;
  size_t width = 0;
  for (size_t i = 0; i < doc[key].size(); ++i) {
    const auto& row = doc[key][i];
    if (!row.is_array() || row.empty())
      throw DataError("JSON table row " + std::to_string(i + 1) + " is not a nonempty array");
    std::vector<double> values;
    for (size_t c = 0; c < row.size(); ++c) {
      if (!row[c].is_number())
        throw DataError("JSON table row " + std::to_string(i + 1) + ", column " +
                        std::to_string(c + 1) + " is not numeric");
      values.push_back(row[c].get<double>());
    }
    if (i == 0)
      width = values.size();
    else if (values.size() != width)
      throw DataError("JSON table row " + std::to_string(i + 1) + " has " +
                      std::to_string(values.size()) + " cells, expected " + std::to_string(width));
    raw.rows.push_back(std::move(values));
  }
  if (doc.contains("labels")) {
    for (const auto& l : doc["labels"]) raw.labels.push_back(l.get<std::string>());
    if (raw.labels.size() != raw.rows.size())
      throw DataError("JSON table has " + std::to_string(raw.labels.size()) + " labels for " +
                      std::to_string(raw.rows.size()) + " rows");
  }
  return raw;
}

RawTable read_table(const std::string& path, std::string format) {
  if (format.empty()) {
    const size_t dot = path.find_last_of('.');
    format = dot == std::string::npos ? "csv" : path.substr(dot + 1);
    std::transform(format.begin(), format.end(), format.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (format != "json") format = "csv";
  }
  std::ifstream in(path);
  if (!in) throw DataError("cannot open input file: " + path);
  if (format == "json") {
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_json_table(ss.str());
  }
  return parse_csv_table(in);
}

void write_table_csv(std::ostream& out, const std::vector<std::vector<double>>& rows,
                     const std::vector<std::string>& labels) {
  for (size_t i = 0; i < rows.size(); ++i) {
    if (!labels.empty()) out << labels[i] << ',';
    for (size_t c = 0; c < rows[i].size(); ++c) {
      if (c) out << ',';
      out << fmt(rows[i][c]);
    }
    out << '\n';
  }
}

std::string table_to_json(const std::vector<std::vector<double>>& rows,
                          const std::vector<std::string>& labels, const std::string& model) {
  json doc;
  doc["schema"] = 1;
  doc["model"] = model;
  if (!labels.empty()) doc["labels"] = labels;
  doc[model == "multinomial" ? "counts" : "values"] = rows;
  return doc.dump(2);
}

ContingencyTable to_contingency(const RawTable& raw) {
  ContingencyTable t;
  t.counts = raw.rows;
  t.labels = raw.labels;
  try {
    t.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }
  return t;
}

SampleMatrix to_samples(const RawTable& raw, SampleMatrix::Kind kind) {
  SampleMatrix m;
  m.values = raw.rows;
  m.labels = raw.labels;
  m.kind = kind;
  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }
  if (kind == SampleMatrix::Kind::rank_means && m.cols() != 1)
    throw DataError("rank data must be a single column of joint-rank means");
  return m;
}

namespace {

ProblemShape parse_shape(const std::string& s) {
  if (s == "all-pairwise") return ProblemShape::all_pairwise;
  if (s == "change-point") return ProblemShape::change_point;
  if (s == "tvc" || s == "treatments-vs-control") return ProblemShape::treatments_vs_control;
  throw UsageError("unknown family: " + s);
}

ModelKind parse_model(const std::string& s) {
  if (s == "multinomial") return ModelKind::multinomial;
  if (s == "normal") return ModelKind::normal;
  if (s == "rank") return ModelKind::rank;
  throw UsageError("unknown model: " + s);
}

Sidedness resolve_sided(const std::string& s, ProblemShape shape) {
  if (s == "one") return Sidedness::one_sided;
  if (s == "two") return Sidedness::two_sided;
  if (!s.empty()) throw UsageError("unknown sidedness: " + s);
  return shape == ProblemShape::change_point ? Sidedness::one_sided : Sidedness::two_sided;
}

std::string shape_name(ProblemShape s) {
  switch (s) {
    case ProblemShape::all_pairwise: return "all-pairwise";
    case ProblemShape::change_point: return "change-point";
    case ProblemShape::treatments_vs_control: return "tvc";
  }
  return "?";
}

std::string set_to_string(const std::vector<int>& members) {
  std::string s = "{";
  for (size_t t = 0; t < members.size(); ++t) {
    if (t) s += ",";
    s += std::to_string(members[t] + 1);
  }
  return s + "}";
}

json set_to_json(const std::vector<int>& members) {
  json arr = json::array();
  for (int m : members) arr.push_back(m + 1);
  return arr;
}

json runspec_to_json(const RunSpec& s) {
  json j;
  j["subcommand"] = s.subcommand;
  j["model"] = s.model;
  j["family"] = s.family;
  j["procedure"] = s.procedure;
  j["sided"] = s.sided;
  j["criticals_source"] = s.criticals_source;
  if (!s.criticals.empty()) j["criticals"] = s.criticals;
  if (!s.criticals_file.empty()) j["criticals_file"] = s.criticals_file;
  j["alpha"] = s.alpha;
  j["control"] = s.control;
  j["input"] = s.input_path;
  j["output"] = s.output_path;
  j["pooling"] = s.pooling;
  j["rank_n"] = s.rank_n;
  if (s.rank_w > 0) j["rank_w"] = s.rank_w;
  j["seed"] = s.seed;
  if (!s.builtin.empty()) j["builtin"] = s.builtin;
  if (!s.pair.empty()) j["pair"] = s.pair;
  if (!s.grid.empty()) j["grid"] = s.grid;
  if (s.random_instances > 0) j["random_instances"] = s.random_instances;
  if (s.subcommand == "simulate" || s.subcommand == "reproduce") {
    j["iterations"] = s.iterations;
    j["serial"] = s.serial;
    if (s.subcommand == "simulate") {
      j["k"] = s.sim_k;
      j["blocks"] = s.blocks;
      j["rsd_alpha"] = s.rsd_alpha;
      j["su_alpha"] = s.su_alpha;
      if (!s.config_path.empty()) j["config"] = s.config_path;
    } else {
      j["table"] = s.table;
      j["rows"] = s.rows;
    }
  }
  return j;
}

json criticals_to_json(const CriticalValues& cv) {
  json j;
  j["source"] = cv.source;
  if (cv.alpha > 0) j["alpha"] = cv.alpha;
  j["values"] = cv.values;
  return j;
}

json report_to_json(const DecisionReport& report) {
  json arr = json::array();
  for (const Decision& d : report.decisions) {
    json e;
    e["i"] = d.i + 1;
    e["j"] = d.j + 1;
    e["reject"] = d.reject;
    if (std::isfinite(d.statistic)) e["statistic"] = d.statistic;
    if (d.stage > 0) e["stage"] = d.stage;
    arr.push_back(std::move(e));
  }
  return arr;
}

json trace_to_json(const PartitionTrace& trace) {
  json j;
  json steps = json::array();
  for (const TraceStep& s : trace.steps) {
    json e;
    e["stage"] = s.stage;
    e["block"] = set_to_json(s.block);
    e["split_a"] = set_to_json(s.split_a);
    e["split_rest"] = set_to_json(s.split_rest);
    e["h"] = s.h;
    e["threshold"] = s.threshold;
    steps.push_back(std::move(e));
  }
  j["steps"] = std::move(steps);
  json blocks = json::array();
  for (const auto& b : trace.final_blocks) blocks.push_back(set_to_json(b));
  j["final_partition"] = std::move(blocks);
  if (!trace.stage_details.empty()) {
    json stages = json::array();
    for (const StageRecord& r : trace.stage_details) {
      json e;
      e["stage"] = r.stage;
      e["threshold"] = r.threshold;
      e["split_executed"] = r.split_executed;
      json cands = json::array();
      for (const SplitCandidate& c : r.candidates) {
        json ce;
        ce["a"] = set_to_json(c.a);
        ce["rest"] = set_to_json(c.rest);
        ce["h"] = c.h;
        cands.push_back(std::move(ce));
      }
      e["candidates"] = std::move(cands);
      stages.push_back(std::move(e));
    }
    j["stages"] = std::move(stages);
  }
  return j;
}

void write_output_file(const std::string& path, const json& doc) {
  if (path.empty()) return;
  std::ofstream out(path);
  if (!out) throw DataError("cannot open output file: " + path);
  out << doc.dump(2) << '\n';
}

struct ResolvedProblem {
  ModelKind model;
  ProblemFamily family;
  Sidedness sided;
  int q = 1;
  ContingencyTable table;  // model == multinomial
  SampleMatrix samples;    // otherwise
  std::vector<double> flat;
};

ResolvedProblem load_problem(const RunSpec& spec) {
  ResolvedProblem p;
  p.model = parse_model(spec.model);
  const RawTable raw = read_table(spec.input_path, spec.format);
  int k = 0;
  if (p.model == ModelKind::multinomial) {
    p.table = to_contingency(raw);
    k = p.table.rows();
    p.q = p.table.cols();
    p.flat = p.table.flat();
  } else {
    p.samples = to_samples(raw, p.model == ModelKind::rank ? SampleMatrix::Kind::rank_means
                                                           : SampleMatrix::Kind::normal);
    k = p.samples.rows();
    p.q = p.samples.cols();
    p.flat = p.samples.flat();
  }
  const ProblemShape shape = parse_shape(spec.family);
  int control = k - 1;
  if (spec.control > 0) {
    if (spec.control > k) throw UsageError("control index exceeds the population count");
    control = spec.control - 1;
  }
  p.family = {shape, k, control};
  p.sided = resolve_sided(spec.sided, shape);
  if (shape == ProblemShape::all_pairwise && p.sided == Sidedness::one_sided)
    throw UsageError("one-sided alternatives are not defined for all-pairwise families");
  return p;
}

CriticalValues resolve_criticals(const RunSpec& spec, int needed, bool allow_longer = false) {
  CriticalValues cv;
  std::string source = spec.criticals_source;
  if (source.empty()) {
    if (!spec.criticals.empty())
      source = "inline";
    else if (!spec.criticals_file.empty())
      source = "file";
    else
      throw UsageError("no critical values: pass --criticals, --criticals-file, or --generate bh|bg");
  }
  if (source == "inline") {
    cv.values = spec.criticals;
    cv.source = "user";
  } else if (source == "file") {
    std::ifstream in(spec.criticals_file);
    if (!in) throw DataError("cannot open criticals file: " + spec.criticals_file);
    std::string token;
    while (std::getline(in, token)) {
      std::stringstream ss(token);
      std::string cell;
      while (std::getline(ss, cell, ',')) {
        if (trim(cell).empty()) continue;
        double v = 0.0;
        if (!parse_double(cell, v))
          throw DataError("criticals file: '" + trim(cell) + "' is not numeric");
        cv.values.push_back(v);
      }
    }
    cv.source = "user";
  } else if (source == "bh") {
    cv = critical_values_bh(needed, spec.alpha);
  } else if (source == "bg") {
    cv = critical_values_bg(needed, spec.alpha);
  } else {
    throw UsageError("unknown criticals source: " + source);
  }
  const int got = static_cast<int>(cv.values.size());
  if (allow_longer ? got < needed : got != needed)
    throw UsageError("need " + std::string(allow_longer ? "at least " : "") +
                     std::to_string(needed) + " critical values, got " + std::to_string(got));
  try {
    cv.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return cv;
}

PairStatKind default_pair_stat(ModelKind model, int q) {
  switch (model) {
    case ModelKind::multinomial: return PairStatKind::wmw;
    case ModelKind::normal: return q == 1 ? PairStatKind::z_difference : PairStatKind::chisq;
    case ModelKind::rank: return PairStatKind::rank_z;
  }
  return PairStatKind::z_difference;
}

int cmd_analyze(const RunSpec& spec, std::ostream& out) {
  ResolvedProblem p = load_problem(spec);
  const int n_hyp = static_cast<int>(p.family.pairs().size());
  const bool is_rsd = spec.procedure == "rsd";
  if (!is_rsd && spec.procedure != "step-down" && spec.procedure != "step-up")
    throw UsageError("unknown procedure: " + spec.procedure);
  const CriticalValues cv = resolve_criticals(spec, is_rsd ? p.family.max_splits() : n_hyp, is_rsd);

  json doc;
  doc["schema"] = 1;
  RunSpec resolved = spec;
  resolved.sided = p.sided == Sidedness::one_sided ? "one" : "two";
  resolved.control = p.family.control_index() + 1;
  resolved.criticals_source =
      cv.source == "user" ? (spec.criticals_file.empty() ? "inline" : "file") : cv.source;
  doc["runspec"] = runspec_to_json(resolved);
  doc["criticals"] = criticals_to_json(cv);

  std::vector<std::string> notes;
  if (spec.procedure == "step-up" && p.model == ModelKind::multinomial &&
      p.family.shape == ProblemShape::change_point && p.sided == Sidedness::one_sided)
    notes.push_back(
        "extrapolation: step-up on the one-sided multinomial change point is outside the "
        "validated configuration set");

  DecisionReport report;
  out << "procedure: " << spec.procedure << " (" << shape_name(p.family.shape) << ", "
      << spec.model << ", " << (p.sided == Sidedness::one_sided ? "one" : "two") << "-sided)\n";
  out << "criticals (" << cv.source << "):";
  for (double c : cv.values) out << ' ' << fmt(c, "%.4g");
  out << '\n';

  if (is_rsd) {
    const std::unique_ptr<PooledModel> model =
        p.model == ModelKind::multinomial
            ? make_model(p.table, p.sided, spec.pooling == "sum")
            : make_model(p.samples, p.sided, spec.rank_n, spec.rank_w);
    RsdOptions opts;
    opts.record_candidates = true;
    const RsdResult result = rsd_run(*model, p.family, cv, opts);
    report = result.report;
    doc["trace"] = trace_to_json(result.trace);

    for (const TraceStep& s : result.trace.steps)
      out << "stage " << s.stage << ": split " << set_to_string(s.split_a) << " | "
          << set_to_string(s.split_rest) << "  H = " << fmt(s.h, "%.4g") << " > "
          << fmt(s.threshold, "%.4g") << '\n';
    out << "final partition:";
    for (const auto& b : result.trace.final_blocks) out << ' ' << set_to_string(b);
    out << '\n';
  } else {
    StatisticTable stats;
    const PairStatKind kind = default_pair_stat(p.model, p.q);
    if (p.model == ModelKind::multinomial)
      stats = pairwise_stats(p.table, p.family, p.sided);
    else
      stats = pairwise_stats(p.samples, p.family, kind, p.sided, spec.rank_n, spec.rank_w);
    report = spec.procedure == "step-down" ? step_down(stats, cv) : step_up(stats, cv);
  }

  doc["decisions"] = report_to_json(report);
  doc["notes"] = notes;

  out << "decisions:\n";
  for (const Decision& d : report.decisions) {
    out << "  H(" << d.i + 1 << "," << d.j + 1 << "): " << (d.reject ? "reject" : "accept");
    if (std::isfinite(d.statistic)) out << "  stat = " << fmt(d.statistic, "%.4g");
    if (d.stage > 0) out << "  (step " << d.stage << ")";
    out << '\n';
  }
  for (const std::string& n : notes) out << "note: " << n << '\n';

  write_output_file(spec.output_path, doc);
  return 0;
}

json violation_case_to_json(const ViolationCase& v, ModelKind model) {
  json e;
  e["instance"] = v.instance_index;
  e["k"] = v.k;
  e["q"] = v.q;
  e["data"] = v.data;
  e["pair"] = {v.pair.first + 1, v.pair.second + 1};
  e["ray"] = direction_vector(model, v.k, v.q, v.pair.first, v.pair.second).g;
  e["grid"] = v.grid;
  json pattern = json::array();
  for (bool r : v.pattern) pattern.push_back(r ? "reject" : "accept");
  e["pattern"] = std::move(pattern);
  e["violation_index"] = v.violation_index;
  e["kind"] = v.sided == Sidedness::one_sided ? "one_sided" : "two_sided";
  return e;
}

int cmd_audit(const RunSpec& spec, std::ostream& out) {
  json doc;
  doc["schema"] = 1;
  doc["runspec"] = runspec_to_json(spec);
  json instances = json::array();
  long violations = 0;

  const bool is_rsd = spec.procedure == "rsd";
  if (!is_rsd && spec.procedure != "step-down" && spec.procedure != "step-up")
    throw UsageError("unknown procedure: " + spec.procedure);
  const auto proc_kind = is_rsd                          ? ProcedureSpec::Kind::rsd
                         : spec.procedure == "step-down" ? ProcedureSpec::Kind::step_down
                                                         : ProcedureSpec::Kind::step_up;

  if (!spec.builtin.empty()) {
    const Counterexample ce = spec.builtin == "figure1"   ? counterexample_change_point()
                              : spec.builtin == "figure2" ? counterexample_tvc()
                                                          : throw UsageError("unknown builtin: " +
                                                                             spec.builtin);
    ProcedureSpec ps;
    ps.kind = proc_kind;
    ps.model = ModelKind::normal;
    ps.family = ce.family;
    ps.sided = ce.sided;
    ps.criticals = ce.criticals;
    ps.pair_stat = ce.pair_stat;
    ps.q = 1;
    const DirectionVector dir =
        direction_vector(ModelKind::normal, ce.family.k, 1, ce.ray_pair.first, ce.ray_pair.second);
    const RayScan scan = ray_decisions(make_procedure(ps), ce.x, dir, ce.grid, false);
    const auto bad = ce.sided == Sidedness::one_sided ? check_one_sided(scan.reject)
                                                      : check_two_sided(scan.reject);
    json inst;
    inst["name"] = ce.name;
    inst["data"] = ce.x;
    inst["pair"] = {ce.ray_pair.first + 1, ce.ray_pair.second + 1};
    inst["ray"] = dir.g;
    inst["grid"] = scan.grid;
    json pattern = json::array();
    for (bool r : scan.reject) pattern.push_back(r ? "reject" : "accept");
    inst["pattern"] = std::move(pattern);
    if (bad) {
      ++violations;
      inst["violation_index"] = *bad;
      inst["kind"] = ce.sided == Sidedness::one_sided ? "one_sided" : "two_sided";
    }
    instances.push_back(std::move(inst));
    out << "builtin " << ce.name << " under " << spec.procedure << ": "
        << (bad ? "interval-property violation" : "no violation") << '\n';
  } else if (spec.random_instances > 0) {
    if (!is_rsd)
      throw UsageError("--random certifies the rsd procedure; use --builtin for the classics");
    CertifySetup setup;
    setup.model = parse_model(spec.model);
    setup.shape = parse_shape(spec.family);
    setup.sided = resolve_sided(spec.sided, setup.shape);
    if (setup.shape == ProblemShape::all_pairwise && setup.sided == Sidedness::one_sided)
      throw UsageError("one-sided alternatives are not defined for all-pairwise families");
    setup.instances = spec.random_instances;
    setup.seed = spec.seed;
    const CertifyResult res = certify_random_instances(setup, !spec.serial);
    violations = res.violations;
    doc["instances_run"] = res.instances;
    doc["rays_scanned"] = res.scans;
    for (const ViolationCase& v : res.examples)
      instances.push_back(violation_case_to_json(v, setup.model));
    out << "certified " << res.instances << " random instances (" << res.scans << " rays): "
        << res.violations << " violation(s)\n";
  } else {
    if (spec.input_path.empty())
      throw UsageError("audit needs --builtin, --random, or an --input table");
    ResolvedProblem p = load_problem(spec);
    if (spec.pair.empty()) throw UsageError("audit needs --pair i,j");
    int pi = 0, pj = 0;
    if (std::sscanf(spec.pair.c_str(), "%d,%d", &pi, &pj) != 2 || pi < 1 || pj < 1 ||
        pi > p.family.k || pj > p.family.k || pi == pj)
      throw UsageError("bad --pair: " + spec.pair);
    if (spec.grid.empty()) throw UsageError("audit needs --grid a0,a1,...");

    const int n_hyp = static_cast<int>(p.family.pairs().size());
    ProcedureSpec ps;
    ps.kind = proc_kind;
    ps.model = p.model;
    ps.family = p.family;
    ps.sided = p.sided;
    ps.criticals = resolve_criticals(spec, is_rsd ? p.family.max_splits() : n_hyp, is_rsd);
    ps.pair_stat = default_pair_stat(p.model, p.q);
    ps.q = p.q;
    ps.rank_n_per_pop = spec.rank_n;
    ps.rank_w_override = spec.rank_w;
    ps.multinomial_raw_sums = spec.pooling == "sum";

    const DirectionVector dir = direction_vector(p.model, p.family.k, p.q, pi - 1, pj - 1);
    const RayScan scan = ray_decisions(make_procedure(ps), p.flat, dir, spec.grid, spec.survey);
    const auto bad = p.sided == Sidedness::one_sided ? check_one_sided(scan.reject)
                                                     : check_two_sided(scan.reject);
    json inst;
    inst["data"] = p.flat;
    inst["pair"] = {pi, pj};
    inst["ray"] = dir.g;
    inst["grid"] = scan.grid;
    inst["clipped"] = scan.clipped;
    json pattern = json::array();
    for (bool r : scan.reject) pattern.push_back(r ? "reject" : "accept");
    inst["pattern"] = std::move(pattern);
    if (bad) {
      ++violations;
      inst["violation_index"] = *bad;
      inst["kind"] = p.sided == Sidedness::one_sided ? "one_sided" : "two_sided";
    }
    instances.push_back(std::move(inst));
    out << "ray scan of H(" << pi << "," << pj << ") under " << spec.procedure << ": "
        << (bad ? "interval-property violation" : "no violation") << '\n';
  }

  doc["instances"] = std::move(instances);
  doc["violation_count"] = violations;
  write_output_file(spec.output_path, doc);
  return violations > 0 ? 3 : 0;
}

std::vector<MeanBlock> parse_blocks(const std::string& text) {
  std::vector<MeanBlock> blocks;
  if (trim(text).empty()) return blocks;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    MeanBlock b;
    int first = 0, last = 0;
    double mean = 0.0;
    if (std::sscanf(part.c_str(), "%d-%d:%lf", &first, &last, &mean) == 3) {
      b = {first, last, mean};
    } else if (std::sscanf(part.c_str(), "%d:%lf", &first, &mean) == 2) {
      b = {first, first, mean};
    } else {
      throw UsageError("bad --blocks entry '" + part + "' (use first-last:mean)");
    }
    blocks.push_back(b);
  }
  return blocks;
}

SimConfig config_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw DataError(std::string("bad config JSON: ") + e.what());
  }
  SimConfig cfg;
  cfg.k = doc.value("k", 101);
  cfg.iterations = doc.value("iterations", 5000);
  cfg.rsd_alpha = doc.value("rsd_alpha", 0.05);
  cfg.su_alpha = doc.value("su_alpha", 0.07);
  cfg.seed = doc.value("seed", std::uint64_t{0});
  if (doc.contains("blocks"))
    for (const auto& b : doc["blocks"])
      cfg.blocks.push_back({b.at("first").get<int>(), b.at("last").get<int>(),
                            b.at("mean").get<double>()});
  return cfg;
}

void write_sim_csv_header(std::ostream& out, bool with_paper) {
  out << "table,row,mean1,mean2,mean3,iterations,seed"
      << ",rsd_type1,rsd_type1_mcse,su_type1,su_type1_mcse"
      << ",rsd_type2,rsd_type2_mcse,su_type2,su_type2_mcse"
      << ",rsd_total,rsd_total_mcse,su_total,su_total_mcse"
      << ",rsd_fdr,rsd_fdr_mcse,su_fdr,su_fdr_mcse";
  if (with_paper)
    out << ",paper_rsd_type1,paper_su_type1,paper_rsd_type2,paper_su_type2"
        << ",paper_rsd_total,paper_su_total,paper_rsd_fdr,paper_su_fdr"
        << ",diff_rsd_total,diff_su_total";
  out << '\n';
}

void write_sim_csv_row(std::ostream& out, int table, int row, const RowMeans& means,
                       const SimConfig& cfg, const SimResult& sim, const PaperRow* paper) {
  auto metric = [&](const Metric& m) {
    out << ',' << fmt(m.mean, "%.6g") << ',' << fmt(m.mcse, "%.4g");
  };
  out << table << ',' << row << ',' << means.m1 << ',' << means.m2 << ',' << means.m3 << ','
      << cfg.iterations << ',' << cfg.seed;
  metric(sim.rsd.type1);
  metric(sim.su.type1);
  metric(sim.rsd.type2);
  metric(sim.su.type2);
  metric(sim.rsd.total);
  metric(sim.su.total);
  metric(sim.rsd.fdr);
  metric(sim.su.fdr);
  if (paper) {
    out << ',' << paper->rsd_type1 << ',' << paper->su_type1 << ',' << paper->rsd_type2 << ','
        << paper->su_type2 << ',' << paper->rsd_total << ',' << paper->su_total << ','
        << paper->rsd_fdr << ',' << paper->su_fdr;
    out << ',' << fmt(std::fabs(sim.rsd.total.mean - paper->rsd_total), "%.4g") << ','
        << fmt(std::fabs(sim.su.total.mean - paper->su_total), "%.4g");
  }
  out << '\n';
}

void print_sim_summary(std::ostream& out, const std::string& label, const SimResult& sim) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "%-18s  typeI %.2f/%.2f  typeII %.2f/%.2f  total %.2f/%.2f  fdr %.3f/%.3f\n",
                label.c_str(), sim.rsd.type1.mean, sim.su.type1.mean, sim.rsd.type2.mean,
                sim.su.type2.mean, sim.rsd.total.mean, sim.su.total.mean, sim.rsd.fdr.mean,
                sim.su.fdr.mean);
  out << buf;
}

int cmd_simulate(const RunSpec& spec, std::ostream& out) {
  SimConfig cfg;
  if (!spec.config_path.empty()) {
    cfg = config_from_json_file(spec.config_path);
    if (spec.seed != 0) cfg.seed = spec.seed;
  } else {
    cfg.k = spec.sim_k;
    cfg.iterations = spec.iterations;
    cfg.rsd_alpha = spec.rsd_alpha;
    cfg.su_alpha = spec.su_alpha;
    cfg.seed = spec.seed;
    cfg.blocks = parse_blocks(spec.blocks);
  }
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const SimResult sim = simulate(cfg, spec.serial ? ExecMode::serial : ExecMode::parallel);

  out << "k = " << cfg.k << ", iterations = " << cfg.iterations << ", seed = " << cfg.seed
      << ", rsd_alpha = " << cfg.rsd_alpha << ", su_alpha = " << cfg.su_alpha << '\n';
  out << "metrics are rsd/su pairs\n";
  print_sim_summary(out, "custom", sim);

  if (!spec.output_path.empty()) {
    std::ofstream file(spec.output_path);
    if (!file) throw DataError("cannot open output file: " + spec.output_path);
    write_sim_csv_header(file, false);
    RowMeans means{0, 0, 0};
    if (cfg.blocks.size() > 0) means.m1 = cfg.blocks[0].mean;
    if (cfg.blocks.size() > 1) means.m2 = cfg.blocks[1].mean;
    if (cfg.blocks.size() > 2) means.m3 = cfg.blocks[2].mean;
    write_sim_csv_row(file, 0, 0, means, cfg, sim, nullptr);
  }
  return 0;
}

int cmd_reproduce(const RunSpec& spec, std::ostream& out) {
  if (spec.iterations < 1) throw UsageError("iterations must be >= 1");
  std::vector<int> rows = spec.rows;
  for (int r : rows)
    if (r < 1 || r > 17) throw UsageError("row " + std::to_string(r) + " is outside 1..17");
  if (rows.empty())
    for (int r = 1; r <= 17; ++r) rows.push_back(r);
  const auto comparisons =
      table_runner(spec.table, rows, spec.iterations,
                   spec.seed, spec.serial ? ExecMode::serial : ExecMode::parallel);

  out << "table " << spec.table << ", " << spec.iterations << " iterations, seed " << spec.seed
      << "; simulated (published) metrics, rsd/su pairs\n";
  for (const RowComparison& rc : comparisons) {
    char buf[320];
    std::snprintf(buf, sizeof(buf),
                  "row %2d [%5.2f %5.2f %5.2f]  typeI %.2f(%.1f)/%.2f(%.1f)  "
                  "typeII %.2f(%.1f)/%.2f(%.1f)  total %.2f(%.1f)/%.2f(%.1f)  "
                  "fdr %.3f(%.3f)/%.3f(%.3f)\n",
                  rc.row, rc.means.m1, rc.means.m2, rc.means.m3, rc.sim.rsd.type1.mean,
                  rc.paper.rsd_type1, rc.sim.su.type1.mean, rc.paper.su_type1,
                  rc.sim.rsd.type2.mean, rc.paper.rsd_type2, rc.sim.su.type2.mean,
                  rc.paper.su_type2, rc.sim.rsd.total.mean, rc.paper.rsd_total,
                  rc.sim.su.total.mean, rc.paper.su_total, rc.sim.rsd.fdr.mean,
                  rc.paper.rsd_fdr, rc.sim.su.fdr.mean, rc.paper.su_fdr);
    out << buf;
  }

  if (!spec.output_path.empty()) {
    std::ofstream file(spec.output_path);
    if (!file) throw DataError("cannot open output file: " + spec.output_path);
    write_sim_csv_header(file, true);
    for (const RowComparison& rc : comparisons)
      write_sim_csv_row(file, rc.table, rc.row, rc.means, rc.config, rc.sim, &rc.paper);
  }
  return 0;
}

}  // namespace

int run(const RunSpec& spec, std::ostream& out, std::ostream& err) {
  try {
    if (spec.subcommand == "analyze") return cmd_analyze(spec, out);
    if (spec.subcommand == "audit") return cmd_audit(spec, out);
    if (spec.subcommand == "simulate") return cmd_simulate(spec, out);
    if (spec.subcommand == "reproduce") return cmd_reproduce(spec, out);
    throw UsageError("unknown subcommand: " + spec.subcommand);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "data error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace rsd
