#include "pmx/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace pmx {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char delim) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, delim)) out.push_back(item);
  if (!s.empty() && s.back() == delim) out.push_back("");
  return out;
}

bool parse_double(const std::string& s, double& out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  char* end = nullptr;
  out = std::strtod(t.c_str(), &end);
  return end == t.c_str() + t.size();
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  for (const auto& item : split(s, ',')) {
    double v = 0.0;
    if (!parse_double(item, v)) throw PmxError("bad numeric list entry: '" + item + "'");
    out.push_back(v);
  }
  return out;
}

std::string mask_string(PatternId p) {
  const auto m = mask_of(p);
  std::string out;
  for (int i = 0; i < 4; ++i) {
    if (i) out += ' ';
    out += m.observed[static_cast<size_t>(i)] ? 'X' : '?';
  }
  return out;
}

}  // namespace

Dataset parse_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FileNotFound(path);
  return parse_csv_stream(in, path);
}

Dataset parse_csv_stream(std::istream& in, const std::string& source) {
  Dataset ds;
  ds.source = source;
  std::string line;
  if (!std::getline(in, line)) throw MalformedHeader("empty file: " + source);
  {
    auto fields = split(line, ',');
    const std::vector<std::string> expected = {"pair_id", "sequence", "y_1A",
                                               "y_1B",    "y_2A",     "y_2B"};
    if (fields.size() != expected.size()) throw MalformedHeader("bad header: " + line);
    for (size_t i = 0; i < expected.size(); ++i) {
      if (trim(fields[i]) != expected[i]) throw MalformedHeader("bad header: " + line);
    }
  }
  std::set<std::string> seen_ids;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    ++ds.rows_read;
    auto fields = split(line, ',');
    if (fields.size() != 6) {
      ds.rejected.push_back({lineno, "expected 6 fields, got " + std::to_string(fields.size())});
      continue;
    }
    PairRecord rec;
    rec.pair_id = trim(fields[0]);
    if (rec.pair_id.empty()) {
      ds.rejected.push_back({lineno, "empty pair_id"});
      continue;
    }
    if (!seen_ids.insert(rec.pair_id).second) {
      ds.rejected.push_back({lineno, "duplicate pair_id: " + rec.pair_id});
      continue;
    }
    const std::string seq = trim(fields[1]);
    if (seq == "1") {
      rec.sequence = SequenceId::Seq1;
    } else if (seq == "2") {
      rec.sequence = SequenceId::Seq2;
    } else {
      ds.rejected.push_back({lineno, "sequence must be 1 or 2, got '" + seq + "'"});
      continue;
    }
    bool bad = false;
    for (int pos = 0; pos < kNumPositions; ++pos) {
      const std::string cell = trim(fields[static_cast<size_t>(pos) + 2]);
      if (cell.empty() || cell == "NA") continue;
      double v = 0.0;
      if (!parse_double(cell, v)) {
        ds.rejected.push_back({lineno, std::string("non-numeric value in y_") +
                                           kPositionNames[static_cast<size_t>(pos)] + ": '" +
                                           cell + "'"});
        bad = true;
        break;
      }
      rec.y[static_cast<size_t>(pos)] = v;
    }
    if (bad) continue;
    if (rec.num_observed() == 0) {
      ds.rejected.push_back({lineno, "all four responses missing"});
      continue;
    }
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

void write_csv(const std::vector<PairRecord>& records, std::ostream& out) {
  out << "pair_id,sequence,y_1A,y_1B,y_2A,y_2B\n";
  out.precision(17);
  for (const auto& rec : records) {
    out << rec.pair_id << ',' << (seq_index(rec.sequence) + 1);
    for (const auto& v : rec.y) {
      out << ',';
      if (v) out << *v;
    }
    out << '\n';
  }
}

ConfigFile ConfigFile::parse(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FileNotFound(path);
  return parse_stream(in);
}

ConfigFile ConfigFile::parse_stream(std::istream& in) {
  ConfigFile cfg;
  std::string line;
  std::string section;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') {
      section = trim(line.substr(1, line.size() - 2));
      cfg.sections[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw PmxError("config line has no '=': " + line);
    cfg.sections[section][trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return cfg;
}

const std::string* ConfigFile::find(const std::string& section, const std::string& key) const {
  auto sit = sections.find(section);
  if (sit == sections.end()) return nullptr;
  auto kit = sit->second.find(key);
  return kit == sit->second.end() ? nullptr : &kit->second;
}

GroupingScheme load_grouping(const std::string& spec) {
  if (spec == "default") return GroupingScheme::default_scheme();
  if (spec == "merged-dp") return GroupingScheme::merged_dp();
  if (spec == "naive") return GroupingScheme::naive();
  const ConfigFile cfg = ConfigFile::parse(spec);
  auto sit = cfg.sections.find("grouping");
  if (sit == cfg.sections.end()) {
    throw PmxError("grouping file " + spec + " has no [grouping] section");
  }
  GroupingScheme scheme;
  std::array<bool, kNumPatterns> assigned{};
  for (const auto& [key, label] : sit->second) {
    int p = -1;
    try {
      p = std::stoi(key);
    } catch (...) {
      throw PmxError("bad pattern index in grouping file: " + key);
    }
    if (p < 0 || p >= kNumPatterns) throw PmxError("pattern index out of range: " + key);
    scheme.group_of[static_cast<size_t>(p)] = label;
    assigned[static_cast<size_t>(p)] = true;
  }
  for (int p = 0; p < kNumPatterns; ++p) {
    if (!assigned[static_cast<size_t>(p)]) {
      throw PmxError("grouping file does not assign pattern " + std::to_string(p));
    }
    const auto& label = scheme.group_of[static_cast<size_t>(p)];
    if (std::find(scheme.groups.begin(), scheme.groups.end(), label) == scheme.groups.end()) {
      scheme.groups.push_back(label);
    }
  }
  if (const auto* v = cfg.find("", "min_pairs_per_group")) {
    scheme.min_pairs_per_group = std::stoi(*v);
  }
  return scheme;
}

SimScenario scenario_from_config(const ConfigFile& cfg) {
  SimScenario scn;
  auto require = [&cfg](const std::string& section, const std::string& key) -> const std::string& {
    const auto* v = cfg.find(section, key);
    if (!v) throw InvalidScenario("scenario missing " + (section.empty() ? key : section + "." + key));
    return *v;
  };
  scn.n_pairs = std::stoi(require("", "n_pairs"));
  if (const auto* v = cfg.find("", "seed")) scn.seed = std::stoull(*v);
  for (const auto& g : split(require("", "groups"), ',')) scn.groups.push_back(trim(g));
  scn.group_probs = parse_double_list(require("", "group_probs"));

  Eigen::Matrix4d sigma;
  for (int i = 0; i < 4; ++i) {
    const auto row = parse_double_list(require("sigma", "row" + std::to_string(i + 1)));
    if (row.size() != 4) throw InvalidScenario("sigma rows need 4 entries");
    for (int j = 0; j < 4; ++j) sigma(i, j) = row[static_cast<size_t>(j)];
  }
  scn.true_sigma = sigma;

  for (const auto& g : scn.groups) {
    const std::string sec = "group." + g;
    const auto mu = parse_double_list(require(sec, "mu"));
    const auto rho = parse_double_list(require(sec, "rho"));
    const auto nu = parse_double_list(require(sec, "nu"));
    if (mu.size() != 4 || rho.size() != 2 || nu.size() != 2) {
      throw InvalidScenario("group " + g + " needs mu(4), rho(2), nu(2)");
    }
    GroupEffects b;
    b.mu_1A = mu[0];
    b.mu_1B = mu[1];
    b.mu_2A = mu[2];
    b.mu_2B = mu[3];
    b.rho_1 = rho[0];
    b.rho_2 = rho[1];
    b.nu_1 = nu[0];
    b.nu_2 = nu[1];
    scn.true_betas[g] = b;

    const auto pats = split(require(sec, "patterns"), ',');
    const auto probs = parse_double_list(require(sec, "pattern_probs"));
    if (pats.size() != probs.size()) {
      throw InvalidScenario("group " + g + ": patterns and pattern_probs differ in length");
    }
    std::vector<PatternCell> cells;
    for (size_t i = 0; i < pats.size(); ++i) {
      const auto parts = split(trim(pats[i]), ':');
      if (parts.size() != 2) {
        throw InvalidScenario("pattern entries must look like 'pattern:sequence'");
      }
      PatternCell cell;
      cell.pattern = PatternId{std::stoi(trim(parts[0]))};
      const int s = std::stoi(trim(parts[1]));
      if (s != 1 && s != 2) throw InvalidScenario("sequence must be 1 or 2");
      cell.sequence = s == 1 ? SequenceId::Seq1 : SequenceId::Seq2;
      cell.prob = probs[i];
      cells.push_back(cell);
    }
    scn.pattern_probs[g] = cells;
  }
  return scn;
}

namespace {

nlohmann::json effects_json(const ModelFit& mf, const GroupLabel& g) {
  nlohmann::json out;
  const int gi = mf.group_index(g);
  const auto beta = mf.betas.at(g).as_vector();
  for (int i = 0; i < kEffectsPerGroup; ++i) {
    const double var = mf.beta_cov(gi * kEffectsPerGroup + i, gi * kEffectsPerGroup + i);
    const nlohmann::json se = var > 0 ? nlohmann::json(std::sqrt(var)) : nlohmann::json(nullptr);
    out[kEffectNames[static_cast<size_t>(i)]] = {{"estimate", beta(i)}, {"se", se}};
  }
  return out;
}

}  // namespace

nlohmann::json fit_report(const Dataset& data, const GroupingScheme& scheme, const ModelFit& mf,
                          const InferenceResult& inf, const RunConfig& cfg) {
  const PatternCounts counts = tabulate(data.records, scheme);
  nlohmann::json rep;
  rep["meta"] = {{"input", data.source},
                 {"method", mf.method == FitOptions::Method::ML ? "ml" : "reml"},
                 {"grouping", cfg.naive ? "naive (pattern-ignoring)" : cfg.grouping},
                 {"n_pairs", counts.total},
                 {"rows_read", data.rows_read},
                 {"rows_rejected", static_cast<int>(data.rejected.size())}};
  if (!cfg.labels.empty()) rep["meta"]["labels"] = cfg.labels;

  nlohmann::json pats = nlohmann::json::array();
  for (int p = 0; p < kNumPatterns; ++p) {
    pats.push_back({{"pattern", p},
                    {"mask", mask_string(PatternId{p})},
                    {"group", scheme.group_of[static_cast<size_t>(p)]},
                    {"count_seq1", counts.n_ps[static_cast<size_t>(p)][0]},
                    {"count_seq2", counts.n_ps[static_cast<size_t>(p)][1]}});
  }
  rep["pattern_counts"] = {{"patterns", pats},
                           {"n_seq1", counts.n_s[0]},
                           {"n_seq2", counts.n_s[1]},
                           {"n_group", counts.n_g},
                           {"total", counts.total}};

  nlohmann::json props;
  props["group"] = mf.proportions.pi_g;
  nlohmann::json per_seq = nlohmann::json::array();
  for (int p = 0; p < kNumPatterns; ++p) {
    nlohmann::json row = {{"pattern", p}};
    for (int s = 0; s < kNumSequences; ++s) {
      const std::string key = "seq" + std::to_string(s + 1);
      if (mf.proportions.seq_available[static_cast<size_t>(s)]) {
        row[key] = mf.proportions.pi_ps[static_cast<size_t>(p)][static_cast<size_t>(s)];
      } else {
        row[key] = nullptr;
      }
    }
    per_seq.push_back(row);
  }
  props["per_sequence"] = per_seq;
  rep["proportions"] = props;

  nlohmann::json groups;
  for (const auto& g : mf.groups) groups[g] = effects_json(mf, g);
  rep["groups"] = groups;

  nlohmann::json sigma = nlohmann::json::array();
  for (int i = 0; i < 4; ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < 4; ++j) row.push_back(mf.cov.sigma(i, j));
    sigma.push_back(row);
  }
  rep["covariance"] = sigma;

  const PooledMeans pm = pooled_means(mf);
  nlohmann::json pooled;
  for (int i = 0; i < 4; ++i) {
    pooled[std::string("mu_") + kPositionNames[static_cast<size_t>(i)]] = {
        {"estimate", pm.means(i)},
        {"se", pm.covariance(i, i) > 0 ? std::sqrt(pm.covariance(i, i)) : 0.0}};
  }
  rep["pooled"] = pooled;

  rep["gamma"] = {{"estimate", inf.gamma_hat},
                  {"se", inf.se},
                  {"z", inf.z},
                  {"p_two_sided", inf.degenerate ? nlohmann::json(nullptr)
                                                 : nlohmann::json(inf.p_two_sided)},
                  {"ci_95", {inf.ci_95[0], inf.ci_95[1]}},
                  {"contrast", {inf.contrast(0), inf.contrast(1), inf.contrast(2), inf.contrast(3)}},
                  {"degenerate", inf.degenerate}};

  rep["convergence"] = {{"converged", mf.converged},
                        {"iterations", mf.iterations},
                        {"loglik", mf.loglik},
                        {"scaled_grad_norm", mf.grad_norm}};
  rep["warnings"] = mf.warnings;

  nlohmann::json rejected = nlohmann::json::array();
  for (const auto& r : data.rejected) rejected.push_back({{"line", r.line}, {"reason", r.message}});
  rep["rejected_rows"] = rejected;
  return rep;
}

nlohmann::json calibration_report_json(const CalibrationReport& rep, const SimScenario& scn) {
  nlohmann::json j;
  j["scenario"] = {{"n_pairs", scn.n_pairs}, {"seed", scn.seed}, {"groups", scn.groups}};
  j["replicates"] = rep.replicates;
  j["failures"] = rep.failures;
  j["gamma"] = {{"truth", rep.gamma_true},
                {"mean_estimate", rep.gamma_mean},
                {"bias", rep.gamma_bias},
                {"empirical_sd", rep.gamma_empirical_sd},
                {"mean_reported_se", rep.mean_reported_se},
                {"coverage_95", rep.coverage_95}};
  nlohmann::json bias;
  for (int i = 0; i < 4; ++i) {
    bias[std::string("mu_") + kPositionNames[static_cast<size_t>(i)]] = rep.pooled_mean_bias(i);
  }
  j["pooled_mean_bias"] = bias;
  j["warnings"] = rep.warnings;
  return j;
}

void write_text(const std::string& path_or_empty, const std::string& text, std::ostream& fallback) {
  if (path_or_empty.empty()) {
    fallback << text << '\n';
    return;
  }
  std::ofstream out(path_or_empty);
  if (!out) throw PmxError("cannot write " + path_or_empty);
  out << text << '\n';
}

int cmd_fit(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  Dataset data;
  GroupingScheme scheme;
  try {
    data = parse_csv(cfg.input_path);
    scheme = cfg.naive ? GroupingScheme::naive() : load_grouping(cfg.grouping);
    if (data.records.empty()) throw PmxError("no usable rows in " + cfg.input_path);
  } catch (const PmxError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  try {
    FitOptions opts = cfg.optimizer;
    opts.method = cfg.method;
    const ModelFit mf = fit(data.records, scheme, opts);
    const InferenceResult inf = delta_variance(mf, cfg.contrast);
    const nlohmann::json rep = fit_report(data, scheme, mf, inf, cfg);
    write_text(cfg.output_path, rep.dump(2), out);
    if (!mf.converged) {
      err << "warning: optimizer did not converge\n";
      return 2;
    }
    return 0;
  } catch (const PmxError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

int cmd_simulate(const std::string& scenario_path, int reps, uint64_t seed_override,
                 bool has_seed_override, FitOptions::Method method, int threads,
                 const std::string& out_path, std::ostream& out, std::ostream& err) {
  try {
    SimScenario scn;
    if (scenario_path.empty()) {
      scn = default_scenario();
    } else {
      scn = scenario_from_config(ConfigFile::parse(scenario_path));
    }
    if (has_seed_override) scn.seed = seed_override;
    const GroupingScheme scheme = GroupingScheme::default_scheme();
    const CalibrationReport rep = run_calibration(scn, scheme, reps, method, threads);
    write_text(out_path, calibration_report_json(rep, scn).dump(2), out);
    return 0;
  } catch (const PmxError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

int cmd_patterns(std::ostream& out) {
  const GroupingScheme scheme = GroupingScheme::default_scheme();
  out << "pattern  mask(1A 1B 2A 2B)  monotone  group\n";
  for (int p = 0; p < kNumPatterns; ++p) {
    out << (p < 10 ? " " : "") << p << "       " << mask_string(PatternId{p}) << "            "
        << (monotone_within_subject(PatternId{p}) ? "yes" : "no ") << "       "
        << scheme.group_of[static_cast<size_t>(p)] << '\n';
  }
  return 0;
}

int cmd_validate(const std::string& input_path, std::ostream& out, std::ostream& err) {
  try {
    const Dataset ds = parse_csv(input_path);
    out << "rows read: " << ds.rows_read << '\n';
    out << "records accepted: " << ds.records.size() << '\n';
    out << "rows rejected: " << ds.rejected.size() << '\n';
    for (const auto& r : ds.rejected) {
      out << "  line " << r.line << ": " << r.message << '\n';
    }
    return 0;
  } catch (const PmxError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace pmx
