#pragma once

#include <iosfwd>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "pmx/estimation.hpp"
#include "pmx/inference.hpp"
#include "pmx/simulate.hpp"
#include "pmx/types.hpp"

namespace pmx {

struct RowIssue {
  int line = 0;
  std::string message;
};

struct Dataset {
  std::vector<PairRecord> records;
  std::string source;
  int rows_read = 0;
  std::vector<RowIssue> rejected;
};

struct FileNotFound : PmxError {
  explicit FileNotFound(const std::string& path) : PmxError("cannot open file: " + path) {}
};

struct MalformedHeader : PmxError {
  using PmxError::PmxError;
};

// Wide format: pair_id,sequence,y_1A,y_1B,y_2A,y_2B. Empty cell or NA means
// missing. Bad rows are logged in `rejected`, not fatal; a bad header is.
Dataset parse_csv(const std::string& path);
Dataset parse_csv_stream(std::istream& in, const std::string& source);

void write_csv(const std::vector<PairRecord>& records, std::ostream& out);

// Simple key/value config with [section] blocks; '#' starts a comment.
struct ConfigFile {
  std::map<std::string, std::map<std::string, std::string>> sections;  // "" = top level

  static ConfigFile parse(const std::string& path);
  static ConfigFile parse_stream(std::istream& in);
  const std::string* find(const std::string& section, const std::string& key) const;
};

struct RunConfig {
  std::string input_path;
  std::string config_path;
  std::string output_path;  // empty = stdout
  FitOptions::Method method = FitOptions::Method::REML;
  std::string grouping = "default";  // default | merged-dp | FILE
  bool naive = false;
  Eigen::Vector4d contrast = Eigen::Vector4d(1, -1, -1, 1);
  FitOptions optimizer;
  std::map<std::string, std::string> labels;
};

// "default", "merged-dp", "naive", or a config file with a [grouping] section
// mapping pattern index -> group label.
GroupingScheme load_grouping(const std::string& spec);

SimScenario scenario_from_config(const ConfigFile& cfg);

nlohmann::json fit_report(const Dataset& data, const GroupingScheme& scheme, const ModelFit& mf,
                          const InferenceResult& inf, const RunConfig& cfg);
nlohmann::json calibration_report_json(const CalibrationReport& rep, const SimScenario& scn);

// Subcommand drivers; diagnostics go to `err`. Exit codes: 0 ok, 1 input
// error, 2 non-convergence.
int cmd_fit(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_simulate(const std::string& scenario_path, int reps, uint64_t seed_override,
                 bool has_seed_override, FitOptions::Method method, int threads,
                 const std::string& out_path, std::ostream& out, std::ostream& err);
int cmd_patterns(std::ostream& out);
int cmd_validate(const std::string& input_path, std::ostream& out, std::ostream& err);

void write_text(const std::string& path_or_empty, const std::string& text, std::ostream& fallback);

}  // namespace pmx
