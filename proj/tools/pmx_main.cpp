#include <CLI11.hpp>
#include <iostream>
#include <string>

#include "pmx/io.hpp"

namespace {

pmx::FitOptions::Method parse_method(const std::string& m) {
  if (m == "ml") return pmx::FitOptions::Method::ML;
  if (m == "reml") return pmx::FitOptions::Method::REML;
  throw CLI::ValidationError("--method must be ml or reml");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pattern-mixture analysis of paired 2x2 crossover data"};
  app.require_subcommand(1);

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "Fit the pattern-mixture model and test the contrast");
  std::string input, method = "reml", grouping = "default", out_path, config_path;
  bool naive = false;
  std::vector<double> contrast;
  fit_cmd->add_option("--input", input, "CSV file (pair_id,sequence,y_1A,y_1B,y_2A,y_2B)");
  fit_cmd->add_option("--method", method, "ml|reml (default reml)");
  fit_cmd->add_option("--grouping", grouping, "default|merged-dp|FILE with [grouping] section");
  fit_cmd->add_flag("--naive", naive, "single-group, pattern-ignoring analysis");
  fit_cmd->add_option("--contrast", contrast, "four contrast coefficients a,b,c,d")
      ->delimiter(',')
      ->expected(0, 4);
  fit_cmd->add_option("--out", out_path, "report path (default stdout)");
  fit_cmd->add_option("--config", config_path, "config file; flags override its values");

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo calibration study");
  std::string scenario_path, sim_out, sim_method = "ml";
  int reps = 100, threads = 1;
  uint64_t seed = 0;
  bool seed_set = false;
  sim_cmd->add_option("--scenario", scenario_path, "scenario config (default: built-in)");
  sim_cmd->add_option("--reps", reps, "number of replicates");
  sim_cmd->add_option("--seed", seed, "master seed override")->each([&](const std::string&) {
    seed_set = true;
  });
  sim_cmd->add_option("--method", sim_method, "ml|reml");
  sim_cmd->add_option("--threads", threads, "worker threads");
  sim_cmd->add_option("--out", sim_out, "report path (default stdout)");

  // patterns
  auto* pat_cmd = app.add_subcommand("patterns", "Print the 15-pattern taxonomy");

  // validate
  auto* val_cmd = app.add_subcommand("validate", "Check a CSV file and report bad rows");
  std::string val_input;
  val_cmd->add_option("--input", val_input, "CSV file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (fit_cmd->parsed()) {
      pmx::RunConfig cfg;
      if (!config_path.empty()) {
        const auto file = pmx::ConfigFile::parse(config_path);
        if (const auto* v = file.find("", "input")) cfg.input_path = *v;
        if (const auto* v = file.find("", "method")) method = fit_cmd->count("--method") ? method : *v;
        if (const auto* v = file.find("", "grouping"))
          grouping = fit_cmd->count("--grouping") ? grouping : *v;
        if (const auto* v = file.find("", "naive"))
          if (!naive) naive = (*v == "true" || *v == "1");
        if (const auto* v = file.find("", "out"))
          if (out_path.empty()) out_path = *v;
        if (const auto* v = file.find("", "contrast"))
          if (contrast.empty()) {
            std::stringstream ss(*v);
            std::string tok;
            while (std::getline(ss, tok, ',')) contrast.push_back(std::stod(tok));
          }
        if (auto sit = file.sections.find("labels"); sit != file.sections.end()) {
          cfg.labels = sit->second;
        }
        if (const auto* v = file.find("optimizer", "max_iter")) cfg.optimizer.max_iter = std::stoi(*v);
        if (const auto* v = file.find("optimizer", "grad_tol")) cfg.optimizer.grad_tol = std::stod(*v);
        if (const auto* v = file.find("optimizer", "obj_tol")) cfg.optimizer.obj_tol = std::stod(*v);
      }
      if (!input.empty()) cfg.input_path = input;
      if (cfg.input_path.empty()) {
        std::cerr << "error: no --input given\n";
        return 1;
      }
      cfg.method = parse_method(method);
      cfg.grouping = grouping;
      cfg.naive = naive;
      cfg.output_path = out_path;
      if (!contrast.empty()) {
        if (contrast.size() != 4) {
          std::cerr << "error: --contrast needs exactly 4 values\n";
          return 1;
        }
        cfg.contrast = Eigen::Vector4d(contrast[0], contrast[1], contrast[2], contrast[3]);
      }
      return pmx::cmd_fit(cfg, std::cout, std::cerr);
    }
    if (sim_cmd->parsed()) {
      return pmx::cmd_simulate(scenario_path, reps, seed, seed_set, parse_method(sim_method),
                               threads, sim_out, std::cout, std::cerr);
    }
    if (pat_cmd->parsed()) return pmx::cmd_patterns(std::cout);
    if (val_cmd->parsed()) return pmx::cmd_validate(val_input, std::cout, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
