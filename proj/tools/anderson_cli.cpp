#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "anderson/anderson.h"

namespace {

constexpr int kPass = 0;
constexpr int kFail = 1;
constexpr int kConfigError = 2;

int status_exit(anderson_status s) {
  std::cerr << "error: " << anderson_last_error() << '\n';
  return s == ANDERSON_E_CONFIG || s == ANDERSON_E_IO || s == ANDERSON_E_INVALID_ARGUMENT ? kConfigError : kFail;
}

void print_record(const char* line, void* user) {
  const bool quiet = *static_cast<bool*>(user);
  auto j = nlohmann::json::parse(line);
  if (j["cell"].is_string()) {
    for (const auto& a : j["assertions"])
      std::cout << (a["passed"].get<bool>() ? "PASS " : "FAIL ") << j["experiment"].get<std::string>() << '/'
                << a["name"].get<std::string>() << ": " << a["detail"].get<std::string>() << '\n';
    return;
  }
  if (quiet) return;
  std::string seed = j["cell"]["seed"].is_null() ? "-" : j["cell"]["seed"].dump();
  std::string eps = j["cell"]["eps"].is_null() ? "-" : j["cell"]["eps"].dump();
  std::fprintf(stderr, "cell seed=%s eps=%s %s %.2fs%s%s\n", seed.c_str(), eps.c_str(),
               j["status"].get<std::string>().c_str(), j["wall_clock_s"].get<double>(),
               j.contains("error") ? " " : "", j.value("error", "").c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Anderson Hamiltonian experiments on the periodic torus"};
  app.set_version_flag("--version", std::string(anderson_version()));
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run one experiment and write its records");
  std::string experiment, config_file;
  bool assert_flag = false, quiet = false;
  run->add_option("--experiment", experiment, "experiment name");
  run->add_option("--config", config_file, "key = value config file")->check(CLI::ExistingFile);
  run->add_flag("--assert", assert_flag, "exit 1 when a built-in assertion fails");
  run->add_flag("--quiet", quiet, "do not print per-cell progress");
  std::map<std::string, std::string> overrides;
  for (std::size_t i = 0; i < anderson_config_key_count(); ++i) {
    const std::string key = anderson_config_key_name(i);
    if (key == "experiment") continue;
    std::string names = "--" + key;
    if (key == "output") names += ",--out";
    run->add_option_function<std::string>(names, [&overrides, key](const std::string& v) { overrides[key] = v; },
                                          "config override");
  }

  auto* report = app.add_subcommand("report", "summarize every records file in a directory");
  std::string in_dir, filter;
  report->add_option("--in", in_dir, "records directory")->required();
  report->add_option("--experiment", filter, "restrict to one experiment");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kPass : kConfigError;
  }

  if (run->parsed()) {
    anderson_config* cfg = nullptr;
    if (auto s = anderson_config_create(&cfg); s != ANDERSON_OK) return status_exit(s);
    auto done = [&](int code) {
      anderson_config_destroy(cfg);
      return code;
    };
    if (!config_file.empty())
      if (auto s = anderson_config_load_file(cfg, config_file.c_str()); s != ANDERSON_OK) return done(status_exit(s));
    if (!experiment.empty()) anderson_config_set(cfg, "experiment", experiment.c_str());
    for (const auto& [k, v] : overrides) anderson_config_set(cfg, k.c_str(), v.c_str());
    if (auto s = anderson_config_validate(cfg); s != ANDERSON_OK) return done(status_exit(s));

    anderson_run* result = nullptr;
    if (auto s = anderson_run_experiment(cfg, print_record, &quiet, &result); s != ANDERSON_OK)
      return done(status_exit(s));
    const bool passed = anderson_run_passed(result) != 0;
    std::cout << "records: " << anderson_run_records_path(result) << '\n'
              << "csv: " << anderson_run_csv_path(result) << '\n'
              << "overall: " << (passed ? "PASS" : "FAIL") << '\n';
    anderson_run_destroy(result);
    return done(assert_flag && !passed ? kFail : kPass);
  }

  anderson_report* rep = nullptr;
  if (auto s = anderson_report_create(in_dir.c_str(), filter.empty() ? nullptr : filter.c_str(), &rep);
      s != ANDERSON_OK)
    return status_exit(s);
  std::cout << anderson_report_table(rep);
  const bool bad = anderson_report_failed(rep) || anderson_report_empty(rep);
  anderson_report_destroy(rep);
  return bad ? kFail : kPass;
}
