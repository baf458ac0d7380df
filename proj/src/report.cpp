#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "anderson/error.hpp"
#include "anderson/experiments.hpp"

namespace anderson {

std::vector<ResultRecord> read_records(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) fail(ErrorCode::io, "not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::vector<ResultRecord> out;
  for (const auto& f : files) {
    std::ifstream in(f);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      try {
        out.push_back(ResultRecord::from_json(nlohmann::json::parse(line)));
      } catch (const std::exception& e) {
        fail(ErrorCode::io, f.string() + ":" + std::to_string(lineno) + ": malformed record: " + e.what());
      }
    }
  }
  return out;
}

Report emit_report(const std::vector<ResultRecord>& records, const std::string& experiment_filter) {
  struct Group {
    std::string experiment, hash;
    std::size_t cells = 0, errors = 0;
    const ResultRecord* aggregate = nullptr;
  };
  std::vector<Group> groups;
  auto find = [&](const ResultRecord& r) -> Group& {
    for (auto& g : groups)
      if (g.experiment == r.experiment && g.hash == r.config_hash) return g;
    groups.push_back({r.experiment, r.config_hash});
    return groups.back();
  };
  for (const auto& r : records) {
    if (!experiment_filter.empty() && r.experiment != experiment_filter) continue;
    auto& g = find(r);
    if (r.is_aggregate()) {
      g.aggregate = &r;
    } else {
      ++g.cells;
      if (r.status != "ok") ++g.errors;
    }
  }

  Report rep;
  rep.empty = groups.empty();
  nlohmann::json summary;
  summary["filter"] = experiment_filter;
  if (rep.empty) {
    rep.table = "no data" + (experiment_filter.empty() ? std::string() : " for experiment '" + experiment_filter + "'") + "\n";
    summary["no_data"] = true;
    summary["failed"] = false;
    summary["runs"] = nlohmann::json::array();
    rep.summary = summary;
    return rep;
  }

  std::ostringstream t;
  char line[256];
  std::snprintf(line, sizeof line, "%-22s %-16s %6s %6s %10s  %s\n", "experiment", "config_hash", "cells", "errors",
                "assertions", "status");
  t << line << std::string(72, '-') << '\n';
  nlohmann::json runs = nlohmann::json::array();
  std::ostringstream details;
  for (const auto& g : groups) {
    std::size_t passed = 0, total = 0;
    bool ok = g.aggregate != nullptr && g.aggregate->passed();
    nlohmann::json run{{"experiment", g.experiment}, {"config_hash", g.hash}, {"cells", g.cells},
                       {"errors", g.errors}};
    nlohmann::json as = nlohmann::json::array();
    if (g.aggregate) {
      for (const auto& a : g.aggregate->assertions) {
        total += 1;
        passed += a.passed ? 1 : 0;
        as.push_back({{"name", a.name}, {"passed", a.passed}, {"detail", a.detail}});
        details << "  [" << (a.passed ? "PASS" : "FAIL") << "] " << g.experiment << '/' << a.name << ": "
                << a.detail << '\n';
      }
      if (g.aggregate->status != "ok")
        details << "  [FAIL] " << g.experiment << "/aggregate: " << g.aggregate->error << '\n';
    } else {
      details << "  [FAIL] " << g.experiment << ": no aggregate record (incomplete run)\n";
    }
    run["assertions"] = as;
    run["passed"] = ok;
    runs.push_back(run);
    rep.failed = rep.failed || !ok;
    std::string counts = std::to_string(passed) + "/" + std::to_string(total);
    std::snprintf(line, sizeof line, "%-22s %-16s %6zu %6zu %10s  %s\n", g.experiment.c_str(), g.hash.c_str(),
                  g.cells, g.errors, counts.c_str(), ok ? "PASS" : "FAIL");
    t << line;
  }
  t << '\n' << details.str();
  t << "\noverall: " << (rep.failed ? "FAIL" : "PASS") << '\n';
  summary["no_data"] = false;
  summary["failed"] = rep.failed;
  summary["runs"] = runs;
  rep.table = t.str();
  rep.summary = summary;
  return rep;
}

Report write_report(const std::filesystem::path& dir, const std::string& experiment_filter) {
  auto rep = emit_report(read_records(dir), experiment_filter);
  std::ofstream txt(dir / "summary.txt", std::ios::trunc);
  std::ofstream js(dir / "summary.json", std::ios::trunc);
  if (!txt || !js) fail(ErrorCode::io, "cannot write summary files in " + dir.string());
  txt << rep.table;
  js << rep.summary.dump(2) << '\n';
  return rep;
}

}  // namespace anderson
