#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <functional>
#include <unistd.h>

#include "anderson/error.hpp"
#include "anderson/experiments.hpp"

using namespace anderson;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("anderson_test_experiments_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode{};
}

ExperimentConfig small_gap(const fs::path& out, std::size_t jobs) {
  return resolve_config({{"experiment", "spectral-gap"}, {"grid", "32"}, {"eps", "2^-2"}, {"seeds", "0..3"},
                         {"eigen_count", "3"}, {"jobs", std::to_string(jobs)}, {"output", out.string()}});
}

ResultRecord record(const std::string& exp, bool pass, const std::string& hash = "h") {
  ResultRecord r;
  r.experiment = exp;
  r.config_hash = hash;
  r.cell = "aggregate";
  r.assertions.push_back({"check", pass, pass ? "fine" : "off"});
  return r;
}

}  // namespace

TEST_CASE("divergence fits on synthetic data") {
  std::vector<std::pair<double, double>> logs, inv;
  for (double eps : {0.5, 0.25, 0.125, 0.0625, 0.03125}) {
    logs.emplace_back(eps, 3.0 + 5.0 * std::log(1.0 / eps));
    inv.emplace_back(eps, 1.0 + 2.0 / eps);
  }
  auto f = fit_divergence(logs, DivergenceModel::log);
  CHECK(f.a == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(f.b == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(f.r_squared == doctest::Approx(1.0).epsilon(1e-12));
  auto g = fit_divergence(inv, DivergenceModel::inverse);
  CHECK(g.a == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(g.b == doctest::Approx(2.0).epsilon(1e-12));
  // Each model discriminates against the other's data.
  CHECK(fit_divergence(logs, DivergenceModel::inverse).r_squared < 0.99);
  CHECK(fit_divergence(inv, DivergenceModel::log).r_squared < 0.99);

  logs.pop_back();
  logs.pop_back();
  CHECK_THROWS_AS(fit_divergence(logs, DivergenceModel::log), Error);
  std::vector<std::pair<double, double>> same(4, {0.25, 1.0});
  CHECK_THROWS_AS(fit_divergence(same, DivergenceModel::log), Error);
}

TEST_CASE("config text parsing") {
  auto v = parse_config_text("# comment\nexperiment = divergence\n  dimension=3  # trailing\n\ngrid = 32\n");
  CHECK(v.at("experiment") == "divergence");
  CHECK(v.at("dimension") == "3");
  CHECK(v.at("grid") == "32");
  CHECK(code_of([] { parse_config_text("grid 32\n"); }) == ErrorCode::config);
  CHECK(code_of([] { load_config_file("/nonexistent/anderson.cfg"); }) != ErrorCode{});

  CHECK(parse_seed_list("0..3") == std::vector<std::uint64_t>{0, 1, 2, 3});
  CHECK(parse_seed_list("4,7") == std::vector<std::uint64_t>{4, 7});
  CHECK(parse_eps_list("2^-2..2^-4") == std::vector<double>{0.25, 0.125, 0.0625});
  CHECK(parse_eps_list("0.5, 2^-3") == std::vector<double>{0.5, 0.125});
  CHECK(code_of([] { parse_seed_list("3..1"); }) == ErrorCode::config);
  CHECK(code_of([] { parse_eps_list("2^-4..2^-2"); }) == ErrorCode::config);
}

TEST_CASE("config resolution and validation") {
  auto c = resolve_config({{"experiment", "divergence"}});
  CHECK(c.dimension == 2);
  CHECK(c.grid == 512);
  CHECK(c.eps.size() == 5);
  CHECK(c.target_prefactor == doctest::Approx(1.0 / (4 * M_PI * M_PI)));

  auto bad = [](ConfigValues v) { return code_of([&] { resolve_config(v); }); };
  CHECK(bad({}) == ErrorCode::config);
  CHECK(bad({{"experiment", "nope"}}) == ErrorCode::config);
  CHECK(bad({{"experiment", "divergence"}, {"unknown_key", "1"}}) == ErrorCode::config);
  CHECK(bad({{"experiment", "divergence"}, {"grid", "100"}}) == ErrorCode::config);
  CHECK(bad({{"experiment", "divergence"}, {"dimension", "4"}}) == ErrorCode::config);
  CHECK(bad({{"experiment", "divergence"}, {"eps", "2^-3..2^-5"}}) == ErrorCode::config);
  CHECK(bad({{"experiment", "spectral-gap"}, {"grid", "64"}, {"eps", "2^-5"}}) == ErrorCode::config);
  CHECK(bad({{"experiment", "spectral-gap"}, {"eigen_count", "1"}}) == ErrorCode::config);
  CHECK(bad({{"experiment", "regularity"}, {"block_lo", "3"}, {"block_hi", "4"}}) == ErrorCode::config);
  CHECK(bad({{"experiment", "transform-equivalence"}, {"grid_ladder", "64,128"}}) == ErrorCode::config);
  CHECK(bad({{"experiment", "positivity"}, {"dimension", "3"}, {"grid", "256"}}) == ErrorCode::config);
  CHECK(bad({{"experiment", "divergence"}, {"kappa", "0.7"}}) == ErrorCode::config);
  CHECK(bad({{"experiment", "divergence"}, {"mollifier", "box"}}) == ErrorCode::config);
  // Zero noise needs no resolved mollifier.
  CHECK(bad({{"experiment", "spectral-gap"}, {"grid", "32"}, {"eps", "2^-5"}, {"zero_noise", "true"}}) == ErrorCode{});

  for (const auto& k : config_keys()) CHECK(!k.empty());
}

TEST_CASE("config hash tracks content but not output location") {
  auto a = resolve_config({{"experiment", "divergence"}, {"output", "/tmp/a"}, {"jobs", "2"}});
  auto b = resolve_config({{"experiment", "divergence"}, {"output", "/tmp/b"}});
  auto c = resolve_config({{"experiment", "divergence"}, {"grid", "256"}});
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a) != config_hash(c));
  CHECK(!config_to_json(a).contains("output"));
}

TEST_CASE("zero-noise spectral gap smoke run") {
  auto c = resolve_config({{"experiment", "spectral-gap"}, {"grid", "32"}, {"zero_noise", "true"}, {"seeds", "0"},
                           {"eigen_count", "6"}});
  auto r = run_experiment(c, {false, {}});
  REQUIRE(r.records.size() == 2);
  const auto& cell = r.records[0];
  CHECK(cell.status == "ok");
  auto ev = cell.values.at("eigenvalues").get<std::vector<double>>();
  const std::vector<double> expect{0, 1, 1, 1, 1, 2};
  REQUIRE(ev.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) CHECK(std::abs(ev[i] - expect[i]) < 1e-10);
  CHECK(r.records.back().is_aggregate());
  CHECK(r.all_passed);
}

TEST_CASE("every cell produces a record, in order") {
  auto out = scratch("cells");
  std::vector<std::string> seen;
  RunOptions o;
  o.on_record = [&](const ResultRecord& r) { seen.push_back(r.cell.dump()); };
  auto r = run_experiment(small_gap(out, 2), o);
  REQUIRE(r.records.size() == 5);
  REQUIRE(seen.size() == 5);
  for (std::size_t s = 0; s < 4; ++s) {
    CHECK(r.records[s].cell.at("seed").get<std::uint64_t>() == s);
    CHECK(seen[s] == r.records[s].cell.dump());
  }
  CHECK(r.records[4].is_aggregate());
  CHECK(fs::exists(r.records_file));
  CHECK(fs::exists(r.csv_file));
  CHECK(r.records_file.filename().string().find(config_hash(small_gap(out, 2))) != std::string::npos);
  std::ifstream in(r.records_file);
  std::size_t lines = 0;
  for (std::string line; std::getline(in, line);) ++lines;
  CHECK(lines == 5);
}

TEST_CASE("payload is identical across reruns and pool sizes") {
  auto a = scratch("det_a"), b = scratch("det_b");
  auto ra = run_experiment(small_gap(a, 1));
  auto rb = run_experiment(small_gap(b, 2));
  auto p1 = payload_of(ra.records_file);
  CHECK(!p1.empty());
  CHECK(p1 == payload_of(rb.records_file));
  CHECK(p1.find("wall_clock") == std::string::npos);
  auto rc = run_experiment(small_gap(a, 1));
  CHECK(payload_of(rc.records_file) == p1);
  // Reruns truncate rather than append.
  std::ifstream in(rc.records_file);
  std::size_t lines = 0;
  for (std::string line; std::getline(in, line);) ++lines;
  CHECK(lines == 5);
}

TEST_CASE("records round-trip through json") {
  auto r = record("divergence", false);
  r.values["b"] = 0.5;
  r.wall_clock_s = 1.25;
  auto back = ResultRecord::from_json(r.to_json());
  CHECK(back.experiment == "divergence");
  CHECK(back.is_aggregate());
  CHECK(!back.passed());
  CHECK(back.values["b"] == 0.5);
  CHECK(back.wall_clock_s == 1.25);
  REQUIRE(back.assertions.size() == 1);
  CHECK(back.assertions[0].detail == "off");
}

TEST_CASE("report over records") {
  auto single = emit_report({record("positivity", true)});
  CHECK(!single.failed);
  CHECK(!single.empty);
  CHECK(single.table.find("[PASS]") != std::string::npos);

  auto mixed = emit_report({record("positivity", true), record("divergence", false, "g")});
  CHECK(mixed.failed);
  CHECK(mixed.table.find("[FAIL]") != std::string::npos);
  auto filtered = emit_report({record("positivity", true), record("divergence", false, "g")}, "positivity");
  CHECK(!filtered.failed);

  auto none = emit_report({});
  CHECK(none.empty);
  CHECK(none.table.find("no data") != std::string::npos);
  CHECK(none.summary.at("no_data") == true);

  auto dir = scratch("report");
  CHECK(read_records(dir).empty());
  auto run = run_experiment(small_gap(dir, 1));
  auto rep = write_report(dir);
  CHECK(!rep.empty);
  CHECK(fs::exists(dir / "summary.txt"));
  CHECK(fs::exists(dir / "summary.json"));
  CHECK(read_records(dir).size() == run.records.size());
}
