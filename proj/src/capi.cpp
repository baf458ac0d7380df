#include <algorithm>
#include <cstring>
#include <string>
#include <vector>

#include "anderson/anderson.h"
#include "anderson/anderson_form.hpp"
#include "anderson/eigensolve.hpp"
#include "anderson/error.hpp"
#include "anderson/experiments.hpp"
#include "anderson/wick.hpp"

struct anderson_config {
  anderson::ConfigValues values;
};

struct anderson_run {
  anderson::RunResult result;
  std::vector<std::string> lines;
  std::string records_path;
  std::string csv_path;
};

struct anderson_report {
  anderson::Report report;
};

namespace {

thread_local std::string last_error;

anderson_status to_status(anderson::ErrorCode c) {
  using anderson::ErrorCode;
  switch (c) {
    case ErrorCode::invalid_argument: return ANDERSON_E_INVALID_ARGUMENT;
    case ErrorCode::dimension_mismatch: return ANDERSON_E_DIMENSION_MISMATCH;
    case ErrorCode::lattice_mismatch: return ANDERSON_E_LATTICE_MISMATCH;
    case ErrorCode::not_hermitian: return ANDERSON_E_NOT_HERMITIAN;
    case ErrorCode::not_converged: return ANDERSON_E_NOT_CONVERGED;
    case ErrorCode::asymmetric_operator: return ANDERSON_E_ASYMMETRIC_OPERATOR;
    case ErrorCode::config: return ANDERSON_E_CONFIG;
    case ErrorCode::io: return ANDERSON_E_IO;
  }
  return ANDERSON_E_INTERNAL;
}

template <class F>
anderson_status guarded(F&& f) {
  try {
    last_error.clear();
    f();
    return ANDERSON_OK;
  } catch (const anderson::Error& e) {
    last_error = e.what();
    return to_status(e.code());
  } catch (const std::exception& e) {
    last_error = e.what();
    return ANDERSON_E_INTERNAL;
  } catch (...) {
    last_error = "unknown error";
    return ANDERSON_E_INTERNAL;
  }
}

anderson_status null_argument(const char* what) {
  last_error = std::string("null argument: ") + what;
  return ANDERSON_E_INVALID_ARGUMENT;
}

anderson::Mollifier mollifier_of(anderson_mollifier m) {
  return m == ANDERSON_MOLLIFIER_SHARP ? anderson::Mollifier::sharp_cutoff() : anderson::Mollifier::gaussian();
}

const std::vector<std::string>& config_key_table() {
  static const std::vector<std::string> keys = anderson::config_keys();
  return keys;
}

}  // namespace

extern "C" {

const char* anderson_version(void) { return ANDERSON_VERSION; }

const char* anderson_last_error(void) { return last_error.c_str(); }

size_t anderson_experiment_count(void) { return std::size(anderson::kExperimentNames); }

const char* anderson_experiment_name(size_t index) {
  return index < std::size(anderson::kExperimentNames) ? anderson::kExperimentNames[index] : nullptr;
}

size_t anderson_config_key_count(void) { return config_key_table().size(); }

const char* anderson_config_key_name(size_t index) {
  const auto& keys = config_key_table();
  return index < keys.size() ? keys[index].c_str() : nullptr;
}

anderson_status anderson_config_create(anderson_config** out) {
  if (!out) return null_argument("out");
  return guarded([&] { *out = new anderson_config(); });
}

void anderson_config_destroy(anderson_config* config) { delete config; }

anderson_status anderson_config_load_file(anderson_config* config, const char* path) {
  if (!config || !path) return null_argument("config/path");
  return guarded([&] {
    for (auto& [k, v] : anderson::load_config_file(path)) config->values[k] = v;
  });
}

anderson_status anderson_config_set(anderson_config* config, const char* key, const char* value) {
  if (!config || !key || !value) return null_argument("config/key/value");
  return guarded([&] {
    const auto keys = anderson::config_keys();
    if (std::find(keys.begin(), keys.end(), key) == keys.end())
      anderson::fail(anderson::ErrorCode::config, std::string("unknown config key '") + key + "'");
    config->values[key] = value;
  });
}

anderson_status anderson_config_validate(const anderson_config* config) {
  if (!config) return null_argument("config");
  return guarded([&] { (void)anderson::resolve_config(config->values); });
}

anderson_status anderson_config_json(const anderson_config* config, char* buffer, size_t len, size_t* required) {
  if (!config) return null_argument("config");
  return guarded([&] {
    const auto text = anderson::config_to_json(anderson::resolve_config(config->values)).dump();
    if (required) *required = text.size() + 1;
    if (buffer && len > 0) {
      const size_t n = std::min(len - 1, text.size());
      std::memcpy(buffer, text.data(), n);
      buffer[n] = '\0';
      if (n < text.size()) anderson::fail(anderson::ErrorCode::invalid_argument, "buffer too small");
    }
  });
}

anderson_status anderson_config_hash(const anderson_config* config, char* buffer, size_t len) {
  if (!config || !buffer) return null_argument("config/buffer");
  return guarded([&] {
    const auto h = anderson::config_hash(anderson::resolve_config(config->values));
    anderson::require(len > h.size(), anderson::ErrorCode::invalid_argument, "buffer too small");
    std::memcpy(buffer, h.c_str(), h.size() + 1);
  });
}

anderson_status anderson_run_experiment(const anderson_config* config, anderson_record_callback callback, void* user,
                                        anderson_run** out) {
  if (!config || !out) return null_argument("config/out");
  return guarded([&] {
    const auto cfg = anderson::resolve_config(config->values);
    anderson::RunOptions opts;
    if (callback)
      opts.on_record = [&](const anderson::ResultRecord& r) { callback(r.to_json().dump().c_str(), user); };
    auto run = std::make_unique<anderson_run>();
    run->result = anderson::run_experiment(cfg, opts);
    for (const auto& r : run->result.records) run->lines.push_back(r.to_json().dump());
    run->records_path = run->result.records_file.string();
    run->csv_path = run->result.csv_file.string();
    *out = run.release();
  });
}

void anderson_run_destroy(anderson_run* run) { delete run; }

int anderson_run_passed(const anderson_run* run) { return run && run->result.all_passed ? 1 : 0; }

size_t anderson_run_record_count(const anderson_run* run) { return run ? run->lines.size() : 0; }

const char* anderson_run_record_json(const anderson_run* run, size_t index) {
  return run && index < run->lines.size() ? run->lines[index].c_str() : nullptr;
}

const char* anderson_run_records_path(const anderson_run* run) { return run ? run->records_path.c_str() : nullptr; }

const char* anderson_run_csv_path(const anderson_run* run) { return run ? run->csv_path.c_str() : nullptr; }

anderson_status anderson_report_create(const char* dir, const char* experiment_filter, anderson_report** out) {
  if (!dir || !out) return null_argument("dir/out");
  return guarded([&] {
    auto rep = std::make_unique<anderson_report>();
    rep->report = anderson::write_report(dir, experiment_filter ? experiment_filter : "");
    *out = rep.release();
  });
}

void anderson_report_destroy(anderson_report* report) { delete report; }

const char* anderson_report_table(const anderson_report* report) {
  return report ? report->report.table.c_str() : nullptr;
}

int anderson_report_failed(const anderson_report* report) { return report && report->report.failed ? 1 : 0; }

int anderson_report_empty(const anderson_report* report) { return report && report->report.empty ? 1 : 0; }

anderson_status anderson_renorm_constant_x(int dimension, int points, double eps, anderson_mollifier mollifier,
                                           double* out) {
  if (!out) return null_argument("out");
  return guarded([&] {
    anderson::require(eps > 0.0, anderson::ErrorCode::invalid_argument, "eps must be positive");
    *out = anderson::expected_grad_sq_x(anderson::Lattice(dimension, points), eps, mollifier_of(mollifier));
  });
}

anderson_status anderson_zero_noise_spectrum(int dimension, int points, size_t count, double tol, double* out) {
  if (!out) return null_argument("out");
  return guarded([&] {
    const auto op = anderson::zero_noise_form(anderson::Lattice(dimension, points));
    anderson::EigenOptions o;
    o.count = count;
    o.tol = tol;
    const auto s = anderson::lowest_eigenpairs(anderson::form_contract(op), anderson::mass_weights(op), o);
    std::copy(s.eigenvalues.begin(), s.eigenvalues.end(), out);
  });
}

anderson_status anderson_lowest_eigenvalues(int dimension, int points, double eps, anderson_mollifier mollifier,
                                            unsigned long long seed, size_t count, double tol, double* out) {
  if (!out) return null_argument("out");
  return guarded([&] {
    const anderson::Lattice l(dimension, points);
    const auto noise = anderson::sample_white_noise(l, seed);
    const auto xi = anderson::assemble_enhanced_noise(noise, eps, mollifier_of(mollifier));
    const auto op = anderson::assemble_form(xi);
    anderson::EigenOptions o;
    o.count = count;
    o.tol = tol;
    o.seed = seed;
    const auto s = anderson::lowest_eigenpairs(anderson::form_contract(op), anderson::mass_weights(op), o);
    std::copy(s.eigenvalues.begin(), s.eigenvalues.end(), out);
  });
}

}  // extern "C"
