#pragma once

#include "difcon/catalog.hpp"

namespace difcon {

struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

extern const char* kToolVersion;

struct RunConfig {
  std::string command;       // verify-lde | verify-solution | compat
  std::string catalog_path;  // resolved before run()
  std::vector<std::string> ids;  // empty means all
  std::uint64_t seed = 0;
  int samples = 100;
  double tolerance = 1e-8;
  std::string format = "json";  // json | csv
};

struct CaseRecord {
  std::string id;
  std::string provenance;
  std::string kind;
  std::map<std::string, double> params;
  double max_abs = 0.0;
  double rms = 0.0;
  bool pass = false;
  std::string erratum;
};

struct Report {
  std::string version;
  RunConfig config;
  std::vector<CaseRecord> cases;
  int summary_pass = 0;
  int summary_fail = 0;
};

/// Executes a verification command over the catalog.  Deterministic for a
/// fixed (config, seed, catalog); cases are ordered by id.
Report run(const RunConfig& cfg);

/// JSON (keys exactly version/config/cases/summary, numbers with 17
/// significant digits) or CSV with the fixed header.
std::string emit(const Report& rep, const std::string& format);

/// Full command line: parsing, dispatch, report writing.
/// Exit codes: 0 all cases pass, 1 verification failures, 2 config errors.
int run_cli(int argc, char** argv);

}  // namespace difcon
