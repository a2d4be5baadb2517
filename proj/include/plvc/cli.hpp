#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "plvc/design.hpp"

namespace plvc {

/// Declarative run configuration. Loaded from a JSON file with a
/// schema_version key; unknown keys are rejected so typos fail loudly.
/// Every field has a default documented in the README.
struct RunConfig {
  int schema_version = 1;

  // general
  std::uint64_t seed = 0;
  bool seed_set = false;  // absent seed is generated, then recorded in outputs
  int threads = 1;
  bool strict = false;  // error on out-of-range index values instead of clamping
  bool dof_correction = true;
  std::string out_dir = ".";
  int grid_points = 201;

  // data
  std::string data_path;
  ColumnRoles roles;

  std::string method = "spline";  // spline | kernel

  // series basis
  std::string basis_family = "bspline";  // bspline | power
  int degree = 3;
  std::vector<int> degrees;  // optional degree grid for CV
  std::vector<int> dims;     // fixed per-block dims; empty means CV over k
  int k_min = 4;
  int k_max = 16;
  std::optional<std::pair<double, double>> z_range;

  // kernel baseline
  std::string kernel_type = "epanechnikov";  // epanechnikov | gaussian
  std::string local_order = "linear";        // constant | linear
  double h = 0.0;                            // fixed bandwidth; 0 means CV over the grid
  double h_min = 0.02;
  double h_max = 0.40;
  int h_count = 15;

  // specification test
  std::string null_model = "plvc";  // linear | plvc
  std::string alt_model = "fullvc"; // plvc | fullvc
  int bootstrap_b = 399;
  std::string multiplier = "mammen";  // mammen | rademacher
  bool reselect_per_replicate = false;

  // simulation
  std::string dgp = "dgp1";  // dgp1 | dgp2 | custom_hetero
  std::vector<int> sim_n = {100};
  int reps = 1000;
  std::vector<std::string> sim_methods = {"spline", "kernel"};
  double noise_sd = 0.5;
  int variance_dim = 6;
};

/// Parse and validate the JSON config file.
RunConfig load_config(const std::string& path);

/// FNV-1a hash of the canonical config serialization, recorded in every
/// JSON output for provenance.
std::string config_hash(const RunConfig& cfg);

/// Headered CSV, UTF-8, '.' decimal. Non-numeric cells raise
/// IngestionError naming the row and column.
Table read_csv(const std::string& path);

/// %.17g, enough digits to round-trip a double through text.
std::string format_g17(double v);

// Subcommand entry points. Each writes its output files under
// cfg.out_dir and returns 0 on success; failures raise plvc errors.
int cmd_fit(const RunConfig& cfg);
int cmd_cv(const RunConfig& cfg);
int cmd_test(const RunConfig& cfg);
int cmd_simulate(const RunConfig& cfg);
int cmd_basis_dump(const RunConfig& cfg);

/// Dispatch on command name; catches plvc errors and turns them into a
/// machine-readable record on stderr plus a nonzero exit status.
int run_command(const std::string& command, RunConfig cfg);

}  // namespace plvc
