#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

#include "plvc/estimator.hpp"
#include "plvc/rng.hpp"

namespace plvc {

/// Nested model classes for the specification test, ordered
/// ParametricLinear < Plvc < FullVc. ParametricLinear regresses y on
/// (1, x, w, z); Plvc is the series model; FullVc absorbs w into the
/// varying block so every coefficient may depend on z.
enum class ModelFamily { ParametricLinear, Plvc, FullVc };

struct ModelClass {
  ModelFamily family = ModelFamily::Plvc;
  /// Per-block basis configuration (d blocks for Plvc, d+q for FullVc);
  /// unused for ParametricLinear. Held fixed across bootstrap replicates.
  std::vector<BasisSpec> specs;
};

enum class MultiplierLaw { MammenTwoPoint, Rademacher };

/// (rss0 - rss) / rss; throws DegenerateFitError when rss <= 0.
double rss_stat(double rss0, double rss);

/// i.i.d. wild bootstrap multipliers. The default two-point law takes
/// (1-sqrt(5))/2 with probability (5+sqrt(5))/10 and (1+sqrt(5))/2
/// otherwise, matching mean 0, variance 1 and third moment 1.
Eigen::VectorXd wild_multipliers(int n, Rng& rng,
                                 MultiplierLaw law = MultiplierLaw::MammenTwoPoint);

/// Finite-sample bootstrap p-value (1 + #{stat_b >= stat}) / (B + 1);
/// never exactly zero.
double bootstrap_p_value(const std::vector<double>& bootstrap_stats, double statistic);

struct TestResult {
  double statistic = 0.0;
  std::vector<double> bootstrap_stats;  // completed replicates, in replicate order
  double p_value = 1.0;
  int b = 0;        // completed replicates
  int dropped = 0;  // replicates whose refit failed
  std::uint64_t seed = 0;
  double rss0 = 0.0;
  double rss = 0.0;
};

struct BootstrapOptions {
  int threads = 1;
  MultiplierLaw law = MultiplierLaw::MammenTwoPoint;
  FitOptions fit;

  /// Re-run basis selection inside every bootstrap replicate instead of
  /// freezing the configuration chosen on the original data. Off by
  /// default for runtime sanity; replicates whose reselected models end
  /// up non-nested are dropped and counted.
  bool reselect_per_replicate = false;
  std::vector<std::vector<BasisSpec>> null_grid;  // used when reselecting
  std::vector<std::vector<BasisSpec>> alt_grid;
};

/// Residual-based wild bootstrap test of the null class against a strictly
/// larger alternative. Bootstrap responses are generated from the fitted
/// null model, y*_i = fitted0_i + u0_i * xi_i, and both classes are refit
/// on each resample with the smoothing configuration frozen. Requires
/// B >= 99; more than 5% dropped replicates aborts with TestError.
TestResult wild_bootstrap_test(const Dataset& ds, const ModelClass& null_model,
                               const ModelClass& alt_model, int B, std::uint64_t seed,
                               const BootstrapOptions& opts = {});

}  // namespace plvc
