#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "plvc/design.hpp"
#include "plvc/kernel.hpp"
#include "plvc/rng.hpp"

namespace plvc {

/// Hart's bump, 1 + (24 z)^3 exp(-24 z).
double beta1_true(double z);

/// z + sin(z).
double beta2_true(double z);

enum class Dgp { Dgp1, Dgp2, CustomHetero };

struct DgpSpec {
  Dgp which = Dgp::Dgp1;
  int n = 100;
  std::uint64_t seed = 0;
  double noise_sd = 0.5;
};

struct DgpTruth {
  Eigen::VectorXd gamma;
  std::vector<std::function<double(double)>> beta;  // one per varying block
};

struct DgpDraw {
  Dataset ds;
  DgpTruth truth;
};

/// y = 1 + 0.5 w + x beta1(z) + u; u ~ N(0, noise_sd^2), z ~ U[0,2],
/// w = v1 + 2 v3, x = v2 + v3 with v_j ~ U[0,2].
DgpDraw gen_dgp1(int n, Rng& rng, double noise_sd = 0.5);

/// y = 4 + 0.5 w + x1 beta1(z) + x2 beta2(z) + u; x2 = v4 + 0.5 v3.
DgpDraw gen_dgp2(int n, Rng& rng, double noise_sd = 0.5);

/// DGP1 with scale-heteroskedastic noise u = noise_sd (1 + z) e / c,
/// e ~ N(0,1), normalized by c = sqrt(E[(1+z)^2]) = sqrt(13/3) so the
/// unconditional error variance matches the homoskedastic design.
DgpDraw gen_custom_hetero(int n, Rng& rng, double noise_sd = 0.5);

DgpDraw generate(const DgpSpec& spec, Rng& rng);

/// Componentwise mean squared deviation of the estimates from truth.
Eigen::VectorXd mse_gamma(const std::vector<Eigen::VectorXd>& estimates,
                          const Eigen::VectorXd& truth);

/// Mean over replications of the average squared error of a coefficient
/// curve at that replication's own sample points.
double mase_beta(const std::vector<Eigen::VectorXd>& curve_estimates,
                 const std::vector<Eigen::VectorXd>& curve_truths);

enum class Method { Spline, Kernel, WeightedSpline };

std::string method_name(Method m);

/// Smoothing selection used inside each replication.
struct SelectionPolicy {
  bool cv = true;

  // series grid: one shared dimension k per block, k in [k_min, k_max]
  int k_min = 4;
  int k_max = 16;
  int degree = 3;
  BasisSpec::Family family = BasisSpec::Family::BSpline;
  std::vector<int> fixed_dims;  // per-block dims when cv is off

  // kernel grid brackets the paper-scale bandwidths
  std::vector<double> h_grid = log_spaced(0.02, 0.40, 15);
  double fixed_h = 0.10;
  KernelType kernel = KernelType::Epanechnikov;
  LocalOrder local_order = LocalOrder::Linear;

  // variance-model basis for the feasible weighted estimator
  BasisSpec::Family variance_family = BasisSpec::Family::BSpline;
  int variance_dim = 6;

  // knot range override; empirical z range when absent
  std::optional<std::pair<double, double>> z_range;
};

struct MethodRecord {
  Eigen::VectorXd gamma_hat;
  std::vector<double> ase;  // per varying block
  std::vector<int> dims;    // selected per-block dimensions (series methods)
  double h = 0.0;           // selected bandwidth (kernel)
};

struct RepRecord {
  int rep = 0;
  bool ok = true;
  std::string error;
  std::vector<MethodRecord> by_method;  // parallel to SimReport::methods
};

struct SimReport {
  DgpSpec spec;
  std::vector<Method> methods;
  int reps_requested = 0;
  int reps_completed = 0;
  int failures = 0;
  bool valid = true;  // failures within the 2% budget

  std::vector<RepRecord> records;

  // aggregates, parallel to methods
  std::vector<Eigen::VectorXd> mse;          // per gamma component
  std::vector<std::vector<double>> mase;     // per varying block
  std::vector<std::map<int, int>> k_counts;  // selected total K histogram
  std::vector<std::map<double, int>> h_counts;

  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
};

/// Runs the replication study: per replication draw the DGP, select
/// smoothing per policy, fit every method, and record estimates.
/// Replications use counter-split RNG streams, so results are identical
/// under any thread count.
SimReport run_sim(const DgpSpec& spec, const std::vector<Method>& methods, int reps,
                  const SelectionPolicy& policy, int threads = 1);

/// Same harness with a caller-supplied generator (spec.which is ignored).
SimReport run_sim_custom(const std::function<DgpDraw(int, Rng&)>& gen, const DgpSpec& spec,
                         const std::vector<Method>& methods, int reps,
                         const SelectionPolicy& policy, int threads = 1);

}  // namespace plvc
