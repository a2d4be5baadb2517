#pragma once

#include <Eigen/Core>
#include <Eigen/QR>

#include <string>
#include <vector>

#include "plvc/design.hpp"

namespace plvc {

struct FitOptions {
  OutOfRange out_of_range = OutOfRange::Clamp;
  bool dof_correction = true;    // sigma2 = rss / (n - q - rank(P)) when on
  double pivot_rtol = 1e-10;     // rank threshold, relative to the largest pivot
};

/// Orthogonal projector onto the column space of a series design, built
/// from a rank-revealing pivoted QR. Rank-deficient designs behave as the
/// generalized inverse: redundant columns are dropped by the pivoting.
class Projector {
 public:
  explicit Projector(const Eigen::MatrixXd& p, double pivot_rtol = 1e-10);

  /// M a, never forming M.
  Eigen::MatrixXd apply(const Eigen::MatrixXd& a) const;

  /// Basic least squares solution (P'P)^- P' rhs (redundant pivots zeroed).
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;

  /// First rank() columns of Q; hat diagonal is the squared row norms.
  Eigen::MatrixXd thin_q() const;
  Eigen::VectorXd hat_diagonal() const;

  int rank() const { return rank_; }
  long rows() const { return qr_.rows(); }

 private:
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr_;
  int rank_ = 0;
};

/// Convenience wrapper: projection of a onto the column space of p.
Eigen::MatrixXd project(const Eigen::MatrixXd& p, const Eigen::MatrixXd& a,
                        double pivot_rtol = 1e-10);

/// Everything the partitioned series fit produces. eps holds the
/// residualized linear block W - MW, the sample counterpart of the
/// projection errors the covariance estimator is built from.
struct FitResult {
  Eigen::VectorXd gamma;      // q
  Eigen::VectorXd alpha;      // K, block layout per block_offsets
  Eigen::VectorXd residuals;  // n
  Eigen::MatrixXd eps;        // n x q, w_i - w~_i rows

  double rss = 0.0;
  double r_squared = 0.0;
  double sigma2 = 0.0;  // mean squared residual, d.o.f.-corrected per options

  Eigen::MatrixXd phi;    // q x q
  Eigen::MatrixXd omega;  // q x q
  Eigen::MatrixXd sigma;  // q x q sandwich

  std::vector<BasisSpec> specs;
  std::vector<int> block_offsets;
  Eigen::VectorXd z;  // sample index values, kept for variance modelling
  std::vector<std::string> w_labels;

  long n = 0;
  int q = 0;
  int d = 0;
  int rank_p = 0;
  long clamp_events = 0;
  bool dof_correction = true;
  bool weighted = false;

  Eigen::VectorXd alpha_block(int l) const;
};

/// Series least squares fit of Y = w'gamma + x'beta(z) + u via the
/// partitioned route: gamma from residualized regression of (I-M)y on
/// (I-M)W, alpha from the generalized-inverse solve of P on y - W gamma.
FitResult fit(const Dataset& ds, const std::vector<BasisSpec>& specs,
              const FitOptions& opts = {});

/// Same machinery on a prebuilt design (rows already transformed, e.g.
/// by feasible weighting).
FitResult fit_prepared(const Eigen::VectorXd& y, const Eigen::MatrixXd& w,
                       const DesignMatrix& dm, const Eigen::VectorXd& z,
                       const std::vector<std::string>& w_labels, const FitOptions& opts = {});

/// Heteroskedasticity-robust sandwich Phi^-1 Omega Phi^-1, recomputed from
/// the stored residuals and projection errors. SE of gamma_j is
/// sqrt(Sigma_jj / n).
Eigen::MatrixXd gamma_covariance(const FitResult& fit);

/// Homoskedastic plug-in sigma2 * Phi^-1 (the efficiency-bound inverse).
Eigen::MatrixXd homoskedastic_covariance(const FitResult& fit);

/// Estimated coefficient function beta_l at z.
double beta_at(const FitResult& fit, int l, double z);
Eigen::VectorXd beta_curve(const FitResult& fit, int l, const Eigen::VectorXd& zs);

/// Fitted conditional variance curve with positivity clamps.
struct VarianceModel {
  BasisSpec spec;
  Eigen::VectorXd coef;
  double floor = 1e-8;  // eta_1
  double cap = 1e-8;    // eta_2, floor <= cap

  double operator()(double z) const;
};

/// Least squares fit of squared residuals on basis(z), clamped to
/// [max(q05 of u^2, 1e-8), q95 of the fitted values] so the curve stays
/// positive and bounded.
VarianceModel estimate_variance_function(const FitResult& fit, const BasisSpec& spec);

/// Feasible weighted fit: divides y_i, w_i and the regressor row by
/// sigma_i = sqrt(vm(z_i)) and refits; covariances refer to the
/// transformed model.
FitResult fit_weighted(const Dataset& ds, const std::vector<BasisSpec>& specs,
                       const VarianceModel& vm, const FitOptions& opts = {});

}  // namespace plvc
