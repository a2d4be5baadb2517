#pragma once

#include <Eigen/Core>

#include <vector>

#include "plvc/estimator.hpp"
#include "plvc/selection.hpp"

namespace plvc {

enum class KernelType { Epanechnikov, Gaussian };
enum class LocalOrder { Constant, Linear };

struct KernelSpec {
  KernelType kernel = KernelType::Epanechnikov;
  double h = 0.1;
  LocalOrder order = LocalOrder::Linear;
};

/// K(u): Epanechnikov 0.75(1-u^2)_+ (compact support) or the Gaussian
/// density.
double kernel_weight(KernelType kernel, double u);

/// Kernel-weighted local varying-coefficient regression of each target
/// column on x around z0. Local linear adds slope terms (z - z0) * x; the
/// returned d x m block holds the level coefficients only, evaluated at
/// z0. skip >= 0 removes that observation (leave-one-out). When the
/// Epanechnikov window leaves the local design rank-deficient, the fit
/// falls back to Gaussian weights for that point and reports it through
/// gaussian_fallback.
Eigen::MatrixXd local_vc_fit(const Eigen::MatrixXd& targets, const Eigen::MatrixXd& x,
                             const Eigen::VectorXd& z, double z0, const KernelSpec& ks,
                             int skip = -1, bool* gaussian_fallback = nullptr);

/// Single-target convenience overload.
Eigen::VectorXd local_vc_fit(const Eigen::VectorXd& target, const Eigen::MatrixXd& x,
                             const Eigen::VectorXd& z, double z0, const KernelSpec& ks,
                             int skip = -1, bool* gaussian_fallback = nullptr);

/// Kernel profile estimate: gamma from OLS of the locally residualized
/// response on the locally residualized linear block, coefficient curves
/// from the local fits of y - w'gamma.
struct ProfileFit {
  Eigen::VectorXd gamma;     // q
  Eigen::MatrixXd beta;      // n x d, beta_l at the sample z_i
  Eigen::VectorXd residuals; // n
  double rss = 0.0;
  double sigma2 = 0.0;        // rss / n
  Eigen::MatrixXd sigma;      // q x q homoskedastic plug-in for gamma
  int fallback_count = 0;     // points served by the Gaussian fallback
  KernelSpec ks;
};

ProfileFit profile_gamma(const Dataset& ds, const KernelSpec& ks);

/// Heteroskedastic diagnostic variant: the residualized regression is
/// weighted by a user-supplied variance curve before the OLS step.
ProfileFit profile_gamma_weighted(const Dataset& ds, const KernelSpec& ks,
                                  const VarianceModel& vm);

/// Coefficient curves at arbitrary grid points, given gamma.
Eigen::MatrixXd profile_beta_curve(const Dataset& ds, const KernelSpec& ks,
                                   const Eigen::VectorXd& gamma, const Eigen::VectorXd& zs,
                                   int* fallback_count = nullptr);

/// Leave-one-out bandwidth selection: observation i is excluded from every
/// local fit that predicts it; the CV score is the squared prediction
/// error of the profiled model. Ties break toward the largest h.
CvReport select_bandwidth(const Dataset& ds, const std::vector<double>& h_grid,
                          const KernelSpec& tmpl);

std::vector<double> log_spaced(double lo, double hi, int count);

}  // namespace plvc
