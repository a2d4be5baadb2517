#include "plvc/estimator.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "plvc/errors.hpp"

namespace plvc {

Projector::Projector(const Eigen::MatrixXd& p, double pivot_rtol) : qr_(p.rows(), p.cols()) {
  qr_.setThreshold(pivot_rtol);
  qr_.compute(p);
  rank_ = static_cast<int>(qr_.rank());
}

Eigen::MatrixXd Projector::apply(const Eigen::MatrixXd& a) const {
  Eigen::MatrixXd b = qr_.householderQ().adjoint() * a;
  b.bottomRows(b.rows() - rank_).setZero();
  return qr_.householderQ() * b;
}

Eigen::VectorXd Projector::solve(const Eigen::VectorXd& rhs) const {
  return qr_.solve(rhs);
}

Eigen::MatrixXd Projector::thin_q() const {
  Eigen::MatrixXd q1 = Eigen::MatrixXd::Identity(qr_.rows(), rank_);
  q1.applyOnTheLeft(qr_.householderQ());
  return q1;
}

Eigen::VectorXd Projector::hat_diagonal() const {
  return thin_q().rowwise().squaredNorm();
}

Eigen::MatrixXd project(const Eigen::MatrixXd& p, const Eigen::MatrixXd& a, double pivot_rtol) {
  return Projector(p, pivot_rtol).apply(a);
}

Eigen::VectorXd FitResult::alpha_block(int l) const {
  return alpha.segment(block_offsets[l], block_offsets[l + 1] - block_offsets[l]);
}

namespace {

// Inverse of a symmetric q x q moment matrix; throws CollinearityError
// with column names when it is numerically singular.
Eigen::MatrixXd inverse_or_throw(const Eigen::MatrixXd& m, const std::vector<std::string>& labels,
                                 const char* what) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(m);
  qr.setThreshold(1e-12);
  if (qr.rank() < m.rows()) {
    std::ostringstream os;
    os << what << ": singular moment matrix";
    const auto perm = qr.colsPermutation().indices();
    os << "; dependent linear-block columns:";
    for (long j = qr.rank(); j < m.rows(); ++j) {
      const int col = perm[j];
      os << ' ' << (static_cast<std::size_t>(col) < labels.size() ? labels[col]
                                                                  : "w" + std::to_string(col + 1));
    }
    throw CollinearityError(os.str());
  }
  return qr.inverse();
}

double quantile_sorted(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  if (v.empty()) return 0.0;
  const double idx = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(idx));
  const auto hi = static_cast<std::size_t>(std::ceil(idx));
  const double t = idx - std::floor(idx);
  return (1.0 - t) * v[lo] + t * v[hi];
}

}  // namespace

FitResult fit_prepared(const Eigen::VectorXd& y, const Eigen::MatrixXd& w,
                       const DesignMatrix& dm, const Eigen::VectorXd& z,
                       const std::vector<std::string>& w_labels, const FitOptions& opts) {
  const long n = y.size();
  const int q = static_cast<int>(w.cols());

  Projector proj(dm.p, opts.pivot_rtol);

  FitResult fr;
  fr.specs = dm.specs;
  fr.block_offsets = dm.block_offsets;
  fr.z = z;
  fr.w_labels = w_labels;
  fr.n = n;
  fr.q = q;
  fr.d = static_cast<int>(dm.specs.size());
  fr.rank_p = proj.rank();
  fr.clamp_events = dm.clamp_events;
  fr.dof_correction = opts.dof_correction;

  if (q > 0) {
    fr.eps = w - proj.apply(w);
    const Eigen::VectorXd y_res = y - proj.apply(y);

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr_w(fr.eps);
    qr_w.setThreshold(opts.pivot_rtol);
    // Identification requires the residualized block to keep mass on the
    // scale of W itself; a column of eps that is pure projection noise
    // means that w column lies in the varying-coefficient space.
    double w_scale = 0.0;
    for (int j = 0; j < q; ++j) w_scale = std::max(w_scale, w.col(j).norm());
    const Eigen::VectorXd rdiag = qr_w.matrixQR().diagonal().cwiseAbs();
    int rank_w = 0;
    for (long j = 0; j < std::min<long>(q, rdiag.size()); ++j) {
      if (rdiag[j] > opts.pivot_rtol * std::max(w_scale, 1e-300)) ++rank_w;
    }
    if (rank_w < q) {
      std::ostringstream os;
      os << "linear block not identified (w lies in the varying-coefficient space);"
         << " offending columns:";
      const auto perm = qr_w.colsPermutation().indices();
      for (long j = rank_w; j < q; ++j) {
        const int col = perm[j];
        os << ' '
           << (static_cast<std::size_t>(col) < w_labels.size() ? w_labels[col]
                                                               : "w" + std::to_string(col + 1));
      }
      throw CollinearityError(os.str());
    }
    fr.gamma = qr_w.solve(y_res);
  } else {
    fr.eps.resize(n, 0);
    fr.gamma.resize(0);
  }

  const Eigen::VectorXd y_net = (q > 0) ? Eigen::VectorXd(y - w * fr.gamma) : y;
  fr.alpha = proj.solve(y_net);
  fr.residuals = y_net - dm.p * fr.alpha;
  fr.rss = fr.residuals.squaredNorm();

  const double y_mean = y.mean();
  const double tss = (y.array() - y_mean).square().sum();
  fr.r_squared = tss > 0.0 ? 1.0 - fr.rss / tss : 1.0;

  const long dof = opts.dof_correction ? n - q - fr.rank_p : n;
  fr.sigma2 = dof > 0 ? fr.rss / static_cast<double>(dof) : 0.0;

  if (q > 0) {
    fr.phi = fr.eps.transpose() * fr.eps / static_cast<double>(n);
    fr.omega = fr.eps.transpose() * fr.residuals.array().square().matrix().asDiagonal() * fr.eps /
               static_cast<double>(n);
    const Eigen::MatrixXd phi_inv = inverse_or_throw(fr.phi, w_labels, "gamma covariance");
    fr.sigma = phi_inv * fr.omega * phi_inv;
    fr.sigma = ((fr.sigma + fr.sigma.transpose()) / 2.0).eval();
  } else {
    fr.phi.resize(0, 0);
    fr.omega.resize(0, 0);
    fr.sigma.resize(0, 0);
  }
  return fr;
}

FitResult fit(const Dataset& ds, const std::vector<BasisSpec>& specs, const FitOptions& opts) {
  const DesignMatrix dm = build_design(ds, specs, opts.out_of_range);
  return fit_prepared(ds.y, ds.w, dm, ds.z, ds.w_labels, opts);
}

Eigen::MatrixXd gamma_covariance(const FitResult& fit) {
  const long n = fit.n;
  const Eigen::MatrixXd phi = fit.eps.transpose() * fit.eps / static_cast<double>(n);
  const Eigen::MatrixXd omega = fit.eps.transpose() *
                                fit.residuals.array().square().matrix().asDiagonal() * fit.eps /
                                static_cast<double>(n);
  const Eigen::MatrixXd phi_inv = inverse_or_throw(phi, fit.w_labels, "gamma covariance");
  Eigen::MatrixXd sigma = phi_inv * omega * phi_inv;
  return (sigma + sigma.transpose()) / 2.0;
}

Eigen::MatrixXd homoskedastic_covariance(const FitResult& fit) {
  const Eigen::MatrixXd phi_inv =
      inverse_or_throw(fit.phi, fit.w_labels, "homoskedastic covariance");
  return fit.sigma2 * phi_inv;
}

double beta_at(const FitResult& fit, int l, double z) {
  if (l < 0 || l >= fit.d) {
    throw InvalidDomainError("beta_at: block index out of range");
  }
  const Eigen::VectorXd b = fit.specs[l].eval(z, OutOfRange::Clamp);
  return b.dot(fit.alpha_block(l));
}

Eigen::VectorXd beta_curve(const FitResult& fit, int l, const Eigen::VectorXd& zs) {
  Eigen::VectorXd out(zs.size());
  for (long i = 0; i < zs.size(); ++i) out[i] = beta_at(fit, l, zs[i]);
  return out;
}

double VarianceModel::operator()(double z) const {
  const double v = spec.eval(z, OutOfRange::Clamp).dot(coef);
  return std::clamp(v, floor, cap);
}

VarianceModel estimate_variance_function(const FitResult& fit, const BasisSpec& spec) {
  const long n = fit.n;
  const Eigen::VectorXd u2 = fit.residuals.array().square();

  BasisEvaluator ev(spec);
  Eigen::MatrixXd b(n, ev.dimension());
  std::vector<double> row(static_cast<std::size_t>(ev.dimension()));
  for (long i = 0; i < n; ++i) {
    ev.eval_into(fit.z[i], OutOfRange::Clamp, row.data());
    b.row(i) = Eigen::Map<const Eigen::RowVectorXd>(row.data(), ev.dimension());
  }

  VarianceModel vm;
  vm.spec = spec;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(b);
  qr.setThreshold(1e-10);
  vm.coef = qr.solve(u2);

  const Eigen::VectorXd fitted = b * vm.coef;
  std::vector<double> u2v(u2.data(), u2.data() + n);
  std::vector<double> fv(fitted.data(), fitted.data() + n);
  vm.floor = std::max(quantile_sorted(u2v, 0.05), 1e-8);
  vm.cap = std::max(quantile_sorted(fv, 0.95), vm.floor);
  return vm;
}

FitResult fit_weighted(const Dataset& ds, const std::vector<BasisSpec>& specs,
                       const VarianceModel& vm, const FitOptions& opts) {
  const long n = ds.n();
  DesignMatrix dm = build_design(ds, specs, opts.out_of_range);

  Eigen::VectorXd y = ds.y;
  Eigen::MatrixXd w = ds.w;
  for (long i = 0; i < n; ++i) {
    const double s = vm(ds.z[i]);
    if (!(s > 0.0)) {
      throw InvalidDomainError("fit_weighted: variance model must be positive everywhere");
    }
    const double inv = 1.0 / std::sqrt(s);
    y[i] *= inv;
    if (w.cols() > 0) w.row(i) *= inv;
    dm.p.row(i) *= inv;
  }

  FitResult fr = fit_prepared(y, w, dm, ds.z, ds.w_labels, opts);
  fr.weighted = true;
  return fr;
}

}  // namespace plvc
