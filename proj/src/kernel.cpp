#include "plvc/kernel.hpp"

#include <Eigen/QR>

#include <cmath>
#include <limits>
#include <sstream>

#include "plvc/errors.hpp"

namespace plvc {

double kernel_weight(KernelType kernel, double u) {
  if (kernel == KernelType::Epanechnikov) {
    const double t = 1.0 - u * u;
    return t > 0.0 ? 0.75 * t : 0.0;
  }
  return 0.39894228040143267794 * std::exp(-0.5 * u * u);  // N(0,1) density
}

namespace {

// Weighted local least squares at z0 via sqrt-weight QR on the rows with
// positive weight. Returns false when the design is rank deficient.
bool solve_local(const Eigen::MatrixXd& targets, const Eigen::MatrixXd& x,
                 const Eigen::VectorXd& z, double z0, KernelType kernel, double h,
                 LocalOrder order, int skip, Eigen::MatrixXd& levels) {
  const long n = x.rows();
  const int d = static_cast<int>(x.cols());
  const int cols = order == LocalOrder::Linear ? 2 * d : d;

  std::vector<long> idx;
  std::vector<double> sw;
  idx.reserve(static_cast<std::size_t>(n));
  sw.reserve(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) {
    if (i == skip) continue;
    const double wi = kernel_weight(kernel, (z[i] - z0) / h);
    if (wi > 0.0) {
      idx.push_back(i);
      sw.push_back(std::sqrt(wi));
    }
  }
  if (static_cast<int>(idx.size()) < cols) return false;

  const long m = static_cast<long>(idx.size());
  Eigen::MatrixXd u(m, cols);
  Eigen::MatrixXd t(m, targets.cols());
  for (long r = 0; r < m; ++r) {
    const long i = idx[static_cast<std::size_t>(r)];
    const double s = sw[static_cast<std::size_t>(r)];
    u.row(r).head(d) = s * x.row(i);
    if (order == LocalOrder::Linear) {
      u.row(r).tail(d) = (s * (z[i] - z0)) * x.row(i);
    }
    t.row(r) = s * targets.row(i);
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(u);
  qr.setThreshold(1e-10);
  if (static_cast<int>(qr.rank()) < cols) return false;
  levels = qr.solve(t).topRows(d);
  return true;
}

}  // namespace

Eigen::MatrixXd local_vc_fit(const Eigen::MatrixXd& targets, const Eigen::MatrixXd& x,
                             const Eigen::VectorXd& z, double z0, const KernelSpec& ks,
                             int skip, bool* gaussian_fallback) {
  if (!(ks.h > 0.0)) {
    throw InvalidDomainError("local_vc_fit: bandwidth must be positive");
  }
  Eigen::MatrixXd levels;
  if (solve_local(targets, x, z, z0, ks.kernel, ks.h, ks.order, skip, levels)) {
    return levels;
  }
  if (ks.kernel == KernelType::Epanechnikov) {
    // Compact support can starve boundary windows at small h.
    if (solve_local(targets, x, z, z0, KernelType::Gaussian, ks.h, ks.order, skip, levels)) {
      if (gaussian_fallback) *gaussian_fallback = true;
      return levels;
    }
  }
  std::ostringstream os;
  os << "local design singular at z0=" << z0 << " with h=" << ks.h;
  throw LocalRankError(os.str());
}

Eigen::VectorXd local_vc_fit(const Eigen::VectorXd& target, const Eigen::MatrixXd& x,
                             const Eigen::VectorXd& z, double z0, const KernelSpec& ks,
                             int skip, bool* gaussian_fallback) {
  return local_vc_fit(Eigen::MatrixXd(target), x, z, z0, ks, skip, gaussian_fallback);
}

namespace {

struct Residualized {
  Eigen::VectorXd e_y;        // y - E_G(y)
  Eigen::MatrixXd e_w;        // W - E_G(W)
  Eigen::MatrixXd levels_y;   // n x d level coefficients of the y fits
  std::vector<Eigen::MatrixXd> levels_w;  // per i: d x q
  int fallback_count = 0;
};

// Local projections of y and every w column at each sample z_i; one local
// fit per i serves all targets. loo removes observation i from the fit
// that predicts it.
Residualized residualize(const Dataset& ds, const KernelSpec& ks, bool loo) {
  const long n = ds.n();
  const int q = ds.q();
  const int d = ds.d();

  Eigen::MatrixXd targets(n, 1 + q);
  targets.col(0) = ds.y;
  if (q > 0) targets.rightCols(q) = ds.w;

  Residualized r;
  r.e_y.resize(n);
  r.e_w.resize(n, q);
  r.levels_y.resize(n, d);
  r.levels_w.assign(static_cast<std::size_t>(n), Eigen::MatrixXd());

  for (long i = 0; i < n; ++i) {
    bool fb = false;
    const Eigen::MatrixXd levels =
        local_vc_fit(targets, ds.x, ds.z, ds.z[i], ks, loo ? static_cast<int>(i) : -1, &fb);
    if (fb) ++r.fallback_count;
    const Eigen::RowVectorXd xi = ds.x.row(i);
    r.e_y[i] = ds.y[i] - xi * levels.col(0);
    r.levels_y.row(i) = levels.col(0).transpose();
    if (q > 0) {
      r.e_w.row(i) = ds.w.row(i) - xi * levels.rightCols(q);
      r.levels_w[static_cast<std::size_t>(i)] = levels.rightCols(q);
    }
  }
  return r;
}

Eigen::VectorXd gamma_from_residualized(const Eigen::MatrixXd& e_w, const Eigen::VectorXd& e_y,
                                        const Eigen::VectorXd& scale) {
  const int q = static_cast<int>(e_w.cols());
  if (q == 0) return Eigen::VectorXd();
  Eigen::MatrixXd xw = e_w;
  Eigen::VectorXd yw = e_y;
  if (scale.size() > 0) {
    for (long i = 0; i < xw.rows(); ++i) {
      xw.row(i) /= scale[i];
      yw[i] /= scale[i];
    }
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xw);
  qr.setThreshold(1e-10);
  if (static_cast<int>(qr.rank()) < q) {
    throw CollinearityError("profile estimator: residualized linear block is singular");
  }
  return qr.solve(yw);
}

ProfileFit profile_impl(const Dataset& ds, const KernelSpec& ks, const VarianceModel* vm) {
  const long n = ds.n();
  const int q = ds.q();
  const int d = ds.d();

  Residualized r = residualize(ds, ks, /*loo=*/false);

  Eigen::VectorXd scale;
  if (vm != nullptr) {
    scale.resize(n);
    for (long i = 0; i < n; ++i) scale[i] = std::sqrt((*vm)(ds.z[i]));
  }

  ProfileFit pf;
  pf.ks = ks;
  pf.fallback_count = r.fallback_count;
  pf.gamma = gamma_from_residualized(r.e_w, r.e_y, scale);

  // Local fits are linear in their target, so the coefficient curves of
  // y - w'gamma are the y-levels minus the w-levels times gamma.
  pf.beta.resize(n, d);
  for (long i = 0; i < n; ++i) {
    Eigen::VectorXd bi = r.levels_y.row(i).transpose();
    if (q > 0) bi -= r.levels_w[static_cast<std::size_t>(i)] * pf.gamma;
    pf.beta.row(i) = bi.transpose();
  }

  pf.residuals.resize(n);
  for (long i = 0; i < n; ++i) {
    double fit_i = ds.x.row(i).dot(pf.beta.row(i));
    if (q > 0) fit_i += ds.w.row(i).dot(pf.gamma);
    pf.residuals[i] = ds.y[i] - fit_i;
  }
  pf.rss = pf.residuals.squaredNorm();
  pf.sigma2 = pf.rss / static_cast<double>(n);

  if (q > 0) {
    const Eigen::MatrixXd phi = r.e_w.transpose() * r.e_w / static_cast<double>(n);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(phi);
    qr.setThreshold(1e-12);
    if (static_cast<int>(qr.rank()) < q) {
      throw CollinearityError("profile estimator: residualized moment matrix is singular");
    }
    pf.sigma = pf.sigma2 * qr.inverse();
  }
  return pf;
}

}  // namespace

ProfileFit profile_gamma(const Dataset& ds, const KernelSpec& ks) {
  return profile_impl(ds, ks, nullptr);
}

ProfileFit profile_gamma_weighted(const Dataset& ds, const KernelSpec& ks,
                                  const VarianceModel& vm) {
  return profile_impl(ds, ks, &vm);
}

Eigen::MatrixXd profile_beta_curve(const Dataset& ds, const KernelSpec& ks,
                                   const Eigen::VectorXd& gamma, const Eigen::VectorXd& zs,
                                   int* fallback_count) {
  const int q = ds.q();
  Eigen::VectorXd net = ds.y;
  if (q > 0) net -= ds.w * gamma;

  Eigen::MatrixXd curves(zs.size(), ds.d());
  int fb_total = 0;
  for (long g = 0; g < zs.size(); ++g) {
    bool fb = false;
    const Eigen::MatrixXd levels =
        local_vc_fit(Eigen::MatrixXd(net), ds.x, ds.z, zs[g], ks, -1, &fb);
    if (fb) ++fb_total;
    curves.row(g) = levels.col(0).transpose();
  }
  if (fallback_count) *fallback_count = fb_total;
  return curves;
}

CvReport select_bandwidth(const Dataset& ds, const std::vector<double>& h_grid,
                          const KernelSpec& tmpl) {
  if (h_grid.empty()) {
    throw SelectionError("select_bandwidth: empty bandwidth grid");
  }
  CvReport rep;
  rep.scores.assign(h_grid.size(), std::numeric_limits<double>::quiet_NaN());
  rep.in_sample_rss.assign(h_grid.size(), std::numeric_limits<double>::quiet_NaN());
  rep.evaluable.assign(h_grid.size(), false);
  rep.notes.assign(h_grid.size(), "");

  for (std::size_t c = 0; c < h_grid.size(); ++c) {
    CvCandidate cand;
    cand.h = h_grid[c];
    rep.grid.push_back(cand);

    KernelSpec ks = tmpl;
    ks.h = h_grid[c];
    try {
      const Residualized r = residualize(ds, ks, /*loo=*/true);
      const Eigen::VectorXd gamma = gamma_from_residualized(r.e_w, r.e_y, Eigen::VectorXd());
      double cv = 0.0;
      for (long i = 0; i < ds.n(); ++i) {
        double e = r.e_y[i];
        if (ds.q() > 0) e -= r.e_w.row(i).dot(gamma);
        cv += e * e;
      }
      rep.scores[c] = cv;
      rep.in_sample_rss[c] = profile_impl(ds, ks, nullptr).rss;
      rep.evaluable[c] = true;
    } catch (const Error& e) {
      rep.notes[c] = e.what();
    }
  }

  double best = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < h_grid.size(); ++c) {
    if (rep.evaluable[c] && rep.scores[c] < best) best = rep.scores[c];
  }
  if (!std::isfinite(best)) {
    throw SelectionError("select_bandwidth: every bandwidth failed");
  }
  const double tol = 1e-12 * (1.0 + std::abs(best));
  int pick = -1;
  for (std::size_t c = 0; c < h_grid.size(); ++c) {
    if (!rep.evaluable[c] || rep.scores[c] > best + tol) continue;
    rep.ties.push_back(static_cast<int>(c));
    if (pick < 0 || rep.grid[c].h > rep.grid[static_cast<std::size_t>(pick)].h) {
      pick = static_cast<int>(c);
    }
  }
  rep.selected = pick;
  return rep;
}

std::vector<double> log_spaced(double lo, double hi, int count) {
  if (!(lo > 0.0) || !(hi > lo) || count < 2) {
    throw SelectionError("log_spaced: need 0 < lo < hi and count >= 2");
  }
  std::vector<double> out(static_cast<std::size_t>(count));
  const double la = std::log(lo);
  const double lb = std::log(hi);
  for (int j = 0; j < count; ++j) {
    out[static_cast<std::size_t>(j)] =
        std::exp(la + (lb - la) * static_cast<double>(j) / static_cast<double>(count - 1));
  }
  return out;
}

}  // namespace plvc
