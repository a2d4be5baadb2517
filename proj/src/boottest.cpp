#include "plvc/boottest.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

#include "plvc/errors.hpp"
#include "plvc/selection.hpp"

namespace plvc {

double rss_stat(double rss0, double rss) {
  if (!(rss > 0.0)) {
    throw DegenerateFitError("rss_stat: alternative RSS must be positive");
  }
  if (rss0 < rss * (1.0 - 1e-8)) {
    throw TestError("rss_stat: null RSS below alternative RSS, models are not nested");
  }
  return (rss0 - rss) / rss;
}

Eigen::VectorXd wild_multipliers(int n, Rng& rng, MultiplierLaw law) {
  if (n < 1) {
    throw InvalidDomainError("wild_multipliers: n must be at least 1");
  }
  Eigen::VectorXd xi(n);
  if (law == MultiplierLaw::Rademacher) {
    for (int i = 0; i < n; ++i) xi[i] = rng.uniform() < 0.5 ? -1.0 : 1.0;
    return xi;
  }
  const double sqrt5 = std::sqrt(5.0);
  const double lo = (1.0 - sqrt5) / 2.0;
  const double hi = (1.0 + sqrt5) / 2.0;
  const double p_lo = (5.0 + sqrt5) / 10.0;
  for (int i = 0; i < n; ++i) xi[i] = rng.uniform() < p_lo ? lo : hi;
  return xi;
}

double bootstrap_p_value(const std::vector<double>& bootstrap_stats, double statistic) {
  long count = 0;
  for (double s : bootstrap_stats) {
    if (s >= statistic) ++count;
  }
  return static_cast<double>(1 + count) / static_cast<double>(bootstrap_stats.size() + 1);
}

namespace {

// LS fit of one model class, reduced to the projection onto its fixed
// regressor space: that is all the statistic needs, and it lets bootstrap
// refits reuse the factorization.
struct ClassFit {
  Eigen::MatrixXd q1;  // thin Q of the class design
  Eigen::VectorXd fitted;
  Eigen::VectorXd residuals;
  double rss = 0.0;
};

// Pure varying coefficient view: the linear block is absorbed into x so
// every coefficient may vary with z.
Dataset absorb_linear_block(const Dataset& ds) {
  Dataset full = ds;
  full.x.conservativeResize(ds.n(), ds.d() + ds.q());
  if (ds.q() > 0) full.x.rightCols(ds.q()) = ds.w;
  full.w.resize(ds.n(), 0);
  for (const auto& label : ds.w_labels) full.x_labels.push_back(label);
  full.w_labels.clear();
  return full;
}

Eigen::MatrixXd class_design(const Dataset& ds, const ModelClass& mc, const FitOptions& opts) {
  const long n = ds.n();
  const int q = ds.q();
  const int d = ds.d();

  switch (mc.family) {
    case ModelFamily::ParametricLinear: {
      Eigen::MatrixXd m(n, d + q + 1);
      m.leftCols(d) = ds.x;  // includes the intercept column
      if (q > 0) m.middleCols(d, q) = ds.w;
      m.col(d + q) = ds.z;
      return m;
    }
    case ModelFamily::Plvc: {
      if (static_cast<int>(mc.specs.size()) != d) {
        throw TestError("model class: Plvc needs one basis spec per varying block");
      }
      const DesignMatrix dm = build_design(ds, mc.specs, opts.out_of_range);
      Eigen::MatrixXd m(n, q + dm.total_dim());
      if (q > 0) m.leftCols(q) = ds.w;
      m.rightCols(dm.total_dim()) = dm.p;
      return m;
    }
    case ModelFamily::FullVc: {
      if (static_cast<int>(mc.specs.size()) != d + q) {
        throw TestError("model class: FullVc needs one basis spec per varying and linear column");
      }
      return build_design(absorb_linear_block(ds), mc.specs, opts.out_of_range).p;
    }
  }
  throw TestError("model class: unknown family");
}

ClassFit fit_class(const Dataset& ds, const ModelClass& mc, const FitOptions& opts) {
  const Eigen::MatrixXd design = class_design(ds, mc, opts);
  Projector proj(design, opts.pivot_rtol);
  ClassFit cf;
  cf.q1 = proj.thin_q();
  cf.fitted = cf.q1 * (cf.q1.transpose() * ds.y);
  cf.residuals = ds.y - cf.fitted;
  cf.rss = cf.residuals.squaredNorm();
  return cf;
}

double projected_rss(const Eigen::MatrixXd& q1, const Eigen::VectorXd& y) {
  const Eigen::VectorXd r = y - q1 * (q1.transpose() * y);
  return r.squaredNorm();
}

void validate_nesting(const Dataset& ds, const ModelClass& null_model,
                      const ModelClass& alt_model) {
  if (static_cast<int>(null_model.family) >= static_cast<int>(alt_model.family)) {
    throw TestError("specification test: the null class must be strictly nested in the alternative");
  }
  if (null_model.family == ModelFamily::Plvc && alt_model.family == ModelFamily::FullVc) {
    const int d = ds.d();
    if (static_cast<int>(alt_model.specs.size()) != d + ds.q() ||
        static_cast<int>(null_model.specs.size()) != d) {
      throw TestError("specification test: block counts do not match the dataset");
    }
    for (int l = 0; l < d; ++l) {
      if (!(alt_model.specs[l] == null_model.specs[l])) {
        throw TestError(
            "specification test: alternative must reuse the null basis on shared blocks");
      }
    }
  }
}

}  // namespace

TestResult wild_bootstrap_test(const Dataset& ds, const ModelClass& null_model,
                               const ModelClass& alt_model, int B, std::uint64_t seed,
                               const BootstrapOptions& opts) {
  if (B < 99) {
    throw TestError("wild_bootstrap_test: B must be at least 99");
  }
  validate_nesting(ds, null_model, alt_model);

  const ClassFit f0 = fit_class(ds, null_model, opts.fit);
  const ClassFit fa = fit_class(ds, alt_model, opts.fit);

  TestResult res;
  res.seed = seed;
  res.rss0 = f0.rss;
  res.rss = fa.rss;
  res.statistic = rss_stat(f0.rss, fa.rss);

  const long n = ds.n();
  std::vector<double> stats(static_cast<std::size_t>(B),
                            std::numeric_limits<double>::quiet_NaN());

  // Refits on a bootstrap sample reuse the frozen design factorizations;
  // only the response changes. Reselection falls back to full refits.
  auto replicate_rss = [&](const ModelClass& mc, bool is_null, const ClassFit& frozen,
                           Dataset& scratch) -> double {
    if (!opts.reselect_per_replicate || mc.family == ModelFamily::ParametricLinear) {
      return projected_rss(frozen.q1, scratch.y);
    }
    const auto& grid = is_null ? opts.null_grid : opts.alt_grid;
    if (grid.empty()) {
      return projected_rss(frozen.q1, scratch.y);
    }
    const Dataset view =
        mc.family == ModelFamily::FullVc ? absorb_linear_block(scratch) : scratch;
    const CvReport cv = select_basis(view, grid, opts.fit);
    ModelClass chosen = mc;
    chosen.specs = grid[static_cast<std::size_t>(cv.selected)];
    return fit_class(scratch, chosen, opts.fit).rss;
  };

  std::atomic<int> next{0};
  auto worker = [&]() {
    Dataset scratch = ds;
    for (;;) {
      const int b = next.fetch_add(1);
      if (b >= B) return;
      Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(b) + 1);
      try {
        const Eigen::VectorXd xi = wild_multipliers(static_cast<int>(n), rng, opts.law);
        scratch.y = f0.fitted + f0.residuals.cwiseProduct(xi);
        const double rss0_star = replicate_rss(null_model, true, f0, scratch);
        const double rss_star = replicate_rss(alt_model, false, fa, scratch);
        stats[static_cast<std::size_t>(b)] = rss_stat(rss0_star, rss_star);
      } catch (const Error&) {
        // replicate dropped; counted below
      }
    }
  };

  const int threads = std::max(1, opts.threads);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  for (double s : stats) {
    if (std::isnan(s)) {
      ++res.dropped;
    } else {
      res.bootstrap_stats.push_back(s);
    }
  }
  res.b = static_cast<int>(res.bootstrap_stats.size());
  if (res.dropped * 20 > B) {
    std::ostringstream os;
    os << "wild_bootstrap_test: " << res.dropped << " of " << B << " replicates failed";
    throw TestError(os.str());
  }
  res.p_value = bootstrap_p_value(res.bootstrap_stats, res.statistic);
  return res;
}

}  // namespace plvc
