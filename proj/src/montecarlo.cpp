#include "plvc/montecarlo.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

#include "plvc/errors.hpp"
#include "plvc/estimator.hpp"
#include "plvc/selection.hpp"

namespace plvc {

double beta1_true(double z) {
  const double t = 24.0 * z;
  return 1.0 + t * t * t * std::exp(-t);
}

double beta2_true(double z) { return z + std::sin(z); }

namespace {

Dataset empty_frame(int n, int q, int d) {
  Dataset ds;
  ds.y.resize(n);
  ds.w.resize(n, q);
  ds.x.resize(n, d);
  ds.x.col(0).setOnes();
  ds.z.resize(n);
  ds.w_labels.assign(static_cast<std::size_t>(q), "");
  for (int j = 0; j < q; ++j) ds.w_labels[static_cast<std::size_t>(j)] = "w" + std::to_string(j + 1);
  ds.x_labels.push_back("(intercept)");
  for (int l = 1; l < d; ++l) ds.x_labels.push_back("x" + std::to_string(l));
  return ds;
}

}  // namespace

DgpDraw gen_dgp1(int n, Rng& rng, double noise_sd) {
  DgpDraw draw;
  draw.ds = empty_frame(n, 1, 2);
  for (int i = 0; i < n; ++i) {
    const double v1 = rng.uniform(0.0, 2.0);
    const double v2 = rng.uniform(0.0, 2.0);
    const double v3 = rng.uniform(0.0, 2.0);
    const double z = rng.uniform(0.0, 2.0);
    const double u = noise_sd * rng.normal();
    const double w = v1 + 2.0 * v3;
    const double x = v2 + v3;
    draw.ds.z[i] = z;
    draw.ds.w(i, 0) = w;
    draw.ds.x(i, 1) = x;
    draw.ds.y[i] = 1.0 + 0.5 * w + x * beta1_true(z) + u;
  }
  draw.truth.gamma = Eigen::VectorXd::Constant(1, 0.5);
  draw.truth.beta = {[](double) { return 1.0; }, [](double z) { return beta1_true(z); }};
  return draw;
}

DgpDraw gen_dgp2(int n, Rng& rng, double noise_sd) {
  DgpDraw draw;
  draw.ds = empty_frame(n, 1, 3);
  for (int i = 0; i < n; ++i) {
    const double v1 = rng.uniform(0.0, 2.0);
    const double v2 = rng.uniform(0.0, 2.0);
    const double v3 = rng.uniform(0.0, 2.0);
    const double v4 = rng.uniform(0.0, 2.0);
    const double z = rng.uniform(0.0, 2.0);
    const double u = noise_sd * rng.normal();
    const double w = v1 + 2.0 * v3;
    const double x1 = v2 + v3;
    const double x2 = v4 + 0.5 * v3;
    draw.ds.z[i] = z;
    draw.ds.w(i, 0) = w;
    draw.ds.x(i, 1) = x1;
    draw.ds.x(i, 2) = x2;
    draw.ds.y[i] = 4.0 + 0.5 * w + x1 * beta1_true(z) + x2 * beta2_true(z) + u;
  }
  draw.truth.gamma = Eigen::VectorXd::Constant(1, 0.5);
  draw.truth.beta = {[](double) { return 4.0; }, [](double z) { return beta1_true(z); },
                     [](double z) { return beta2_true(z); }};
  return draw;
}

DgpDraw gen_custom_hetero(int n, Rng& rng, double noise_sd) {
  // E[(1+z)^2] = 13/3 for z ~ U[0,2]; dividing by its root keeps the
  // unconditional error variance at noise_sd^2.
  const double normalizer = std::sqrt(13.0 / 3.0);
  DgpDraw draw;
  draw.ds = empty_frame(n, 1, 2);
  for (int i = 0; i < n; ++i) {
    const double v1 = rng.uniform(0.0, 2.0);
    const double v2 = rng.uniform(0.0, 2.0);
    const double v3 = rng.uniform(0.0, 2.0);
    const double z = rng.uniform(0.0, 2.0);
    const double u = noise_sd * (1.0 + z) * rng.normal() / normalizer;
    const double w = v1 + 2.0 * v3;
    const double x = v2 + v3;
    draw.ds.z[i] = z;
    draw.ds.w(i, 0) = w;
    draw.ds.x(i, 1) = x;
    draw.ds.y[i] = 1.0 + 0.5 * w + x * beta1_true(z) + u;
  }
  draw.truth.gamma = Eigen::VectorXd::Constant(1, 0.5);
  draw.truth.beta = {[](double) { return 1.0; }, [](double z) { return beta1_true(z); }};
  return draw;
}

DgpDraw generate(const DgpSpec& spec, Rng& rng) {
  switch (spec.which) {
    case Dgp::Dgp1:
      return gen_dgp1(spec.n, rng, spec.noise_sd);
    case Dgp::Dgp2:
      return gen_dgp2(spec.n, rng, spec.noise_sd);
    case Dgp::CustomHetero:
      return gen_custom_hetero(spec.n, rng, spec.noise_sd);
  }
  throw InvalidDomainError("generate: unknown DGP");
}

Eigen::VectorXd mse_gamma(const std::vector<Eigen::VectorXd>& estimates,
                          const Eigen::VectorXd& truth) {
  if (estimates.empty()) {
    throw InvalidDomainError("mse_gamma: no estimates");
  }
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(truth.size());
  for (const auto& g : estimates) {
    acc += (g - truth).array().square().matrix();
  }
  return acc / static_cast<double>(estimates.size());
}

double mase_beta(const std::vector<Eigen::VectorXd>& curve_estimates,
                 const std::vector<Eigen::VectorXd>& curve_truths) {
  if (curve_estimates.empty() || curve_estimates.size() != curve_truths.size()) {
    throw InvalidDomainError("mase_beta: estimate/truth replication counts differ");
  }
  double acc = 0.0;
  for (std::size_t j = 0; j < curve_estimates.size(); ++j) {
    acc += (curve_estimates[j] - curve_truths[j]).squaredNorm() /
           static_cast<double>(curve_estimates[j].size());
  }
  return acc / static_cast<double>(curve_estimates.size());
}

std::string method_name(Method m) {
  switch (m) {
    case Method::Spline:
      return "spline";
    case Method::Kernel:
      return "kernel";
    case Method::WeightedSpline:
      return "weighted_spline";
  }
  return "?";
}

namespace {

void parallel_for(int threads, int count, const std::function<void(int)>& body) {
  if (threads <= 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= count) return;
      body(i);
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
}

std::pair<double, double> knot_range(const SelectionPolicy& policy, const Eigen::VectorXd& z) {
  if (policy.z_range) return *policy.z_range;
  return {z.minCoeff(), z.maxCoeff()};
}

std::vector<BasisSpec> fixed_specs(const SelectionPolicy& policy, int d, double lo, double hi) {
  std::vector<int> dims = policy.fixed_dims;
  if (dims.empty()) dims.assign(static_cast<std::size_t>(d), 5);
  if (static_cast<int>(dims.size()) == 1 && d > 1) {
    dims.assign(static_cast<std::size_t>(d), dims[0]);
  }
  if (static_cast<int>(dims.size()) != d) {
    throw SelectionError("fixed dims must match the number of varying blocks");
  }
  std::vector<BasisSpec> specs;
  for (int k : dims) {
    if (policy.family == BasisSpec::Family::BSpline) {
      specs.push_back(BasisSpec::bspline(make_knots(lo, hi, k - policy.degree - 1, policy.degree)));
    } else {
      specs.push_back(BasisSpec::power(k - 1));
    }
  }
  return specs;
}

MethodRecord run_spline(const DgpDraw& draw, const SelectionPolicy& policy, bool weighted) {
  const auto [lo, hi] = knot_range(policy, draw.ds.z);
  const int d = draw.ds.d();

  std::vector<BasisSpec> specs;
  MethodRecord rec;
  if (policy.cv) {
    const auto grid = shared_dimension_grid(d, policy.k_min, policy.k_max, {policy.degree}, lo,
                                            hi, policy.family);
    const CvReport cv = select_basis(draw.ds, grid);
    specs = grid[static_cast<std::size_t>(cv.selected)];
    rec.dims = cv.chosen().dims;
  } else {
    specs = fixed_specs(policy, d, lo, hi);
    for (const auto& s : specs) rec.dims.push_back(s.dimension());
  }

  FitResult fr = fit(draw.ds, specs);
  if (weighted) {
    BasisSpec vspec;
    if (policy.variance_family == BasisSpec::Family::BSpline) {
      vspec = BasisSpec::bspline(make_knots(lo, hi, policy.variance_dim - 4, 3));
    } else {
      vspec = BasisSpec::power(policy.variance_dim - 1);
    }
    const VarianceModel vm = estimate_variance_function(fr, vspec);
    fr = fit_weighted(draw.ds, specs, vm);
  }

  rec.gamma_hat = fr.gamma;
  rec.ase.resize(static_cast<std::size_t>(d));
  for (int l = 0; l < d; ++l) {
    double acc = 0.0;
    for (long i = 0; i < draw.ds.n(); ++i) {
      const double e = beta_at(fr, l, draw.ds.z[i]) - draw.truth.beta[static_cast<std::size_t>(l)](draw.ds.z[i]);
      acc += e * e;
    }
    rec.ase[static_cast<std::size_t>(l)] = acc / static_cast<double>(draw.ds.n());
  }
  return rec;
}

MethodRecord run_kernel(const DgpDraw& draw, const SelectionPolicy& policy) {
  KernelSpec ks;
  ks.kernel = policy.kernel;
  ks.order = policy.local_order;

  MethodRecord rec;
  if (policy.cv) {
    const CvReport cv = select_bandwidth(draw.ds, policy.h_grid, ks);
    ks.h = cv.chosen().h;
  } else {
    ks.h = policy.fixed_h;
  }
  rec.h = ks.h;

  const ProfileFit pf = profile_gamma(draw.ds, ks);
  rec.gamma_hat = pf.gamma;
  const int d = draw.ds.d();
  rec.ase.resize(static_cast<std::size_t>(d));
  for (int l = 0; l < d; ++l) {
    double acc = 0.0;
    for (long i = 0; i < draw.ds.n(); ++i) {
      const double e =
          pf.beta(i, l) - draw.truth.beta[static_cast<std::size_t>(l)](draw.ds.z[i]);
      acc += e * e;
    }
    rec.ase[static_cast<std::size_t>(l)] = acc / static_cast<double>(draw.ds.n());
  }
  return rec;
}

}  // namespace

SimReport run_sim_custom(const std::function<DgpDraw(int, Rng&)>& gen, const DgpSpec& spec,
                         const std::vector<Method>& methods, int reps,
                         const SelectionPolicy& policy, int threads) {
  if (reps < 1) {
    throw InvalidDomainError("run_sim: reps must be at least 1");
  }
  if (spec.n < 20) {
    throw InvalidDomainError("run_sim: n must be at least 20");
  }
  const auto t0 = std::chrono::steady_clock::now();

  SimReport report;
  report.spec = spec;
  report.methods = methods;
  report.reps_requested = reps;
  report.seed = spec.seed;
  report.records.resize(static_cast<std::size_t>(reps));

  parallel_for(threads, reps, [&](int r) {
    RepRecord& rec = report.records[static_cast<std::size_t>(r)];
    rec.rep = r;
    Rng rng = Rng::stream(spec.seed, static_cast<std::uint64_t>(r));
    try {
      const DgpDraw draw = gen(spec.n, rng);
      for (Method m : methods) {
        switch (m) {
          case Method::Spline:
            rec.by_method.push_back(run_spline(draw, policy, false));
            break;
          case Method::WeightedSpline:
            rec.by_method.push_back(run_spline(draw, policy, true));
            break;
          case Method::Kernel:
            rec.by_method.push_back(run_kernel(draw, policy));
            break;
        }
      }
    } catch (const std::exception& e) {
      rec.ok = false;
      rec.error = e.what();
      rec.by_method.clear();
    }
  });

  // Aggregate over completed replications.
  const std::size_t nm = methods.size();
  report.mse.assign(nm, Eigen::VectorXd());
  report.mase.assign(nm, {});
  report.k_counts.assign(nm, {});
  report.h_counts.assign(nm, {});

  std::vector<std::vector<Eigen::VectorXd>> gammas(nm);
  std::vector<std::vector<std::vector<double>>> ases(nm);
  for (const RepRecord& rec : report.records) {
    if (!rec.ok) {
      ++report.failures;
      continue;
    }
    ++report.reps_completed;
    for (std::size_t m = 0; m < nm; ++m) {
      const MethodRecord& mr = rec.by_method[m];
      gammas[m].push_back(mr.gamma_hat);
      ases[m].push_back(mr.ase);
      if (!mr.dims.empty()) {
        int total = 0;
        for (int k : mr.dims) total += k;
        report.k_counts[m][total] += 1;
      }
      if (mr.h > 0.0) report.h_counts[m][mr.h] += 1;
    }
  }
  if (report.reps_completed == 0) {
    throw SelectionError("run_sim: every replication failed");
  }
  report.valid = report.failures * 50 <= report.reps_requested;  // 2% budget

  // Truth gamma is shared across replications; regenerate one draw cheaply.
  Rng rng0 = Rng::stream(spec.seed, 0);
  const DgpTruth truth = gen(spec.n, rng0).truth;
  for (std::size_t m = 0; m < nm; ++m) {
    report.mse[m] = mse_gamma(gammas[m], truth.gamma);
    const std::size_t d = ases[m].front().size();
    report.mase[m].assign(d, 0.0);
    for (const auto& a : ases[m]) {
      for (std::size_t l = 0; l < d; ++l) report.mase[m][l] += a[l];
    }
    for (std::size_t l = 0; l < d; ++l) {
      report.mase[m][l] /= static_cast<double>(ases[m].size());
    }
  }

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

SimReport run_sim(const DgpSpec& spec, const std::vector<Method>& methods, int reps,
                  const SelectionPolicy& policy, int threads) {
  return run_sim_custom(
      [&spec](int n, Rng& rng) {
        DgpSpec local = spec;
        local.n = n;
        return generate(local, rng);
      },
      spec, methods, reps, policy, threads);
}

}  // namespace plvc
