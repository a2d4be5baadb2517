#include <doctest.h>

#include <cmath>

#include "plvc/montecarlo.hpp"

using namespace plvc;

TEST_CASE("beta1_true values") {
  CHECK(beta1_true(0.0) == 1.0);
  // Peak at 24 z = 3: t^3 e^{-t} is maximized at t = 3 with value 27 e^{-3}.
  CHECK(beta1_true(0.125) == doctest::Approx(1.0 + 27.0 * std::exp(-3.0)).epsilon(1e-12));
  CHECK(beta1_true(0.125) == doctest::Approx(2.344251).epsilon(1e-6));
  // Far tail decays back to 1.
  CHECK(beta1_true(2.0) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(beta1_true(2.0) > 1.0);
}

TEST_CASE("beta2_true values") {
  CHECK(beta2_true(0.0) == 0.0);
  const double half_pi = 1.5707963267948966;
  CHECK(beta2_true(half_pi) == doctest::Approx(half_pi + 1.0).epsilon(1e-12));
  CHECK(beta2_true(2.0) == doctest::Approx(2.909297).epsilon(1e-6));
}

TEST_CASE("DGP1 sample moments") {
  Rng rng(71);
  const int n = 1000000;
  const DgpDraw draw = gen_dgp1(n, rng);

  CHECK(draw.ds.q() == 1);
  CHECK(draw.ds.d() == 2);
  CHECK(draw.truth.gamma[0] == 0.5);

  // E[w] = E[v1] + 2 E[v3] = 3.
  CHECK(draw.ds.w.col(0).mean() == doctest::Approx(3.0).epsilon(0.01 / 3.0));

  // Recover u from the known truth and check its variance.
  Eigen::VectorXd u(n);
  for (int i = 0; i < n; ++i) {
    u[i] = draw.ds.y[i] - 1.0 - 0.5 * draw.ds.w(i, 0) -
           draw.ds.x(i, 1) * beta1_true(draw.ds.z[i]);
  }
  const double var_u = u.array().square().mean() - u.mean() * u.mean();
  const double se = std::sqrt(2.0 * 0.25 * 0.25 / n);  // se of a normal sample variance
  CHECK(std::abs(var_u - 0.25) <= 3.0 * se);

  // Seeded determinism.
  Rng r1(5), r2(5);
  const DgpDraw d1 = gen_dgp1(100, r1);
  const DgpDraw d2 = gen_dgp1(100, r2);
  CHECK((d1.ds.y - d2.ds.y).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("DGP2 sample moments") {
  Rng rng(72);
  const int n = 1000000;
  const DgpDraw draw = gen_dgp2(n, rng);

  CHECK(draw.ds.d() == 3);
  // E[x2] = E[v4] + 0.5 E[v3] = 1.5.
  CHECK(draw.ds.x.col(2).mean() == doctest::Approx(1.5).epsilon(0.01 / 1.5));

  // cov(w, x1) = 2 Var(v3) = 2/3.
  const Eigen::VectorXd w = draw.ds.w.col(0);
  const Eigen::VectorXd x1 = draw.ds.x.col(1);
  const double cov = (w.array() - w.mean()).cwiseProduct(x1.array() - x1.mean()).mean();
  CHECK(std::abs(cov - 2.0 / 3.0) <= 0.01);

  // Intercept truth is 4.
  CHECK(draw.truth.beta[0](0.7) == 4.0);
}

TEST_CASE("CustomHetero keeps the unconditional error variance at noise_sd^2") {
  Rng rng(73);
  const int n = 400000;
  const DgpDraw draw = gen_custom_hetero(n, rng);
  Eigen::VectorXd u(n);
  for (int i = 0; i < n; ++i) {
    u[i] = draw.ds.y[i] - 1.0 - 0.5 * draw.ds.w(i, 0) -
           draw.ds.x(i, 1) * beta1_true(draw.ds.z[i]);
  }
  CHECK(u.array().square().mean() == doctest::Approx(0.25).epsilon(0.02));
}

TEST_CASE("mse_gamma arithmetic") {
  const Eigen::VectorXd truth = Eigen::VectorXd::Constant(1, 0.5);
  std::vector<Eigen::VectorXd> perfect = {truth, truth, truth};
  CHECK(mse_gamma(perfect, truth)[0] == 0.0);

  std::vector<Eigen::VectorXd> off = {Eigen::VectorXd::Constant(1, 0.4),
                                      Eigen::VectorXd::Constant(1, 0.6)};
  CHECK(mse_gamma(off, truth)[0] == doctest::Approx(0.01).epsilon(1e-14));
}

TEST_CASE("mase_beta arithmetic") {
  Eigen::VectorXd t1(3), t2(3);
  t1 << 1.0, 2.0, 3.0;
  t2 << 0.0, 1.0, -1.0;
  CHECK(mase_beta({t1, t2}, {t1, t2}) == 0.0);

  const double delta = 0.3;
  const Eigen::VectorXd o1 = t1.array() + delta;
  const Eigen::VectorXd o2 = t2.array() + delta;
  CHECK(mase_beta({o1, o2}, {t1, t2}) == doctest::Approx(delta * delta).epsilon(1e-12));
}

TEST_CASE("run_sim with a representable noiseless truth reaches MSE zero") {
  // beta_0(z) = 1, beta_1(z) = z are inside any cubic spline span, so the
  // single-replication fit is exact to rounding.
  auto gen = [](int n, Rng& rng) {
    DgpDraw draw;
    draw.ds.y.resize(n);
    draw.ds.w.resize(n, 1);
    draw.ds.x.resize(n, 2);
    draw.ds.x.col(0).setOnes();
    draw.ds.z.resize(n);
    draw.ds.w_labels = {"w1"};
    draw.ds.x_labels = {"(intercept)", "x1"};
    for (int i = 0; i < n; ++i) {
      draw.ds.z[i] = rng.uniform(0.0, 2.0);
      draw.ds.w(i, 0) = rng.uniform(0.0, 2.0) + rng.normal();
      draw.ds.x(i, 1) = rng.uniform(0.0, 2.0);
      draw.ds.y[i] = 1.0 + 0.5 * draw.ds.w(i, 0) + draw.ds.x(i, 1) * draw.ds.z[i];
    }
    draw.truth.gamma = Eigen::VectorXd::Constant(1, 0.5);
    draw.truth.beta = {[](double) { return 1.0; }, [](double z) { return z; }};
    return draw;
  };

  DgpSpec spec;
  spec.n = 60;
  spec.seed = 99;
  SelectionPolicy policy;
  policy.cv = false;
  policy.fixed_dims = {5, 5};

  const SimReport rep = run_sim_custom(gen, spec, {Method::Spline}, 1, policy);
  CHECK(rep.reps_completed == 1);
  CHECK(rep.mse[0][0] <= 1e-12);
  CHECK(rep.mase[0][0] <= 1e-12);
  CHECK(rep.mase[0][1] <= 1e-12);
}

TEST_CASE("run_sim aggregates match a naive recomputation from the records") {
  DgpSpec spec;
  spec.which = Dgp::Dgp1;
  spec.n = 80;
  spec.seed = 1234;
  SelectionPolicy policy;
  policy.cv = false;
  policy.fixed_dims = {5, 5};
  policy.fixed_h = 0.15;

  const SimReport rep = run_sim(spec, {Method::Spline, Method::Kernel}, 30, policy);
  REQUIRE(rep.reps_completed == 30);

  for (std::size_t m = 0; m < rep.methods.size(); ++m) {
    double acc_mse = 0.0;
    double acc_mase1 = 0.0;
    for (const auto& r : rep.records) {
      acc_mse += std::pow(r.by_method[m].gamma_hat[0] - 0.5, 2);
      acc_mase1 += r.by_method[m].ase[1];
    }
    CHECK(rep.mse[m][0] == doctest::Approx(acc_mse / 30.0).epsilon(1e-15));
    CHECK(rep.mase[m][1] == doctest::Approx(acc_mase1 / 30.0).epsilon(1e-15));
  }
}

TEST_CASE("replication records are identical under different thread counts") {
  DgpSpec spec;
  spec.which = Dgp::Dgp1;
  spec.n = 60;
  spec.seed = 777;
  SelectionPolicy policy;
  policy.cv = false;
  policy.fixed_dims = {5, 5};

  const SimReport a = run_sim(spec, {Method::Spline}, 16, policy, 1);
  const SimReport b = run_sim(spec, {Method::Spline}, 16, policy, 3);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t r = 0; r < a.records.size(); ++r) {
    CHECK(a.records[r].by_method[0].gamma_hat[0] == b.records[r].by_method[0].gamma_hat[0]);
    CHECK(a.records[r].by_method[0].ase[1] == b.records[r].by_method[0].ase[1]);
  }
  CHECK(a.mse[0][0] == b.mse[0][0]);  // bitwise: index-ordered reduction
}

TEST_CASE("run_sim rejects bad arguments") {
  DgpSpec spec;
  spec.n = 10;  // too small
  SelectionPolicy policy;
  CHECK_THROWS(run_sim(spec, {Method::Spline}, 1, policy));
  spec.n = 100;
  CHECK_THROWS(run_sim(spec, {Method::Spline}, 0, policy));
}
