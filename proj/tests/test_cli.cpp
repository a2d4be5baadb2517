#include <doctest.h>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "plvc/cli.hpp"
#include "plvc/errors.hpp"
#include "plvc/estimator.hpp"
#include "plvc/montecarlo.hpp"

using namespace plvc;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("plvc_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// Noiseless dataset with planted gamma and spline-representable curves.
void write_exact_csv(const fs::path& p, int n, double gamma) {
  Rng rng(91);
  std::ofstream out(p);
  out << "y,w1,x1,z\n";
  for (int i = 0; i < n; ++i) {
    const double z = rng.uniform(0.0, 2.0);
    const double w = rng.uniform(0.0, 2.0) + rng.normal();
    const double x = rng.uniform(0.0, 2.0);
    const double y = gamma * w + (1.0 + z) + x * (2.0 - 0.5 * z);
    out << format_g17(y) << "," << format_g17(w) << "," << format_g17(x) << ","
        << format_g17(z) << "\n";
  }
}

void write_dgp1_csv(const fs::path& p, int n, std::uint64_t seed) {
  Rng rng(seed);
  const DgpDraw draw = gen_dgp1(n, rng);
  std::ofstream out(p);
  out << "y,w1,x1,z\n";
  for (int i = 0; i < n; ++i) {
    out << format_g17(draw.ds.y[i]) << "," << format_g17(draw.ds.w(i, 0)) << ","
        << format_g17(draw.ds.x(i, 1)) << "," << format_g17(draw.ds.z[i]) << "\n";
  }
}

RunConfig base_config(const fs::path& dir, const std::string& data) {
  RunConfig cfg;
  cfg.data_path = (dir / data).string();
  cfg.roles.response = "y";
  cfg.roles.linear = {"w1"};
  cfg.roles.varying = {"x1"};
  cfg.roles.index = "z";
  cfg.out_dir = (dir / "out").string();
  cfg.seed = 42;
  cfg.seed_set = true;
  return cfg;
}

}  // namespace

TEST_CASE("read_csv parses numbers and reports bad cells by location") {
  TempDir tmp;
  {
    std::ofstream out(tmp.path / "ok.csv");
    out << "a,b\n1.5,2\n-3e2,0.25\n";
  }
  const Table t = read_csv((tmp.path / "ok.csv").string());
  CHECK(t.names.size() == 2);
  CHECK(t.nrows() == 2);
  CHECK(t.column("a")[1] == -300.0);

  {
    std::ofstream out(tmp.path / "bad.csv");
    out << "a,b\n1,2\nx,3\n";
  }
  try {
    read_csv((tmp.path / "bad.csv").string());
    FAIL("expected IngestionError");
  } catch (const IngestionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("row 2") != std::string::npos);
    CHECK(msg.find("'a'") != std::string::npos);
  }
  CHECK_THROWS_AS(read_csv((tmp.path / "missing.csv").string()), IngestionError);
}

TEST_CASE("format_g17 round-trips doubles through text") {
  Rng rng(92);
  for (int i = 0; i < 200; ++i) {
    const double v = (rng.uniform() - 0.5) * std::pow(10.0, rng.uniform(-8.0, 8.0));
    CHECK(std::strtod(format_g17(v).c_str(), nullptr) == v);
  }
}

TEST_CASE("config loading: defaults, overrides and unknown keys") {
  TempDir tmp;
  {
    std::ofstream out(tmp.path / "cfg.json");
    out << R"({"schema_version":1,"seed":7,"method":"spline",
               "basis":{"family":"bspline","degree":3,"k_min":5,"k_max":9},
               "data":{"path":"d.csv","response":"y","linear":["w1"],"varying":["x1"],"index":"z"}})";
  }
  const RunConfig cfg = load_config((tmp.path / "cfg.json").string());
  CHECK(cfg.seed == 7);
  CHECK(cfg.seed_set);
  CHECK(cfg.k_min == 5);
  CHECK(cfg.k_max == 9);
  CHECK(cfg.threads == 1);         // default
  CHECK(cfg.bootstrap_b == 399);   // default
  CHECK(cfg.roles.linear.size() == 1);

  {
    std::ofstream out(tmp.path / "bad.json");
    out << R"({"schema_version":1,"bogus_key":1})";
  }
  CHECK_THROWS_AS(load_config((tmp.path / "bad.json").string()), ConfigError);

  {
    std::ofstream out(tmp.path / "bad2.json");
    out << R"({"schema_version":1,"basis":{"familly":"bspline"}})";
  }
  CHECK_THROWS_AS(load_config((tmp.path / "bad2.json").string()), ConfigError);

  {
    std::ofstream out(tmp.path / "bad3.json");
    out << R"({"schema_version":2})";
  }
  CHECK_THROWS_AS(load_config((tmp.path / "bad3.json").string()), ConfigError);

  CHECK_THROWS_AS(load_config((tmp.path / "nope.json").string()), ConfigError);
}

TEST_CASE("cmd_fit recovers a noiseless planted model and is byte-deterministic") {
  TempDir tmp;
  write_exact_csv(tmp.path / "data.csv", 80, 0.7);
  RunConfig cfg = base_config(tmp.path, "data.csv");
  cfg.dims = {5};  // shared per-block dimension, fixed

  REQUIRE(cmd_fit(cfg) == 0);
  const fs::path out = fs::path(cfg.out_dir);
  REQUIRE(fs::exists(out / "fit.json"));
  REQUIRE(fs::exists(out / "beta_curves.csv"));

  const json fit = json::parse(slurp(out / "fit.json"));
  CHECK(fit.at("gamma").size() == 1);
  const double gamma = fit.at("gamma")[0].at("estimate").get<double>();
  CHECK(gamma == doctest::Approx(0.7).epsilon(1e-8));
  CHECK(fit.at("r_squared").get<double>() == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(fit.at("seed").get<std::uint64_t>() == 42);
  CHECK(fit.contains("config_hash"));

  // The reported t statistic is estimate / se (the empirical-report
  // convention: 0.481 / 0.0372 = 12.93).
  const double se = fit.at("gamma")[0].at("se").get<double>();
  const double t = fit.at("gamma")[0].at("t").get<double>();
  if (se > 0.0) CHECK(t == doctest::Approx(gamma / se).epsilon(1e-12));
  CHECK(0.481 / 0.0372 == doctest::Approx(12.93).epsilon(1e-3));

  const std::string fit1 = slurp(out / "fit.json");
  const std::string curves1 = slurp(out / "beta_curves.csv");
  REQUIRE(cmd_fit(cfg) == 0);
  CHECK(slurp(out / "fit.json") == fit1);           // byte identical
  CHECK(slurp(out / "beta_curves.csv") == curves1);
}

TEST_CASE("beta_curves.csv round-trips the evaluated curve values exactly") {
  TempDir tmp;
  write_dgp1_csv(tmp.path / "data.csv", 100, 5);
  RunConfig cfg = base_config(tmp.path, "data.csv");
  cfg.dims = {6};
  REQUIRE(cmd_fit(cfg) == 0);

  // Recompute the fit through the library and compare parsed text values.
  const Dataset ds = validate_dataset(read_csv(cfg.data_path), cfg.roles);
  const auto kv = make_knots(ds.z.minCoeff(), ds.z.maxCoeff(), 1, 3);
  const FitResult fr = fit(ds, {BasisSpec::bspline(kv), BasisSpec::bspline(kv)});

  const Table curves = read_csv((fs::path(cfg.out_dir) / "beta_curves.csv").string());
  CHECK(curves.nrows() == 201);
  const Eigen::VectorXd& z = curves.column("z");
  const Eigen::VectorXd& b1 = curves.column("beta_1");
  for (long i = 0; i < z.size(); ++i) {
    CHECK(b1[i] == beta_at(fr, 1, z[i]));  // exact round-trip
  }
}

TEST_CASE("cmd_fit with CV selection reports the chosen basis") {
  TempDir tmp;
  write_dgp1_csv(tmp.path / "data.csv", 100, 9);
  RunConfig cfg = base_config(tmp.path, "data.csv");
  cfg.k_min = 4;
  cfg.k_max = 8;
  REQUIRE(cmd_fit(cfg) == 0);
  const json fit = json::parse(slurp(fs::path(cfg.out_dir) / "fit.json"));
  CHECK(fit.at("basis").at("selected_by_cv").get<bool>());
  const int total = fit.at("basis").at("cv").at("selected_total_K").get<int>();
  CHECK(total >= 8);
  CHECK(total <= 16);
}

TEST_CASE("cmd_fit kernel method writes the same report shape") {
  TempDir tmp;
  write_dgp1_csv(tmp.path / "data.csv", 100, 13);
  RunConfig cfg = base_config(tmp.path, "data.csv");
  cfg.method = "kernel";
  cfg.h = 0.15;
  REQUIRE(cmd_fit(cfg) == 0);
  const json fit = json::parse(slurp(fs::path(cfg.out_dir) / "fit.json"));
  CHECK(fit.at("method") == "kernel");
  CHECK(fit.at("kernel").at("h").get<double>() == 0.15);
  CHECK(fit.at("gamma")[0].contains("se"));
  CHECK(fit.at("gamma")[0].contains("t"));
  CHECK(fs::exists(fs::path(cfg.out_dir) / "beta_curves.csv"));
}

TEST_CASE("cmd_cv emits one row per candidate") {
  TempDir tmp;
  write_dgp1_csv(tmp.path / "data.csv", 90, 21);
  RunConfig cfg = base_config(tmp.path, "data.csv");
  cfg.k_min = 4;
  cfg.k_max = 9;
  REQUIRE(cmd_cv(cfg) == 0);
  const Table t = read_csv((fs::path(cfg.out_dir) / "cv_curve.csv").string());
  CHECK(t.nrows() == 6);

  RunConfig kcfg = base_config(tmp.path, "data.csv");
  kcfg.method = "kernel";
  kcfg.h_count = 7;
  kcfg.out_dir = (tmp.path / "out_kernel").string();
  REQUIRE(cmd_cv(kcfg) == 0);
  const Table tk = read_csv((fs::path(kcfg.out_dir) / "cv_curve.csv").string());
  CHECK(tk.nrows() == 7);
}

TEST_CASE("cmd_test enforces preconditions and writes a full record") {
  TempDir tmp;
  write_dgp1_csv(tmp.path / "data.csv", 100, 31);
  RunConfig cfg = base_config(tmp.path, "data.csv");
  cfg.dims = {5};
  cfg.bootstrap_b = 99;

  SUBCASE("null must differ from alt") {
    cfg.null_model = "plvc";
    cfg.alt_model = "plvc";
    CHECK_THROWS_AS(cmd_test(cfg), ConfigError);
  }

  SUBCASE("B below 99 is rejected") {
    cfg.bootstrap_b = 50;
    CHECK_THROWS_AS(cmd_test(cfg), TestError);
  }

  SUBCASE("a complete run writes test.json") {
    REQUIRE(cmd_test(cfg) == 0);
    const json t = json::parse(slurp(fs::path(cfg.out_dir) / "test.json"));
    CHECK(t.at("p_value").get<double>() > 0.0);
    CHECK(t.at("p_value").get<double>() <= 1.0);
    CHECK(t.at("b_completed").get<int>() == 99);
    CHECK(t.at("bootstrap_stats").size() == 99);
    CHECK(t.at("rss0").get<double>() >= t.at("rss").get<double>() * (1.0 - 1e-8));
    CHECK(t.at("seed").get<std::uint64_t>() == 42);
  }
}

TEST_CASE("cmd_simulate writes the long-format table with the expected row count") {
  TempDir tmp;
  RunConfig cfg;
  cfg.out_dir = (tmp.path / "out").string();
  cfg.seed = 42;
  cfg.seed_set = true;
  cfg.dgp = "dgp1";
  cfg.sim_n = {60, 80};
  cfg.reps = 5;
  cfg.sim_methods = {"spline", "kernel"};
  cfg.dims = {5};
  cfg.h = 0.15;

  REQUIRE(cmd_simulate(cfg) == 0);
  const json sim = json::parse(slurp(fs::path(cfg.out_dir) / "sim.json"));
  CHECK(sim.at("seed").get<std::uint64_t>() == 42);
  CHECK(sim.at("runs").size() == 2);

  // Rows: |n| x |methods| x (q rows of mse + d rows of mase) = 2 x 2 x 3.
  const Table t = read_csv((fs::path(cfg.out_dir) / "tables.csv").string());
  CHECK(t.nrows() == 12);
}

TEST_CASE("cmd_basis_dump matches direct basis evaluation") {
  TempDir tmp;
  RunConfig cfg;
  cfg.out_dir = (tmp.path / "out").string();
  cfg.seed_set = true;
  cfg.dims = {6};
  cfg.z_range = std::make_pair(0.0, 2.0);
  cfg.grid_points = 51;

  REQUIRE(cmd_basis_dump(cfg) == 0);
  const Table t = read_csv((fs::path(cfg.out_dir) / "basis_values.csv").string());
  CHECK(t.nrows() == 51);
  REQUIRE(t.names.size() == 7);  // z + 6 basis columns

  const auto kv = make_knots(0.0, 2.0, 2, 3);
  for (long i = 0; i < t.nrows(); ++i) {
    const double z = t.column("z")[i];
    const Eigen::VectorXd b = bspline_eval(kv, z);
    for (int j = 0; j < 6; ++j) {
      CHECK(t.column("b_" + std::to_string(j))[i] == b[j]);
    }
  }
}

TEST_CASE("run_command surfaces errors as machine-readable records") {
  RunConfig cfg;
  cfg.seed_set = true;
  cfg.data_path = "/nonexistent/data.csv";
  cfg.roles.response = "y";
  cfg.roles.index = "z";
  CHECK(run_command("fit", cfg) == 1);
  CHECK(run_command("unknown", cfg) == 1);
}

#ifdef PLVC_CLI_PATH
TEST_CASE("the installed binary runs end to end") {
  TempDir tmp;
  write_exact_csv(tmp.path / "data.csv", 60, 0.7);
  {
    std::ofstream out(tmp.path / "cfg.json");
    out << R"({"schema_version":1,"seed":3,"method":"spline",
               "basis":{"dims":[5]},
               "data":{"path":")"
        << (tmp.path / "data.csv").string()
        << R"(","response":"y","linear":["w1"],"varying":["x1"],"index":"z"},
               "out_dir":")"
        << (tmp.path / "out").string() << R"("})";
  }
  const std::string cmd = std::string(PLVC_CLI_PATH) + " fit --config " +
                          (tmp.path / "cfg.json").string() + " >/dev/null 2>&1";
  CHECK(std::system(cmd.c_str()) == 0);
  CHECK(fs::exists(tmp.path / "out" / "fit.json"));

  const std::string bad = std::string(PLVC_CLI_PATH) + " fit --config " +
                          (tmp.path / "nope.json").string() + " >/dev/null 2>&1";
  CHECK(std::system(bad.c_str()) != 0);
}
#endif
