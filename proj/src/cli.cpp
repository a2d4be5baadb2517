#include "plvc/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "plvc/boottest.hpp"
#include "plvc/errors.hpp"
#include "plvc/estimator.hpp"
#include "plvc/kernel.hpp"
#include "plvc/montecarlo.hpp"
#include "plvc/selection.hpp"
#include "plvc/version.hpp"

namespace plvc {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& scope) {
  for (const auto& item : obj.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* k) {
          return item.key() == k;
        }) == allowed.end()) {
      throw ConfigError("unknown config key '" + item.key() + "' in " + scope);
    }
  }
}

template <typename T>
void read_key(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) {
    try {
      out = obj.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(std::string("config key '") + key + "' has the wrong type");
    }
  }
}

void require_one_of(const std::string& value, std::initializer_list<const char*> allowed,
                    const char* key) {
  for (const char* a : allowed) {
    if (value == a) return;
  }
  std::ostringstream os;
  os << "config key '" << key << "' must be one of {";
  bool first = true;
  for (const char* a : allowed) {
    os << (first ? "" : ", ") << a;
    first = false;
  }
  os << "}, got '" << value << "'";
  throw ConfigError(os.str());
}

}  // namespace

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file '" + path + "'");
  }
  json root;
  try {
    in >> root;
  } catch (const json::exception& e) {
    throw ConfigError("config parse error in '" + path + "': " + e.what());
  }
  if (!root.is_object()) {
    throw ConfigError("config root must be a JSON object");
  }

  check_keys(root,
             {"schema_version", "seed", "threads", "strict", "dof_correction", "out_dir",
              "grid_points", "data", "method", "basis", "kernel", "test", "simulate"},
             "the top level");

  RunConfig cfg;
  read_key(root, "schema_version", cfg.schema_version);
  if (cfg.schema_version != kSchemaVersion) {
    throw ConfigError("unsupported schema_version " + std::to_string(cfg.schema_version));
  }
  if (root.contains("seed")) {
    cfg.seed = root.at("seed").get<std::uint64_t>();
    cfg.seed_set = true;
  }
  read_key(root, "threads", cfg.threads);
  read_key(root, "strict", cfg.strict);
  read_key(root, "dof_correction", cfg.dof_correction);
  read_key(root, "out_dir", cfg.out_dir);
  read_key(root, "grid_points", cfg.grid_points);
  read_key(root, "method", cfg.method);
  require_one_of(cfg.method, {"spline", "kernel"}, "method");

  if (root.contains("data")) {
    const json& d = root.at("data");
    check_keys(d, {"path", "response", "linear", "varying", "index"}, "data");
    read_key(d, "path", cfg.data_path);
    read_key(d, "response", cfg.roles.response);
    read_key(d, "linear", cfg.roles.linear);
    read_key(d, "varying", cfg.roles.varying);
    read_key(d, "index", cfg.roles.index);
  }

  if (root.contains("basis")) {
    const json& b = root.at("basis");
    check_keys(b, {"family", "degree", "degrees", "dims", "k_min", "k_max", "z_range"}, "basis");
    read_key(b, "family", cfg.basis_family);
    require_one_of(cfg.basis_family, {"bspline", "power"}, "basis.family");
    read_key(b, "degree", cfg.degree);
    read_key(b, "degrees", cfg.degrees);
    read_key(b, "dims", cfg.dims);
    read_key(b, "k_min", cfg.k_min);
    read_key(b, "k_max", cfg.k_max);
    if (b.contains("z_range")) {
      const auto r = b.at("z_range").get<std::vector<double>>();
      if (r.size() != 2 || !(r[0] < r[1])) {
        throw ConfigError("basis.z_range must be [lo, hi] with lo < hi");
      }
      cfg.z_range = std::make_pair(r[0], r[1]);
    }
  }

  if (root.contains("kernel")) {
    const json& k = root.at("kernel");
    check_keys(k, {"type", "order", "h", "h_min", "h_max", "h_count"}, "kernel");
    read_key(k, "type", cfg.kernel_type);
    require_one_of(cfg.kernel_type, {"epanechnikov", "gaussian"}, "kernel.type");
    read_key(k, "order", cfg.local_order);
    require_one_of(cfg.local_order, {"constant", "linear"}, "kernel.order");
    read_key(k, "h", cfg.h);
    read_key(k, "h_min", cfg.h_min);
    read_key(k, "h_max", cfg.h_max);
    read_key(k, "h_count", cfg.h_count);
  }

  if (root.contains("test")) {
    const json& t = root.at("test");
    check_keys(t, {"null", "alt", "b", "multiplier", "reselect_per_replicate"}, "test");
    read_key(t, "null", cfg.null_model);
    require_one_of(cfg.null_model, {"linear", "plvc"}, "test.null");
    read_key(t, "alt", cfg.alt_model);
    require_one_of(cfg.alt_model, {"plvc", "fullvc"}, "test.alt");
    read_key(t, "b", cfg.bootstrap_b);
    read_key(t, "multiplier", cfg.multiplier);
    require_one_of(cfg.multiplier, {"mammen", "rademacher"}, "test.multiplier");
    read_key(t, "reselect_per_replicate", cfg.reselect_per_replicate);
  }

  if (root.contains("simulate")) {
    const json& s = root.at("simulate");
    check_keys(s, {"dgp", "n", "reps", "methods", "noise_sd", "variance_dim"}, "simulate");
    read_key(s, "dgp", cfg.dgp);
    require_one_of(cfg.dgp, {"dgp1", "dgp2", "custom_hetero"}, "simulate.dgp");
    if (s.contains("n")) {
      if (s.at("n").is_array()) {
        cfg.sim_n = s.at("n").get<std::vector<int>>();
      } else {
        cfg.sim_n = {s.at("n").get<int>()};
      }
    }
    read_key(s, "reps", cfg.reps);
    read_key(s, "methods", cfg.sim_methods);
    for (const auto& m : cfg.sim_methods) {
      require_one_of(m, {"spline", "kernel", "weighted_spline"}, "simulate.methods");
    }
    read_key(s, "noise_sd", cfg.noise_sd);
    read_key(s, "variance_dim", cfg.variance_dim);
  }
  return cfg;
}

namespace {

json config_to_json(const RunConfig& cfg) {
  json j;
  j["schema_version"] = cfg.schema_version;
  j["seed"] = cfg.seed;
  j["threads"] = cfg.threads;
  j["strict"] = cfg.strict;
  j["dof_correction"] = cfg.dof_correction;
  j["out_dir"] = cfg.out_dir;
  j["grid_points"] = cfg.grid_points;
  j["method"] = cfg.method;
  j["data"] = {{"path", cfg.data_path},
               {"response", cfg.roles.response},
               {"linear", cfg.roles.linear},
               {"varying", cfg.roles.varying},
               {"index", cfg.roles.index}};
  j["basis"] = {{"family", cfg.basis_family}, {"degree", cfg.degree},
                {"degrees", cfg.degrees},     {"dims", cfg.dims},
                {"k_min", cfg.k_min},         {"k_max", cfg.k_max}};
  if (cfg.z_range) j["basis"]["z_range"] = {cfg.z_range->first, cfg.z_range->second};
  j["kernel"] = {{"type", cfg.kernel_type}, {"order", cfg.local_order}, {"h", cfg.h},
                 {"h_min", cfg.h_min},      {"h_max", cfg.h_max},       {"h_count", cfg.h_count}};
  j["test"] = {{"null", cfg.null_model},
               {"alt", cfg.alt_model},
               {"b", cfg.bootstrap_b},
               {"multiplier", cfg.multiplier},
               {"reselect_per_replicate", cfg.reselect_per_replicate}};
  j["simulate"] = {{"dgp", cfg.dgp},           {"n", cfg.sim_n},
                   {"reps", cfg.reps},         {"methods", cfg.sim_methods},
                   {"noise_sd", cfg.noise_sd}, {"variance_dim", cfg.variance_dim}};
  return j;
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

std::string config_hash(const RunConfig& cfg) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(config_to_json(cfg).dump())));
  return buf;
}

Table read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IngestionError("cannot open data file '" + path + "'");
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw IngestionError("data file '" + path + "' is empty");
  }
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::string cur;
    for (char c : s) {
      if (c == ',') {
        cells.push_back(cur);
        cur.clear();
      } else if (c != '\r') {
        cur.push_back(c);
      }
    }
    cells.push_back(cur);
    return cells;
  };

  Table t;
  t.names = split(line);
  std::vector<std::vector<double>> cols(t.names.size());

  long row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    ++row;
    const auto cells = split(line);
    if (cells.size() != t.names.size()) {
      std::ostringstream os;
      os << "data row " << row << " has " << cells.size() << " cells, expected "
         << t.names.size();
      throw IngestionError(os.str());
    }
    for (std::size_t j = 0; j < cells.size(); ++j) {
      char* end = nullptr;
      const std::string& cell = cells[j];
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || (end != nullptr && *end != '\0')) {
        std::ostringstream os;
        os << "non-numeric cell '" << cell << "' at data row " << row << ", column '"
           << t.names[j] << "'";
        throw IngestionError(os.str());
      }
      cols[j].push_back(v);
    }
  }
  for (auto& c : cols) {
    t.columns.emplace_back(Eigen::Map<Eigen::VectorXd>(c.data(), static_cast<long>(c.size())));
  }
  return t;
}

namespace {

FitOptions fit_options(const RunConfig& cfg) {
  FitOptions o;
  o.out_of_range = cfg.strict ? OutOfRange::Error : OutOfRange::Clamp;
  o.dof_correction = cfg.dof_correction;
  return o;
}

std::pair<double, double> resolve_range(const RunConfig& cfg, const Eigen::VectorXd& z) {
  if (cfg.z_range) return *cfg.z_range;
  return {z.minCoeff(), z.maxCoeff()};
}

BasisSpec::Family parse_family(const std::string& s) {
  return s == "power" ? BasisSpec::Family::Power : BasisSpec::Family::BSpline;
}

std::vector<BasisSpec> specs_from_dims(const RunConfig& cfg, int d, double lo, double hi) {
  std::vector<int> dims = cfg.dims;
  if (static_cast<int>(dims.size()) == 1 && d > 1) {
    dims.assign(static_cast<std::size_t>(d), dims[0]);
  }
  if (static_cast<int>(dims.size()) != d) {
    throw ConfigError("basis.dims must list one dimension per varying block (or a single shared one)");
  }
  std::vector<BasisSpec> specs;
  for (int k : dims) {
    if (parse_family(cfg.basis_family) == BasisSpec::Family::BSpline) {
      specs.push_back(BasisSpec::bspline(make_knots(lo, hi, k - cfg.degree - 1, cfg.degree)));
    } else {
      specs.push_back(BasisSpec::power(k - 1));
    }
  }
  return specs;
}

struct SeriesChoice {
  std::vector<BasisSpec> specs;
  bool by_cv = false;
  json cv_info;  // selected candidate summary when CV ran
};

SeriesChoice choose_series_specs(const RunConfig& cfg, const Dataset& ds, double lo, double hi,
                                 const FitOptions& opts) {
  SeriesChoice choice;
  if (!cfg.dims.empty()) {
    choice.specs = specs_from_dims(cfg, ds.d(), lo, hi);
    return choice;
  }
  const std::vector<int> degrees = cfg.degrees.empty() ? std::vector<int>{cfg.degree}
                                                       : cfg.degrees;
  const auto grid = shared_dimension_grid(ds.d(), cfg.k_min, cfg.k_max, degrees, lo, hi,
                                          parse_family(cfg.basis_family));
  const CvReport rep = select_basis(ds, grid, opts);
  choice.specs = grid[static_cast<std::size_t>(rep.selected)];
  choice.by_cv = true;
  choice.cv_info = {{"selected_index", rep.selected},
                    {"selected_dims", rep.chosen().dims},
                    {"selected_total_K", rep.chosen().total_dim()},
                    {"cv_score", rep.scores[static_cast<std::size_t>(rep.selected)]}};
  return choice;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error("cannot open output file '" + path.string() + "'");
  }
  out << content;
  if (!out) {
    throw Error("write failed for '" + path.string() + "'");
  }
}

void write_json(const fs::path& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

json provenance(const RunConfig& cfg, const char* command) {
  return json{{"schema_version", kSchemaVersion},
              {"command", command},
              {"version", kVersion},
              {"seed", cfg.seed},
              {"config_hash", config_hash(cfg)}};
}

Eigen::VectorXd linspace(double lo, double hi, int count) {
  Eigen::VectorXd v(count);
  for (int i = 0; i < count; ++i) {
    v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
  }
  return v;
}

Dataset load_dataset(const RunConfig& cfg) {
  if (cfg.data_path.empty()) {
    throw ConfigError("data.path is required for this command");
  }
  if (cfg.roles.response.empty() || cfg.roles.index.empty()) {
    throw ConfigError("data.response and data.index are required");
  }
  return validate_dataset(read_csv(cfg.data_path), cfg.roles);
}

json gamma_table(const std::vector<std::string>& labels, const Eigen::VectorXd& gamma,
                 const Eigen::MatrixXd& sigma, long n) {
  json rows = json::array();
  for (long j = 0; j < gamma.size(); ++j) {
    const double se = std::sqrt(sigma(j, j) / static_cast<double>(n));
    rows.push_back({{"name", labels[static_cast<std::size_t>(j)]},
                    {"estimate", gamma[j]},
                    {"se", se},
                    {"t", se > 0.0 ? gamma[j] / se : 0.0}});
  }
  return rows;
}

}  // namespace

int cmd_fit(const RunConfig& cfg) {
  const Dataset ds = load_dataset(cfg);
  const FitOptions opts = fit_options(cfg);
  const auto [lo, hi] = resolve_range(cfg, ds.z);
  fs::create_directories(cfg.out_dir);

  json out = provenance(cfg, "fit");
  out["method"] = cfg.method;
  out["n"] = ds.n();
  out["q"] = ds.q();
  out["d"] = ds.d();

  Eigen::VectorXd zgrid = linspace(lo, hi, 201);
  Eigen::MatrixXd curves(zgrid.size(), ds.d());

  if (cfg.method == "spline") {
    const SeriesChoice choice = choose_series_specs(cfg, ds, lo, hi, opts);
    const FitResult fr = fit(ds, choice.specs, opts);

    out["K"] = fr.block_offsets.back();
    out["gamma"] = gamma_table(ds.w_labels, fr.gamma, fr.sigma, fr.n);
    out["r_squared"] = fr.r_squared;
    out["rss"] = fr.rss;
    out["sigma2"] = fr.sigma2;
    out["effective_rank"] = fr.rank_p;
    out["clamp_events"] = fr.clamp_events;
    json basis;
    basis["family"] = cfg.basis_family;
    basis["z_range"] = {lo, hi};
    json dims = json::array();
    json descr = json::array();
    for (const auto& s : choice.specs) {
      dims.push_back(s.dimension());
      descr.push_back(s.describe());
    }
    basis["dims"] = dims;
    basis["blocks"] = descr;
    basis["selected_by_cv"] = choice.by_cv;
    if (choice.by_cv) basis["cv"] = choice.cv_info;
    out["basis"] = basis;

    for (int l = 0; l < ds.d(); ++l) curves.col(l) = beta_curve(fr, l, zgrid);
  } else {
    KernelSpec ks;
    ks.kernel = cfg.kernel_type == "gaussian" ? KernelType::Gaussian : KernelType::Epanechnikov;
    ks.order = cfg.local_order == "constant" ? LocalOrder::Constant : LocalOrder::Linear;
    json kj = {{"type", cfg.kernel_type}, {"order", cfg.local_order}};
    if (cfg.h > 0.0) {
      ks.h = cfg.h;
      kj["selected_by_cv"] = false;
    } else {
      const CvReport rep = select_bandwidth(ds, log_spaced(cfg.h_min, cfg.h_max, cfg.h_count), ks);
      ks.h = rep.chosen().h;
      kj["selected_by_cv"] = true;
    }
    kj["h"] = ks.h;

    const ProfileFit pf = profile_gamma(ds, ks);
    out["gamma"] = gamma_table(ds.w_labels, pf.gamma, pf.sigma, ds.n());
    const double tss = (ds.y.array() - ds.y.mean()).square().sum();
    out["r_squared"] = tss > 0.0 ? 1.0 - pf.rss / tss : 1.0;
    out["rss"] = pf.rss;
    out["sigma2"] = pf.sigma2;
    kj["gaussian_fallbacks"] = pf.fallback_count;
    out["kernel"] = kj;

    curves = profile_beta_curve(ds, ks, pf.gamma, zgrid);
  }

  std::ostringstream csv;
  csv << "z";
  for (int l = 0; l < ds.d(); ++l) csv << ",beta_" << l;
  csv << "\n";
  for (long i = 0; i < zgrid.size(); ++i) {
    csv << format_g17(zgrid[i]);
    for (int l = 0; l < ds.d(); ++l) csv << "," << format_g17(curves(i, l));
    csv << "\n";
  }

  out["x_labels"] = ds.x_labels;
  out["outputs"] = {"fit.json", "beta_curves.csv"};
  write_file(fs::path(cfg.out_dir) / "beta_curves.csv", csv.str());
  write_json(fs::path(cfg.out_dir) / "fit.json", out);
  return 0;
}

int cmd_cv(const RunConfig& cfg) {
  const Dataset ds = load_dataset(cfg);
  const FitOptions opts = fit_options(cfg);
  const auto [lo, hi] = resolve_range(cfg, ds.z);
  fs::create_directories(cfg.out_dir);

  std::ostringstream csv;
  if (cfg.method == "spline") {
    const std::vector<int> degrees =
        cfg.degrees.empty() ? std::vector<int>{cfg.degree} : cfg.degrees;
    const auto grid = shared_dimension_grid(ds.d(), cfg.k_min, cfg.k_max, degrees, lo, hi,
                                            parse_family(cfg.basis_family));
    const auto rows = cv_curve(ds, grid, opts);
    csv << "candidate,per_block_k,total_K,cv_score,in_sample_rss,evaluable\n";
    for (std::size_t c = 0; c < rows.size(); ++c) {
      const auto& r = rows[c];
      csv << grid[c][0].describe() << "," << r.candidate.dims[0] << ","
          << r.candidate.total_dim() << "," << format_g17(r.cv_score) << ","
          << format_g17(r.in_sample_rss) << "," << (r.evaluable ? 1 : 0) << "\n";
    }
  } else {
    KernelSpec ks;
    ks.kernel = cfg.kernel_type == "gaussian" ? KernelType::Gaussian : KernelType::Epanechnikov;
    ks.order = cfg.local_order == "constant" ? LocalOrder::Constant : LocalOrder::Linear;
    const CvReport rep = select_bandwidth(ds, log_spaced(cfg.h_min, cfg.h_max, cfg.h_count), ks);
    csv << "candidate,h,cv_score,in_sample_rss,evaluable\n";
    for (std::size_t c = 0; c < rep.grid.size(); ++c) {
      csv << "h=" << format_g17(rep.grid[c].h) << "," << format_g17(rep.grid[c].h) << ","
          << format_g17(rep.scores[c]) << "," << format_g17(rep.in_sample_rss[c]) << ","
          << (rep.evaluable[c] ? 1 : 0) << "\n";
    }
  }
  write_file(fs::path(cfg.out_dir) / "cv_curve.csv", csv.str());
  return 0;
}

int cmd_test(const RunConfig& cfg) {
  const Dataset ds = load_dataset(cfg);
  const FitOptions opts = fit_options(cfg);
  const auto [lo, hi] = resolve_range(cfg, ds.z);
  fs::create_directories(cfg.out_dir);

  if (cfg.null_model == cfg.alt_model) {
    throw ConfigError("test.null and test.alt must name different model classes");
  }

  // One selection on the original data fixes the series configuration for
  // both classes; the alternative reuses the null basis on shared blocks.
  const SeriesChoice choice = choose_series_specs(cfg, ds, lo, hi, opts);

  ModelClass null_mc;
  if (cfg.null_model == "linear") {
    null_mc.family = ModelFamily::ParametricLinear;
  } else {
    null_mc.family = ModelFamily::Plvc;
    null_mc.specs = choice.specs;
  }
  ModelClass alt_mc;
  if (cfg.alt_model == "plvc") {
    alt_mc.family = ModelFamily::Plvc;
    alt_mc.specs = choice.specs;
  } else {
    alt_mc.family = ModelFamily::FullVc;
    alt_mc.specs = choice.specs;
    for (int j = 0; j < ds.q(); ++j) alt_mc.specs.push_back(choice.specs[0]);
  }

  BootstrapOptions bopts;
  bopts.threads = cfg.threads;
  bopts.law = cfg.multiplier == "rademacher" ? MultiplierLaw::Rademacher
                                             : MultiplierLaw::MammenTwoPoint;
  bopts.fit = opts;
  if (cfg.reselect_per_replicate) {
    bopts.reselect_per_replicate = true;
    const std::vector<int> degrees =
        cfg.degrees.empty() ? std::vector<int>{cfg.degree} : cfg.degrees;
    if (null_mc.family == ModelFamily::Plvc) {
      bopts.null_grid = shared_dimension_grid(ds.d(), cfg.k_min, cfg.k_max, degrees, lo, hi,
                                              parse_family(cfg.basis_family));
    }
    bopts.alt_grid = shared_dimension_grid(
        alt_mc.family == ModelFamily::FullVc ? ds.d() + ds.q() : ds.d(), cfg.k_min, cfg.k_max,
        degrees, lo, hi, parse_family(cfg.basis_family));
  }

  const TestResult res =
      wild_bootstrap_test(ds, null_mc, alt_mc, cfg.bootstrap_b, cfg.seed, bopts);

  json out = provenance(cfg, "test");
  out["null"] = cfg.null_model;
  out["alt"] = cfg.alt_model;
  out["statistic"] = res.statistic;
  out["p_value"] = res.p_value;
  out["b_requested"] = cfg.bootstrap_b;
  out["b_completed"] = res.b;
  out["dropped"] = res.dropped;
  out["rss0"] = res.rss0;
  out["rss"] = res.rss;
  out["multiplier"] = cfg.multiplier;
  out["bootstrap_stats"] = res.bootstrap_stats;
  json basis;
  basis["dims"] = json::array();
  for (const auto& s : null_mc.specs.empty() ? choice.specs : null_mc.specs) {
    basis["dims"].push_back(s.dimension());
  }
  basis["selected_by_cv"] = choice.by_cv;
  out["basis"] = basis;
  write_json(fs::path(cfg.out_dir) / "test.json", out);
  return 0;
}

int cmd_simulate(const RunConfig& cfg) {
  fs::create_directories(cfg.out_dir);

  DgpSpec spec;
  spec.which = cfg.dgp == "dgp2" ? Dgp::Dgp2
               : cfg.dgp == "custom_hetero" ? Dgp::CustomHetero
                                            : Dgp::Dgp1;
  spec.noise_sd = cfg.noise_sd;
  spec.seed = cfg.seed;

  std::vector<Method> methods;
  for (const auto& m : cfg.sim_methods) {
    if (m == "spline") methods.push_back(Method::Spline);
    if (m == "kernel") methods.push_back(Method::Kernel);
    if (m == "weighted_spline") methods.push_back(Method::WeightedSpline);
  }

  SelectionPolicy policy;
  policy.cv = cfg.dims.empty();
  policy.k_min = cfg.k_min;
  policy.k_max = cfg.k_max;
  policy.degree = cfg.degree;
  policy.family = parse_family(cfg.basis_family);
  policy.fixed_dims = cfg.dims;
  policy.h_grid = log_spaced(cfg.h_min, cfg.h_max, cfg.h_count);
  if (cfg.h > 0.0) {
    policy.cv = policy.cv && false;  // fixed bandwidth implies fixed dims too
    policy.fixed_h = cfg.h;
  }
  policy.kernel = cfg.kernel_type == "gaussian" ? KernelType::Gaussian : KernelType::Epanechnikov;
  policy.local_order = cfg.local_order == "constant" ? LocalOrder::Constant : LocalOrder::Linear;
  policy.variance_dim = cfg.variance_dim;
  policy.z_range = cfg.z_range;

  json out = provenance(cfg, "simulate");
  out["dgp"] = cfg.dgp;
  out["reps"] = cfg.reps;
  out["noise_sd"] = cfg.noise_sd;
  json runs = json::array();

  std::ostringstream csv;
  csv << "dgp,method,n,metric,block,value\n";

  for (int n : cfg.sim_n) {
    spec.n = n;
    const SimReport rep = run_sim(spec, methods, cfg.reps, policy, cfg.threads);

    json jr;
    jr["n"] = n;
    jr["reps_completed"] = rep.reps_completed;
    jr["failures"] = rep.failures;
    jr["valid"] = rep.valid;
    jr["wall_seconds"] = rep.wall_seconds;
    json per_method = json::array();
    for (std::size_t m = 0; m < methods.size(); ++m) {
      json jm;
      jm["method"] = method_name(methods[m]);
      jm["mse_gamma"] = std::vector<double>(rep.mse[m].data(),
                                            rep.mse[m].data() + rep.mse[m].size());
      jm["mase_beta"] = rep.mase[m];
      if (!rep.k_counts[m].empty()) {
        json hist = json::object();
        for (const auto& [k, c] : rep.k_counts[m]) hist[std::to_string(k)] = c;
        jm["selected_total_K"] = hist;
      }
      if (!rep.h_counts[m].empty()) {
        json hist = json::object();
        for (const auto& [h, c] : rep.h_counts[m]) hist[format_g17(h)] = c;
        jm["selected_h"] = hist;
      }
      per_method.push_back(jm);

      for (long jcomp = 0; jcomp < rep.mse[m].size(); ++jcomp) {
        csv << cfg.dgp << "," << method_name(methods[m]) << "," << n << ",mse_gamma,"
            << (jcomp + 1) << "," << format_g17(rep.mse[m][jcomp]) << "\n";
      }
      for (std::size_t l = 0; l < rep.mase[m].size(); ++l) {
        csv << cfg.dgp << "," << method_name(methods[m]) << "," << n << ",mase_beta," << l
            << "," << format_g17(rep.mase[m][l]) << "\n";
      }
    }
    jr["methods"] = per_method;
    runs.push_back(jr);
  }
  out["runs"] = runs;

  write_json(fs::path(cfg.out_dir) / "sim.json", out);
  write_file(fs::path(cfg.out_dir) / "tables.csv", csv.str());
  return 0;
}

int cmd_basis_dump(const RunConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  const auto [lo, hi] = cfg.z_range ? *cfg.z_range : std::make_pair(0.0, 1.0);
  const int k = cfg.dims.empty() ? 8 : cfg.dims[0];

  BasisSpec spec;
  if (parse_family(cfg.basis_family) == BasisSpec::Family::BSpline) {
    spec = BasisSpec::bspline(make_knots(lo, hi, k - cfg.degree - 1, cfg.degree));
  } else {
    spec = BasisSpec::power(k - 1);
  }

  const Eigen::VectorXd zgrid = linspace(lo, hi, cfg.grid_points);
  std::ostringstream csv;
  csv << "z";
  for (int j = 0; j < spec.dimension(); ++j) csv << ",b_" << j;
  csv << "\n";
  for (long i = 0; i < zgrid.size(); ++i) {
    const Eigen::VectorXd values = spec.eval(zgrid[i], OutOfRange::Clamp);
    csv << format_g17(zgrid[i]);
    for (long j = 0; j < values.size(); ++j) csv << "," << format_g17(values[j]);
    csv << "\n";
  }
  write_file(fs::path(cfg.out_dir) / "basis_values.csv", csv.str());
  return 0;
}

int run_command(const std::string& command, RunConfig cfg) {
  try {
    if (!cfg.seed_set) {
      std::random_device rd;
      cfg.seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
      cfg.seed_set = true;
    }
    if (cfg.threads < 1) cfg.threads = 1;

    if (command == "fit") return cmd_fit(cfg);
    if (command == "cv") return cmd_cv(cfg);
    if (command == "test") return cmd_test(cfg);
    if (command == "simulate") return cmd_simulate(cfg);
    if (command == "basis-dump") return cmd_basis_dump(cfg);
    throw ConfigError("unknown command '" + command + "'");
  } catch (const Error& e) {
    const char* kind = "error";
    if (dynamic_cast<const ConfigError*>(&e)) kind = "config";
    else if (dynamic_cast<const IngestionError*>(&e)) kind = "ingestion";
    else if (dynamic_cast<const CollinearityError*>(&e)) kind = "collinearity";
    else if (dynamic_cast<const SaturationError*>(&e)) kind = "saturation";
    else if (dynamic_cast<const SelectionError*>(&e)) kind = "selection";
    else if (dynamic_cast<const LocalRankError*>(&e)) kind = "local_rank";
    else if (dynamic_cast<const DegenerateFitError*>(&e)) kind = "degenerate_fit";
    else if (dynamic_cast<const TestError*>(&e)) kind = "test";
    else if (dynamic_cast<const OutOfRangeError*>(&e)) kind = "out_of_range";
    else if (dynamic_cast<const InvalidDomainError*>(&e)) kind = "invalid_domain";
    std::fprintf(stderr, "%s\n", json{{"error", kind}, {"message", e.what()}}.dump().c_str());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "%s\n", json{{"error", "internal"}, {"message", e.what()}}.dump().c_str());
    return 1;
  }
}

}  // namespace plvc
