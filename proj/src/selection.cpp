#include "plvc/selection.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "plvc/errors.hpp"

namespace plvc {

std::string CvCandidate::describe() const {
  std::ostringstream os;
  if (!dims.empty()) {
    os << "k=(";
    for (std::size_t l = 0; l < dims.size(); ++l) {
      if (l) os << ",";
      os << dims[l];
    }
    os << "), K=" << total_dim();
  } else {
    os << "h=" << h;
  }
  return os.str();
}

namespace {

struct LooEval {
  double score;
  double rss;
};

LooEval loo_eval(const Dataset& ds, const std::vector<BasisSpec>& specs,
                 const FitOptions& opts) {
  const DesignMatrix dm = build_design(ds, specs, opts.out_of_range);
  const long n = ds.n();
  const int q = ds.q();

  Eigen::MatrixXd joint(n, q + dm.total_dim());
  if (q > 0) joint.leftCols(q) = ds.w;
  joint.rightCols(dm.total_dim()) = dm.p;

  Projector proj(joint, opts.pivot_rtol);
  const Eigen::MatrixXd q1 = proj.thin_q();
  const Eigen::VectorXd fitted = q1 * (q1.transpose() * ds.y);
  const Eigen::VectorXd hat = q1.rowwise().squaredNorm();

  LooEval ev{0.0, 0.0};
  for (long i = 0; i < n; ++i) {
    if (hat[i] >= 1.0 - 1e-8) {
      std::ostringstream os;
      os << "leave-one-out saturation: hat diagonal " << hat[i] << " at row " << (i + 1)
         << " (model interpolates)";
      throw SaturationError(os.str());
    }
    const double u = ds.y[i] - fitted[i];
    ev.rss += u * u;
    const double e = u / (1.0 - hat[i]);
    ev.score += e * e;
  }
  return ev;
}

}  // namespace

double loo_cv_score(const Dataset& ds, const std::vector<BasisSpec>& specs,
                    const FitOptions& opts) {
  return loo_eval(ds, specs, opts).score;
}

CvReport select_basis(const Dataset& ds, const std::vector<std::vector<BasisSpec>>& grid,
                      const FitOptions& opts) {
  if (grid.empty()) {
    throw SelectionError("select_basis: empty candidate grid");
  }
  CvReport rep;
  rep.grid.reserve(grid.size());
  rep.scores.assign(grid.size(), std::numeric_limits<double>::quiet_NaN());
  rep.in_sample_rss.assign(grid.size(), std::numeric_limits<double>::quiet_NaN());
  rep.evaluable.assign(grid.size(), false);
  rep.notes.assign(grid.size(), "");

  for (std::size_t c = 0; c < grid.size(); ++c) {
    CvCandidate cand;
    for (const auto& s : grid[c]) cand.dims.push_back(s.dimension());
    rep.grid.push_back(cand);
    try {
      const LooEval ev = loo_eval(ds, grid[c], opts);
      rep.scores[c] = ev.score;
      rep.in_sample_rss[c] = ev.rss;
      rep.evaluable[c] = true;
    } catch (const Error& e) {
      rep.notes[c] = e.what();
    }
  }

  double best = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < grid.size(); ++c) {
    if (rep.evaluable[c] && rep.scores[c] < best) best = rep.scores[c];
  }
  if (!std::isfinite(best)) {
    throw SelectionError("select_basis: no evaluable candidate in the grid");
  }

  const double tol = 1e-12 * (1.0 + std::abs(best));
  int pick = -1;
  for (std::size_t c = 0; c < grid.size(); ++c) {
    if (!rep.evaluable[c] || rep.scores[c] > best + tol) continue;
    rep.ties.push_back(static_cast<int>(c));
    if (pick < 0 || rep.grid[c].total_dim() < rep.grid[static_cast<std::size_t>(pick)].total_dim()) {
      pick = static_cast<int>(c);
    }
  }
  rep.selected = pick;
  return rep;
}

std::vector<CvCurveRow> cv_curve(const Dataset& ds,
                                 const std::vector<std::vector<BasisSpec>>& grid,
                                 const FitOptions& opts) {
  std::vector<CvCurveRow> rows;
  rows.reserve(grid.size());
  for (const auto& specs : grid) {
    CvCurveRow row;
    for (const auto& s : specs) row.candidate.dims.push_back(s.dimension());
    try {
      const LooEval ev = loo_eval(ds, specs, opts);
      row.cv_score = ev.score;
      row.in_sample_rss = ev.rss;
      row.evaluable = true;
    } catch (const Error&) {
      row.cv_score = std::numeric_limits<double>::quiet_NaN();
      row.in_sample_rss = std::numeric_limits<double>::quiet_NaN();
      row.evaluable = false;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<std::vector<BasisSpec>> shared_dimension_grid(int d, int k_min, int k_max,
                                                          const std::vector<int>& degrees,
                                                          double lo, double hi,
                                                          BasisSpec::Family family) {
  if (d <= 0 || k_min > k_max) {
    throw SelectionError("shared_dimension_grid: empty grid request");
  }
  std::vector<std::vector<BasisSpec>> grid;
  for (int degree : degrees) {
    for (int k = k_min; k <= k_max; ++k) {
      BasisSpec spec;
      if (family == BasisSpec::Family::BSpline) {
        if (k < degree + 1) continue;  // needs a nonnegative interior count
        spec = BasisSpec::bspline(make_knots(lo, hi, k - degree - 1, degree));
      } else {
        spec = BasisSpec::power(k - 1);
      }
      grid.push_back(std::vector<BasisSpec>(static_cast<std::size_t>(d), spec));
    }
  }
  if (grid.empty()) {
    throw SelectionError("shared_dimension_grid: no feasible candidate for the requested degrees");
  }
  return grid;
}

}  // namespace plvc
