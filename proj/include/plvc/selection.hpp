#pragma once

#include <limits>
#include <string>
#include <vector>

#include "plvc/estimator.hpp"

namespace plvc {

/// One candidate configuration: per-block basis dimensions for series
/// methods, a bandwidth for the kernel baseline.
struct CvCandidate {
  std::vector<int> dims;
  double h = std::numeric_limits<double>::quiet_NaN();

  int total_dim() const {
    int t = 0;
    for (int k : dims) t += k;
    return t;
  }
  std::string describe() const;
};

/// Grid of candidates with leave-one-out scores. The selected index
/// attains the minimum score; ties break toward the smallest model
/// (smallest total dimension, or the largest bandwidth).
struct CvReport {
  std::vector<CvCandidate> grid;
  std::vector<double> scores;          // NaN when not evaluable
  std::vector<double> in_sample_rss;   // NaN when not evaluable
  std::vector<bool> evaluable;
  std::vector<std::string> notes;      // failure reason per skipped candidate
  int selected = -1;
  std::vector<int> ties;

  const CvCandidate& chosen() const { return grid[static_cast<std::size_t>(selected)]; }
};

/// Leave-one-out CV score via the hat-matrix shortcut: sum over i of
/// (u_i / (1 - h_ii))^2 with h_ii from the joint regression on [W, P].
/// For a linear smoother this equals the literal refit-and-predict score.
/// Throws SaturationError when any h_ii reaches 1 (interpolating fit).
double loo_cv_score(const Dataset& ds, const std::vector<BasisSpec>& specs,
                    const FitOptions& opts = {});

/// Scores every candidate spec-set and selects the LOO minimizer.
/// Saturated or collinear candidates are skipped with a note, not fatal;
/// all candidates failing raises SelectionError.
CvReport select_basis(const Dataset& ds, const std::vector<std::vector<BasisSpec>>& grid,
                      const FitOptions& opts = {});

struct CvCurveRow {
  CvCandidate candidate;
  double cv_score;
  double in_sample_rss;
  bool evaluable;
};

/// Full CV curve for plotting; never fails on individual candidates.
std::vector<CvCurveRow> cv_curve(const Dataset& ds,
                                 const std::vector<std::vector<BasisSpec>>& grid,
                                 const FitOptions& opts = {});

/// Candidate spec-sets sharing one dimension k across all d blocks, for
/// each k in [k_min, k_max] and each degree listed. B-spline knot ranges
/// come from [lo, hi].
std::vector<std::vector<BasisSpec>> shared_dimension_grid(
    int d, int k_min, int k_max, const std::vector<int>& degrees, double lo, double hi,
    BasisSpec::Family family = BasisSpec::Family::BSpline);

}  // namespace plvc
