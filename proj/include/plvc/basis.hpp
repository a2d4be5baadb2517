#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

namespace plvc {

/// Behavior when an evaluation point falls outside the basis support.
/// Clamp maps the point to the nearest bound (cross-validation refits and
/// bootstrap resamples can land marginally past the training range);
/// Error throws OutOfRangeError.
enum class OutOfRange { Clamp, Error };

/// Knot layout for a univariate B-spline system on [lo, hi].
/// Interior knots are strictly inside (lo, hi) and nondecreasing; the
/// extended sequence pads degree+1 copies of each bound so the basis is
/// open-uniform at the ends.
struct KnotVector {
  double lo = 0.0;
  double hi = 1.0;
  int degree = 3;  // 3 = cubic, 2 = quadratic
  std::vector<double> interior;

  /// Number of basis functions: interior + degree + 1.
  int dimension() const { return static_cast<int>(interior.size()) + degree + 1; }

  /// Padded knot sequence of length dimension() + degree + 1.
  std::vector<double> extended() const;
};

/// Evenly spaced interior knots at lo + j*(hi-lo)/(num_interior+1).
/// Only quadratic and cubic splines are supported.
KnotVector make_knots(double lo, double hi, int num_interior, int degree);

/// All dimension() B-spline values at z (de Boor recurrence). Values are
/// nonnegative, sum to one on [lo, hi], and at most degree+1 are nonzero.
Eigen::VectorXd bspline_eval(const KnotVector& kv, double z,
                             OutOfRange mode = OutOfRange::Clamp);

/// Power basis (1, z, z^2, ..., z^degree).
Eigen::VectorXd power_eval(int degree, double z);

/// One coefficient function's approximation system: a B-spline on a knot
/// vector or a power series of given degree.
struct BasisSpec {
  enum class Family { BSpline, Power };

  Family family = Family::BSpline;
  KnotVector knots;      // BSpline only
  int power_degree = 0;  // Power only

  static BasisSpec bspline(KnotVector kv);
  static BasisSpec power(int degree);

  int dimension() const;
  bool in_range(double z) const;  // power bases have unbounded support
  Eigen::VectorXd eval(double z, OutOfRange mode = OutOfRange::Clamp) const;
  std::string describe() const;

  bool operator==(const BasisSpec& other) const;
};

/// Precomputed evaluator for repeated calls on one spec. Immutable after
/// construction; safe to share across threads.
class BasisEvaluator {
 public:
  explicit BasisEvaluator(const BasisSpec& spec);

  int dimension() const { return dim_; }
  bool in_range(double z) const;

  /// Writes dimension() values to out (dense; zeros off the local support).
  void eval_into(double z, OutOfRange mode, double* out) const;

 private:
  BasisSpec spec_;
  std::vector<double> extended_;  // BSpline only
  int dim_;
};

}  // namespace plvc
