#include "plvc/basis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <sstream>

#include "plvc/errors.hpp"

namespace plvc {

std::vector<double> KnotVector::extended() const {
  std::vector<double> t;
  t.reserve(interior.size() + 2 * (degree + 1));
  for (int i = 0; i <= degree; ++i) t.push_back(lo);
  t.insert(t.end(), interior.begin(), interior.end());
  for (int i = 0; i <= degree; ++i) t.push_back(hi);
  return t;
}

KnotVector make_knots(double lo, double hi, int num_interior, int degree) {
  if (!(lo < hi)) {
    throw InvalidDomainError("make_knots: lo must be strictly below hi");
  }
  if (degree != 2 && degree != 3) {
    throw InvalidDomainError("make_knots: only quadratic (2) and cubic (3) splines are supported");
  }
  if (num_interior < 0) {
    throw InvalidDomainError("make_knots: num_interior must be nonnegative");
  }
  KnotVector kv;
  kv.lo = lo;
  kv.hi = hi;
  kv.degree = degree;
  kv.interior.resize(num_interior);
  const double step = (hi - lo) / static_cast<double>(num_interior + 1);
  for (int j = 1; j <= num_interior; ++j) {
    kv.interior[j - 1] = lo + static_cast<double>(j) * step;
  }
  return kv;
}

namespace {

// Knot span s in [degree, dim-1] with t[s] <= z < t[s+1]; z == hi maps to
// the last nonempty span so the right endpoint evaluates cleanly.
int find_span(const std::vector<double>& t, int degree, int dim, double z) {
  if (z >= t[dim]) return dim - 1;
  if (z <= t[degree]) return degree;
  auto it = std::upper_bound(t.begin() + degree, t.begin() + dim, z);
  return static_cast<int>(it - t.begin()) - 1;
}

// Triangular de Boor scheme: the degree+1 nonzero values for basis
// functions span-degree .. span. Stable for repeated end knots.
void nonzero_bsplines(const std::vector<double>& t, int degree, int span, double z,
                      double* vals) {
  double left[8];
  double right[8];
  vals[0] = 1.0;
  for (int j = 1; j <= degree; ++j) {
    left[j] = z - t[span + 1 - j];
    right[j] = t[span + j] - z;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double tmp = vals[r] / (right[r + 1] + left[j - r]);
      vals[r] = saved + right[r + 1] * tmp;
      saved = left[j - r] * tmp;
    }
    vals[j] = saved;
  }
}

double resolve_point(double z, double lo, double hi, OutOfRange mode) {
  if (z < lo || z > hi) {
    if (mode == OutOfRange::Error) {
      char buf[160];
      std::snprintf(buf, sizeof(buf),
                    "basis evaluation point %.17g outside support [%.17g, %.17g]", z, lo, hi);
      throw OutOfRangeError(buf);
    }
    return std::clamp(z, lo, hi);
  }
  return z;
}

}  // namespace

Eigen::VectorXd bspline_eval(const KnotVector& kv, double z, OutOfRange mode) {
  BasisEvaluator ev(BasisSpec::bspline(kv));
  Eigen::VectorXd out(kv.dimension());
  ev.eval_into(z, mode, out.data());
  return out;
}

Eigen::VectorXd power_eval(int degree, double z) {
  if (degree < 0) {
    throw InvalidDomainError("power_eval: degree must be nonnegative");
  }
  Eigen::VectorXd out(degree + 1);
  double v = 1.0;
  for (int j = 0; j <= degree; ++j) {
    out[j] = v;
    v *= z;
  }
  return out;
}

BasisSpec BasisSpec::bspline(KnotVector kv) {
  BasisSpec s;
  s.family = Family::BSpline;
  s.knots = std::move(kv);
  return s;
}

BasisSpec BasisSpec::power(int degree) {
  if (degree < 0) {
    throw InvalidDomainError("BasisSpec::power: degree must be nonnegative");
  }
  BasisSpec s;
  s.family = Family::Power;
  s.power_degree = degree;
  return s;
}

int BasisSpec::dimension() const {
  return family == Family::BSpline ? knots.dimension() : power_degree + 1;
}

bool BasisSpec::in_range(double z) const {
  if (family == Family::Power) return true;
  return z >= knots.lo && z <= knots.hi;
}

Eigen::VectorXd BasisSpec::eval(double z, OutOfRange mode) const {
  if (family == Family::Power) return power_eval(power_degree, z);
  return bspline_eval(knots, z, mode);
}

std::string BasisSpec::describe() const {
  std::ostringstream os;
  if (family == Family::Power) {
    os << "power(degree=" << power_degree << ")";
  } else {
    os << "bspline(degree=" << knots.degree << ", k=" << knots.dimension() << ", range=["
       << knots.lo << ", " << knots.hi << "])";
  }
  return os.str();
}

bool BasisSpec::operator==(const BasisSpec& other) const {
  if (family != other.family) return false;
  if (family == Family::Power) return power_degree == other.power_degree;
  return knots.lo == other.knots.lo && knots.hi == other.knots.hi &&
         knots.degree == other.knots.degree && knots.interior == other.knots.interior;
}

BasisEvaluator::BasisEvaluator(const BasisSpec& spec) : spec_(spec), dim_(spec.dimension()) {
  if (spec_.family == BasisSpec::Family::BSpline) {
    extended_ = spec_.knots.extended();
    if (spec_.knots.degree < 0 || spec_.knots.degree > 7) {
      throw InvalidDomainError("BasisEvaluator: degree out of supported range");
    }
  }
}

bool BasisEvaluator::in_range(double z) const { return spec_.in_range(z); }

void BasisEvaluator::eval_into(double z, OutOfRange mode, double* out) const {
  if (spec_.family == BasisSpec::Family::Power) {
    double v = 1.0;
    for (int j = 0; j < dim_; ++j) {
      out[j] = v;
      v *= z;
    }
    return;
  }
  const int degree = spec_.knots.degree;
  const double zc = resolve_point(z, spec_.knots.lo, spec_.knots.hi, mode);
  std::memset(out, 0, sizeof(double) * static_cast<std::size_t>(dim_));
  const int span = find_span(extended_, degree, dim_, zc);
  double vals[8];
  nonzero_bsplines(extended_, degree, span, zc, vals);
  for (int r = 0; r <= degree; ++r) {
    out[span - degree + r] = vals[r];
  }
}

}  // namespace plvc
