#include "plvc/design.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "plvc/errors.hpp"

namespace plvc {

bool Table::has(const std::string& name) const {
  return std::find(names.begin(), names.end(), name) != names.end();
}

const Eigen::VectorXd& Table::column(const std::string& name) const {
  for (std::size_t j = 0; j < names.size(); ++j) {
    if (names[j] == name) return columns[j];
  }
  throw IngestionError("missing column '" + name + "'");
}

namespace {

void check_finite(const Eigen::VectorXd& col, const std::string& name) {
  for (long i = 0; i < col.size(); ++i) {
    if (!std::isfinite(col[i])) {
      std::ostringstream os;
      os << "non-finite value in column '" << name << "' at data row " << (i + 1);
      throw IngestionError(os.str());
    }
  }
}

}  // namespace

Dataset validate_dataset(const Table& raw, const ColumnRoles& roles) {
  const Eigen::VectorXd& y = raw.column(roles.response);
  const Eigen::VectorXd& z = raw.column(roles.index);
  const long n = raw.nrows();
  if (n < 10) {
    std::ostringstream os;
    os << "dataset has " << n << " rows; at least 10 required";
    throw IngestionError(os.str());
  }
  check_finite(y, roles.response);
  check_finite(z, roles.index);

  Dataset ds;
  ds.y = y;
  ds.z = z;

  ds.w.resize(n, static_cast<long>(roles.linear.size()));
  for (std::size_t j = 0; j < roles.linear.size(); ++j) {
    const Eigen::VectorXd& col = raw.column(roles.linear[j]);
    check_finite(col, roles.linear[j]);
    ds.w.col(static_cast<long>(j)) = col;
    ds.w_labels.push_back(roles.linear[j]);
  }

  ds.x.resize(n, static_cast<long>(roles.varying.size()) + 1);
  ds.x.col(0).setOnes();
  ds.x_labels.push_back("(intercept)");
  for (std::size_t j = 0; j < roles.varying.size(); ++j) {
    const Eigen::VectorXd& col = raw.column(roles.varying[j]);
    check_finite(col, roles.varying[j]);
    ds.x.col(static_cast<long>(j) + 1) = col;
    ds.x_labels.push_back(roles.varying[j]);
  }
  return ds;
}

Eigen::VectorXd build_regressor(const Eigen::RowVectorXd& x_row, double z,
                                const std::vector<BasisSpec>& specs, OutOfRange mode) {
  if (static_cast<std::size_t>(x_row.size()) != specs.size()) {
    throw InvalidDomainError("build_regressor: specs length must equal the varying block width");
  }
  int total = 0;
  for (const auto& s : specs) total += s.dimension();
  Eigen::VectorXd out(total);
  int at = 0;
  for (std::size_t l = 0; l < specs.size(); ++l) {
    BasisEvaluator ev(specs[l]);
    ev.eval_into(z, mode, out.data() + at);
    out.segment(at, ev.dimension()) *= x_row[static_cast<long>(l)];
    at += ev.dimension();
  }
  return out;
}

DesignMatrix build_design(const Dataset& ds, const std::vector<BasisSpec>& specs,
                          OutOfRange mode) {
  if (static_cast<std::size_t>(ds.d()) != specs.size()) {
    throw InvalidDomainError("build_design: specs length must equal the varying block width");
  }
  const long n = ds.n();
  const int d = ds.d();

  DesignMatrix dm;
  dm.specs = specs;
  dm.block_offsets.resize(d + 1);
  dm.block_offsets[0] = 0;
  std::vector<BasisEvaluator> evs;
  evs.reserve(specs.size());
  for (int l = 0; l < d; ++l) {
    evs.emplace_back(specs[l]);
    dm.block_offsets[l + 1] = dm.block_offsets[l] + evs.back().dimension();
  }
  const int K = dm.block_offsets[d];

  dm.p.resize(n, K);
  std::vector<double> row(static_cast<std::size_t>(K));
  for (long i = 0; i < n; ++i) {
    const double zi = ds.z[i];
    for (int l = 0; l < d; ++l) {
      if (!evs[l].in_range(zi)) {
        if (mode == OutOfRange::Clamp) ++dm.clamp_events;
        // Error mode throws inside eval_into.
      }
      double* dst = row.data() + dm.block_offsets[l];
      evs[l].eval_into(zi, mode, dst);
      const double xl = ds.x(i, l);
      const int kl = dm.block_dim(l);
      for (int c = 0; c < kl; ++c) dst[c] *= xl;
    }
    dm.p.row(i) = Eigen::Map<const Eigen::RowVectorXd>(row.data(), K);
  }
  return dm;
}

}  // namespace plvc
