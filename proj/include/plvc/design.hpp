#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

#include "plvc/basis.hpp"

namespace plvc {

/// Column-oriented numeric table, the ingestion handoff from file readers.
struct Table {
  std::vector<std::string> names;
  std::vector<Eigen::VectorXd> columns;

  long nrows() const { return columns.empty() ? 0 : columns.front().size(); }
  bool has(const std::string& name) const;
  const Eigen::VectorXd& column(const std::string& name) const;  // throws IngestionError
};

/// Which table columns play which role in Y = w'gamma + x'beta(z) + u.
struct ColumnRoles {
  std::string response;
  std::vector<std::string> linear;   // w columns; may be empty (q = 0)
  std::vector<std::string> varying;  // x columns beyond the intercept; may be empty
  std::string index;                 // z
};

/// Validated observation table. x always carries an all-ones first column,
/// so every model has a varying intercept.
struct Dataset {
  Eigen::VectorXd y;
  Eigen::MatrixXd w;  // n x q
  Eigen::MatrixXd x;  // n x d, column 0 identically 1
  Eigen::VectorXd z;
  std::vector<std::string> w_labels;
  std::vector<std::string> x_labels;

  long n() const { return y.size(); }
  int q() const { return static_cast<int>(w.cols()); }
  int d() const { return static_cast<int>(x.cols()); }
};

/// Checks roles against the table, rejects non-finite cells (naming the
/// offending row and column) and samples with fewer than 10 rows, and
/// prepends the intercept column to the varying block.
Dataset validate_dataset(const Table& raw, const ColumnRoles& roles);

/// Interleaved series design P with per-coefficient column blocks.
/// Block l holds x_l elementwise-times the basis matrix of spec l.
struct DesignMatrix {
  Eigen::MatrixXd p;               // n x K
  std::vector<int> block_offsets;  // d+1 cut points, last == K
  std::vector<BasisSpec> specs;
  long clamp_events = 0;  // index values clamped into the basis support

  int total_dim() const { return block_offsets.empty() ? 0 : block_offsets.back(); }
  int block_dim(int l) const { return block_offsets[l + 1] - block_offsets[l]; }
};

/// Single interleaved regressor row p(x, z): concatenation over l of
/// x_l * basis_l(z).
Eigen::VectorXd build_regressor(const Eigen::RowVectorXd& x_row, double z,
                                const std::vector<BasisSpec>& specs,
                                OutOfRange mode = OutOfRange::Clamp);

/// Full design matrix; row i equals build_regressor(x_i, z_i, specs).
DesignMatrix build_design(const Dataset& ds, const std::vector<BasisSpec>& specs,
                          OutOfRange mode = OutOfRange::Clamp);

}  // namespace plvc
