#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rdd {

// A cell that did not parse as a number. Rows losing their outcome or score
// this way are dropped (and counted); covariate cells become missing values.
struct ParseIssue {
  std::size_t row = 0; // 1-based data row (header excluded)
  std::string column;
  std::string cell;
};

// Immutable study data: running variable, outcome, optional covariates and
// group column. Safe to share read-only across parallel analyses.
struct Dataset {
  Eigen::VectorXd score;   // raw running variable X_i
  Eigen::VectorXd x;       // centered score, x_i = X_i - cutoff exactly
  Eigen::VectorXd outcome; // Y_i
  double cutoff = 0.0;

  std::vector<std::string> covariate_names;
  Eigen::MatrixXd covariates; // n x m; NaN marks a missing cell

  std::string group_name; // empty when no group variable is attached
  Eigen::VectorXd group;  // size 0 when absent; NaN marks missing

  std::size_t dropped_rows = 0;
  std::vector<ParseIssue> parse_issues;
  std::vector<std::string> warnings;

  Eigen::Index n() const { return x.size(); }
  Eigen::Index n_left() const;  // rows with x < 0
  Eigen::Index n_right() const; // rows with x >= 0 (treated side)

  bool has_group() const { return group.size() > 0; }
  Eigen::Index covariate_index(std::string_view name) const; // -1 if absent

  /// Column by role: a covariate name or the group column name.
  Eigen::VectorXd column(std::string_view name) const;

  /// Distinct finite group values, ascending.
  std::vector<double> group_levels() const;
};

struct Schema {
  std::string score;
  std::string outcome;
  std::vector<std::string> covariates;
  std::string group; // optional: read an existing numeric column as group
};

struct LoadOptions {
  char delimiter = ',';
  bool flip_treated = false; // treat x <= cutoff as the assigned side instead
};

/// Reads a delimited text file with a header row and builds a Dataset.
/// Rows with missing or non-finite outcome or score are dropped and counted;
/// unparseable cells are recorded with their row index.
Dataset load_table(const std::string& path, const Schema& schema,
                   double cutoff, const LoadOptions& options = {});

/// Adds a binary group column g = 1{Z >= threshold} from an existing
/// covariate; the source column is retained.
Dataset discretize_covariate(const Dataset& d, const std::string& column,
                             double threshold);

/// Rows of `d` where keep[i] is true, preserving order.
Dataset subset(const Dataset& d, const std::vector<bool>& keep);

/// Rows whose group value equals `level` (missing group rows excluded).
Dataset subset_by_group(const Dataset& d, double level);

/// Same dataset with the named column promoted to outcome; rows missing that
/// column are dropped. Used by falsification tests.
Dataset with_outcome_column(const Dataset& d, const std::string& column);

} // namespace rdd
