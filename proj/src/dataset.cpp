#include "rdd/dataset.hpp"

#include "rdd/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace rdd {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
    } else if (c == delim && !quoted) {
      cells.push_back(trim(cell));
      cell.clear();
    } else {
      cell.push_back(c);
    }
  }
  cells.push_back(trim(cell));
  return cells;
}

bool is_missing_marker(const std::string& s) {
  return s.empty() || s == "NA" || s == "na" || s == "N/A" || s == "NaN" ||
         s == "nan" || s == ".";
}

// Parses a cell to double. Missing markers give NaN quietly; anything else
// that fails to parse gives NaN and sets `issue`.
double parse_cell(const std::string& s, bool* issue) {
  *issue = false;
  if (is_missing_marker(s)) return kNaN;
  double value = kNaN;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    *issue = true;
    return kNaN;
  }
  return value;
}

} // namespace

Eigen::Index Dataset::n_left() const { return (x.array() < 0.0).count(); }
Eigen::Index Dataset::n_right() const { return (x.array() >= 0.0).count(); }

Eigen::Index Dataset::covariate_index(std::string_view name) const {
  for (std::size_t j = 0; j < covariate_names.size(); ++j)
    if (covariate_names[j] == name) return static_cast<Eigen::Index>(j);
  return -1;
}

Eigen::VectorXd Dataset::column(std::string_view name) const {
  if (has_group() && name == group_name) return group;
  const Eigen::Index j = covariate_index(name);
  if (j < 0)
    throw ValidationError("unknown column '" + std::string(name) + "'");
  return covariates.col(j);
}

std::vector<double> Dataset::group_levels() const {
  if (!has_group()) return {};
  std::set<double> levels;
  for (Eigen::Index i = 0; i < group.size(); ++i)
    if (std::isfinite(group[i])) levels.insert(group[i]);
  return {levels.begin(), levels.end()};
}

Dataset load_table(const std::string& path, const Schema& schema,
                   double cutoff, const LoadOptions& options) {
  if (!std::isfinite(cutoff)) throw ValidationError("cutoff must be finite");
  if (schema.score.empty() || schema.outcome.empty())
    throw ValidationError("schema must map both score and outcome columns");

  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open input file '" + path + "'");

  std::string line;
  if (!std::getline(in, line))
    throw ValidationError("input file '" + path + "' is empty");
  const std::vector<std::string> header = split_line(line, options.delimiter);

  auto find_col = [&](const std::string& name) -> std::size_t {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw ValidationError("mapped column '" + name +
                            "' not found in header of '" + path + "'");
    return static_cast<std::size_t>(it - header.begin());
  };

  const std::size_t score_idx = find_col(schema.score);
  const std::size_t outcome_idx = find_col(schema.outcome);
  std::vector<std::size_t> cov_idx;
  cov_idx.reserve(schema.covariates.size());
  for (const auto& name : schema.covariates) cov_idx.push_back(find_col(name));
  const bool has_group = !schema.group.empty();
  const std::size_t group_idx = has_group ? find_col(schema.group) : 0;

  const std::size_t m = schema.covariates.size();
  std::vector<double> scores, outcomes, groups;
  std::vector<std::vector<double>> covs(m);
  Dataset d;
  std::size_t row = 0;

  while (std::getline(in, line)) {
    if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
    ++row;
    const std::vector<std::string> cells = split_line(line, options.delimiter);
    auto cell_at = [&](std::size_t idx) -> const std::string& {
      static const std::string empty;
      return idx < cells.size() ? cells[idx] : empty;
    };
    auto parse_at = [&](std::size_t idx, const std::string& col) {
      bool issue = false;
      const double v = parse_cell(cell_at(idx), &issue);
      if (issue) d.parse_issues.push_back({row, col, cell_at(idx)});
      return v;
    };

    const double score = parse_at(score_idx, schema.score);
    const double outcome = parse_at(outcome_idx, schema.outcome);
    if (!std::isfinite(score) || !std::isfinite(outcome)) {
      ++d.dropped_rows;
      continue;
    }
    scores.push_back(score);
    outcomes.push_back(outcome);
    for (std::size_t j = 0; j < m; ++j)
      covs[j].push_back(parse_at(cov_idx[j], schema.covariates[j]));
    if (has_group) groups.push_back(parse_at(group_idx, schema.group));
  }

  const Eigen::Index n = static_cast<Eigen::Index>(scores.size());
  if (n == 0)
    throw ValidationError("no rows of '" + path +
                          "' survived validation (finite score and outcome)");

  d.cutoff = cutoff;
  d.score = Eigen::Map<Eigen::VectorXd>(scores.data(), n);
  d.outcome = Eigen::Map<Eigen::VectorXd>(outcomes.data(), n);
  if (options.flip_treated)
    d.x = (cutoff - d.score.array()).matrix();
  else
    d.x = (d.score.array() - cutoff).matrix();
  d.covariate_names = schema.covariates;
  d.covariates.resize(n, static_cast<Eigen::Index>(m));
  for (std::size_t j = 0; j < m; ++j)
    d.covariates.col(static_cast<Eigen::Index>(j)) =
        Eigen::Map<Eigen::VectorXd>(covs[j].data(), n);
  if (has_group) {
    d.group_name = schema.group;
    d.group = Eigen::Map<Eigen::VectorXd>(groups.data(), n);
  }
  if (d.dropped_rows > 0)
    d.warnings.push_back(std::to_string(d.dropped_rows) +
                         " row(s) dropped for missing/non-finite score or outcome");
  return d;
}

Dataset discretize_covariate(const Dataset& d, const std::string& column,
                             double threshold) {
  if (!std::isfinite(threshold))
    throw ValidationError("discretization threshold must be finite");
  const Eigen::VectorXd z = d.column(column); // throws on unknown column

  Dataset out = d;
  out.group.resize(d.n());
  for (Eigen::Index i = 0; i < d.n(); ++i)
    out.group[i] = std::isfinite(z[i]) ? (z[i] >= threshold ? 1.0 : 0.0) : kNaN;

  std::ostringstream name;
  name << column << "_ge_" << threshold;
  out.group_name = name.str();

  if (out.group_levels().size() < 2)
    out.warnings.push_back("group '" + out.group_name +
                           "' has a single level; degenerate for heterogeneity");
  return out;
}

Dataset subset(const Dataset& d, const std::vector<bool>& keep) {
  if (static_cast<Eigen::Index>(keep.size()) != d.n())
    throw ValidationError("subset mask length mismatch");
  const Eigen::Index n =
      static_cast<Eigen::Index>(std::count(keep.begin(), keep.end(), true));
  if (n == 0) throw ValidationError("subset selects no rows");

  Dataset out;
  out.cutoff = d.cutoff;
  out.covariate_names = d.covariate_names;
  out.group_name = d.group_name;
  out.score.resize(n);
  out.x.resize(n);
  out.outcome.resize(n);
  out.covariates.resize(n, d.covariates.cols());
  if (d.has_group()) out.group.resize(n);

  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    if (!keep[static_cast<std::size_t>(i)]) continue;
    out.score[r] = d.score[i];
    out.x[r] = d.x[i];
    out.outcome[r] = d.outcome[i];
    out.covariates.row(r) = d.covariates.row(i);
    if (d.has_group()) out.group[r] = d.group[i];
    ++r;
  }
  return out;
}

Dataset subset_by_group(const Dataset& d, double level) {
  if (!d.has_group()) throw ValidationError("dataset has no group column");
  std::vector<bool> keep(static_cast<std::size_t>(d.n()), false);
  for (Eigen::Index i = 0; i < d.n(); ++i)
    keep[static_cast<std::size_t>(i)] =
        std::isfinite(d.group[i]) && d.group[i] == level;
  return subset(d, keep);
}

Dataset with_outcome_column(const Dataset& d, const std::string& column) {
  const Eigen::VectorXd z = d.column(column);
  std::vector<bool> keep(static_cast<std::size_t>(d.n()), false);
  for (Eigen::Index i = 0; i < d.n(); ++i)
    keep[static_cast<std::size_t>(i)] = std::isfinite(z[i]);
  Dataset out = subset(d, keep);

  const Eigen::VectorXd z_kept = out.column(column);
  out.outcome = z_kept;
  return out;
}

} // namespace rdd
