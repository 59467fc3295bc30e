#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "sdcaudit/csv.hpp"
#include "sdcaudit/error.hpp"
#include "sdcaudit/matrix.hpp"
#include "sdcaudit/models.hpp"
#include "sdcaudit/numfmt.hpp"

namespace sdcaudit {

inline constexpr double kStochasticTolerance = 1e-6;

/// Per-record class probabilities, the common input of the membership
/// attacks. `true_labels`, when known, are the records' actual classes.
struct PredictionsTable {
  Matrix rows;
  std::optional<std::vector<bool>> membership;
  std::optional<std::vector<std::size_t>> true_labels;

  std::size_t size() const { return rows.rows(); }
  std::size_t n_classes() const { return rows.cols(); }
};

inline void check_stochastic(std::span<const double> row, const std::string& where) {
  double sum = 0.0;
  for (double p : row) {
    if (!(p >= -kStochasticTolerance && p <= 1.0 + kStochasticTolerance)) {
      throw AuditError(ErrorCode::RowNotStochastic, where + " has an entry outside [0, 1]");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > kStochasticTolerance) {
    throw AuditError(ErrorCode::RowNotStochastic, where + " sums to " + shortest_repr(sum));
  }
}

template <ProbabilisticClassifier Model>
PredictionsTable predict_proba(const Model& model, const Matrix& rows, std::size_t expected_width) {
  if (rows.rows() > 0 && rows.cols() != expected_width) {
    throw AuditError(ErrorCode::ShapeMismatch, "rows have width " + std::to_string(rows.cols()) + ", model expects " +
                                                   std::to_string(expected_width));
  }
  PredictionsTable out;
  out.rows = Matrix(rows.rows(), model.n_classes());
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    auto p = model.predict_row(rows.row(r));
    std::copy(p.begin(), p.end(), out.rows.row(r).begin());
  }
  return out;
}

inline PredictionsTable predict_proba(const TrainedModel& model, const Matrix& rows) {
  return predict_proba(model, rows, model.n_features);
}

namespace detail {

inline Matrix read_probability_rows(const std::string& path, const std::string& role) {
  const auto records = csv::read(path);
  if (records.empty()) {
    throw AuditError(ErrorCode::EmptyDataset, role + " predictions file '" + path + "' has no rows");
  }
  Matrix m;
  const std::size_t width = records.front().size();
  std::vector<double> values;
  for (std::size_t r = 0; r < records.size(); ++r) {
    const std::string where = role + " predictions row " + std::to_string(r);
    if (records[r].size() != width) {
      throw AuditError(ErrorCode::ColumnCountMismatch,
                       where + " has " + std::to_string(records[r].size()) + " columns, expected " +
                           std::to_string(width));
    }
    values.clear();
    for (const auto& cell : records[r]) {
      auto v = parse_double(cell);
      if (!v) throw AuditError(ErrorCode::RowNotStochastic, where + " holds non-numeric value '" + cell + "'");
      values.push_back(*v);
    }
    check_stochastic(values, where);
    m.push_row(values);
  }
  return m;
}

}  // namespace detail

/// Reads saved model outputs: rows from `path_in` are training members, rows
/// from `path_out` are not. Member rows come first in the returned table.
inline PredictionsTable load_predictions(const std::string& path_in, const std::string& path_out) {
  Matrix in = detail::read_probability_rows(path_in, "in-sample");
  Matrix out = detail::read_probability_rows(path_out, "out-of-sample");
  if (in.cols() != out.cols()) {
    throw AuditError(ErrorCode::ColumnCountMismatch, "in-sample file has " + std::to_string(in.cols()) +
                                                         " columns, out-of-sample file has " +
                                                         std::to_string(out.cols()));
  }
  if (in.cols() < 2) {
    throw AuditError(ErrorCode::ColumnCountMismatch, "prediction files need at least 2 class columns");
  }
  PredictionsTable table;
  table.membership.emplace();
  for (std::size_t r = 0; r < in.rows(); ++r) {
    table.rows.push_row(in.row(r));
    table.membership->push_back(true);
  }
  for (std::size_t r = 0; r < out.rows(); ++r) {
    table.rows.push_row(out.row(r));
    table.membership->push_back(false);
  }
  return table;
}

inline std::string format_probability_rows(const Matrix& rows) {
  std::vector<csv::Record> records;
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    csv::Record rec;
    for (double v : rows.row(r)) rec.push_back(shortest_repr(v));
    records.push_back(std::move(rec));
  }
  return csv::format(records);
}

/// Target outputs on the train part (members) then the test part.
inline PredictionsTable target_predictions(const TrainedModel& model, const Dataset& d, const Split& s) {
  PredictionsTable table;
  table.membership.emplace();
  table.true_labels.emplace();
  auto add = [&](const std::vector<std::size_t>& indices, bool member) {
    for (auto i : indices) {
      table.rows.push_row(model.predict_row(d.rows.row(i)));
      table.membership->push_back(member);
      table.true_labels->push_back(d.labels[i]);
    }
  };
  add(s.train_indices, true);
  add(s.test_indices, false);
  return table;
}

}  // namespace sdcaudit
