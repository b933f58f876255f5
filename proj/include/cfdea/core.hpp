// Shared domain types: panels of decision-making units, technology and
// orientation tags, cost weights, big-M constants and max-normalization.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cfdea {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class ErrorCode {
  kInvalidArgument,
  kNotFound,
  kInfeasible,
  kTimeLimit,
  kInternal,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) {
  throw Error(code, msg);
}

inline void require(bool cond, const std::string& msg) {
  if (!cond) fail(ErrorCode::kInvalidArgument, msg);
}

/// Row-major dense matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  /// Appends a row; the first row fixes the column count of an empty matrix.
  void append_row(std::span<const double> values) {
    if (rows_ == 0 && cols_ == 0) cols_ = values.size();
    require(values.size() == cols_, "matrix row length mismatch");
    data_.insert(data_.end(), values.begin(), values.end());
    ++rows_;
  }

  /// Resizes the column count, zero-filling new columns.
  void resize_cols(std::size_t cols) {
    if (cols == cols_) return;
    std::vector<double> next(rows_ * cols, 0.0);
    const std::size_t keep = std::min(cols, cols_);
    for (std::size_t r = 0; r < rows_; ++r)
      std::copy_n(data_.begin() + r * cols_, keep, next.begin() + r * cols);
    cols_ = cols;
    data_ = std::move(next);
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

enum class Technology { kCrs, kVrs };
enum class Orientation { kInput, kOutput };

inline std::string_view to_string(Technology t) { return t == Technology::kCrs ? "crs" : "vrs"; }
inline std::string_view to_string(Orientation o) {
  return o == Orientation::kInput ? "input" : "output";
}

inline Technology parse_technology(std::string_view s) {
  if (s == "crs" || s == "CRS") return Technology::kCrs;
  if (s == "vrs" || s == "VRS") return Technology::kVrs;
  fail(ErrorCode::kInvalidArgument, "unknown technology '" + std::string(s) + "'");
}

inline Orientation parse_orientation(std::string_view s) {
  if (s == "input" || s == "in") return Orientation::kInput;
  if (s == "output" || s == "out") return Orientation::kOutput;
  fail(ErrorCode::kInvalidArgument, "unknown orientation '" + std::string(s) + "'");
}

/// Observed production plans: K+1 units, I inputs, O outputs. Immutable.
class Panel {
 public:
  Panel() = default;

  Panel(std::vector<std::string> ids, Matrix inputs, Matrix outputs,
        std::vector<std::string> input_names = {},
        std::vector<std::string> output_names = {})
      : ids_(std::move(ids)),
        inputs_(std::move(inputs)),
        outputs_(std::move(outputs)),
        input_names_(std::move(input_names)),
        output_names_(std::move(output_names)) {
    require(!ids_.empty(), "panel has no units");
    require(inputs_.rows() == ids_.size() && outputs_.rows() == ids_.size(),
            "panel row count mismatch");
    require(inputs_.cols() >= 1 && outputs_.cols() >= 1,
            "panel needs at least one input and one output");
    if (input_names_.empty())
      for (std::size_t i = 0; i < inputs_.cols(); ++i)
        input_names_.push_back("x" + std::to_string(i + 1));
    if (output_names_.empty())
      for (std::size_t o = 0; o < outputs_.cols(); ++o)
        output_names_.push_back("y" + std::to_string(o + 1));
    require(input_names_.size() == inputs_.cols() &&
                output_names_.size() == outputs_.cols(),
            "feature name count mismatch");
    std::set<std::string> seen;
    for (std::size_t k = 0; k < ids_.size(); ++k) {
      require(seen.insert(ids_[k]).second, "duplicate unit id '" + ids_[k] + "'");
      for (double v : inputs_.row(k))
        require(std::isfinite(v) && v >= 0.0, "invalid input value for '" + ids_[k] + "'");
      for (double v : outputs_.row(k))
        require(std::isfinite(v) && v >= 0.0, "invalid output value for '" + ids_[k] + "'");
    }
  }

  std::size_t size() const noexcept { return ids_.size(); }
  std::size_t num_inputs() const noexcept { return inputs_.cols(); }
  std::size_t num_outputs() const noexcept { return outputs_.cols(); }

  const std::string& id(std::size_t k) const { return ids_.at(k); }
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  std::span<const double> input(std::size_t k) const { return inputs_.row(k); }
  std::span<const double> output(std::size_t k) const { return outputs_.row(k); }
  const Matrix& inputs() const noexcept { return inputs_; }
  const Matrix& outputs() const noexcept { return outputs_; }
  const std::vector<std::string>& input_names() const noexcept { return input_names_; }
  const std::vector<std::string>& output_names() const noexcept { return output_names_; }

  std::optional<std::size_t> index_of(std::string_view id) const {
    for (std::size_t k = 0; k < ids_.size(); ++k)
      if (ids_[k] == id) return k;
    return std::nullopt;
  }

  /// Units with every input strictly positive.
  bool inputs_strictly_positive() const {
    for (std::size_t k = 0; k < size(); ++k)
      for (double v : input(k))
        if (!(v > 0.0)) return false;
    return true;
  }

 private:
  std::vector<std::string> ids_;
  Matrix inputs_;
  Matrix outputs_;
  std::vector<std::string> input_names_;
  std::vector<std::string> output_names_;
};

struct RawRow {
  std::string id;
  std::vector<double> values;  // I inputs followed by O outputs
};

struct PanelBuild {
  Panel panel;
  std::vector<std::string> removed;  // ids dropped for a zero input
};

/// Builds a cleaned panel. Rows with any zero input are dropped and reported.
inline PanelBuild build_panel(const std::vector<RawRow>& rows, std::size_t num_inputs,
                              std::size_t num_outputs,
                              std::vector<std::string> input_names = {},
                              std::vector<std::string> output_names = {}) {
  require(!rows.empty(), "no rows supplied");
  require(num_inputs >= 1 && num_outputs >= 1, "need at least one input and one output");
  std::set<std::string> seen;
  std::vector<std::string> ids;
  std::vector<std::string> removed;
  Matrix in;
  Matrix out;
  for (const RawRow& row : rows) {
    require(row.values.size() == num_inputs + num_outputs,
            "row '" + row.id + "' has " + std::to_string(row.values.size()) +
                " values, expected " + std::to_string(num_inputs + num_outputs));
    require(seen.insert(row.id).second, "duplicate unit id '" + row.id + "'");
    for (double v : row.values) {
      require(std::isfinite(v), "non-finite value in row '" + row.id + "'");
      require(v >= 0.0, "negative value in row '" + row.id + "'");
    }
    const std::span<const double> values(row.values);
    const auto xs = values.first(num_inputs);
    if (std::any_of(xs.begin(), xs.end(), [](double v) { return v == 0.0; })) {
      removed.push_back(row.id);
      continue;
    }
    if (in.rows() == 0) {
      in = Matrix(0, num_inputs);
      out = Matrix(0, num_outputs);
    }
    in.append_row(xs);
    out.append_row(values.subspan(num_inputs));
    ids.push_back(row.id);
  }
  require(!ids.empty(), "every row was removed by the zero-input rule");
  return {Panel(std::move(ids), std::move(in), std::move(out), std::move(input_names),
                std::move(output_names)),
          std::move(removed)};
}

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r' || s[b] == '\n')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r' || s[e - 1] == '\n'))
    --e;
  return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      cells.push_back(trim(line.substr(start, i - start)));
      start = i + 1;
    }
  }
  return cells;
}

inline double parse_number(const std::string& cell, const std::string& where) {
  require(!cell.empty(), "empty value in " + where);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(cell, &used);
  } catch (const std::exception&) {
    fail(ErrorCode::kInvalidArgument, "malformed number '" + cell + "' in " + where);
  }
  require(used == cell.size(), "malformed number '" + cell + "' in " + where);
  require(std::isfinite(v), "non-finite value '" + cell + "' in " + where);
  return v;
}

}  // namespace detail

/// Reads `id,in:<name>...,out:<name>...` CSV and cleans it with build_panel.
inline PanelBuild read_panel_csv(std::istream& is) {
  std::string line;
  std::vector<std::string> header;
  while (std::getline(is, line)) {
    if (detail::trim(line).empty()) continue;
    header = detail::split_csv_line(line);
    break;
  }
  require(!header.empty(), "CSV is empty");
  if (!header[0].empty() && header[0].rfind("\xEF\xBB\xBF", 0) == 0) header[0].erase(0, 3);
  require(header[0] == "id", "first CSV column must be 'id'");
  std::vector<std::string> in_names;
  std::vector<std::string> out_names;
  for (std::size_t c = 1; c < header.size(); ++c) {
    const std::string& h = header[c];
    if (h.rfind("in:", 0) == 0) {
      require(out_names.empty(), "input columns must precede output columns");
      in_names.push_back(h.substr(3));
    } else if (h.rfind("out:", 0) == 0) {
      out_names.push_back(h.substr(4));
    } else {
      fail(ErrorCode::kInvalidArgument, "column '" + h + "' must start with in: or out:");
    }
  }
  require(!in_names.empty() && !out_names.empty(), "CSV needs in: and out: columns");
  std::vector<RawRow> rows;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv_line(line);
    require(cells.size() == header.size(),
            "line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                " cells, expected " + std::to_string(header.size()));
    RawRow row{cells[0], {}};
    require(!row.id.empty(), "empty id on line " + std::to_string(line_no));
    for (std::size_t c = 1; c < cells.size(); ++c)
      row.values.push_back(detail::parse_number(cells[c], "line " + std::to_string(line_no)));
    rows.push_back(std::move(row));
  }
  return build_panel(rows, in_names.size(), out_names.size(), in_names, out_names);
}

inline PanelBuild parse_panel_csv(const std::string& text) {
  std::istringstream is(text);
  return read_panel_csv(is);
}

inline void write_panel_csv(std::ostream& os, const Panel& panel) {
  os << "id";
  for (const auto& n : panel.input_names()) os << ",in:" << n;
  for (const auto& n : panel.output_names()) os << ",out:" << n;
  os << '\n';
  os.precision(17);
  for (std::size_t k = 0; k < panel.size(); ++k) {
    os << panel.id(k);
    for (double v : panel.input(k)) os << ',' << v;
    for (double v : panel.output(k)) os << ',' << v;
    os << '\n';
  }
}

/// Weights of the cost of change nu0*l0 + nu1*l1 + nu2*l2^2. Optional
/// per-feature weights scale the l1 and l2^2 terms coordinatewise.
struct CostWeights {
  double nu0 = 0.0;
  double nu1 = 0.0;
  double nu2 = 1.0;
  std::vector<double> per_feature;

  void validate(std::size_t num_features) const {
    require(std::isfinite(nu0) && std::isfinite(nu1) && std::isfinite(nu2),
            "cost weights must be finite");
    require(nu0 >= 0.0 && nu1 >= 0.0 && nu2 >= 0.0, "cost weights must be nonnegative");
    require(nu0 > 0.0 || nu1 > 0.0 || nu2 > 0.0, "at least one cost weight must be positive");
    if (!per_feature.empty()) {
      require(per_feature.size() == num_features, "per-feature weight count mismatch");
      for (double w : per_feature)
        require(std::isfinite(w) && w > 0.0, "per-feature weights must be positive");
    }
  }

  double feature_weight(std::size_t i) const {
    return per_feature.empty() ? 1.0 : per_feature[i];
  }

  static CostWeights l2() { return {0.0, 0.0, 1.0, {}}; }
  static CostWeights l1() { return {0.0, 1.0, 0.0, {}}; }
  /// l0 with a strong l2 term (nu2 = 1e5).
  static CostWeights l0_l2() { return {1.0, 0.0, 1e5, {}}; }
  /// l0-dominant with a small l2 tie-breaker (nu2 = 1e-3).
  static CostWeights l0_dominant() { return {1.0, 0.0, 1e-3, {}}; }

  static CostWeights preset(std::string_view name) {
    if (name == "l2") return l2();
    if (name == "l1") return l1();
    if (name == "l0+l2" || name == "l0_l2") return l0_l2();
    if (name == "l0+(l2)" || name == "l0" || name == "l0_dominant") return l0_dominant();
    fail(ErrorCode::kInvalidArgument, "unknown cost preset '" + std::string(name) + "'");
  }
};

struct BigMConfig {
  double m_input = 1000.0;
  double m_output = 1000.0;
  double m_frontier = 1000.0;
  double m_zero = 1.0;

  void validate() const {
    for (double m : {m_input, m_output, m_frontier, m_zero})
      require(std::isfinite(m) && m > 0.0, "big-M constants must be positive and finite");
  }
};

/// Per-column scale factors; model values are original values divided by the scale.
struct NormalizationRecord {
  std::vector<double> input_scale;
  std::vector<double> output_scale;

  static NormalizationRecord identity(const Panel& p) {
    return {std::vector<double>(p.num_inputs(), 1.0),
            std::vector<double>(p.num_outputs(), 1.0)};
  }

  bool is_identity() const {
    auto one = [](double s) { return s == 1.0; };
    return std::all_of(input_scale.begin(), input_scale.end(), one) &&
           std::all_of(output_scale.begin(), output_scale.end(), one);
  }

  std::vector<double> apply_inputs(std::span<const double> x) const {
    return scale(x, input_scale, false);
  }
  std::vector<double> invert_inputs(std::span<const double> x) const {
    return scale(x, input_scale, true);
  }
  std::vector<double> apply_outputs(std::span<const double> y) const {
    return scale(y, output_scale, false);
  }
  std::vector<double> invert_outputs(std::span<const double> y) const {
    return scale(y, output_scale, true);
  }

  Panel apply(const Panel& p) const { return transform(p, false); }
  Panel invert(const Panel& p) const { return transform(p, true); }

 private:
  static std::vector<double> scale(std::span<const double> v, const std::vector<double>& s,
                                   bool invert) {
    require(v.size() == s.size(), "normalization length mismatch");
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = invert ? v[i] * s[i] : v[i] / s[i];
    return out;
  }

  Panel transform(const Panel& p, bool invert) const {
    Matrix in(p.size(), p.num_inputs());
    Matrix out(p.size(), p.num_outputs());
    for (std::size_t k = 0; k < p.size(); ++k) {
      auto xi = scale(p.input(k), input_scale, invert);
      auto yo = scale(p.output(k), output_scale, invert);
      std::copy(xi.begin(), xi.end(), in.row(k).begin());
      std::copy(yo.begin(), yo.end(), out.row(k).begin());
    }
    return Panel(p.ids(), std::move(in), std::move(out), p.input_names(), p.output_names());
  }
};

struct NormalizedPanel {
  Panel panel;
  NormalizationRecord record;
};

/// Divides each column of the changeable side by its maximum: inputs for the
/// input orientation, outputs for the output orientation.
inline NormalizedPanel normalize_max(const Panel& panel,
                                     Orientation side = Orientation::kInput) {
  NormalizationRecord rec = NormalizationRecord::identity(panel);
  const Matrix& m = side == Orientation::kInput ? panel.inputs() : panel.outputs();
  auto& scale = side == Orientation::kInput ? rec.input_scale : rec.output_scale;
  for (std::size_t c = 0; c < m.cols(); ++c) {
    double mx = 0.0;
    for (std::size_t k = 0; k < m.rows(); ++k) mx = std::max(mx, m(k, c));
    scale[c] = mx > 0.0 ? mx : 1.0;  // all-zero output column stays as is
  }
  return {rec.apply(panel), std::move(rec)};
}

}  // namespace cfdea
