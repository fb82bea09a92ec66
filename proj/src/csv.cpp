#include "mvsens/csv.hpp"

#include "mvsens/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace mvsens {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Splits on commas outside double quotes; "" inside quotes is a literal quote.
std::vector<std::string> split_fields(std::string_view line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  bool was_quoted = false;
  auto flush = [&] {
    out.push_back(was_quoted ? field : std::string(trim(field)));
    field.clear();
    was_quoted = false;
  };
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field.push_back('"');
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        field.push_back(ch);
      }
    } else if (ch == '"' && trim(field).empty()) {
      field.clear();
      quoted = true;
      was_quoted = true;
    } else if (ch == ',') {
      flush();
    } else if (!(was_quoted && (ch == ' ' || ch == '\t' || ch == '\r'))) {
      field.push_back(ch);
    }
  }
  flush();
  return out;
}

bool is_missing(const std::string& s) { return s.empty() || s == "NA" || s == "na"; }

double parse_real(const std::string& s, Index row, const std::string& col) {
  if (is_missing(s)) fail(ErrorCode::NonFiniteValue, "row " + std::to_string(row) + ", column " + col + " (missing)");
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec == std::errc::result_out_of_range) {
    fail(ErrorCode::NonFiniteValue, "row " + std::to_string(row) + ", column " + col);
  }
  if (ec != std::errc() || ptr != last) {
    fail(ErrorCode::ParseError, "row " + std::to_string(row) + ", column " + col + ": '" + s + "'");
  }
  if (!std::isfinite(v)) fail(ErrorCode::NonFiniteValue, "row " + std::to_string(row) + ", column " + col);
  return v;
}

}  // namespace

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out.push_back('"');
    out.push_back(ch);
  }
  out.push_back('"');
  return out;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

ObservationalDataset parse_csv(const std::string& text, const CsvColumns& columns) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::ParseError, "empty file (header row required)");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_fields(line);

  std::unordered_map<std::string, std::size_t> col_of;
  for (std::size_t j = 0; j < header.size(); ++j) col_of.emplace(header[j], j);
  auto locate = [&](const std::string& name) {
    const auto it = col_of.find(name);
    if (it == col_of.end()) fail(ErrorCode::MissingColumn, "column '" + name + "' not found in header");
    return it->second;
  };
  const std::size_t t_col = locate(columns.treatment);
  const std::size_t y_col = locate(columns.outcome);
  std::vector<std::size_t> x_cols;
  for (const auto& name : columns.covariates) x_cols.push_back(locate(name));

  std::unordered_map<std::string, int> level_of;
  for (std::size_t a = 0; a < columns.levels.size(); ++a) {
    if (!level_of.emplace(columns.levels[a], static_cast<int>(a) + 1).second) {
      fail(ErrorCode::InvalidArgument, "duplicate level label '" + columns.levels[a] + "'");
    }
  }

  std::vector<int> t;
  std::vector<double> y;
  std::vector<double> x;
  Index row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      fail(ErrorCode::ParseError, "row " + std::to_string(row) + ": expected " +
                                      std::to_string(header.size()) + " fields, got " +
                                      std::to_string(fields.size()));
    }
    const std::string& label = fields[t_col];
    if (!level_of.empty()) {
      const auto it = level_of.find(label);
      if (it == level_of.end()) {
        fail(ErrorCode::ParseError, "row " + std::to_string(row) + ", column " + columns.treatment +
                                        ": undeclared level '" + label + "'");
      }
      t.push_back(it->second);
    } else {
      int a = 0;
      const auto [ptr, ec] = std::from_chars(label.data(), label.data() + label.size(), a);
      if (label.empty() || ec != std::errc() || ptr != label.data() + label.size() || a < 1 ||
          (columns.num_levels > 0 && a > columns.num_levels)) {
        fail(ErrorCode::ParseError, "row " + std::to_string(row) + ", column " + columns.treatment +
                                        ": '" + label + "' is not a level in 1..J");
      }
      t.push_back(a);
    }
    y.push_back(parse_real(fields[y_col], row, columns.outcome));
    for (std::size_t k = 0; k < x_cols.size(); ++k) {
      x.push_back(parse_real(fields[x_cols[k]], row, columns.covariates[k]));
    }
  }

  int num_levels = static_cast<int>(columns.levels.size());
  if (num_levels == 0) {
    num_levels = columns.num_levels > 0 ? columns.num_levels
                                        : (t.empty() ? 0 : *std::max_element(t.begin(), t.end()));
  }
  const Index n = row;
  const Index d = static_cast<Index>(x_cols.size());
  Eigen::VectorXi tv = Eigen::Map<const Eigen::VectorXi>(t.data(), n);
  Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y.data(), n);
  Eigen::MatrixXd xm =
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(x.data(), n, d);
  std::vector<std::string> labels = columns.levels;
  return ObservationalDataset(std::move(tv), std::move(xm), std::move(yv), num_levels, columns.covariates,
                              std::move(labels));
}

ObservationalDataset load_csv(const std::filesystem::path& path, const CsvColumns& columns) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), columns);
}

std::string format_csv(const ObservationalDataset& data, const std::string& treatment_col,
                       const std::string& outcome_col) {
  std::string out = csv_field(treatment_col);
  for (const auto& name : data.covariate_names()) out += "," + csv_field(name);
  out += "," + csv_field(outcome_col) + "\n";
  for (Index i = 0; i < data.size(); ++i) {
    out += csv_field(data.level_labels()[data.treatment()[i] - 1]);
    for (Index j = 0; j < data.num_covariates(); ++j) out += "," + format_double(data.covariates()(i, j));
    out += "," + format_double(data.outcome()[i]) + "\n";
  }
  return out;
}

void write_csv(const ObservationalDataset& data, const std::filesystem::path& path,
               const std::string& treatment_col, const std::string& outcome_col) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  out << format_csv(data, treatment_col, outcome_col);
}

}  // namespace mvsens
