#include "meanfield/csv.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace meanfield::csv {

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    if (!cell.empty() && cell.back() == '\r') cell.pop_back();
    cells.push_back(cell);
  }
  return cells;
}

}  // namespace

std::string format(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_matrix(const std::string& path, const Matrix& M,
                  const std::vector<std::string>& labels) {
  if (static_cast<Eigen::Index>(labels.size()) != M.cols()) {
    throw std::invalid_argument("write_matrix: one label per column required");
  }
  auto out = open_out(path);
  for (std::size_t j = 0; j < labels.size(); ++j) out << (j ? "," : "") << labels[j];
  out << '\n';
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.cols(); ++j) out << (j ? "," : "") << format(M(i, j));
    out << '\n';
  }
}

Matrix read_matrix(const std::string& path, std::vector<std::string>* labels) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
  const auto header = split(line);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) {
      throw std::runtime_error(path + ": row " + std::to_string(rows.size() + 1) +
                               " has the wrong number of columns");
    }
    std::vector<double> row;
    for (const auto& c : cells) row.push_back(std::stod(c));
    rows.push_back(std::move(row));
  }
  Matrix M(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(header.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < header.size(); ++j) M(i, j) = rows[i][j];
  }
  if (labels) *labels = header;
  return M;
}

void write_spectrum(const std::string& path, const std::vector<double>& values) {
  auto out = open_out(path);
  out << "index,value,log10\n";
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = values[i];
    out << i + 1 << ',' << format(v) << ',' << (v > 0 ? format(std::log10(v)) : "-inf") << '\n';
  }
}

void write_state_histogram(const std::string& path, const std::vector<std::int64_t>& counts,
                           const std::vector<std::string>& labels) {
  auto out = open_out(path);
  out << "state,label,count\n";
  for (std::size_t i = 0; i < counts.size(); ++i) {
    out << i << ',' << (i < labels.size() ? labels[i] : "") << ',' << counts[i] << '\n';
  }
}

void write_value_histogram(const std::string& path, const std::vector<double>& values, int bins) {
  if (bins < 1) throw std::invalid_argument("write_value_histogram: bins must be >= 1");
  auto out = open_out(path);
  out << "bin_lo,bin_hi,count\n";
  if (values.empty()) return;
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  const double lo = *mn;
  const double width = (*mx > lo ? *mx - lo : 1.0) / bins;
  std::vector<std::int64_t> counts(bins, 0);
  for (double v : values) {
    const int b = std::clamp(static_cast<int>((v - lo) / width), 0, bins - 1);
    ++counts[b];
  }
  for (int b = 0; b < bins; ++b) {
    out << format(lo + b * width) << ',' << format(lo + (b + 1) * width) << ',' << counts[b]
        << '\n';
  }
}

}  // namespace meanfield::csv
