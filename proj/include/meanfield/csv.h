#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "meanfield/analysis.h"
#include "meanfield/common.h"

namespace meanfield::csv {

/// Row-major matrix with a header row of column labels.
void write_matrix(const std::string& path, const Matrix& M, const std::vector<std::string>& labels);

/// Inverse of write_matrix; returns the header labels through `labels`.
Matrix read_matrix(const std::string& path, std::vector<std::string>* labels = nullptr);

/// Columns: index (1-based), value, log10(value).
void write_spectrum(const std::string& path, const std::vector<double>& values);

/// Columns: state, label, count.
void write_state_histogram(const std::string& path, const std::vector<std::int64_t>& counts,
                           const std::vector<std::string>& labels);

/// Columns: bin_lo, bin_hi, count, over `bins` equal-width bins spanning the data.
void write_value_histogram(const std::string& path, const std::vector<double>& values, int bins);

/// Shortest round-trip decimal representation.
std::string format(double v);

}  // namespace meanfield::csv
