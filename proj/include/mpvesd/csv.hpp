#pragma once

// CSV output. Files are written to a temporary sibling and renamed into place,
// so a failed run never leaves a partial file behind.

#include "mpvesd/experiments.hpp"

#include <string>
#include <vector>

namespace mpvesd {

/// Writes `content` to `path` through a temporary file and rename.
void write_file_atomic(const std::string& path, const std::string& content);

/// Shortest decimal that reads back to the same double.
std::string format_double(double x);

/// Six significant digits, for exported densities and CDFs.
std::string format_6g(double x);

/// Table with a header line; cells are written as given.
std::string csv_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows);

/// family,N,trial,seed,statistic,value
std::string records_csv(const std::vector<ExperimentRecord>& records);

/// x,cumulative
std::string curve_csv(const Curve& curve);

} // namespace mpvesd
