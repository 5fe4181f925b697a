#pragma once

#include "mcpanel/panel.hpp"

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace mcpanel {

class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest text that round-trips the value ("%.17g").
std::string format_double(double value);

/// Splits one CSV line on commas, trimming whitespace and surrounding quotes.
std::vector<std::string> split_csv_line(const std::string& line);

// Dense numeric matrix without header (Y, W, L).
Eigen::MatrixXd read_dense(const std::string& path);
void write_dense(std::ostream& os, const Eigen::MatrixXd& m);

// N x P with a header row of names.
Eigen::MatrixXd read_unit_covariates(const std::string& path, std::vector<std::string>& names);
void write_unit_covariates(std::ostream& os, const Eigen::MatrixXd& X,
                           const std::vector<std::string>& names);

// Q x T with a leading name column.
Eigen::MatrixXd read_time_covariates(const std::string& path, std::vector<std::string>& names);
void write_time_covariates(std::ostream& os, const Eigen::MatrixXd& Z,
                           const std::vector<std::string>& names);

// Long format: unit,time,covariate,value with 1-based unit and time. Every
// (unit, time, covariate) must appear exactly once.
std::vector<Eigen::MatrixXd> read_unit_time_covariates(const std::string& path, Index N, Index T,
                                                       std::vector<std::string>& names);
void write_unit_time_covariates(std::ostream& os, const std::vector<Eigen::MatrixXd>& V,
                                const std::vector<std::string>& names);

// Nonzero H entries as row_name,col_name,value.
void write_h_triplets(std::ostream& os, const Eigen::MatrixXd& H,
                      const std::vector<std::string>& row_names,
                      const std::vector<std::string>& col_names);
Eigen::MatrixXd read_h_triplets(const std::string& path, const std::vector<std::string>& row_names,
                                const std::vector<std::string>& col_names);

// name,value rows (or index,value when names are empty, 1-based).
void write_vector(std::ostream& os, const Eigen::VectorXd& v, const std::vector<std::string>& names = {});
Eigen::VectorXd read_vector(const std::string& path);

/// Writes text to a file, throwing CsvError naming the path on failure.
void write_file(const std::string& path, const std::string& contents);

}  // namespace mcpanel
