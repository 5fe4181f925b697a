#include "mcpanel/csv_io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

namespace mcpanel {

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    std::size_t b = cur.find_first_not_of(" \t\r");
    std::size_t e = cur.find_last_not_of(" \t\r");
    std::string field = b == std::string::npos ? "" : cur.substr(b, e - b + 1);
    if (field.size() >= 2 && field.front() == '"' && field.back() == '"') {
      field = field.substr(1, field.size() - 2);
    }
    out.push_back(std::move(field));
    cur.clear();
  };
  for (char c : line) {
    if (c == ',') {
      flush();
    } else {
      cur.push_back(c);
    }
  }
  flush();
  return out;
}

namespace {

std::vector<std::vector<std::string>> read_rows(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CsvError("cannot open file '" + path + "'");
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    rows.push_back(split_csv_line(line));
  }
  return rows;
}

double parse_number(const std::string& s, const std::string& path, std::size_t row, std::size_t col) {
  const char* begin = s.c_str();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(begin, &end);
  if (s.empty() || end != begin + s.size() || errno == ERANGE) {
    throw CsvError(path + ": invalid number '" + s + "' at row " + std::to_string(row + 1) +
                   ", column " + std::to_string(col + 1));
  }
  return v;
}

Index parse_index(const std::string& s, const std::string& path, std::size_t row) {
  const double v = parse_number(s, path, row, 0);
  if (v != std::floor(v)) throw CsvError(path + ": non-integer index at row " + std::to_string(row + 1));
  return static_cast<Index>(v);
}

Eigen::MatrixXd to_matrix(const std::vector<std::vector<std::string>>& rows, std::size_t first_row,
                          std::size_t first_col, const std::string& path) {
  const std::size_t nr = rows.size() - first_row;
  const std::size_t nc = nr == 0 ? 0 : rows[first_row].size() - first_col;
  Eigen::MatrixXd m(nr, nc);
  for (std::size_t r = 0; r < nr; ++r) {
    const auto& row = rows[first_row + r];
    if (row.size() - first_col != nc) {
      throw CsvError(path + ": row " + std::to_string(first_row + r + 1) + " has " +
                     std::to_string(row.size() - first_col) + " values, expected " + std::to_string(nc));
    }
    for (std::size_t c = 0; c < nc; ++c) m(r, c) = parse_number(row[first_col + c], path, first_row + r, first_col + c);
  }
  return m;
}

}  // namespace

Eigen::MatrixXd read_dense(const std::string& path) {
  const auto rows = read_rows(path);
  if (rows.empty()) throw CsvError(path + ": empty file");
  return to_matrix(rows, 0, 0, path);
}

void write_dense(std::ostream& os, const Eigen::MatrixXd& m) {
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      if (c > 0) os << ',';
      os << format_double(m(r, c));
    }
    os << '\n';
  }
}

Eigen::MatrixXd read_unit_covariates(const std::string& path, std::vector<std::string>& names) {
  const auto rows = read_rows(path);
  if (rows.empty()) throw CsvError(path + ": missing header row");
  names = rows[0];
  Eigen::MatrixXd m = to_matrix(rows, 1, 0, path);
  if (m.rows() > 0 && static_cast<std::size_t>(m.cols()) != names.size()) {
    throw CsvError(path + ": header has " + std::to_string(names.size()) + " names, rows have " +
                   std::to_string(m.cols()) + " values");
  }
  if (m.rows() == 0) m.resize(0, static_cast<Index>(names.size()));
  return m;
}

void write_unit_covariates(std::ostream& os, const Eigen::MatrixXd& X,
                           const std::vector<std::string>& names) {
  for (std::size_t k = 0; k < names.size(); ++k) os << (k ? "," : "") << names[k];
  os << '\n';
  write_dense(os, X);
}

Eigen::MatrixXd read_time_covariates(const std::string& path, std::vector<std::string>& names) {
  const auto rows = read_rows(path);
  names.clear();
  for (const auto& r : rows) names.push_back(r.empty() ? "" : r[0]);
  if (rows.empty()) return Eigen::MatrixXd(0, 0);
  return to_matrix(rows, 0, 1, path);
}

void write_time_covariates(std::ostream& os, const Eigen::MatrixXd& Z,
                           const std::vector<std::string>& names) {
  for (Index r = 0; r < Z.rows(); ++r) {
    os << names[r];
    for (Index c = 0; c < Z.cols(); ++c) os << ',' << format_double(Z(r, c));
    os << '\n';
  }
}

std::vector<Eigen::MatrixXd> read_unit_time_covariates(const std::string& path, Index N, Index T,
                                                       std::vector<std::string>& names) {
  const auto rows = read_rows(path);
  if (rows.empty()) throw CsvError(path + ": missing header row");
  const std::vector<std::string> expected{"unit", "time", "covariate", "value"};
  if (rows[0] != expected) throw CsvError(path + ": header must be unit,time,covariate,value");
  names.clear();
  std::map<std::string, std::size_t> slot;
  std::vector<Eigen::MatrixXd> V;
  std::vector<Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>> seen;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != 4) throw CsvError(path + ": row " + std::to_string(r + 1) + " must have 4 fields");
    const Index i = parse_index(row[0], path, r) - 1;
    const Index t = parse_index(row[1], path, r) - 1;
    if (i < 0 || i >= N || t < 0 || t >= T) {
      throw CsvError(path + ": unit/time out of range at row " + std::to_string(r + 1));
    }
    auto [it, inserted] = slot.emplace(row[2], V.size());
    if (inserted) {
      names.push_back(row[2]);
      V.push_back(Eigen::MatrixXd::Zero(N, T));
      seen.push_back(Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(N, T, false));
    }
    const std::size_t j = it->second;
    if (seen[j](i, t)) {
      throw CsvError(path + ": duplicate entry for unit " + row[0] + ", time " + row[1] +
                     ", covariate " + row[2]);
    }
    seen[j](i, t) = true;
    V[j](i, t) = parse_number(row[3], path, r, 3);
  }
  for (std::size_t j = 0; j < V.size(); ++j) {
    for (Index t = 0; t < T; ++t) {
      for (Index i = 0; i < N; ++i) {
        if (!seen[j](i, t)) {
          throw CsvError(path + ": missing entry for unit " + std::to_string(i + 1) + ", time " +
                         std::to_string(t + 1) + ", covariate " + names[j]);
        }
      }
    }
  }
  return V;
}

void write_unit_time_covariates(std::ostream& os, const std::vector<Eigen::MatrixXd>& V,
                                const std::vector<std::string>& names) {
  os << "unit,time,covariate,value\n";
  for (std::size_t j = 0; j < V.size(); ++j) {
    for (Index i = 0; i < V[j].rows(); ++i) {
      for (Index t = 0; t < V[j].cols(); ++t) {
        os << i + 1 << ',' << t + 1 << ',' << names[j] << ',' << format_double(V[j](i, t)) << '\n';
      }
    }
  }
}

void write_h_triplets(std::ostream& os, const Eigen::MatrixXd& H,
                      const std::vector<std::string>& row_names,
                      const std::vector<std::string>& col_names) {
  os << "row_name,col_name,value\n";
  for (Index a = 0; a < H.rows(); ++a) {
    for (Index b = 0; b < H.cols(); ++b) {
      if (H(a, b) != 0.0) os << row_names[a] << ',' << col_names[b] << ',' << format_double(H(a, b)) << '\n';
    }
  }
}

Eigen::MatrixXd read_h_triplets(const std::string& path, const std::vector<std::string>& row_names,
                                const std::vector<std::string>& col_names) {
  const auto rows = read_rows(path);
  if (rows.empty()) throw CsvError(path + ": missing header row");
  std::map<std::string, Index> ri, ci;
  for (std::size_t k = 0; k < row_names.size(); ++k) ri.emplace(row_names[k], static_cast<Index>(k));
  for (std::size_t k = 0; k < col_names.size(); ++k) ci.emplace(col_names[k], static_cast<Index>(k));
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(static_cast<Index>(row_names.size()),
                                            static_cast<Index>(col_names.size()));
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != 3) throw CsvError(path + ": row " + std::to_string(r + 1) + " must have 3 fields");
    const auto a = ri.find(row[0]);
    const auto b = ci.find(row[1]);
    if (a == ri.end() || b == ci.end()) {
      throw CsvError(path + ": unknown covariate pair (" + row[0] + ", " + row[1] + ")");
    }
    H(a->second, b->second) = parse_number(row[2], path, r, 2);
  }
  return H;
}

void write_vector(std::ostream& os, const Eigen::VectorXd& v, const std::vector<std::string>& names) {
  os << (names.empty() ? "index,value\n" : "name,value\n");
  for (Index k = 0; k < v.size(); ++k) {
    if (names.empty()) {
      os << k + 1;
    } else {
      os << names[k];
    }
    os << ',' << format_double(v(k)) << '\n';
  }
}

Eigen::VectorXd read_vector(const std::string& path) {
  const auto rows = read_rows(path);
  if (rows.empty()) throw CsvError(path + ": missing header row");
  Eigen::VectorXd v(static_cast<Index>(rows.size() - 1));
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != 2) throw CsvError(path + ": row " + std::to_string(r + 1) + " must have 2 fields");
    v(static_cast<Index>(r - 1)) = parse_number(rows[r][1], path, r, 1);
  }
  return v;
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CsvError("cannot write file '" + path + "'");
  out << contents;
  if (!out) throw CsvError("cannot write file '" + path + "'");
}

}  // namespace mcpanel
