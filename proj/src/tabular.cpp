#include "tabular.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace excomp {

namespace {

bool contains(const std::vector<int>& v, int value) {
  return std::find(v.begin(), v.end(), value) != v.end();
}

std::vector<int> sorted_unique(std::vector<int> v, const char* which) {
  std::sort(v.begin(), v.end());
  if (std::adjacent_find(v.begin(), v.end()) != v.end()) {
    throw ConfigError(std::string("duplicate treatment code in ") + which + " arm set");
  }
  return v;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool is_missing(const std::string& cell) { return cell.empty() || cell == "NA"; }

double parse_double(const std::string& cell, std::size_t line, const std::string& column) {
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw BadValue("line " + std::to_string(line) + ", column '" + column + "': cannot parse '" +
                   cell + "' as a number");
  }
  if (!std::isfinite(value)) {
    throw BadValue("line " + std::to_string(line) + ", column '" + column + "': value is not finite");
  }
  return value;
}

int parse_int(const std::string& cell, std::size_t line, const std::string& column) {
  int value = 0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw BadValue("line " + std::to_string(line) + ", column '" + column + "': cannot parse '" +
                   cell + "' as an integer");
  }
  return value;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  cells.push_back(trim(cur));
  return cells;
}

}  // namespace

TreatmentCoding TreatmentCoding::make(std::vector<int> index_arms, std::vector<int> external_arms,
                                      int index_only, int external_only,
                                      std::optional<int> shared_arm) {
  TreatmentCoding c;
  c.index_arms = sorted_unique(std::move(index_arms), "index");
  c.external_arms = sorted_unique(std::move(external_arms), "external");
  c.index_only = index_only;
  c.external_only = external_only;
  c.shared_arm = shared_arm;
  if (!contains(c.index_arms, index_only) || contains(c.external_arms, index_only)) {
    throw ConfigError("index-only arm " + std::to_string(index_only) +
                      " must be in the index arm set and absent from the external arm set");
  }
  if (!contains(c.external_arms, external_only) || contains(c.index_arms, external_only)) {
    throw ConfigError("external-only arm " + std::to_string(external_only) +
                      " must be in the external arm set and absent from the index arm set");
  }
  if (shared_arm) {
    if (!contains(c.index_arms, *shared_arm) || !contains(c.external_arms, *shared_arm)) {
      throw ConfigError("shared arm " + std::to_string(*shared_arm) +
                        " must be present in both arm sets");
    }
    if (*shared_arm == index_only || *shared_arm == external_only) {
      throw ConfigError("shared arm must be distinct from the index-only and external-only arms");
    }
  }
  return c;
}

bool TreatmentCoding::legal(int source, int arm) const {
  if (source != 0 && source != 1) return false;
  return contains(arms(source), arm);
}

const std::vector<int>& TreatmentCoding::arms(int source) const {
  return source == 1 ? index_arms : external_arms;
}

int TreatmentCoding::require_shared() const {
  if (!shared_arm) {
    throw MissingSharedArm("the treatment coding declares no shared arm");
  }
  return *shared_arm;
}

int CompositeDataset::column(const std::string& name) const {
  for (std::size_t j = 0; j < covariate_names.size(); ++j) {
    if (covariate_names[j] == name) return static_cast<int>(j);
  }
  return -1;
}

CompositeDataset make_dataset(Eigen::MatrixXd x, Eigen::VectorXi source, Eigen::VectorXi arm,
                              Eigen::VectorXd outcome, std::vector<std::string> covariate_names,
                              TreatmentCoding coding) {
  const Eigen::Index n = source.size();
  if (x.rows() != n || arm.size() != n || outcome.size() != n) {
    throw BadValue("dataset columns have inconsistent lengths");
  }
  if (x.cols() != static_cast<Eigen::Index>(covariate_names.size())) {
    throw BadValue("covariate name count does not match covariate columns");
  }
  CompositeDataset ds;
  ds.x = std::move(x);
  ds.source = std::move(source);
  ds.arm = std::move(arm);
  ds.outcome = std::move(outcome);
  ds.covariate_names = std::move(covariate_names);
  ds.coding = std::move(coding);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int s = ds.source[i];
    if (s != 0 && s != 1) {
      throw BadValue("row " + std::to_string(i) + ": source indicator must be 0 or 1");
    }
    if (!ds.coding.legal(s, ds.arm[i])) {
      throw BadValue("row " + std::to_string(i) + ": treatment code " + std::to_string(ds.arm[i]) +
                     " is not legal for source " + std::to_string(s));
    }
    if (!std::isfinite(ds.outcome[i])) {
      throw BadValue("row " + std::to_string(i) + ": outcome is not finite");
    }
    for (Eigen::Index j = 0; j < ds.x.cols(); ++j) {
      if (!std::isfinite(ds.x(i, j))) {
        throw BadValue("row " + std::to_string(i) + ": covariate '" + ds.covariate_names[j] +
                       "' is not finite");
      }
    }
    if (s == 1) {
      ++ds.n_index;
    } else {
      ++ds.n_external;
    }
  }
  if (ds.n_index < 1 || ds.n_external < 1) {
    throw BadValue("dataset must contain at least one index and one external row");
  }
  return ds;
}

CompositeDataset load_csv(const std::string& path, const TreatmentCoding& coding,
                          const std::vector<std::string>& covariate_columns,
                          const LoadOptions& options, LoadReport* report) {
  std::ifstream in(path);
  if (!in) {
    throw MissingColumn("cannot open CSV file '" + path + "'");
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw BadValue("CSV file '" + path + "' is empty");
  }
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) {
    line.erase(0, 3);  // UTF-8 BOM
  }
  const std::vector<std::string> header = split_csv_line(line);
  auto find_col = [&](const std::string& name) -> int {
    for (std::size_t j = 0; j < header.size(); ++j) {
      if (header[j] == name) return static_cast<int>(j);
    }
    return -1;
  };
  const int s_col = find_col("s");
  const int a_col = find_col("a");
  const int y_col = find_col("y");
  if (s_col < 0) throw MissingColumn("CSV '" + path + "' has no column 's'");
  if (a_col < 0) throw MissingColumn("CSV '" + path + "' has no column 'a'");
  if (y_col < 0) throw MissingColumn("CSV '" + path + "' has no column 'y'");
  std::vector<int> x_cols;
  for (const auto& name : covariate_columns) {
    const int j = find_col(name);
    if (j < 0) throw MissingColumn("CSV '" + path + "' has no column '" + name + "'");
    x_cols.push_back(j);
  }

  std::vector<double> ys;
  std::vector<int> ss, as;
  std::vector<double> xs;  // row-major
  std::size_t dropped = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() < header.size()) {
      throw BadValue("line " + std::to_string(line_no) + ": expected " +
                     std::to_string(header.size()) + " cells, found " + std::to_string(cells.size()));
    }
    auto cell = [&](int j) -> const std::string& { return cells[static_cast<std::size_t>(j)]; };
    bool incomplete = is_missing(cell(s_col)) || is_missing(cell(a_col)) || is_missing(cell(y_col));
    for (int j : x_cols) incomplete = incomplete || is_missing(cell(j));
    if (incomplete) {
      if (options.drop_incomplete) {
        ++dropped;
        continue;
      }
      throw BadValue("line " + std::to_string(line_no) +
                     ": missing value (empty or NA); re-run with --drop-incomplete to listwise-delete");
    }
    const int s = parse_int(cell(s_col), line_no, "s");
    if (s != 0 && s != 1) {
      throw BadValue("line " + std::to_string(line_no) + ", column 's': value must be 0 or 1");
    }
    const int a = parse_int(cell(a_col), line_no, "a");
    if (!coding.legal(s, a)) {
      throw BadValue("line " + std::to_string(line_no) + ", column 'a': treatment code " +
                     std::to_string(a) + " is not legal for source " + std::to_string(s));
    }
    const double y = parse_double(cell(y_col), line_no, "y");
    ss.push_back(s);
    as.push_back(a);
    ys.push_back(y);
    for (std::size_t jj = 0; jj < x_cols.size(); ++jj) {
      xs.push_back(parse_double(cell(x_cols[jj]), line_no, covariate_columns[jj]));
    }
  }

  const Eigen::Index n = static_cast<Eigen::Index>(ss.size());
  const Eigen::Index k = static_cast<Eigen::Index>(covariate_columns.size());
  Eigen::MatrixXd x(n, k);
  Eigen::VectorXi source(n), arm(n);
  Eigen::VectorXd outcome(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    source[i] = ss[static_cast<std::size_t>(i)];
    arm[i] = as[static_cast<std::size_t>(i)];
    outcome[i] = ys[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < k; ++j) {
      x(i, j) = xs[static_cast<std::size_t>(i * k + j)];
    }
  }
  if (report) {
    report->rows_loaded = static_cast<std::size_t>(n);
    report->rows_dropped = dropped;
  }
  return make_dataset(std::move(x), std::move(source), std::move(arm), std::move(outcome),
                      covariate_columns, coding);
}

void write_csv(const CompositeDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw BadValue("cannot open '" + path + "' for writing");
  out << "s,a,y";
  for (const auto& name : ds.covariate_names) out << "," << name;
  out << "\n";
  char buf[64];
  for (Eigen::Index i = 0; i < ds.rows(); ++i) {
    out << ds.source[i] << "," << ds.arm[i];
    std::snprintf(buf, sizeof(buf), "%.17g", ds.outcome[i]);
    out << "," << buf;
    for (Eigen::Index j = 0; j < ds.x.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", ds.x(i, j));
      out << "," << buf;
    }
    out << "\n";
  }
}

std::vector<Eigen::Index> stratify(const CompositeDataset& ds, int s, std::optional<int> a) {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index i = 0; i < ds.rows(); ++i) {
    if (ds.source[i] == s && (!a || ds.arm[i] == *a)) idx.push_back(i);
  }
  return idx;
}

Eigen::MatrixXd design_matrix(const CompositeDataset& ds, const std::vector<std::string>& covariates) {
  Eigen::MatrixXd design(ds.rows(), 1 + static_cast<Eigen::Index>(covariates.size()));
  design.col(0).setOnes();
  for (std::size_t j = 0; j < covariates.size(); ++j) {
    const int col = ds.column(covariates[j]);
    if (col < 0) {
      throw ConfigError("model covariate '" + covariates[j] + "' is not in the dataset");
    }
    design.col(static_cast<Eigen::Index>(j + 1)) = ds.x.col(col);
  }
  return design;
}

}  // namespace excomp
