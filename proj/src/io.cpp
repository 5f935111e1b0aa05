#include "hsforest/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string_view>
#include <vector>

#include "hsforest/errors.hpp"

namespace hsforest {
namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                     : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

double parse_double(std::string_view field, std::size_t row, const char* column) {
  field = trim(field);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (field.empty() || ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(v)) {
    throw InputError("row " + std::to_string(row) + ": invalid value '" + std::string(field) +
                     "' in column " + column);
  }
  return v;
}

int parse_flag(std::string_view field, std::size_t row, const char* column) {
  const double v = parse_double(field, row, column);
  if (v != 0.0 && v != 1.0) {
    throw InputError("row " + std::to_string(row) + ": column " + column + " must be 0 or 1");
  }
  return static_cast<int>(v);
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(line);
  }
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw InputError("failed writing '" + path + "'");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Dataset dataset_from_csv(const std::string& text, OutcomeKind outcome) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw InputError("empty dataset file");
  const auto header = split_fields(lines[0]);
  if (header.size() < 4 || trim(header[0]) != "time" || trim(header[1]) != "status" ||
      trim(header[2]) != "treatment") {
    throw InputError("dataset header must be time,status,treatment,x1,...,xp");
  }
  const std::size_t p = header.size() - 3;
  std::vector<std::size_t> data_lines;
  for (std::size_t l = 1; l < lines.size(); ++l) {
    if (!trim(lines[l]).empty()) data_lines.push_back(l);
  }
  const auto n = static_cast<Eigen::Index>(data_lines.size());
  if (n == 0) throw InputError("dataset has no rows");

  Dataset d;
  d.outcome = outcome;
  d.X.resize(n, static_cast<Eigen::Index>(p));
  d.time.resize(n);
  d.status.resize(n);
  d.treatment.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::size_t row = static_cast<std::size_t>(i) + 1;
    const auto fields = split_fields(lines[data_lines[static_cast<std::size_t>(i)]]);
    if (fields.size() != header.size()) {
      throw InputError("row " + std::to_string(row) + ": expected " +
                       std::to_string(header.size()) + " fields, found " +
                       std::to_string(fields.size()));
    }
    d.time[i] = parse_double(fields[0], row, "time");
    if (outcome == OutcomeKind::Survival && !(d.time[i] > 0.0)) {
      throw InputError("row " + std::to_string(row) + ": time must be positive");
    }
    d.status[i] = parse_flag(fields[1], row, "status");
    d.treatment[i] = parse_flag(fields[2], row, "treatment");
    for (std::size_t j = 0; j < p; ++j) {
      d.X(i, static_cast<Eigen::Index>(j)) = parse_double(fields[3 + j], row, "x");
    }
  }
  return d;
}

Dataset read_dataset_csv(const std::string& path, OutcomeKind outcome) {
  return dataset_from_csv(read_text_file(path), outcome);
}

std::string dataset_to_csv(const Dataset& data) {
  std::string out = "time,status,treatment";
  for (Eigen::Index j = 0; j < data.p(); ++j) out += ",x" + std::to_string(j + 1);
  out += '\n';
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    out += format_double(data.time[i]);
    out += ',' + std::to_string(data.status.size() ? data.status[i] : 1);
    out += ',' + std::to_string(data.treatment.size() ? data.treatment[i] : 0);
    for (Eigen::Index j = 0; j < data.p(); ++j) out += ',' + format_double(data.X(i, j));
    out += '\n';
  }
  return out;
}

void write_dataset_csv(const std::string& path, const Dataset& data) {
  write_text_file(path, dataset_to_csv(data));
}

void write_truth_csv(const std::string& path, const Eigen::VectorXd& cate, double ate) {
  std::string out = "# ate=" + format_double(ate) + "\ncate\n";
  for (Eigen::Index i = 0; i < cate.size(); ++i) out += format_double(cate[i]) + '\n';
  write_text_file(path, out);
}

Eigen::VectorXd read_truth_csv(const std::string& path, double* ate) {
  const auto lines = lines_of(read_text_file(path));
  std::vector<double> values;
  bool header_seen = false;
  for (std::size_t l = 0; l < lines.size(); ++l) {
    const std::string_view line = trim(lines[l]);
    if (line.empty()) continue;
    if (line.front() == '#') {
      const auto eq = line.find("ate=");
      if (ate != nullptr && eq != std::string_view::npos) {
        *ate = parse_double(line.substr(eq + 4), l + 1, "ate");
      }
      continue;
    }
    if (!header_seen) {
      if (line != "cate") throw InputError("truth file must have a 'cate' column");
      header_seen = true;
      continue;
    }
    values.push_back(parse_double(line, values.size() + 1, "cate"));
  }
  return Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

void write_draws_csv(const std::string& path, const PosteriorDraws& draws) {
  const bool causal = !draws.ate.empty() || draws.cate.rows() > 0;
  std::string out;
  if (causal) {
    out = "ate,sigma2";
    for (Eigen::Index i = 0; i < draws.cate.rows(); ++i) out += ",cate_" + std::to_string(i + 1);
  } else {
    out = "sigma2";
  }
  out += '\n';
  for (std::size_t d = 0; d < draws.sigma2.size(); ++d) {
    if (causal) {
      out += format_double(draws.ate[d]) + ',' + format_double(draws.sigma2[d]);
      for (Eigen::Index i = 0; i < draws.cate.rows(); ++i) {
        out += ',' + format_double(draws.cate(i, static_cast<Eigen::Index>(d)));
      }
    } else {
      out += format_double(draws.sigma2[d]);
    }
    out += '\n';
  }
  write_text_file(path, out);
}

}  // namespace hsforest
