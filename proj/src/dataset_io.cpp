#include "bgmm/dataset_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "bgmm/errors.hpp"

namespace bgmm {

namespace {

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
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

double parse_double(std::string_view field, std::size_t line) {
  field = trim(field);
  double v = 0.0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size() || !std::isfinite(v))
    throw ParseError("invalid number '" + std::string(field) + "'", line);
  return v;
}

std::size_t parse_index(std::string_view field, std::size_t line) {
  field = trim(field);
  std::size_t v = 0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size())
    throw ParseError("invalid index '" + std::string(field) + "'", line);
  return v;
}

void put(std::ostream& out, double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  out.write(buf, res.ptr - buf);
}

}  // namespace

void write_dataset_csv(std::ostream& out, const Dataset& data) {
  data.validate();
  out << "subject,position,Y";
  for (std::size_t c = 0; c < data.p; ++c) out << ",X" << (c + 1);
  out << '\n';
  for (std::size_t i = 0; i < data.n; ++i) {
    for (std::size_t j = 0; j < data.s; ++j) {
      const auto row = static_cast<Eigen::Index>(i * data.s + j);
      out << i << ',' << j << ',';
      put(out, data.Y(row));
      for (std::size_t c = 0; c < data.p; ++c) {
        out << ',';
        put(out, data.X(row, static_cast<Eigen::Index>(c)));
      }
      out << '\n';
    }
  }
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_dataset_csv(out, data);
  if (!out) throw IoError("write failed for " + path.string());
}

Dataset read_dataset_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError("empty file", 1);
  ++line_no;
  const auto header = split(line);
  if (header.size() < 3 || trim(header[0]) != "subject" || trim(header[1]) != "position" || trim(header[2]) != "Y")
    throw ParseError("header must start with subject,position,Y", line_no);
  const std::size_t p = header.size() - 3;
  for (std::size_t c = 0; c < p; ++c)
    if (trim(header[3 + c]) != "X" + std::to_string(c + 1))
      throw ParseError("expected column X" + std::to_string(c + 1), line_no);

  std::vector<double> ys;
  std::vector<double> xs;
  std::size_t s = 0;
  std::size_t subject = 0;
  std::size_t position = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split(line);
    if (fields.size() != header.size())
      throw ParseError("expected " + std::to_string(header.size()) + " fields, found " +
                           std::to_string(fields.size()),
                       line_no);
    const std::size_t i = parse_index(fields[0], line_no);
    const std::size_t j = parse_index(fields[1], line_no);
    if (first) {
      if (i != 0 || j != 0) throw ParseError("data must start at subject 0, position 0", line_no);
      first = false;
    } else if (i == subject && j == position + 1) {
      if (s != 0 && j >= s) throw ParseError("subject has more positions than earlier subjects", line_no);
    } else if (i == subject + 1 && j == 0) {
      if (s == 0) s = position + 1;
      if (position + 1 != s) throw ParseError("subject " + std::to_string(subject) + " is incomplete", line_no);
    } else {
      throw ParseError("rows out of order at subject " + std::to_string(i) + ", position " + std::to_string(j),
                       line_no);
    }
    subject = i;
    position = j;
    ys.push_back(parse_double(fields[2], line_no));
    for (std::size_t c = 0; c < p; ++c) xs.push_back(parse_double(fields[3 + c], line_no));
  }
  if (first) throw ParseError("no data rows", line_no);
  if (s == 0) s = position + 1;
  if (position + 1 != s) throw ParseError("last subject is incomplete", line_no);

  Dataset d;
  d.n = subject + 1;
  d.s = s;
  d.p = p;
  const auto rows = static_cast<Eigen::Index>(ys.size());
  d.Y = Eigen::Map<const VectorXd>(ys.data(), rows);
  d.X = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      xs.data(), rows, static_cast<Eigen::Index>(p));
  return d;
}

Dataset read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_dataset_csv(in);
}

}  // namespace bgmm
