#include "cfattr/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>

#include "cfattr/error.hpp"

namespace cfattr {
namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  // Plain comma splitting; quoted fields are out of scope for this loader.
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      cells.push_back(trim(line.substr(start)));
      break;
    }
    cells.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return cells;
}

double parse_cell(const std::string& cell, std::size_t row, std::size_t col) {
  const char* begin = cell.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0' || !std::isfinite(v))
    throw ParseError("bad numeric cell at row " + std::to_string(row) + ", column " +
                     std::to_string(col) + ": '" + cell + "'");
  return v;
}

}  // namespace

Dataset load_dataset_csv(const std::string& path, const std::string& label_col) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);

  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty dataset file " + path);
  const std::vector<std::string> header = split_csv(line);

  int label_idx = -1;
  Dataset data;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == label_col) {
      if (label_idx >= 0) throw ParseError("duplicate label column " + label_col);
      label_idx = int(c);
    } else {
      data.space.names.push_back(header[c]);
      data.space.kinds.push_back(FeatureKind::Continuous);
    }
  }
  if (label_idx < 0) throw InputError("label column '" + label_col + "' not in header");

  std::size_t row_no = 1;
  while (std::getline(in, line)) {
    ++row_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split_csv(line);
    if (cells.size() != header.size())
      throw ParseError("row " + std::to_string(row_no) + " has " + std::to_string(cells.size()) +
                       " cells, expected " + std::to_string(header.size()));
    Instance x;
    x.reserve(data.space.dim());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (int(c) == label_idx)
        data.labels.push_back(cells[c]);
      else
        x.push_back(parse_cell(cells[c], row_no, c + 1));
    }
    data.rows.push_back(std::move(x));
  }
  return data;
}

void FeatureRanges::validate() const {
  if (lo.size() != hi.size()) throw InputError("range bounds size mismatch");
  for (std::size_t i = 0; i < lo.size(); ++i)
    if (!(lo[i] <= hi[i])) throw InputError("inverted range for feature " + std::to_string(i + 1));
}

FeatureRanges ranges_from_dataset(const Dataset& data) {
  if (data.rows.empty()) throw InputError("dataset has no rows");
  const std::size_t d = data.space.dim();
  FeatureRanges r;
  r.lo.assign(d, 0.0);
  r.hi.assign(d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    double lo = data.rows[0][i], hi = data.rows[0][i];
    for (const Instance& x : data.rows) {
      lo = std::min(lo, x[i]);
      hi = std::max(hi, x[i]);
    }
    r.lo[i] = lo;
    r.hi[i] = hi;
  }
  return r;
}

FeatureRanges unit_ranges(int d) {
  if (d < 1) throw InputError("dimension must be >= 1");
  FeatureRanges r;
  r.lo.assign(d, 0.0);
  r.hi.assign(d, 1.0);
  return r;
}

}  // namespace cfattr
