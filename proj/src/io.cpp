#include "cfsplit/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "cfsplit/errors.hpp"

namespace cfsplit {

DenseMatrix SparseDataset::to_dense() const {
  DenseMatrix d(rows, cols);
  for (const auto& t : entries) d.at(t.row, t.col) = t.value;
  return d;
}

bool SparseDataset::labels_are_binary() const {
  for (double l : labels)
    if (l != 1.0 && l != -1.0) return false;
  return true;
}

namespace {
[[noreturn]] void parse_fail(std::size_t line, const std::string& what) {
  throw ParseError("libsvm parse error at line " + std::to_string(line) + ": " +
                   what);
}
}  // namespace

SparseDataset parse_libsvm(std::istream& in) {
  SparseDataset d;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok)) continue;  // blank line

    double label = 0.0;
    try {
      std::size_t used = 0;
      label = std::stod(tok, &used);
      if (used != tok.size()) parse_fail(lineno, "bad label '" + tok + "'");
    } catch (const std::exception&) {
      parse_fail(lineno, "bad label '" + tok + "'");
    }
    const std::size_t row = d.rows;
    d.labels.push_back(label);
    ++d.rows;

    long long prev_idx = 0;
    while (ls >> tok) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos || colon == 0 || colon + 1 >= tok.size())
        parse_fail(lineno, "bad feature token '" + tok + "'");
      long long idx = 0;
      double val = 0.0;
      try {
        std::size_t used = 0;
        idx = std::stoll(tok.substr(0, colon), &used);
        if (used != colon) parse_fail(lineno, "bad index in '" + tok + "'");
        const std::string vs = tok.substr(colon + 1);
        val = std::stod(vs, &used);
        if (used != vs.size()) parse_fail(lineno, "bad value in '" + tok + "'");
      } catch (const ParseError&) {
        throw;
      } catch (const std::exception&) {
        parse_fail(lineno, "bad feature token '" + tok + "'");
      }
      if (idx < 1) parse_fail(lineno, "indices are 1-based");
      if (idx <= prev_idx) parse_fail(lineno, "indices must be ascending");
      prev_idx = idx;
      const std::size_t col = static_cast<std::size_t>(idx - 1);
      d.cols = std::max(d.cols, col + 1);
      d.entries.push_back({row, col, val});
    }
  }
  return d;
}

SparseDataset read_libsvm(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  return parse_libsvm(in);
}

void write_libsvm(const SparseDataset& d, std::ostream& out) {
  std::size_t pos = 0;
  std::vector<SparseMatrix::Triplet> sorted = d.entries;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) {
              return a.row != b.row ? a.row < b.row : a.col < b.col;
            });
  char buf[64];
  for (std::size_t r = 0; r < d.rows; ++r) {
    std::snprintf(buf, sizeof buf, "%.17g", d.labels[r]);
    out << buf;
    while (pos < sorted.size() && sorted[pos].row == r) {
      std::snprintf(buf, sizeof buf, "%.17g", sorted[pos].value);
      out << " " << (sorted[pos].col + 1) << ":" << buf;
      ++pos;
    }
    out << "\n";
  }
}

void write_libsvm(const SparseDataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open " + path + " for writing");
  write_libsvm(d, out);
}

// ---- PGM ----

namespace {
// next whitespace-separated token, skipping '#' comment lines
std::string pgm_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (!std::isspace(c)) {
      tok.push_back(static_cast<char>(c));
      while ((c = in.peek()) != EOF && !std::isspace(c)) {
        tok.push_back(static_cast<char>(in.get()));
      }
      return tok;
    }
  }
  throw ParseError("pgm: unexpected end of file");
}

std::size_t pgm_number(std::istream& in) {
  const std::string tok = pgm_token(in);
  std::size_t v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size())
    throw ParseError("pgm: bad number '" + tok + "'");
  return v;
}
}  // namespace

Image read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  const std::string magic = pgm_token(in);
  if (magic != "P2" && magic != "P5")
    throw ParseError("pgm: bad magic '" + magic + "'");
  Image img;
  img.width = pgm_number(in);
  img.height = pgm_number(in);
  img.maxval = pgm_number(in);
  if (img.width == 0 || img.height == 0)
    throw ParseError("pgm: zero dimensions");
  if (img.maxval == 0 || img.maxval > 65535)
    throw ParseError("pgm: maxval out of range");
  const std::size_t n = img.width * img.height;
  img.pixels.resize(n);
  if (magic == "P2") {
    for (std::size_t i = 0; i < n; ++i)
      img.pixels[i] = static_cast<double>(pgm_number(in));
  } else {
    in.get();  // single whitespace after maxval
    const bool wide = img.maxval > 255;
    std::vector<unsigned char> raw(n * (wide ? 2 : 1));
    in.read(reinterpret_cast<char*>(raw.data()),
            static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size())
      throw ParseError("pgm: truncated pixel data");
    for (std::size_t i = 0; i < n; ++i) {
      img.pixels[i] = wide ? static_cast<double>((raw[2 * i] << 8) | raw[2 * i + 1])
                           : static_cast<double>(raw[i]);
    }
  }
  for (double v : img.pixels)
    if (v < 0 || v > static_cast<double>(img.maxval))
      throw ParseError("pgm: pixel out of range");
  return img;
}

void write_pgm(const Image& img, const std::string& path) {
  if (img.pixels.size() != img.width * img.height)
    throw DimensionError("pgm: pixel buffer size");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open " + path + " for writing");
  out << "P5\n" << img.width << " " << img.height << "\n" << img.maxval << "\n";
  const bool wide = img.maxval > 255;
  for (double v : img.pixels) {
    const double clamped =
        std::min(static_cast<double>(img.maxval), std::max(0.0, std::round(v)));
    const auto u = static_cast<std::uint16_t>(clamped);
    if (wide) {
      out.put(static_cast<char>(u >> 8));
      out.put(static_cast<char>(u & 0xff));
    } else {
      out.put(static_cast<char>(u));
    }
  }
}

// ---- config ----

namespace {
std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}
}  // namespace

ConfigMap parse_config(std::istream& in) {
  ConfigMap cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ParseError("config line " + std::to_string(lineno) +
                       ": expected key = value");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty())
      throw ParseError("config line " + std::to_string(lineno) + ": empty key");
    cfg[key] = value;
  }
  return cfg;
}

ConfigMap read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  return parse_config(in);
}

// ---- CSV matrices ----

void write_csv_matrix(const DenseMatrix& m, std::ostream& out,
                      const std::string& comment) {
  if (!comment.empty()) out << "# " << comment << "\n";
  char buf[64];
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", m.at(r, c));
      out << (c ? "," : "") << buf;
    }
    out << "\n";
  }
}

DenseMatrix read_csv_matrix(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ls(t);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      try {
        row.push_back(std::stod(trim(cell)));
      } catch (const std::exception&) {
        throw ParseError("csv: bad cell '" + cell + "'");
      }
    }
    if (!row.empty()) rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError("csv: empty matrix");
  const std::size_t cols = rows[0].size();
  DenseMatrix m(rows.size(), cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != cols) throw ParseError("csv: ragged rows");
    for (std::size_t c = 0; c < cols; ++c) m.at(r, c) = rows[r][c];
  }
  return m;
}

DenseMatrix read_csv_matrix_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  return read_csv_matrix(in);
}

}  // namespace cfsplit
