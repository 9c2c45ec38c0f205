#ifndef CFSPLIT_IO_HPP_
#define CFSPLIT_IO_HPP_

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cfsplit/matrix.hpp"

namespace cfsplit {

// ---- LIBSVM text format ----
struct SparseDataset {
  std::size_t rows = 0;  // samples
  std::size_t cols = 0;  // features
  std::vector<SparseMatrix::Triplet> entries;
  std::vector<double> labels;

  SparseMatrix to_sparse() const { return {rows, cols, entries}; }
  DenseMatrix to_dense() const;
  bool labels_are_binary() const;  // all in {+1, -1}
};

// `label idx:val idx:val ...`, ascending 1-based indices; '#' comments and
// blank lines skipped.  Malformed tokens raise ParseError with line number.
SparseDataset parse_libsvm(std::istream& in);
SparseDataset read_libsvm(const std::string& path);
void write_libsvm(const SparseDataset& d, std::ostream& out);
void write_libsvm(const SparseDataset& d, const std::string& path);

// ---- PGM (P2/P5, maxval <= 65535) ----
struct Image {
  std::size_t width = 0, height = 0;
  std::size_t maxval = 255;
  std::vector<double> pixels;  // row-major, [0, maxval]

  double& at(std::size_t r, std::size_t c) { return pixels[r * width + c]; }
  double at(std::size_t r, std::size_t c) const { return pixels[r * width + c]; }
};

Image read_pgm(const std::string& path);
void write_pgm(const Image& img, const std::string& path);  // emits P5

// ---- flat `key = value` config with dotted keys ----
using ConfigMap = std::map<std::string, std::string>;

ConfigMap parse_config(std::istream& in);
ConfigMap read_config(const std::string& path);

// ---- CSV matrix (gen output for matrix-shaped problems) ----
void write_csv_matrix(const DenseMatrix& m, std::ostream& out,
                      const std::string& comment = {});
DenseMatrix read_csv_matrix(std::istream& in);
DenseMatrix read_csv_matrix_file(const std::string& path);

}  // namespace cfsplit

#endif  // CFSPLIT_IO_HPP_
