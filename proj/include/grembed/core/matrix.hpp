#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace grembed {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// C = A * B, accumulated in ascending k order for every entry.
Matrix matmul(const Matrix& a, const Matrix& b);

/// C = A^T * B.
Matrix matmul_transposed_a(const Matrix& a, const Matrix& b);

/// C = A * B^T.
Matrix matmul_transposed_b(const Matrix& a, const Matrix& b);

bool all_finite(const Matrix& m);

struct Triplet {
  std::size_t row;
  std::size_t col;
  double value;
};

/// Compressed sparse row matrix. Column indices are sorted within each row.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), row_ptr_(rows + 1, 0) {}

  /// Builds from triplets; duplicate coordinates are summed. Throws on out-of-range entries.
  static SparseMatrix from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> triplets);
  static SparseMatrix from_dense(const Matrix& dense);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t nnz() const { return values_.size(); }

  /// Value at (r, c), zero when not stored.
  double at(std::size_t r, std::size_t c) const;

  std::span<const std::uint32_t> row_indices(std::size_t r) const {
    return {col_index_.data() + row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]};
  }
  std::span<const double> row_values(std::size_t r) const {
    return {values_.data() + row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]};
  }

  std::vector<Triplet> triplets() const;
  Matrix to_dense() const;
  bool is_symmetric(double tolerance = 0.0) const;

  /// Sparse * dense.
  Matrix multiply(const Matrix& dense) const;
  /// Sparse^T * dense.
  Matrix multiply_transposed(const Matrix& dense) const;

  bool operator==(const SparseMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::uint32_t> col_index_;
  std::vector<double> values_;
};

}  // namespace grembed
