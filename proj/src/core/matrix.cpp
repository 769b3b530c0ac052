#include "grembed/core/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace grembed {

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimension mismatch");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) out[j] += aik * brow[j];
    }
  }
  return c;
}

Matrix matmul_transposed_a(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw std::invalid_argument("matmul_transposed_a: dimension mismatch");
  Matrix c(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    auto arow = a.row(k);
    auto brow = b.row(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = arow[i];
      if (aki == 0.0) continue;
      auto out = c.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) out[j] += aki * brow[j];
    }
  }
  return c;
}

Matrix matmul_transposed_b(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw std::invalid_argument("matmul_transposed_b: dimension mismatch");
  Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto arow = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      auto brow = b.row(j);
      double sum = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) sum += arow[k] * brow[k];
      c(i, j) = sum;
    }
  }
  return c;
}

bool all_finite(const Matrix& m) {
  return std::all_of(m.data().begin(), m.data().end(), [](double v) { return std::isfinite(v); });
}

SparseMatrix SparseMatrix::from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> triplets) {
  for (const auto& t : triplets) {
    if (t.row >= rows || t.col >= cols) throw std::out_of_range("sparse triplet outside matrix shape");
  }
  std::stable_sort(triplets.begin(), triplets.end(), [](const Triplet& x, const Triplet& y) {
    return x.row != y.row ? x.row < y.row : x.col < y.col;
  });
  SparseMatrix m(rows, cols);
  for (std::size_t i = 0; i < triplets.size();) {
    std::size_t j = i;
    double sum = 0.0;
    while (j < triplets.size() && triplets[j].row == triplets[i].row && triplets[j].col == triplets[i].col) {
      sum += triplets[j].value;
      ++j;
    }
    m.col_index_.push_back(static_cast<std::uint32_t>(triplets[i].col));
    m.values_.push_back(sum);
    ++m.row_ptr_[triplets[i].row + 1];
    i = j;
  }
  for (std::size_t r = 0; r < rows; ++r) m.row_ptr_[r + 1] += m.row_ptr_[r];
  return m;
}

SparseMatrix SparseMatrix::from_dense(const Matrix& dense) {
  std::vector<Triplet> ts;
  for (std::size_t r = 0; r < dense.rows(); ++r) {
    for (std::size_t c = 0; c < dense.cols(); ++c) {
      if (dense(r, c) != 0.0) ts.push_back({r, c, dense(r, c)});
    }
  }
  return from_triplets(dense.rows(), dense.cols(), std::move(ts));
}

double SparseMatrix::at(std::size_t r, std::size_t c) const {
  auto idx = row_indices(r);
  auto it = std::lower_bound(idx.begin(), idx.end(), static_cast<std::uint32_t>(c));
  if (it == idx.end() || *it != c) return 0.0;
  return values_[row_ptr_[r] + static_cast<std::size_t>(it - idx.begin())];
}

std::vector<Triplet> SparseMatrix::triplets() const {
  std::vector<Triplet> out;
  out.reserve(nnz());
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) out.push_back({r, col_index_[k], values_[k]});
  }
  return out;
}

Matrix SparseMatrix::to_dense() const {
  Matrix d(rows_, cols_);
  for (const auto& t : triplets()) d(t.row, t.col) = t.value;
  return d;
}

bool SparseMatrix::is_symmetric(double tolerance) const {
  if (rows_ != cols_) return false;
  for (const auto& t : triplets()) {
    if (std::abs(at(t.col, t.row) - t.value) > tolerance) return false;
  }
  return true;
}

Matrix SparseMatrix::multiply(const Matrix& dense) const {
  if (cols_ != dense.rows()) throw std::invalid_argument("sparse multiply: dimension mismatch");
  Matrix out(rows_, dense.cols());
  for (std::size_t r = 0; r < rows_; ++r) {
    auto o = out.row(r);
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      const double v = values_[k];
      auto src = dense.row(col_index_[k]);
      for (std::size_t j = 0; j < o.size(); ++j) o[j] += v * src[j];
    }
  }
  return out;
}

Matrix SparseMatrix::multiply_transposed(const Matrix& dense) const {
  if (rows_ != dense.rows()) throw std::invalid_argument("sparse transposed multiply: dimension mismatch");
  Matrix out(cols_, dense.cols());
  for (std::size_t r = 0; r < rows_; ++r) {
    auto src = dense.row(r);
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      const double v = values_[k];
      auto o = out.row(col_index_[k]);
      for (std::size_t j = 0; j < o.size(); ++j) o[j] += v * src[j];
    }
  }
  return out;
}

}  // namespace grembed
