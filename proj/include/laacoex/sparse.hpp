// Minimal row-major sparse matrix for the inner transition kernels.  Rows are
// built in order; the only hot operation is accumulating x^T * P into an
// output row vector.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace laacoex {

class SparseRowMatrix {
 public:
  SparseRowMatrix() = default;
  SparseRowMatrix(int rows, int cols) : rows_(rows), cols_(cols) { row_ptr_.assign(rows + 1, 0); }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t nonzeros() const { return col_.size(); }

  /// Starts the next row; rows must be emitted in ascending order.
  void begin_row(int row);
  void push(int col, double value);
  void finish();

  double row_sum(int row) const;

  /// y += x * P  (x over rows, y over columns).
  void accumulate_left_product(std::span<const double> x, std::span<double> y) const;

  struct Entry {
    int row;
    int col;
    double value;
  };
  std::vector<Entry> entries() const;

  std::span<const int> row_cols(int row) const {
    return {col_.data() + row_ptr_[row], static_cast<std::size_t>(row_ptr_[row + 1] - row_ptr_[row])};
  }
  std::span<const double> row_values(int row) const {
    return {val_.data() + row_ptr_[row], static_cast<std::size_t>(row_ptr_[row + 1] - row_ptr_[row])};
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  int current_row_ = -1;
  std::vector<int> row_ptr_;
  std::vector<int> col_;
  std::vector<double> val_;
};

inline void SparseRowMatrix::begin_row(int row) {
  for (int r = current_row_ + 1; r <= row; ++r) {
    row_ptr_[r] = static_cast<int>(col_.size());
  }
  current_row_ = row;
}

inline void SparseRowMatrix::push(int col, double value) {
  col_.push_back(col);
  val_.push_back(value);
}

inline void SparseRowMatrix::finish() {
  for (int r = current_row_ + 1; r <= rows_; ++r) {
    row_ptr_[r] = static_cast<int>(col_.size());
  }
  current_row_ = rows_;
}

inline double SparseRowMatrix::row_sum(int row) const {
  double sum = 0.0;
  for (int e = row_ptr_[row]; e < row_ptr_[row + 1]; ++e) sum += val_[e];
  return sum;
}

inline void SparseRowMatrix::accumulate_left_product(std::span<const double> x,
                                                     std::span<double> y) const {
  for (int r = 0; r < rows_; ++r) {
    const double xr = x[r];
    if (xr == 0.0) continue;
    for (int e = row_ptr_[r]; e < row_ptr_[r + 1]; ++e) {
      y[col_[e]] += xr * val_[e];
    }
  }
}

inline std::vector<SparseRowMatrix::Entry> SparseRowMatrix::entries() const {
  std::vector<Entry> out;
  out.reserve(col_.size());
  for (int r = 0; r < rows_; ++r) {
    for (int e = row_ptr_[r]; e < row_ptr_[r + 1]; ++e) {
      out.push_back({r, col_[e], val_[e]});
    }
  }
  return out;
}

}  // namespace laacoex
