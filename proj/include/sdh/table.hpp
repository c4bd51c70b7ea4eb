#pragma once

#include <cstddef>
#include <vector>

namespace sdh {

/// Dense row-major matrix of doubles, used for per-(state, action) tables.
class Table {
  public:
    Table() = default;
    Table(int rows, int cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {}

    double& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
    double operator()(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    bool operator==(const Table& other) const = default;

  private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

}  // namespace sdh
