#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <type_traits>
#include <utility>
#include <vector>

#include "palf/types.hpp"

namespace palf {

/// Dense row-major cost matrix. Entries must be finite and non-negative.
template <typename T>
class CostMatrix {
 public:
  CostMatrix() = default;
  CostMatrix(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  CostMatrix(std::initializer_list<std::initializer_list<T>> init) {
    rows_ = init.size();
    cols_ = rows_ ? init.begin()->size() : 0;
    data_.reserve(rows_ * cols_);
    for (const auto& row : init) {
      if (row.size() != cols_) throw std::invalid_argument("ragged cost matrix");
      data_.insert(data_.end(), row.begin(), row.end());
    }
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0 || cols_ == 0; }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  T max_entry() const {
    return data_.empty() ? T{} : *std::max_element(data_.begin(), data_.end());
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

struct Matching {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // sorted by row
  std::vector<std::size_t> unmatched_rows;
  std::vector<std::size_t> unmatched_cols;

  bool operator==(const Matching&) const = default;
};

/// Pixel distance between rectangle centers.
inline CostMatrix<double> build_cost_matrix(std::span<const Box2D> rows,
                                            std::span<const Box2D> cols) {
  CostMatrix<double> costs(rows.size(), cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j)
      costs(i, j) = (rows[i].center() - cols[j].center()).norm();
  return costs;
}

namespace detail {

// Square Hungarian solver (shortest augmenting path with potentials).
// Returns row -> column plus the dual potentials, which certify optimality:
// cost(i,j) - u[i] - v[j] >= 0 everywhere and == 0 on the assignment.
template <typename Acc>
struct SquareSolution {
  std::vector<std::size_t> row_to_col;
  std::vector<Acc> u;
  std::vector<Acc> v;
};

template <typename Acc>
SquareSolution<Acc> hungarian_square(const std::vector<Acc>& cost, std::size_t n) {
  const Acc inf = std::numeric_limits<Acc>::max() / 4;
  std::vector<Acc> u(n + 1, Acc{}), v(n + 1, Acc{});
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);

  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<Acc> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      Acc delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const Acc cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  SquareSolution<Acc> sol;
  sol.row_to_col.assign(n, 0);
  for (std::size_t j = 1; j <= n; ++j)
    if (p[j] != 0) sol.row_to_col[p[j] - 1] = j - 1;
  sol.u.assign(u.begin() + 1, u.end());
  sol.v.assign(v.begin() + 1, v.end());
  return sol;
}

// Among all optimal assignments (perfect matchings on zero-reduced-cost
// edges), moves to the lexicographically smallest row -> column vector.
template <typename Acc>
void lexicographic_refine(const std::vector<Acc>& cost, std::size_t n,
                          SquareSolution<Acc>& sol, Acc tol) {
  auto tight = [&](std::size_t i, std::size_t j) {
    return cost[i * n + j] - sol.u[i] - sol.v[j] <= tol;
  };
  auto& r2c = sol.row_to_col;
  std::vector<std::size_t> c2r(n);
  for (std::size_t i = 0; i < n; ++i) c2r[r2c[i]] = i;
  std::vector<char> fixed(n, 0);
  std::vector<char> seen(n, 0);

  // Alternating path search: re-seat `row` on some tight column, ending at
  // `target` (the column being vacated). Only unfixed rows may move.
  auto reseat = [&](auto&& self, std::size_t row, std::size_t target) -> bool {
    for (std::size_t j = 0; j < n; ++j) {
      if (seen[j] || j == r2c[row] || !tight(row, j)) continue;
      seen[j] = 1;
      if (j == target) {
        r2c[row] = j;
        c2r[j] = row;
        return true;
      }
      const std::size_t other = c2r[j];
      if (fixed[other]) continue;
      if (self(self, other, target)) {
        r2c[row] = j;
        c2r[j] = row;
        return true;
      }
    }
    return false;
  };

  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t current = r2c[i];
    for (std::size_t j = 0; j < current; ++j) {
      if (!tight(i, j)) continue;
      const std::size_t other = c2r[j];
      if (fixed[other]) continue;
      std::fill(seen.begin(), seen.end(), 0);
      seen[j] = 1;
      fixed[i] = 1;  // i must keep column j while `other` is re-seated
      if (reseat(reseat, other, current)) {
        r2c[i] = j;
        c2r[j] = i;
        break;
      }
      fixed[i] = 0;
    }
    fixed[i] = 1;
  }
}

}  // namespace detail

/// Exact minimum-cost assignment of rows to columns.
///
/// Rectangular inputs are padded to a square with a sentinel cost of
/// 10 * max_entry + 1, so every real pair is cheaper than any dummy pair and
/// exactly min(rows, cols) real pairs are produced. Among equally cheap
/// solutions the lexicographically smallest (by row, then column) is
/// returned. When `max_cost` is set, pairs costing more are reported as
/// unmatched.
template <typename T>
Matching solve_assignment(const CostMatrix<T>& costs,
                          std::optional<T> max_cost = std::nullopt) {
  static_assert(std::is_arithmetic_v<T>);
  using Acc = std::conditional_t<std::is_integral_v<T>, long long, double>;

  Matching out;
  const std::size_t rows = costs.rows();
  const std::size_t cols = costs.cols();
  if (costs.empty()) {
    for (std::size_t i = 0; i < rows; ++i) out.unmatched_rows.push_back(i);
    for (std::size_t j = 0; j < cols; ++j) out.unmatched_cols.push_back(j);
    return out;
  }

  const std::size_t n = std::max(rows, cols);
  const Acc max_entry = static_cast<Acc>(costs.max_entry());
  const Acc sentinel = Acc{10} * max_entry + Acc{1};
  std::vector<Acc> square(n * n, sentinel);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      square[i * n + j] = static_cast<Acc>(costs(i, j));

  auto sol = detail::hungarian_square(square, n);
  Acc tol{};
  if constexpr (std::is_floating_point_v<Acc>)
    tol = 1e-9 * std::max(Acc{1}, sentinel);
  detail::lexicographic_refine(square, n, sol, tol);

  std::vector<char> col_used(cols, 0);
  for (std::size_t i = 0; i < rows; ++i) {
    const std::size_t j = sol.row_to_col[i];
    const bool real = j < cols;
    const bool gated = real && max_cost && costs(i, j) > *max_cost;
    if (real && !gated) {
      out.pairs.emplace_back(i, j);
      col_used[j] = 1;
    } else {
      out.unmatched_rows.push_back(i);
    }
  }
  for (std::size_t j = 0; j < cols; ++j)
    if (!col_used[j]) out.unmatched_cols.push_back(j);
  return out;
}

template <typename T>
T matching_cost(const CostMatrix<T>& costs, const Matching& m) {
  T total{};
  for (const auto& [r, c] : m.pairs) total += costs(r, c);
  return total;
}

}  // namespace palf
