#pragma once

#include <cstddef>

namespace lgv {

// Uniform cell-centred grid on [lo, hi]. Finite-volume code uses centres; Simpson
// quadrature uses the n+1 nodes lo + i·h.
struct Grid1D {
  double lo = 0.0;
  double hi = 1.0;
  std::size_t n = 1;

  Grid1D() = default;
  Grid1D(double lo_, double hi_, std::size_t n_);

  double h() const { return (hi - lo) / static_cast<double>(n); }
  double center(std::size_t i) const { return lo + (static_cast<double>(i) + 0.5) * h(); }
  double node(std::size_t i) const { return lo + static_cast<double>(i) * h(); }
};

// Row-major in (x, y): index = i·ny + j, so y-columns are contiguous.
struct Grid2D {
  Grid1D x;
  Grid1D y;

  std::size_t size() const { return x.n * y.n; }
  std::size_t index(std::size_t i, std::size_t j) const { return i * y.n + j; }
  double cell_area() const { return x.h() * y.h(); }
};

}  // namespace lgv
