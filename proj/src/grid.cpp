#include "lgv/grid.hpp"

#include "lgv/error.hpp"

namespace lgv {

Grid1D::Grid1D(double lo_, double hi_, std::size_t n_) : lo(lo_), hi(hi_), n(n_) {
  require(hi > lo && n > 0, "grid needs hi > lo and at least one cell");
}

}  // namespace lgv
