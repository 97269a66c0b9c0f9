#pragma once

#include <cmath>
#include <string>

namespace lgv {

// One self-describing comparison: pass iff |lhs − rhs| ≤ tolerance.
struct Verdict {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

inline Verdict compare(std::string name, double lhs, double rhs, double tolerance) {
  Verdict v{std::move(name), lhs, rhs, tolerance, false};
  v.pass = std::abs(lhs - rhs) <= tolerance;
  return v;
}

}  // namespace lgv
