#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "pfilter/engine.hpp"
#include "pfilter/model.hpp"
#include "pfilter/stats.hpp"

namespace pfilter::testing {

inline bool same_set(std::vector<int> a, std::vector<int> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return a == b;
}

inline bool is_subset(const std::vector<int>& sub, const std::vector<int>& super) {
  for (int v : sub)
    if (std::find(super.begin(), super.end(), v) == super.end()) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Randomized verification of the dotfraction algebra. Cases with any undefined
// sub-expression are skipped, mirroring the proviso under which the identities
// hold. Returns the number of violations over `cases` random draws.
// ---------------------------------------------------------------------------
inline long dotfrac_property_violations(RngStream& rng, long cases) {
  auto rational = [&rng]() {
    const double num = static_cast<double>(rng.below(13));
    const double den = 1.0 + static_cast<double>(rng.below(12));
    return num / den;
  };
  auto close = [](double x, double y) {
    const double scale = std::max({1.0, std::fabs(x), std::fabs(y)});
    return std::fabs(x - y) <= 1e-12 * scale;
  };
  long violations = 0;
  for (long it = 0; it < cases; ++it) {
    const double a = rational(), b = rational(), c = rational(), d = rational();

    // (i) monotone in the numerator and antitone in the denominator
    {
      const double hi = std::max(a, b), lo = std::min(a, b);
      const Dotfraction f1 = dotfrac(hi, c), f2 = dotfrac(lo, c);
      if (!f1.is_undefined() && !f2.is_undefined() && f1.numeric() < f2.numeric()) ++violations;
      const Dotfraction g1 = dotfrac(c, hi), g2 = dotfrac(c, lo);
      if (!g1.is_undefined() && !g2.is_undefined() && g1.numeric() > g2.numeric()) ++violations;
    }
    // (ii) adding numerators
    {
      const Dotfraction lhs = dotfrac(a, c) + dotfrac(b, c);
      const Dotfraction rhs = dotfrac(a + b, c);
      if (!lhs.is_undefined() && !rhs.is_undefined() && !close(lhs.numeric(), rhs.numeric()))
        ++violations;
    }
    // (iii) multiplying fractions
    {
      const Dotfraction lhs = dotfrac(a, b) * dotfrac(c, d);
      const Dotfraction rhs = dotfrac(a * c, b * d);
      if (!lhs.is_undefined() && !rhs.is_undefined() && !close(lhs.numeric(), rhs.numeric()))
        ++violations;
    }
    // (iv) cancelling a nonzero factor
    if (c != 0.0) {
      const Dotfraction lhs = dotfrac(a * c, b * c);
      const Dotfraction rhs = dotfrac(a, b);
      if (!lhs.is_undefined() && !rhs.is_undefined() && !close(lhs.numeric(), rhs.numeric()))
        ++violations;
    }
    // (v) scalar multiplication
    {
      const Dotfraction lhs = c * dotfrac(a, b);
      const Dotfraction rhs = dotfrac(a * c, b);
      if (!lhs.is_undefined() && !rhs.is_undefined() && !close(lhs.numeric(), rhs.numeric()))
        ++violations;
    }
    // (vi) comparing against a scalar
    {
      const Dotfraction f = dotfrac(b, c);
      if (!f.is_undefined()) {
        const double x = f.numeric() + rational();
        if (x * c < b - 1e-12 * std::max(1.0, b)) ++violations;
      }
    }
  }
  return violations;
}

// ---------------------------------------------------------------------------
// The 4x4 grid partitions (hypothesis i = 4*row + col)
// ---------------------------------------------------------------------------
inline std::vector<std::vector<int>> grid_rows() {
  std::vector<std::vector<int>> groups;
  for (int r = 0; r < 4; ++r) {
    std::vector<int> row;
    for (int c = 0; c < 4; ++c) row.push_back(4 * r + c);
    groups.push_back(row);
  }
  return groups;
}

inline std::vector<std::vector<int>> grid_columns() {
  std::vector<std::vector<int>> groups;
  for (int c = 0; c < 4; ++c) {
    std::vector<int> col;
    for (int r = 0; r < 4; ++r) col.push_back(4 * r + c);
    groups.push_back(col);
  }
  return groups;
}

inline std::vector<std::vector<int>> grid_blocks() {
  std::vector<std::vector<int>> groups;
  for (int br = 0; br < 2; ++br)
    for (int bc = 0; bc < 2; ++bc) {
      std::vector<int> block;
      for (int r = 2 * br; r < 2 * br + 2; ++r)
        for (int c = 2 * bc; c < 2 * bc + 2; ++c) block.push_back(4 * r + c);
      groups.push_back(block);
    }
  return groups;
}

inline std::vector<std::vector<int>> grid_singletons() {
  std::vector<std::vector<int>> groups;
  for (int i = 0; i < 16; ++i) groups.push_back({i});
  return groups;
}

}  // namespace pfilter::testing
