#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

#include "pfilter/model.hpp"

namespace pfilter {

// beta(k). Identity -> k; BY -> k/H; discrete nu -> sum over atoms x_j <= k of
// x_j * mass_j (right-continuous, so an atom counts as soon as k reaches it).
// Always 0 <= beta(k) <= k and nondecreasing in k.
inline double reshape_eval(const ReshapeSpec& spec, double k) {
  if (k < 0.0) throw std::domain_error("reshape_eval: k must be >= 0");
  switch (spec.kind) {
    case ReshapeSpec::Kind::Identity:
      return k;
    case ReshapeSpec::Kind::BY:
      return k / spec.by_harmonic;
    case ReshapeSpec::Kind::Discrete: {
      double total = 0.0;
      for (const auto& [x, mass] : spec.atoms) {
        if (x > k) break;
        total += x * mass;
      }
      return total;
    }
  }
  return k;
}

// Generalized inverse inf{k >= 0 : beta(k) >= t}, or +inf when beta never
// reaches t. The returned point always attains beta(k) >= t, so callers may
// treat it as the exact entry threshold of a closed comparison.
inline double reshape_inverse(const ReshapeSpec& spec, double t) {
  if (t < 0.0) throw std::domain_error("reshape_inverse: t must be >= 0");
  if (t == 0.0) return 0.0;
  switch (spec.kind) {
    case ReshapeSpec::Kind::Identity:
      return t;
    case ReshapeSpec::Kind::BY: {
      double k = t * spec.by_harmonic;
      // guard the round trip k/H >= t against a one-ulp shortfall
      for (int step = 0; step < 4 && k / spec.by_harmonic < t; ++step)
        k = std::nextafter(k, std::numeric_limits<double>::infinity());
      return k;
    }
    case ReshapeSpec::Kind::Discrete: {
      double total = 0.0;
      for (const auto& [x, mass] : spec.atoms) {
        total += x * mass;
        if (total >= t) return x;  // beta jumps to >= t exactly at this atom
      }
      return std::numeric_limits<double>::infinity();
    }
  }
  return t;
}

}  // namespace pfilter
