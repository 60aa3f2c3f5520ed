#pragma once

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "pfilter/model.hpp"

namespace pfilter {

// Weighted null-proportion estimator
//   pi_hat = ( |u.w|_inf + sum_g u_g w_g 1{P_g > lambda} ) / ( G (1 - lambda) ).
// Non-adaptive layers use pi_hat = 1 (and lambda = 1) by convention. The
// exceedance comparison is strict; ties at lambda do not count.
inline double pi_hat(const Layer& layer, const std::vector<double>& group_p) {
  if (!layer.adaptive) return 1.0;
  if (!(layer.lambda > 0.0 && layer.lambda < 1.0))
    throw std::invalid_argument("pi_hat: adaptive layer needs lambda in (0,1)");
  const int G = layer.group_count();
  if (static_cast<int>(group_p.size()) != G)
    throw std::invalid_argument("pi_hat: group p-value count != G");
  double acc = layer.max_norm();
  for (int g = 0; g < G; ++g) {
    if (group_p[g] > layer.lambda)
      acc += layer.penalty_weights[g] * layer.prior_weights[g];
  }
  return acc / (G * (1.0 - layer.lambda));
}

// Leave-one-out variant pi_hat_{-g}: the exceedance sum skips group g.
inline double pi_hat_loo(const Layer& layer, const std::vector<double>& group_p, int g) {
  if (g < 0 || g >= layer.group_count())
    throw std::out_of_range("pi_hat_loo: group index out of range");
  if (!layer.adaptive) return 1.0;
  if (!(layer.lambda > 0.0 && layer.lambda < 1.0))
    throw std::invalid_argument("pi_hat_loo: adaptive layer needs lambda in (0,1)");
  const int G = layer.group_count();
  if (static_cast<int>(group_p.size()) != G)
    throw std::invalid_argument("pi_hat_loo: group p-value count != G");
  double acc = layer.max_norm();
  for (int h = 0; h < G; ++h) {
    if (h != g && group_p[h] > layer.lambda)
      acc += layer.penalty_weights[h] * layer.prior_weights[h];
  }
  return acc / (G * (1.0 - layer.lambda));
}

}  // namespace pfilter
