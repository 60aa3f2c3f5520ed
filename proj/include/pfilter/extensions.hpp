#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "pfilter/adapt.hpp"
#include "pfilter/model.hpp"
#include "pfilter/reshape.hpp"

namespace pfilter {

// ---------------------------------------------------------------------------
// Single-layer, finest-partition step-up computed directly (no engine code):
// the largest k in [0, n] with sum_{i : P_i <= min(w_i alpha beta(k)/(pi n),
// lambda)} u_i >= k, rejecting that set. Serves as the independent oracle for
// the engine's single-layer specializations (BH, BY, Storey-BH, weighted BH).
// ---------------------------------------------------------------------------
inline std::vector<int> reference_stepup(const std::vector<double>& p,
                                         const std::vector<double>& w,
                                         const std::vector<double>& u, double alpha,
                                         const ReshapeSpec& reshape = ReshapeSpec::identity(),
                                         double lambda = 1.0, bool adaptive = false) {
  const int n = static_cast<int>(p.size());
  if (n == 0) throw std::invalid_argument("reference_stepup: empty input");
  if (static_cast<int>(w.size()) != n || static_cast<int>(u.size()) != n)
    throw std::invalid_argument("reference_stepup: weight lengths differ from p");
  double uw = 0.0;
  for (int i = 0; i < n; ++i) uw += u[i] * w[i];
  if (std::fabs(uw - n) > 1e-9 * n)
    throw std::invalid_argument("reference_stepup: weights must satisfy sum u*w = n");

  double pi = 1.0;
  const double lambda_eff = adaptive ? lambda : 1.0;
  if (adaptive) {
    if (!(lambda > 0.0 && lambda < 1.0))
      throw std::invalid_argument("reference_stepup: adaptive needs lambda in (0,1)");
    double acc = 0.0, maxuw = 0.0;
    for (int i = 0; i < n; ++i) {
      maxuw = std::max(maxuw, u[i] * w[i]);
      if (p[i] > lambda) acc += u[i] * w[i];
    }
    pi = (maxuw + acc) / (n * (1.0 - lambda));
  }

  // entry point in k for each hypothesis, from beta's generalized inverse
  std::vector<double> entry(n);
  for (int i = 0; i < n; ++i) {
    if (p[i] == 0.0) { entry[i] = 0.0; continue; }
    if (p[i] > lambda_eff || alpha == 0.0) {
      entry[i] = std::numeric_limits<double>::infinity();
      continue;
    }
    entry[i] = reshape_inverse(reshape, p[i] * pi * n / (w[i] * alpha));
  }

  // scan the step function phi(k) = sum_{entry_i <= k} u_i over its plateaus
  // and keep the largest k with phi(k) >= k
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) { return entry[a] < entry[b]; });

  double khat = 0.0;
  double mass = 0.0;
  std::size_t j = 0;
  std::vector<double> cuts{0.0};
  for (int i : order)
    if (std::isfinite(entry[i]) && entry[i] <= n) cuts.push_back(entry[i]);
  cuts.push_back(static_cast<double>(n));
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  for (std::size_t c = 0; c < cuts.size(); ++c) {
    const double low = cuts[c];
    const double high = (c + 1 < cuts.size()) ? cuts[c + 1] : static_cast<double>(n);
    while (j < order.size() && entry[order[j]] <= low) mass += u[order[j++]];
    if (mass >= low) khat = std::max(khat, std::min(mass, high));
  }

  std::vector<int> rejected;
  for (int i = 0; i < n; ++i)
    if (entry[i] <= khat) rejected.push_back(i);
  return rejected;
}

// fdp-hat(S) = n * max_{i in S} P_i / |S|; 0 for the empty set.
inline double fdp_hat(const std::vector<double>& p, const std::vector<int>& s) {
  if (s.empty()) return 0.0;
  double max_p = 0.0;
  for (int i : s) max_p = std::max(max_p, p.at(i));
  return static_cast<double>(p.size()) * max_p / static_cast<double>(s.size());
}

// Structured BH: among the candidate sets T with fdp_hat(T) <= alpha, returns
// one of largest cardinality. Ties break by smaller fdp_hat, then by
// lexicographic order of the sorted index list; the empty set always
// qualifies.
inline std::vector<int> structured_bh(const std::vector<double>& p,
                                      const std::vector<std::vector<int>>& family,
                                      double alpha) {
  std::vector<int> best;
  double best_fdp = 0.0;
  bool have = false;
  for (const auto& candidate : family) {
    std::vector<int> t = candidate;
    std::sort(t.begin(), t.end());
    const double f = fdp_hat(p, t);
    if (f > alpha) continue;
    if (!have || t.size() > best.size() ||
        (t.size() == best.size() && (f < best_fdp || (f == best_fdp && t < best)))) {
      best = std::move(t);
      best_fdp = f;
      have = true;
    }
  }
  return best;
}

// Post-selection BH: run BH on the selected sub-vector at level alpha |S| / n,
// mapped back to original indices.
inline std::vector<int> post_selection_bh(const std::vector<double>& p,
                                          const std::vector<int>& selected, double alpha) {
  if (selected.empty()) return {};
  const double n = static_cast<double>(p.size());
  const double level = alpha * static_cast<double>(selected.size()) / n;

  std::vector<int> order = selected;
  std::sort(order.begin(), order.end(), [&](int a, int b) { return p.at(a) < p.at(b); });
  const std::size_t s = order.size();
  std::size_t khat = 0;
  for (std::size_t k = 1; k <= s; ++k) {
    if (p.at(order[k - 1]) <= level * static_cast<double>(k) / static_cast<double>(s))
      khat = k;
  }
  std::vector<int> rejected;
  const double cutoff = khat == 0 ? -1.0 : level * static_cast<double>(khat) / static_cast<double>(s);
  for (int i : selected)
    if (p.at(i) <= cutoff) rejected.push_back(i);
  std::sort(rejected.begin(), rejected.end());
  return rejected;
}

}  // namespace pfilter
