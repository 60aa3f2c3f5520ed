#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "pfilter/model.hpp"
#include "pfilter/reshape.hpp"
#include "pfilter/stats.hpp"

namespace pfilter {

namespace detail {

inline void require_nonempty(const std::vector<double>& p, const char* who) {
  if (p.empty()) throw std::invalid_argument(std::string(who) + ": empty input");
}

inline double clamp01(double x) { return std::min(1.0, std::max(0.0, x)); }

}  // namespace detail

// Simes p-value: min_k P_(k) * m / k.
inline double simes(const std::vector<double>& p) {
  detail::require_nonempty(p, "simes");
  std::vector<double> sorted = p;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t m = sorted.size();
  double best = 1.0;
  for (std::size_t k = 1; k <= m; ++k) {
    best = std::min(best, sorted[k - 1] * static_cast<double>(m) / k);
  }
  return detail::clamp01(best);
}

// Weighted Simes: with Q_i = P_i / w_i, min_k Q_(k) * m / k.
inline double weighted_simes(const std::vector<double>& p, const std::vector<double>& w) {
  detail::require_nonempty(p, "weighted_simes");
  if (p.size() != w.size())
    throw std::invalid_argument("weighted_simes: p and w lengths differ");
  std::vector<double> q(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(w[i] > 0.0)) throw std::invalid_argument("weighted_simes: weights must be > 0");
    q[i] = p[i] / w[i];
  }
  std::sort(q.begin(), q.end());
  const std::size_t m = q.size();
  double best = 1.0;
  for (std::size_t k = 1; k <= m; ++k) {
    best = std::min(best, q[k - 1] * static_cast<double>(m) / k);
  }
  return detail::clamp01(best);
}

// Reshaped weighted Simes: min_k Q_(k) * m / beta(k) over k with beta(k) > 0.
inline double reshaped_weighted_simes(const std::vector<double>& p,
                                      const std::vector<double>& w,
                                      const ReshapeSpec& spec) {
  detail::require_nonempty(p, "reshaped_weighted_simes");
  if (p.size() != w.size())
    throw std::invalid_argument("reshaped_weighted_simes: p and w lengths differ");
  std::vector<double> q(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(w[i] > 0.0))
      throw std::invalid_argument("reshaped_weighted_simes: weights must be > 0");
    q[i] = p[i] / w[i];
  }
  std::sort(q.begin(), q.end());
  const std::size_t m = q.size();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k <= m; ++k) {
    const double bk = reshape_eval(spec, static_cast<double>(k));
    if (bk > 0.0) best = std::min(best, q[k - 1] * static_cast<double>(m) / bk);
  }
  if (std::isinf(best))
    throw std::invalid_argument("reshaped_weighted_simes: beta vanishes on 1..m");
  return detail::clamp01(best);
}

// Fisher: upper chi-squared tail with 2m df at -2 sum ln P_i. Any P_i = 0
// saturates the combined p-value to 0.
inline double fisher(const std::vector<double>& p) {
  detail::require_nonempty(p, "fisher");
  double stat = 0.0;
  for (double v : p) {
    if (v == 0.0) return 0.0;
    stat += -2.0 * std::log(v);
  }
  return chi_squared_sf_even(stat, static_cast<int>(p.size()));
}

// Stouffer: Phi( sum Phi^{-1}(P_i) / sqrt(m) ). Entries of 0 or 1 saturate.
inline double stouffer(const std::vector<double>& p) {
  detail::require_nonempty(p, "stouffer");
  bool has_zero = false, has_one = false;
  double z = 0.0;
  for (double v : p) {
    if (v <= 0.0) has_zero = true;
    else if (v >= 1.0) has_one = true;
    else z += normal_quantile(v);
  }
  if (has_zero && has_one) return 0.5;  // infinities of both signs cancel by convention
  if (has_zero) return 0.0;
  if (has_one) return 1.0;
  return detail::clamp01(normal_cdf(z / std::sqrt(static_cast<double>(p.size()))));
}

inline double bonferroni(const std::vector<double>& p) {
  detail::require_nonempty(p, "bonferroni");
  return detail::clamp01(*std::min_element(p.begin(), p.end()) * static_cast<double>(p.size()));
}

inline double ruschendorf(const std::vector<double>& p) {
  detail::require_nonempty(p, "ruschendorf");
  const double s = std::accumulate(p.begin(), p.end(), 0.0);
  return detail::clamp01(2.0 * s / static_cast<double>(p.size()));
}

// Ruger: P_(k) * m / k for a fixed order statistic k.
inline double ruger(const std::vector<double>& p, int k) {
  detail::require_nonempty(p, "ruger");
  if (k < 1 || k > static_cast<int>(p.size()))
    throw std::invalid_argument("ruger: k out of range");
  std::vector<double> sorted = p;
  std::nth_element(sorted.begin(), sorted.begin() + (k - 1), sorted.end());
  return detail::clamp01(sorted[k - 1] * static_cast<double>(p.size()) / k);
}

// Applies one layer's combiner to one group. `member_p` holds the group's base
// p-values in group order.
inline double combine_group(const CombinerSpec& spec, const std::vector<double>& member_p,
                            int group_index) {
  using CK = CombinerSpec::Kind;
  auto within = [&]() -> std::vector<double> {
    if (spec.within_weights.empty()) return std::vector<double>(member_p.size(), 1.0);
    return spec.within_weights.at(group_index);
  };
  switch (spec.kind) {
    case CK::Simes: return simes(member_p);
    case CK::WeightedSimes: return weighted_simes(member_p, within());
    case CK::ReshapedWeightedSimes:
      return reshaped_weighted_simes(member_p, within(), spec.within_reshape);
    case CK::Fisher: return fisher(member_p);
    case CK::Stouffer: return stouffer(member_p);
    case CK::Bonferroni: return bonferroni(member_p);
    case CK::Ruschendorf: return ruschendorf(member_p);
    case CK::Ruger: return ruger(member_p, spec.ruger_k);
    case CK::External: return spec.external_p.at(group_index);
  }
  throw std::logic_error("combine_group: unknown combiner");
}

// P^(m)_g for every group of one layer.
inline std::vector<double> group_pvalues(const Problem& problem, int layer_index) {
  const Layer& layer = problem.layers.at(layer_index);
  std::vector<double> out(layer.group_count());
  std::vector<double> member_p;
  for (int g = 0; g < layer.group_count(); ++g) {
    member_p.clear();
    for (int i : layer.groups[g]) member_p.push_back(problem.pvalues.at(i));
    out[g] = combine_group(layer.combiner, member_p, g);
  }
  return out;
}

}  // namespace pfilter
