#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pfilter/adapt.hpp"
#include "pfilter/combine.hpp"
#include "pfilter/model.hpp"
#include "pfilter/reshape.hpp"

namespace pfilter {

struct EngineOptions {
  std::optional<IcMode> ic_mode;  // overrides the problem's mode when set
  int max_cycles = 0;             // 0 -> 10 * M * max_m G^(m)
  double tolerance = 1e-9;        // fixed-point and feasibility comparisons
};

// Thrown when the brute-force oracle would have to enumerate too many cells.
struct oracle_size_error : std::runtime_error {
  std::size_t lattice_size;
  explicit oracle_size_error(std::size_t size)
      : std::runtime_error("oracle_max_corner: candidate lattice has " +
                           std::to_string(size) + " cells (limit 2000000)"),
        lattice_size(size) {}
};

namespace detail {

// Immutable per-run state: group p-values, pi_hat and, for every group, the
// smallest k at which it enters the initial screening. Group g of layer m is
// selected at k iff entry[m][g] <= k; this is the closed-threshold comparison
//   P_g <= min( w_g alpha beta(k) / (pi G), lambda )
// rewritten through the generalized inverse of beta, and both the engine and
// the oracle evaluate selections through the same entry values.
struct Prepared {
  const Problem* problem = nullptr;
  IcMode ic = IcMode::Weak;
  double tol = 1e-9;
  int n = 0;
  int M = 0;
  std::vector<std::vector<double>> group_p;          // [m][g]
  std::vector<double> pi;                            // [m]
  std::vector<std::vector<double>> entry;            // [m][g]
  std::vector<std::vector<std::vector<int>>> member; // [m][i] -> group ids
};

inline Prepared prepare(const Problem& problem, const EngineOptions& options) {
  Prepared prep;
  prep.problem = &problem;
  prep.ic = options.ic_mode.value_or(problem.ic_mode);
  prep.tol = options.tolerance;
  prep.n = problem.n();
  prep.M = static_cast<int>(problem.layers.size());
  prep.group_p.resize(prep.M);
  prep.pi.resize(prep.M);
  prep.entry.resize(prep.M);
  prep.member.resize(prep.M);
  for (int m = 0; m < prep.M; ++m) {
    const Layer& layer = problem.layers[m];
    prep.group_p[m] = group_pvalues(problem, m);
    prep.pi[m] = pi_hat(layer, prep.group_p[m]);
    prep.member[m] = membership_table(layer, prep.n);
    const int G = layer.group_count();
    prep.entry[m].resize(G);
    for (int g = 0; g < G; ++g) {
      const double pg = prep.group_p[m][g];
      if (pg == 0.0) {
        prep.entry[m][g] = 0.0;
        continue;
      }
      const double lambda_eff = layer.adaptive ? layer.lambda : 1.0;
      if (pg > lambda_eff || layer.alpha == 0.0) {
        prep.entry[m][g] = std::numeric_limits<double>::infinity();
        continue;
      }
      const double t = pg * prep.pi[m] * G / (layer.prior_weights[g] * layer.alpha);
      prep.entry[m][g] = reshape_inverse(layer.reshape, t);
    }
  }
  return prep;
}

// S_init^(m)(k) as selection masks.
inline std::vector<std::vector<char>> selections_at(const Prepared& prep, const KVector& k) {
  std::vector<std::vector<char>> sel(prep.M);
  for (int m = 0; m < prep.M; ++m) {
    const int G = static_cast<int>(prep.entry[m].size());
    sel[m].assign(G, 0);
    for (int g = 0; g < G; ++g) sel[m][g] = prep.entry[m][g] <= k[m] ? 1 : 0;
  }
  return sel;
}

// Elementary rejections under the configured internal-consistency mode.
inline std::vector<char> elementary_mask(const Prepared& prep,
                                         const std::vector<std::vector<char>>& sel) {
  std::vector<char> in(prep.n, 1);
  for (int i = 0; i < prep.n; ++i) {
    for (int m = 0; m < prep.M && in[i]; ++m) {
      const auto& owners = prep.member[m][i];
      if (owners.empty()) continue;  // leftover: no constraint from this layer
      bool ok;
      if (prep.ic == IcMode::Weak) {
        ok = false;
        for (int g : owners)
          if (sel[m][g]) { ok = true; break; }
      } else {
        ok = true;
        for (int g : owners)
          if (!sel[m][g]) { ok = false; break; }
      }
      if (!ok) in[i] = 0;
    }
  }
  return in;
}

// Shat^(m) = { g in S_init : A_g intersects Shat }, returned as penalty-weight
// sums plus masks.
struct LayerRejections {
  std::vector<std::vector<char>> mask;  // [m][g]
  std::vector<double> usum;             // [m]
};

inline LayerRejections layer_rejections_from(const Prepared& prep,
                                             const std::vector<std::vector<char>>& sel,
                                             const std::vector<char>& elem) {
  LayerRejections rej;
  rej.mask.resize(prep.M);
  rej.usum.assign(prep.M, 0.0);
  for (int m = 0; m < prep.M; ++m) {
    const Layer& layer = prep.problem->layers[m];
    const int G = layer.group_count();
    rej.mask[m].assign(G, 0);
    for (int g = 0; g < G; ++g) {
      if (!sel[m][g]) continue;
      bool hit = false;
      for (int i : layer.groups[g])
        if (elem[i]) { hit = true; break; }
      if (hit) {
        rej.mask[m][g] = 1;
        rej.usum[m] += layer.penalty_weights[g];
      }
    }
  }
  return rej;
}

// One full evaluation of k -> (Shat, Shat^(m), per-layer penalty sums).
struct Evaluation {
  std::vector<std::vector<char>> sel;
  std::vector<char> elem;
  LayerRejections rej;
};

inline Evaluation evaluate(const Prepared& prep, const KVector& k) {
  Evaluation ev;
  ev.sel = selections_at(prep, k);
  ev.elem = elementary_mask(prep, ev.sel);
  ev.rej = layer_rejections_from(prep, ev.sel, ev.elem);
  return ev;
}

// max{ k' in [0, G_m] : sum_{g in Shat^(m)(..., k', ...)} u_g >= k' } via the
// descending iteration k' <- min(G_m, sum). The selection-mass map is
// nondecreasing and takes finitely many values, so the iterates decrease
// through at most G_m + 1 distinct selection sets and stop at the largest
// fixed point.
inline double inner_max_impl(const Prepared& prep, int m, KVector k) {
  const double G = static_cast<double>(prep.problem->layers[m].group_count());
  double current = G;
  const int iteration_cap = 2 * prep.problem->layers[m].group_count() + 8;
  for (int it = 0; it < iteration_cap; ++it) {
    k[m] = current;
    const Evaluation ev = evaluate(prep, k);
    const double next = std::min(G, ev.rej.usum[m]);
    if (std::fabs(next - current) <= prep.tol) return next;
    current = next;
  }
  throw std::logic_error("inner_max: descending iteration failed to stabilize");
}

inline std::vector<int> mask_to_list(const std::vector<char>& mask) {
  std::vector<int> out;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) out.push_back(static_cast<int>(i));
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Public operations
// ---------------------------------------------------------------------------

// S_init^(m)(k) with an externally supplied pi vector.
inline std::vector<std::vector<int>> initial_selection(const Problem& problem,
                                                       const KVector& k,
                                                       const std::vector<double>& pi) {
  if (k.size() != problem.layers.size() || pi.size() != problem.layers.size())
    throw std::invalid_argument("initial_selection: k/pi length != layer count");
  std::vector<std::vector<int>> out(problem.layers.size());
  for (std::size_t m = 0; m < problem.layers.size(); ++m) {
    const Layer& layer = problem.layers[m];
    const auto gp = group_pvalues(problem, static_cast<int>(m));
    const int G = layer.group_count();
    for (int g = 0; g < G; ++g) {
      const double lambda_eff = layer.adaptive ? layer.lambda : 1.0;
      const double beta_k = reshape_eval(layer.reshape, k[m]);
      const double thresh =
          std::min(layer.prior_weights[g] * layer.alpha * beta_k / (pi[m] * G), lambda_eff);
      if (gp[g] <= thresh) out[m].push_back(g);
    }
  }
  return out;
}

// Elementary rejections from per-layer selections (weak or strong IC).
inline std::vector<int> elementary_set(const Problem& problem,
                                       const std::vector<std::vector<int>>& s_init) {
  const int n = problem.n();
  std::vector<int> out;
  for (int i = 0; i < n; ++i) {
    bool keep = true;
    for (std::size_t m = 0; m < problem.layers.size() && keep; ++m) {
      const auto owners = group_membership(problem.layers[m], i);
      if (owners.empty()) continue;
      const auto& selected = s_init[m];
      auto is_sel = [&](int g) {
        return std::find(selected.begin(), selected.end(), g) != selected.end();
      };
      if (problem.ic_mode == IcMode::Weak) {
        keep = std::any_of(owners.begin(), owners.end(), is_sel);
      } else {
        keep = std::all_of(owners.begin(), owners.end(), is_sel);
      }
    }
    if (keep) out.push_back(i);
  }
  return out;
}

// Shat^(m) = { g in S_init^(m) : A_g intersects Shat }.
inline std::vector<std::vector<int>> layer_rejections(
    const Problem& problem, const std::vector<int>& s_hat,
    const std::vector<std::vector<int>>& s_init) {
  std::vector<char> in(problem.n(), 0);
  for (int i : s_hat) in.at(i) = 1;
  std::vector<std::vector<int>> out(problem.layers.size());
  for (std::size_t m = 0; m < problem.layers.size(); ++m) {
    const Layer& layer = problem.layers[m];
    for (int g : s_init[m]) {
      for (int i : layer.groups[g]) {
        if (in[i]) {
          out[m].push_back(g);
          break;
        }
      }
    }
  }
  return out;
}

// Membership of k in the feasible set Khat.
inline bool is_feasible(const Problem& problem, const KVector& k,
                        const EngineOptions& options = {}) {
  const auto prep = detail::prepare(problem, options);
  if (static_cast<int>(k.size()) != prep.M)
    throw std::invalid_argument("is_feasible: k length != layer count");
  const auto ev = detail::evaluate(prep, k);
  for (int m = 0; m < prep.M; ++m) {
    if (ev.rej.usum[m] < k[m] - prep.tol) return false;
  }
  return true;
}

// The Algorithm update step for coordinate m, holding the other coordinates of
// k fixed.
inline double inner_max(const Problem& problem, int m, const KVector& k,
                        const EngineOptions& options = {}) {
  const auto prep = detail::prepare(problem, options);
  if (m < 0 || m >= prep.M) throw std::out_of_range("inner_max: layer index out of range");
  return detail::inner_max_impl(prep, m, k);
}

// Multi-layer step-up: cyclic coordinate descent from k = (G_1, ..., G_M) until
// a full cycle leaves every coordinate unchanged. Returns the rejections at the
// maximum feasible corner.
inline RejectionResult pfilter(const Problem& problem, const EngineOptions& options = {}) {
  validate_or_throw(problem);
  const auto prep = detail::prepare(problem, options);

  int max_g = 0;
  for (const auto& layer : problem.layers) max_g = std::max(max_g, layer.group_count());
  const int budget = options.max_cycles > 0 ? options.max_cycles : 10 * prep.M * max_g + 10;

  KVector k(prep.M);
  for (int m = 0; m < prep.M; ++m) k[m] = problem.layers[m].group_count();

  bool settled = false;
  for (int cycle = 0; cycle < budget && !settled; ++cycle) {
    settled = true;
    for (int m = 0; m < prep.M; ++m) {
      const double updated = detail::inner_max_impl(prep, m, k);
      if (std::fabs(updated - k[m]) > prep.tol) settled = false;
      k[m] = updated;
    }
  }
  if (!settled) {
    std::string msg = "pfilter: cycle budget (" + std::to_string(budget) +
                      ") exhausted before the k-vector stabilized; k =";
    for (double v : k) msg += " " + std::to_string(v);
    throw std::runtime_error(msg);
  }

  const auto ev = detail::evaluate(prep, k);
  RejectionResult result;
  result.elementary = detail::mask_to_list(ev.elem);
  result.per_layer.resize(prep.M);
  for (int m = 0; m < prep.M; ++m) result.per_layer[m] = detail::mask_to_list(ev.rej.mask[m]);
  result.k_hat = k;
  result.pi_hat = prep.pi;
  result.group_pvalues = prep.group_p;
  return result;
}

// Groups whose members are all null hypotheses.
inline std::vector<int> null_groups(const Layer& layer, const std::vector<char>& hyp_is_null) {
  std::vector<int> out;
  for (int g = 0; g < layer.group_count(); ++g) {
    bool all_null = true;
    for (int i : layer.groups[g])
      if (!hyp_is_null.at(i)) { all_null = false; break; }
    if (all_null) out.push_back(g);
  }
  return out;
}

// Penalty-weighted false discovery proportion of layer m.
inline Dotfraction fdp_layer(const Problem& problem, const RejectionResult& result,
                             const std::vector<int>& null_group_set, int m) {
  const Layer& layer = problem.layers.at(m);
  std::vector<char> is_null(layer.group_count(), 0);
  for (int g : null_group_set) is_null.at(g) = 1;
  double num = 0.0, den = 0.0;
  for (int g : result.per_layer.at(m)) {
    den += layer.penalty_weights[g];
    if (is_null[g]) num += layer.penalty_weights[g];
  }
  return dotfrac(num, den);
}

// Penalty-weighted fraction of non-null groups that were rejected.
inline Dotfraction power_layer(const Problem& problem, const RejectionResult& result,
                               const std::vector<int>& null_group_set, int m) {
  const Layer& layer = problem.layers.at(m);
  std::vector<char> is_null(layer.group_count(), 0);
  for (int g : null_group_set) is_null.at(g) = 1;
  std::vector<char> rejected(layer.group_count(), 0);
  for (int g : result.per_layer.at(m)) rejected.at(g) = 1;
  double num = 0.0, den = 0.0;
  for (int g = 0; g < layer.group_count(); ++g) {
    if (is_null[g]) continue;
    den += layer.penalty_weights[g];
    if (rejected[g]) num += layer.penalty_weights[g];
  }
  return dotfrac(num, den);
}

// Verifies that a result is internally consistent: per-layer rejections are
// screened groups intersecting Shat, and Shat is exactly the IC-closure of the
// screening at k_hat. Violations come back as messages; empty = ok.
inline std::vector<std::string> check_ic(const Problem& problem,
                                         const RejectionResult& result,
                                         const EngineOptions& options = {}) {
  std::vector<std::string> bad;
  const auto prep = detail::prepare(problem, options);
  if (static_cast<int>(result.k_hat.size()) != prep.M) {
    bad.push_back("check_ic: k_hat length != layer count");
    return bad;
  }
  const auto sel = detail::selections_at(prep, result.k_hat);

  std::vector<char> elem(prep.n, 0);
  for (int i : result.elementary) elem.at(i) = 1;

  // elementary set must match the IC definition applied to S_init(k_hat)
  const auto expected_elem = detail::elementary_mask(prep, sel);
  for (int i = 0; i < prep.n; ++i) {
    if (elem[i] && !expected_elem[i])
      bad.push_back("hypothesis " + std::to_string(i) + " rejected but violates " +
                    (prep.ic == IcMode::Weak ? std::string("weak") : std::string("strong")) +
                    " internal consistency");
    if (!elem[i] && expected_elem[i])
      bad.push_back("hypothesis " + std::to_string(i) + " satisfies the IC rule but was not rejected");
  }

  // per-layer rejections must be S_init groups intersecting Shat
  const auto rej = detail::layer_rejections_from(prep, sel, elem);
  for (int m = 0; m < prep.M; ++m) {
    std::vector<char> claimed(prep.problem->layers[m].group_count(), 0);
    for (int g : result.per_layer.at(m)) claimed.at(g) = 1;
    for (int g = 0; g < prep.problem->layers[m].group_count(); ++g) {
      if (claimed[g] && !sel[m][g])
        bad.push_back("layer " + std::to_string(m) + " group " + std::to_string(g) +
                      " rejected but not initially selected at k_hat");
      if (claimed[g] && !rej.mask[m][g])
        bad.push_back("layer " + std::to_string(m) + " group " + std::to_string(g) +
                      " rejected but contains no rejected hypothesis");
      if (!claimed[g] && rej.mask[m][g])
        bad.push_back("layer " + std::to_string(m) + " group " + std::to_string(g) +
                      " should be rejected but is missing");
    }
  }
  return bad;
}

// Brute-force maximum feasible corner. Selections change only where some group
// enters the screening, so the k-space splits into finitely many boxes between
// consecutive entry thresholds; within a box the rejection sets are constant.
// For every feasible box the best attainable coordinate values are recorded and
// the componentwise maximum is returned after re-checking its feasibility.
inline KVector oracle_max_corner(const Problem& problem, const EngineOptions& options = {}) {
  validate_or_throw(problem);
  const auto prep = detail::prepare(problem, options);

  // per-layer interval lists: [v_j, v_{j+1}) plus the degenerate [G, G]
  struct Interval { double low, right; };
  std::vector<std::vector<Interval>> cells(prep.M);
  std::size_t lattice = 1;
  for (int m = 0; m < prep.M; ++m) {
    const double G = prep.problem->layers[m].group_count();
    std::vector<double> cuts{0.0, G};
    for (double e : prep.entry[m])
      if (std::isfinite(e) && e > 0.0 && e < G) cuts.push_back(e);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    for (std::size_t j = 0; j + 1 < cuts.size(); ++j)
      cells[m].push_back({cuts[j], cuts[j + 1]});
    cells[m].push_back({G, G});
    lattice *= cells[m].size();
    if (lattice > 2000000) throw oracle_size_error(lattice);
  }

  KVector best(prep.M, 0.0);
  std::vector<std::size_t> idx(prep.M, 0);
  KVector corner(prep.M);
  while (true) {
    for (int m = 0; m < prep.M; ++m) corner[m] = cells[m][idx[m]].low;
    const auto ev = detail::evaluate(prep, corner);
    bool feasible = true;
    for (int m = 0; m < prep.M; ++m) {
      if (ev.rej.usum[m] < corner[m] - prep.tol) { feasible = false; break; }
    }
    if (feasible) {
      for (int m = 0; m < prep.M; ++m) {
        const double candidate = std::min(ev.rej.usum[m], cells[m][idx[m]].right);
        best[m] = std::max(best[m], candidate);
      }
    }
    // odometer
    int m = 0;
    while (m < prep.M && ++idx[m] == cells[m].size()) idx[m++] = 0;
    if (m == prep.M) break;
  }

  // Proposition 1: the assembled corner must itself be feasible.
  const auto at_best = detail::evaluate(prep, best);
  for (int m = 0; m < prep.M; ++m) {
    if (at_best.rej.usum[m] < best[m] - prep.tol)
      throw std::logic_error("oracle_max_corner: assembled corner is not feasible");
  }
  return best;
}

}  // namespace pfilter
