#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "pfilter/combine.hpp"
#include "pfilter/engine.hpp"
#include "pfilter/model.hpp"
#include "pfilter/stats.hpp"

namespace pfilter {

// ---------------------------------------------------------------------------
// Simulation model
// ---------------------------------------------------------------------------

struct SimModel {
  enum class Dep { Independent, GaussianEquicorrelated, DuplicateBlocks };

  int n = 0;
  std::vector<int> null_set;  // H0
  Dep dependence = Dep::Independent;
  double rho = 0.0;     // GaussianEquicorrelated: equicorrelation in [0,1)
  int block_size = 1;   // DuplicateBlocks: consecutive indices share one draw
  double mu = 0.0;      // one-sided normal mean shift for non-nulls
  std::uint64_t seed = 0;

  std::vector<char> null_mask() const {
    std::vector<char> mask(n, 0);
    for (int i : null_set) mask.at(i) = 1;
    return mask;
  }
};

inline void validate_model_or_throw(const SimModel& model) {
  if (model.n < 1) throw std::invalid_argument("SimModel: n must be >= 1");
  for (int i : model.null_set)
    if (i < 0 || i >= model.n) throw std::invalid_argument("SimModel: null index out of range");
  if (model.dependence == SimModel::Dep::GaussianEquicorrelated &&
      !(model.rho >= 0.0 && model.rho < 1.0))
    throw std::invalid_argument("SimModel: rho must lie in [0,1)");
  if (model.dependence == SimModel::Dep::DuplicateBlocks) {
    if (model.block_size < 1) throw std::invalid_argument("SimModel: block size must be >= 1");
    // duplicated entries share one draw, so a block must be all null or all non-null
    const auto mask = model.null_mask();
    for (int start = 0; start < model.n; start += model.block_size) {
      const int end = std::min(model.n, start + model.block_size);
      for (int i = start + 1; i < end; ++i)
        if (mask[i] != mask[start])
          throw std::invalid_argument("SimModel: duplicate block " +
                                      std::to_string(start / model.block_size) +
                                      " mixes null and non-null hypotheses");
    }
  }
}

// One replication of base p-values. Nulls are marginally uniform; non-nulls
// receive the upper-tail p-value of a mean-shifted normal draw.
inline std::vector<double> gen_pvalues(const SimModel& model, RngStream& rng) {
  validate_model_or_throw(model);
  const auto null = model.null_mask();
  std::vector<double> p(model.n);
  switch (model.dependence) {
    case SimModel::Dep::Independent: {
      for (int i = 0; i < model.n; ++i) {
        const double x = rng.normal() + (null[i] ? 0.0 : model.mu);
        p[i] = normal_cdf(-x);
      }
      break;
    }
    case SimModel::Dep::GaussianEquicorrelated: {
      const double shared = rng.normal();
      const double a = std::sqrt(model.rho);
      const double b = std::sqrt(1.0 - model.rho);
      for (int i = 0; i < model.n; ++i) {
        const double z = a * shared + b * rng.normal();
        const double x = z + (null[i] ? 0.0 : model.mu);
        p[i] = normal_cdf(-x);
      }
      break;
    }
    case SimModel::Dep::DuplicateBlocks: {
      for (int start = 0; start < model.n; start += model.block_size) {
        const double z = rng.normal();
        const double x = z + (null[start] ? 0.0 : model.mu);
        const double value = normal_cdf(-x);
        const int end = std::min(model.n, start + model.block_size);
        for (int i = start; i < end; ++i) p[i] = value;
      }
      break;
    }
  }
  return p;
}

inline std::vector<double> gen_pvalues(const SimModel& model, std::uint64_t replication) {
  RngStream rng(model.seed, replication);
  return gen_pvalues(model, rng);
}

// ---------------------------------------------------------------------------
// Parallel replication driver. Each replication seeds its own stream from
// (seed, index) and writes into its own slot, so the thread count never
// changes the result.
// ---------------------------------------------------------------------------

inline int resolve_threads(int requested = 0) {
  int t = requested;
  if (t <= 0) {
    t = static_cast<int>(std::thread::hardware_concurrency());
    if (t < 1) t = 1;
  }
  if (const char* cap = std::getenv("PFILTER_THREADS")) {
    const int limit = std::atoi(cap);
    if (limit >= 1) t = std::min(t, limit);
  }
  return t;
}

template <typename Fn>
inline void run_replications(long reps, int threads, Fn&& body) {
  const int t = static_cast<int>(std::max<long>(1, std::min<long>(threads, reps)));
  if (t <= 1) {
    for (long r = 0; r < reps; ++r) body(r);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(t);
  pool.reserve(t);
  for (int w = 0; w < t; ++w) {
    const long lo = reps * w / t;
    const long hi = reps * (w + 1) / t;
    pool.emplace_back([&body, &errors, w, lo, hi] {
      try {
        for (long r = lo; r < hi; ++r) body(r);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (const auto& err : errors)
    if (err) std::rethrow_exception(err);
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

inline MeanSe mean_and_se(const std::vector<double>& values) {
  const std::size_t n = values.size();
  if (n == 0) return {};
  MeanSe out;
  out.mean = pairwise_sum(values.data(), n) / static_cast<double>(n);
  if (n > 1) {
    std::vector<double> sq(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double d = values[i] - out.mean;
      sq[i] = d * d;
    }
    const double var = pairwise_sum(sq.data(), n) / static_cast<double>(n - 1);
    out.se = std::sqrt(var / static_cast<double>(n));
  }
  return out;
}

// ---------------------------------------------------------------------------
// FDR / power estimation for a problem template under a simulation model
// ---------------------------------------------------------------------------

struct LayerEstimate {
  double fdr = 0.0;
  double fdr_se = 0.0;
  double power = 0.0;
  double power_se = 0.0;
};

struct SimReport {
  std::vector<LayerEstimate> layers;
  long replications = 0;
  std::uint64_t seed = 0;
};

inline SimReport estimate_fdr(const Problem& problem_template, const SimModel& model,
                              long reps, int threads = 0,
                              const EngineOptions& options = {}) {
  if (reps < 1) throw std::invalid_argument("estimate_fdr: reps must be >= 1");
  if (problem_template.n() != model.n)
    throw std::invalid_argument("estimate_fdr: template n differs from model n");
  validate_model_or_throw(model);
  {
    Problem check = problem_template;
    check.pvalues.assign(model.n, 0.5);
    validate_or_throw(check);
  }

  const int M = static_cast<int>(problem_template.layers.size());
  const auto mask = model.null_mask();
  std::vector<std::vector<int>> nulls(M);
  for (int m = 0; m < M; ++m) nulls[m] = null_groups(problem_template.layers[m], mask);

  std::vector<std::vector<double>> fdp(M, std::vector<double>(reps));
  std::vector<std::vector<double>> tdp(M, std::vector<double>(reps));

  run_replications(reps, resolve_threads(threads), [&](long r) {
    Problem problem = problem_template;
    problem.pvalues = gen_pvalues(model, static_cast<std::uint64_t>(r));
    const RejectionResult result = pfilter(problem, options);
    for (int m = 0; m < M; ++m) {
      const Dotfraction f = fdp_layer(problem, result, nulls[m], m);
      const Dotfraction t = power_layer(problem, result, nulls[m], m);
      if (f.is_undefined() || t.is_undefined())
        throw std::runtime_error("estimate_fdr: undefined FDP at replication " +
                                 std::to_string(r) + ", layer " + std::to_string(m));
      fdp[m][r] = f.numeric();
      tdp[m][r] = t.numeric();
    }
  });

  SimReport report;
  report.replications = reps;
  report.seed = model.seed;
  report.layers.resize(M);
  for (int m = 0; m < M; ++m) {
    const auto f = mean_and_se(fdp[m]);
    const auto t = mean_and_se(tdp[m]);
    report.layers[m] = {f.mean, f.se, t.mean, t.se};
  }
  return report;
}

// ---------------------------------------------------------------------------
// Reference single-layer procedures (independent implementations used as
// test oracles for the engine's special cases)
// ---------------------------------------------------------------------------

namespace reference {

inline std::vector<double> sorted_copy(const std::vector<double>& p) {
  std::vector<double> s = p;
  std::sort(s.begin(), s.end());
  return s;
}

inline std::vector<int> reject_below(const std::vector<double>& p, double cutoff) {
  std::vector<int> out;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] <= cutoff) out.push_back(static_cast<int>(i));
  return out;
}

inline std::vector<int> bh(const std::vector<double>& p, double alpha) {
  const int n = static_cast<int>(p.size());
  const auto s = sorted_copy(p);
  int khat = 0;
  for (int k = 1; k <= n; ++k)
    if (s[k - 1] <= alpha * k / n) khat = k;
  if (khat == 0) return {};
  return reject_below(p, alpha * khat / n);
}

inline int bh_count(const std::vector<double>& p, double alpha) {
  const int n = static_cast<int>(p.size());
  const auto s = sorted_copy(p);
  int khat = 0;
  for (int k = 1; k <= n; ++k)
    if (s[k - 1] <= alpha * k / n) khat = k;
  return khat;
}

inline std::vector<int> by(const std::vector<double>& p, double alpha) {
  const int n = static_cast<int>(p.size());
  double h = 0.0;
  for (int i = 1; i <= n; ++i) h += 1.0 / i;
  return bh(p, alpha / h);
}

inline std::vector<int> storey_bh(const std::vector<double>& p, double alpha, double lambda) {
  const int n = static_cast<int>(p.size());
  if (!(lambda > 0.0 && lambda < 1.0))
    throw std::invalid_argument("storey_bh: lambda must lie in (0,1)");
  int exceed = 0;
  for (double v : p)
    if (v > lambda) ++exceed;
  const double pi = (1.0 + exceed) / (n * (1.0 - lambda));
  const auto s = sorted_copy(p);
  auto threshold = [&](int k) { return std::min(alpha * k / (pi * n), lambda); };
  int khat = 0;
  for (int k = 1; k <= n; ++k)
    if (s[k - 1] <= threshold(k)) khat = k;
  if (khat == 0) return {};
  return reject_below(p, threshold(khat));
}

// prior weights, normalized to sum w = n
inline std::vector<int> weighted_bh(const std::vector<double>& p,
                                    const std::vector<double>& w, double alpha) {
  const int n = static_cast<int>(p.size());
  int khat = 0;
  for (int k = n; k >= 1; --k) {
    int count = 0;
    for (int i = 0; i < n; ++i)
      if (p[i] <= w[i] * alpha * k / n) ++count;
    if (count >= k) { khat = k; break; }
  }
  if (khat == 0) return {};
  std::vector<int> out;
  for (int i = 0; i < n; ++i)
    if (p[i] <= w[i] * alpha * khat / n) out.push_back(i);
  return out;
}

// penalty weights, normalized to sum u = n; k is real-valued
inline std::vector<int> penalty_bh(const std::vector<double>& p,
                                   const std::vector<double>& u, double alpha) {
  const int n = static_cast<int>(p.size());
  if (alpha <= 0.0) return {};
  std::vector<double> kentry(n);
  for (int i = 0; i < n; ++i) kentry[i] = p[i] * n / alpha;

  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return kentry[a] < kentry[b]; });

  std::vector<double> cuts{0.0, static_cast<double>(n)};
  for (int i = 0; i < n; ++i)
    if (kentry[i] <= n) cuts.push_back(kentry[i]);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  double khat = 0.0, mass = 0.0;
  std::size_t j = 0;
  for (std::size_t c = 0; c < cuts.size(); ++c) {
    const double low = cuts[c];
    const double high = c + 1 < cuts.size() ? cuts[c + 1] : static_cast<double>(n);
    while (j < order.size() && kentry[order[j]] <= low) mass += u[order[j++]];
    if (mass >= low) khat = std::max(khat, std::min(mass, high));
  }
  std::vector<int> out;
  for (int i = 0; i < n; ++i)
    if (kentry[i] <= khat) out.push_back(i);
  return out;
}

}  // namespace reference

// ---------------------------------------------------------------------------
// Random problem generator (drives the oracle-equivalence and reduction tests)
// ---------------------------------------------------------------------------

struct ProblemGenOptions {
  int min_n = 3;
  int max_n = 12;
  int max_layers = 3;
  bool allow_overlap = true;
  bool allow_incomplete = true;
  bool allow_fractional_weights = true;
  bool allow_adaptive = true;
  bool allow_reshape = true;
  bool combiner_variety = true;
  double p_small_fraction = 0.4;  // fraction of instances with a signal-rich p vector
};

inline Problem random_problem(RngStream& rng, const ProblemGenOptions& opt = {}) {
  Problem problem;
  const int n = opt.min_n + static_cast<int>(rng.below(opt.max_n - opt.min_n + 1));
  const bool rich = rng.uniform() < opt.p_small_fraction;
  problem.pvalues.resize(n);
  for (int i = 0; i < n; ++i) {
    double v = rng.uniform();
    if (rich && rng.uniform() < 0.5) v = v * v * v;  // push some p-values toward 0
    problem.pvalues[i] = v;
  }
  problem.ic_mode = rng.bernoulli(0.5) ? IcMode::Weak : IcMode::Strong;

  const int M = 1 + static_cast<int>(rng.below(opt.max_layers));
  for (int m = 0; m < M; ++m) {
    Layer layer;
    const int style = static_cast<int>(rng.below(5));
    if (style == 0 || n == 1) {  // finest
      for (int i = 0; i < n; ++i) layer.groups.push_back({i});
    } else if (style == 1) {  // coarsest
      std::vector<int> all(n);
      for (int i = 0; i < n; ++i) all[i] = i;
      layer.groups.push_back(all);
    } else if (style == 2 || (!opt.allow_overlap && !opt.allow_incomplete)) {
      // random complete partition into contiguous chunks of a shuffled order
      std::vector<int> perm(n);
      for (int i = 0; i < n; ++i) perm[i] = i;
      for (int i = n - 1; i > 0; --i)
        std::swap(perm[i], perm[rng.below(i + 1)]);
      int at = 0;
      while (at < n) {
        const int len = 1 + static_cast<int>(rng.below(std::min(4, n - at)));
        layer.groups.emplace_back(perm.begin() + at, perm.begin() + at + len);
        at += len;
      }
    } else if (style == 3 && opt.allow_incomplete) {
      // incomplete: singletons over a random subset
      for (int i = 0; i < n; ++i)
        if (rng.bernoulli(0.7)) layer.groups.push_back({i});
      if (layer.groups.empty()) layer.groups.push_back({0});
    } else {
      // overlapping random subsets
      const int G = 2 + static_cast<int>(rng.below(std::max(1, n / 2)));
      for (int g = 0; g < G; ++g) {
        std::vector<int> members;
        for (int i = 0; i < n; ++i)
          if (rng.bernoulli(0.35)) members.push_back(i);
        if (members.empty()) members.push_back(static_cast<int>(rng.below(n)));
        layer.groups.push_back(std::move(members));
      }
    }

    const int G = layer.group_count();
    layer.prior_weights.assign(G, 1.0);
    layer.penalty_weights.assign(G, 1.0);
    if (opt.allow_fractional_weights && rng.bernoulli(0.5)) {
      for (int g = 0; g < G; ++g) layer.penalty_weights[g] = rng.uniform(0.3, 2.0);
    }
    if (opt.allow_fractional_weights && rng.bernoulli(0.5)) {
      for (int g = 0; g < G; ++g) layer.prior_weights[g] = rng.uniform(0.4, 2.5);
    }
    normalize_prior_weights(layer);

    layer.alpha = rng.uniform(0.05, 0.5);
    if (opt.allow_adaptive && rng.bernoulli(0.4)) {
      layer.adaptive = true;
      layer.lambda = rng.bernoulli(0.5) ? 0.5 : rng.uniform(0.25, 0.75);
    }
    if (opt.allow_reshape) {
      const int roll = static_cast<int>(rng.below(3));
      if (roll == 1) {
        layer.reshape = ReshapeSpec::by(G);
      } else if (roll == 2 && G >= 1) {
        if (G == 1) {
          layer.reshape = ReshapeSpec::discrete({{1.0, 1.0}});
        } else {
          layer.reshape =
              ReshapeSpec::discrete({{1.0, 0.6}, {static_cast<double>(G), 0.4}});
        }
      }
    }

    if (opt.combiner_variety) {
      std::size_t min_size = layer.groups[0].size();
      std::size_t max_size = layer.groups[0].size();
      for (const auto& grp : layer.groups) {
        min_size = std::min(min_size, grp.size());
        max_size = std::max(max_size, grp.size());
      }
      switch (rng.below(8)) {
        case 0: layer.combiner = CombinerSpec::simes(); break;
        case 1: {
          std::vector<std::vector<double>> w(G);
          for (int g = 0; g < G; ++g) {
            w[g].resize(layer.groups[g].size());
            for (auto& v : w[g]) v = rng.uniform(0.5, 2.0);
          }
          layer.combiner = CombinerSpec::weighted_simes(std::move(w));
          break;
        }
        case 2:
          layer.combiner = CombinerSpec::reshaped_weighted_simes(
              ReshapeSpec::by(static_cast<int>(max_size)));
          break;
        case 3: layer.combiner = CombinerSpec::fisher(); break;
        case 4: layer.combiner = CombinerSpec::stouffer(); break;
        case 5: layer.combiner = CombinerSpec::bonferroni(); break;
        case 6: layer.combiner = CombinerSpec::ruschendorf(); break;
        default:
          layer.combiner =
              CombinerSpec::ruger(1 + static_cast<int>(rng.below(min_size)));
          break;
      }
    }
    problem.layers.push_back(std::move(layer));
  }
  return problem;
}

// ---------------------------------------------------------------------------
// Stochastic checkers for the super-uniformity lemmas
// ---------------------------------------------------------------------------

struct CheckResult {
  std::string name;
  double estimate = 0.0;
  double se = 0.0;
  std::string criterion;
  bool pass = false;
};

// Threshold function f(P) for the lemma checkers: a constant, or the
// single-layer BH threshold map P -> alpha * khat(P) / n (nonincreasing and
// LOOP, so Lemma 1(a) holds with equality for uniform independent nulls).
struct ThresholdSpec {
  enum class Kind { Constant, BhMap };
  Kind kind = Kind::Constant;
  double constant = 0.3;
  double bh_alpha = 0.3;

  static ThresholdSpec fixed(double t) { return {Kind::Constant, t, 0.0}; }
  static ThresholdSpec bh_map(double alpha) { return {Kind::BhMap, 0.0, alpha}; }

  double operator()(const std::vector<double>& p) const {
    if (kind == Kind::Constant) return constant;
    return bh_alpha * reference::bh_count(p, bh_alpha) / static_cast<double>(p.size());
  }
};

enum class BoundMode { Eq, Leq };

namespace detail {

inline CheckResult finish_check(std::string name, const std::vector<double>& samples,
                                BoundMode mode) {
  CheckResult out;
  out.name = std::move(name);
  const auto ms = mean_and_se(samples);
  out.estimate = ms.mean;
  out.se = ms.se;
  if (mode == BoundMode::Eq) {
    out.criterion = "|estimate - 1| <= 3 SE";
    out.pass = std::fabs(out.estimate - 1.0) <= 3.0 * out.se;
  } else {
    out.criterion = "estimate <= 1 + 3 SE";
    out.pass = out.estimate <= 1.0 + 3.0 * out.se;
  }
  return out;
}

inline double dotfrac_indicator(double statistic, double threshold, double denominator) {
  const Dotfraction v = statistic <= threshold ? dotfrac(1.0, denominator) : dotfrac(0.0, denominator);
  if (v.is_undefined())
    throw std::runtime_error("lemma checker: undefined dotfraction (threshold hit 0)");
  return v.numeric();
}

}  // namespace detail

// E[ 1{P_i <= f(P)} ./ f(P) ] for the first null hypothesis of the model.
inline CheckResult check_superuniformity(const SimModel& model, const ThresholdSpec& f,
                                         BoundMode mode, long reps, int threads = 0,
                                         const std::string& name = "superuniformity") {
  if (model.null_set.empty())
    throw std::invalid_argument("check_superuniformity: model has no null hypothesis");
  const int i = model.null_set.front();
  std::vector<double> samples(reps);
  run_replications(reps, resolve_threads(threads), [&](long r) {
    const auto p = gen_pvalues(model, static_cast<std::uint64_t>(r));
    const double t = f(p);
    samples[r] = detail::dotfrac_indicator(p[i], t, t);
  });
  return detail::finish_check(name, samples, mode);
}

// Group-level variants of the same bound (Simes statistic, arbitrary valid
// statistic against c*beta(f), or Simes applied to per-group Simes values).
struct GroupVariant {
  enum class Kind { Simes, Reshaped, NestedSimes };
  Kind kind = Kind::Simes;
  std::vector<double> weights;  // Simes: within-group weights, empty = unit
  CombinerSpec statistic;       // Reshaped: any valid group p-value
  ReshapeSpec beta;             // Reshaped
  double c = 1.0;               // Reshaped
  std::vector<std::vector<int>> nested_groups;  // NestedSimes
};

inline CheckResult check_group_superuniformity(const SimModel& model,
                                               const std::vector<int>& group,
                                               const ThresholdSpec& f,
                                               const GroupVariant& variant, long reps,
                                               int threads = 0,
                                               const std::string& name = "group") {
  const auto mask = model.null_mask();
  for (int i : group)
    if (!mask.at(i))
      throw std::invalid_argument("check_group_superuniformity: group must be null");
  std::vector<double> samples(reps);
  run_replications(reps, resolve_threads(threads), [&](long r) {
    const auto p = gen_pvalues(model, static_cast<std::uint64_t>(r));
    std::vector<double> sub;
    sub.reserve(group.size());
    for (int i : group) sub.push_back(p[i]);
    const double t = f(p);
    double statistic = 0.0;
    switch (variant.kind) {
      case GroupVariant::Kind::Simes:
        statistic = variant.weights.empty() ? simes(sub) : weighted_simes(sub, variant.weights);
        samples[r] = detail::dotfrac_indicator(statistic, t, t);
        return;
      case GroupVariant::Kind::Reshaped:
        statistic = combine_group(variant.statistic, sub, 0);
        samples[r] = detail::dotfrac_indicator(
            statistic, variant.c * reshape_eval(variant.beta, t), variant.c * t);
        return;
      case GroupVariant::Kind::NestedSimes: {
        std::vector<double> inner;
        for (const auto& g : variant.nested_groups) {
          std::vector<double> gp;
          for (int i : g) {
            if (!mask.at(i))
              throw std::invalid_argument("nested groups must be null");
            gp.push_back(p[i]);
          }
          inner.push_back(simes(gp));
        }
        statistic = simes(inner);
        samples[r] = detail::dotfrac_indicator(statistic, t, t);
        return;
      }
    }
  });
  return detail::finish_check(name, samples, BoundMode::Leq);
}

// ---------------------------------------------------------------------------
// Inverse binomial lemma: 1/(1 + b sum a) <= E[1/Z] <= 1/(b (1 + sum a)) for
// Z = 1 + sum a_i Bernoulli(b).
// ---------------------------------------------------------------------------

struct InverseBinomialResult {
  double estimate = 0.0;
  double se = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  bool mc_pass = false;
  bool exact_available = false;
  double exact = 0.0;
  bool exact_pass = false;
};

inline InverseBinomialResult check_inverse_binomial(const std::vector<double>& a, double b,
                                                    long reps, std::uint64_t seed = 0,
                                                    int threads = 0) {
  for (double v : a)
    if (!(v >= 0.0 && v <= 1.0))
      throw std::invalid_argument("check_inverse_binomial: a entries must lie in [0,1]");
  if (!(b > 0.0 && b <= 1.0))
    throw std::invalid_argument("check_inverse_binomial: b must lie in (0,1]");
  const int d = static_cast<int>(a.size());

  double suma = 0.0;
  for (double v : a) suma += v;

  InverseBinomialResult out;
  out.lower = 1.0 / (1.0 + b * suma);
  out.upper = 1.0 / (b * (1.0 + suma));

  std::vector<double> samples(reps);
  run_replications(reps, resolve_threads(threads), [&](long r) {
    RngStream rng(seed, static_cast<std::uint64_t>(r));
    double z = 1.0;
    for (int i = 0; i < d; ++i)
      if (rng.bernoulli(b)) z += a[i];
    samples[r] = 1.0 / z;
  });
  const auto ms = mean_and_se(samples);
  out.estimate = ms.mean;
  out.se = ms.se;
  out.mc_pass = out.estimate >= out.lower - 3.0 * out.se &&
                out.estimate <= out.upper + 3.0 * out.se;

  if (d <= 20) {
    out.exact_available = true;
    double total = 0.0;
    const std::uint32_t masks = 1u << d;
    for (std::uint32_t mask = 0; mask < masks; ++mask) {
      double z = 1.0;
      int bits = 0;
      for (int i = 0; i < d; ++i) {
        if (mask & (1u << i)) {
          z += a[i];
          ++bits;
        }
      }
      total += std::pow(b, bits) * std::pow(1.0 - b, d - bits) / z;
    }
    out.exact = total;
    out.exact_pass = out.lower <= out.exact && out.exact <= out.upper;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Distribution checks for the Simes family
// ---------------------------------------------------------------------------

// Kolmogorov-Smirnov distance of weighted Simes draws from the uniform law
// (independent uniform inputs; exact uniformity needs max w_i <= 1/alpha over
// the tested range, which unit weights satisfy everywhere).
inline double simes_uniformity_ks(int m, const std::vector<double>& weights, long reps,
                                  std::uint64_t seed = 0, int threads = 0) {
  std::vector<double> draws(reps);
  run_replications(reps, resolve_threads(threads), [&](long r) {
    RngStream rng(seed, static_cast<std::uint64_t>(r));
    std::vector<double> p(m);
    for (auto& v : p) v = rng.uniform();
    draws[r] = weights.empty() ? simes(p) : weighted_simes(p, weights);
  });
  std::sort(draws.begin(), draws.end());
  double ks = 0.0;
  for (long r = 0; r < reps; ++r) {
    const double lo = static_cast<double>(r) / reps;
    const double hi = static_cast<double>(r + 1) / reps;
    ks = std::max(ks, std::max(std::fabs(draws[r] - lo), std::fabs(draws[r] - hi)));
  }
  return ks;
}

struct DominanceResult {
  bool pass = true;
  double worst_margin = -1.0;  // max over grid of CDF(t) - t - 3 SE(t)
  double worst_t = 0.0;
};

// Stochastic dominance check: empirical CDF(t) <= t + 3 SE at a grid of t.
// The statistic is weighted Simes or its reshaped variant under the model's
// dependence (all hypotheses null).
inline DominanceResult simes_dominance(const SimModel& model, const std::vector<double>& weights,
                                       bool reshaped, const ReshapeSpec& within, long reps,
                                       int threads = 0, double grid_max = 1.0) {
  if (static_cast<int>(model.null_set.size()) != model.n)
    throw std::invalid_argument("simes_dominance: all hypotheses must be null");
  std::vector<double> draws(reps);
  std::vector<double> unit(model.n, 1.0);
  const std::vector<double>& w = weights.empty() ? unit : weights;
  run_replications(reps, resolve_threads(threads), [&](long r) {
    const auto p = gen_pvalues(model, static_cast<std::uint64_t>(r));
    draws[r] = reshaped ? reshaped_weighted_simes(p, w, within) : weighted_simes(p, w);
  });
  std::sort(draws.begin(), draws.end());
  DominanceResult out;
  for (int j = 1; j <= 99; ++j) {
    const double t = grid_max * j / 100.0;
    const auto it = std::upper_bound(draws.begin(), draws.end(), t);
    const double cdf = static_cast<double>(it - draws.begin()) / reps;
    const double se = std::sqrt(std::max(t * (1.0 - t), 1e-12) / reps);
    const double margin = cdf - t - 3.0 * se;
    if (margin > out.worst_margin) {
      out.worst_margin = margin;
      out.worst_t = t;
    }
    if (margin > 0.0) out.pass = false;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Default checker batteries (driven by the check-lemmas subcommand and the
// acceptance suite)
// ---------------------------------------------------------------------------

inline SimModel all_null_model(int n, SimModel::Dep dep, double rho, int block,
                               std::uint64_t seed) {
  SimModel model;
  model.n = n;
  model.null_set.resize(n);
  for (int i = 0; i < n; ++i) model.null_set[i] = i;
  model.dependence = dep;
  model.rho = rho;
  model.block_size = block;
  model.seed = seed;
  return model;
}

inline std::vector<CheckResult> run_superuniformity_suite(long reps, std::uint64_t seed,
                                                          int threads = 0) {
  std::vector<CheckResult> out;
  const auto indep = all_null_model(8, SimModel::Dep::Independent, 0.0, 1, seed);
  const auto prds = all_null_model(8, SimModel::Dep::GaussianEquicorrelated, 0.5, 1, seed + 1);
  out.push_back(check_superuniformity(indep, ThresholdSpec::fixed(0.3), BoundMode::Eq, reps,
                                      threads, "constant threshold, independent (equality)"));
  out.push_back(check_superuniformity(indep, ThresholdSpec::bh_map(0.3), BoundMode::Eq, reps,
                                      threads, "BH threshold map, independent (equality)"));
  out.push_back(check_superuniformity(prds, ThresholdSpec::bh_map(0.3), BoundMode::Leq, reps,
                                      threads, "BH threshold map, equicorrelated rho=0.5"));
  return out;
}

inline std::vector<CheckResult> run_group_suite(long reps, std::uint64_t seed,
                                                int threads = 0) {
  std::vector<CheckResult> out;

  {
    const auto indep = all_null_model(8, SimModel::Dep::Independent, 0.0, 1, seed + 10);
    GroupVariant v;
    v.kind = GroupVariant::Kind::Simes;
    out.push_back(check_group_superuniformity(indep, {0, 1, 2, 3}, ThresholdSpec::fixed(0.4), v,
                                              reps, threads,
                                              "Simes group, constant threshold, independent"));
  }
  {
    const auto prds = all_null_model(8, SimModel::Dep::GaussianEquicorrelated, 0.4, 1, seed + 11);
    GroupVariant v;
    v.kind = GroupVariant::Kind::Simes;
    out.push_back(check_group_superuniformity(prds, {0, 1, 2}, ThresholdSpec::bh_map(0.3), v,
                                              reps, threads,
                                              "Simes group, BH map, equicorrelated rho=0.4"));
  }
  {
    const auto prds = all_null_model(12, SimModel::Dep::GaussianEquicorrelated, 0.3, 1, seed + 12);
    GroupVariant v;
    v.kind = GroupVariant::Kind::NestedSimes;
    v.nested_groups = {{0, 1, 2, 3}, {4, 5, 6, 7}, {8, 9, 10, 11}};
    out.push_back(check_group_superuniformity(prds, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11},
                                              ThresholdSpec::fixed(0.4), v, reps, threads,
                                              "nested Simes over disjoint null groups"));
  }
  {
    // duplicated pairs (0,1),(2,3),... ; the checked group crosses blocks, so
    // its members stay independent and Fisher remains a valid group p-value
    const auto dup = all_null_model(8, SimModel::Dep::DuplicateBlocks, 0.0, 2, seed + 13);
    GroupVariant v;
    v.kind = GroupVariant::Kind::Reshaped;
    v.statistic = CombinerSpec::fisher();
    v.beta = ReshapeSpec::by(4);
    v.c = 0.5;
    out.push_back(check_group_superuniformity(dup, {0, 2}, ThresholdSpec::fixed(1.0), v, reps,
                                              threads,
                                              "Fisher group vs c*beta(f), duplicate blocks"));
  }
  return out;
}

inline CheckResult inverse_binomial_as_check(const std::string& name,
                                             const InverseBinomialResult& r) {
  CheckResult out;
  out.name = name;
  out.estimate = r.estimate;
  out.se = r.se;
  out.criterion = "MC within [lower-3SE, upper+3SE]; exact within [lower, upper]";
  out.pass = r.mc_pass && (!r.exact_available || r.exact_pass);
  return out;
}

inline std::vector<CheckResult> run_inverse_binomial_suite(long reps, std::uint64_t seed,
                                                           int threads = 0) {
  std::vector<CheckResult> out;
  out.push_back(inverse_binomial_as_check(
      "a=[1], b=0.5", check_inverse_binomial({1.0}, 0.5, reps, seed + 20, threads)));
  out.push_back(inverse_binomial_as_check(
      "a=[0.5,0.5], b=0.5",
      check_inverse_binomial({0.5, 0.5}, 0.5, reps, seed + 21, threads)));
  out.push_back(inverse_binomial_as_check(
      "b=1 (degenerate)", check_inverse_binomial({0.25, 0.75}, 1.0, reps, seed + 22, threads)));
  {
    RngStream rng(seed + 23);
    std::vector<double> a(12);
    for (auto& v : a) v = rng.uniform();
    out.push_back(inverse_binomial_as_check(
        "random a (d=12), b=0.3", check_inverse_binomial(a, 0.3, reps, seed + 24, threads)));
  }
  {
    RngStream rng(seed + 25);
    std::vector<double> a(20);
    for (auto& v : a) v = rng.uniform();
    out.push_back(inverse_binomial_as_check(
        "random a (d=20), b=0.6", check_inverse_binomial(a, 0.6, reps, seed + 26, threads)));
  }
  return out;
}

inline std::vector<CheckResult> run_simes_dist_suite(long reps, std::uint64_t seed,
                                                     int threads = 0) {
  std::vector<CheckResult> out;
  {
    CheckResult c;
    c.name = "Simes uniformity KS, m=10";
    c.estimate = simes_uniformity_ks(10, {}, reps, seed + 30, threads);
    c.se = 0.0;
    const double bound = std::max(0.01, 1.95 / std::sqrt(static_cast<double>(reps)));
    c.criterion = "KS < " + std::to_string(bound);
    c.pass = c.estimate < bound;
    out.push_back(c);
  }
  {
    const auto prds = all_null_model(10, SimModel::Dep::GaussianEquicorrelated, 0.5, 1, seed + 31);
    const auto dom = simes_dominance(prds, {}, false, ReshapeSpec::identity(), reps, threads);
    CheckResult c;
    c.name = "Simes dominance, equicorrelated rho=0.5";
    c.estimate = dom.worst_margin;
    c.criterion = "CDF(t) <= t + 3 SE on the grid";
    c.pass = dom.pass;
    out.push_back(c);
  }
  {
    const auto dup = all_null_model(10, SimModel::Dep::DuplicateBlocks, 0.0, 2, seed + 32);
    const auto dom = simes_dominance(dup, {}, true, ReshapeSpec::by(10), reps, threads);
    CheckResult c;
    c.name = "BY-reshaped Simes dominance, duplicate blocks";
    c.estimate = dom.worst_margin;
    c.criterion = "CDF(t) <= t + 3 SE on the grid";
    c.pass = dom.pass;
    out.push_back(c);
  }
  {
    // weighted exactness holds only where max w <= 1/t; test the restricted range
    const std::vector<double> w{2.0, 1.5, 1.0, 0.5, 0.5, 0.5};
    std::vector<double> draws(reps);
    run_replications(reps, resolve_threads(threads), [&](long r) {
      RngStream rng(seed + 33, static_cast<std::uint64_t>(r));
      std::vector<double> p(w.size());
      for (auto& v : p) v = rng.uniform();
      draws[r] = weighted_simes(p, w);
    });
    std::sort(draws.begin(), draws.end());
    double worst = -1.0;
    bool pass = true;
    for (int j = 1; j <= 20; ++j) {
      const double t = 0.5 * j / 20.0;
      const auto it = std::upper_bound(draws.begin(), draws.end(), t);
      const double cdf = static_cast<double>(it - draws.begin()) / reps;
      const double se = std::sqrt(std::max(t * (1.0 - t), 1e-12) / reps);
      const double margin = std::fabs(cdf - t) - 3.0 * se;
      worst = std::max(worst, margin);
      if (margin > 0.0) pass = false;
    }
    CheckResult c;
    c.name = "weighted Simes uniformity on t <= 1/max(w)";
    c.estimate = worst;
    c.criterion = "|CDF(t) - t| <= 3 SE on the restricted grid";
    c.pass = pass;
    out.push_back(c);
  }
  return out;
}

inline std::vector<CheckResult> run_lemma_suite(const std::string& suite, long reps,
                                                std::uint64_t seed, int threads = 0) {
  std::vector<CheckResult> out;
  auto append = [&](std::vector<CheckResult> more) {
    for (auto& c : more) out.push_back(std::move(c));
  };
  if (suite == "superuniformity" || suite == "all")
    append(run_superuniformity_suite(reps, seed, threads));
  if (suite == "group" || suite == "all") append(run_group_suite(reps, seed, threads));
  if (suite == "inverse-binomial" || suite == "all")
    append(run_inverse_binomial_suite(reps, seed, threads));
  if (suite == "simes-dist" || suite == "all")
    append(run_simes_dist_suite(reps, seed, threads));
  if (out.empty()) throw std::invalid_argument("unknown lemma suite '" + suite + "'");
  return out;
}

}  // namespace pfilter
