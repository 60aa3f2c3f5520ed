#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace pfilter {

// ---------------------------------------------------------------------------
// Dotfraction: the three-valued ratio used throughout FDP arithmetic.
// dotfrac(a,b) is 0 when a = 0 (even for b = 0), a/b when both are nonzero,
// and Undefined when a != 0 and b = 0. Undefined is a representable value,
// not an error; consumers must reject it explicitly.
// ---------------------------------------------------------------------------
class Dotfraction {
 public:
  static Dotfraction zero() { return Dotfraction(Tag::Zero, 0.0); }
  static Dotfraction value(double v) { return Dotfraction(Tag::Value, v); }
  static Dotfraction undefined() { return Dotfraction(Tag::Undefined, 0.0); }

  bool is_zero() const { return tag_ == Tag::Zero; }
  bool is_value() const { return tag_ == Tag::Value; }
  bool is_undefined() const { return tag_ == Tag::Undefined; }

  // Numeric value with Zero mapped to 0. Throws on Undefined.
  double numeric() const {
    if (tag_ == Tag::Undefined) {
      throw std::domain_error("Dotfraction: numeric() on an undefined value");
    }
    return tag_ == Tag::Zero ? 0.0 : value_;
  }

  Dotfraction operator+(const Dotfraction& o) const {
    if (is_undefined() || o.is_undefined()) return undefined();
    if (is_zero()) return o;
    if (o.is_zero()) return *this;
    return value(value_ + o.value_);
  }

  Dotfraction operator*(const Dotfraction& o) const {
    if (is_undefined() || o.is_undefined()) return undefined();
    if (is_zero() || o.is_zero()) return zero();
    return value(value_ * o.value_);
  }

  // scalar multiple c * (a./b) = (ca)./b
  friend Dotfraction operator*(double c, const Dotfraction& f) {
    if (f.is_undefined()) return Dotfraction::undefined();
    if (f.is_zero() || c == 0.0) return Dotfraction::zero();
    return Dotfraction::value(c * f.value_);
  }

  bool operator==(const Dotfraction& o) const {
    if (tag_ != o.tag_) {
      // Zero and Value(0) denote the same number
      return numeric_equal(o);
    }
    return tag_ != Tag::Value || value_ == o.value_;
  }

  bool operator<=(const Dotfraction& o) const { return numeric() <= o.numeric(); }
  bool operator>=(const Dotfraction& o) const { return numeric() >= o.numeric(); }

 private:
  enum class Tag { Zero, Value, Undefined };
  Dotfraction(Tag t, double v) : tag_(t), value_(v) {}
  bool numeric_equal(const Dotfraction& o) const {
    if (is_undefined() || o.is_undefined()) return false;
    return numeric() == o.numeric();
  }
  Tag tag_;
  double value_;
};

inline Dotfraction dotfrac(double a, double b) {
  if (a < 0.0 || b < 0.0) throw std::domain_error("dotfrac: arguments must be >= 0");
  if (a == 0.0) return Dotfraction::zero();
  if (b == 0.0) return Dotfraction::undefined();
  return Dotfraction::value(a / b);
}

// ---------------------------------------------------------------------------
// Reshaping function specification. beta(k) = integral_0^k x dnu(x) <= k for a
// probability measure nu. Identity means no reshaping; BY is k / H with
// H = sum_{i<=domain} 1/i; DiscreteMeasure is an explicit atomic nu.
// Evaluation lives in reshape.hpp.
// ---------------------------------------------------------------------------
struct ReshapeSpec {
  enum class Kind { Identity, BY, Discrete };

  Kind kind = Kind::Identity;
  int by_domain = 0;           // BY only
  double by_harmonic = 0.0;    // H, precomputed at construction
  std::vector<std::pair<double, double>> atoms;  // Discrete only: (x_j, mass_j)

  static ReshapeSpec identity() { return ReshapeSpec{}; }

  static ReshapeSpec by(int domain_size) {
    if (domain_size < 1) throw std::invalid_argument("ReshapeSpec::by: domain_size must be >= 1");
    ReshapeSpec s;
    s.kind = Kind::BY;
    s.by_domain = domain_size;
    double h = 0.0;
    for (int i = 1; i <= domain_size; ++i) h += 1.0 / i;
    s.by_harmonic = h;
    return s;
  }

  static ReshapeSpec discrete(std::vector<std::pair<double, double>> atom_list) {
    ReshapeSpec s;
    s.kind = Kind::Discrete;
    std::sort(atom_list.begin(), atom_list.end());
    s.atoms = std::move(atom_list);
    return s;
  }

  bool is_identity() const { return kind == Kind::Identity; }

  // empty on success, else one message per violated invariant
  std::vector<std::string> check() const {
    std::vector<std::string> bad;
    if (kind == Kind::BY && by_domain < 1) bad.push_back("reshape: BY domain_size must be >= 1");
    if (kind == Kind::Discrete) {
      if (atoms.empty()) bad.push_back("reshape: discrete measure has no atoms");
      double mass = 0.0;
      for (std::size_t j = 0; j < atoms.size(); ++j) {
        if (!(atoms[j].first > 0.0))
          bad.push_back("reshape: atom location " + std::to_string(j) + " must be > 0");
        if (!(atoms[j].second > 0.0 && atoms[j].second <= 1.0))
          bad.push_back("reshape: atom mass " + std::to_string(j) + " must lie in (0,1]");
        if (j > 0 && atoms[j].first < atoms[j - 1].first)
          bad.push_back("reshape: atoms must be sorted by location");
        mass += atoms[j].second;
      }
      if (std::fabs(mass - 1.0) > 1e-9) bad.push_back("reshape: atom masses must sum to 1");
    }
    return bad;
  }
};

// ---------------------------------------------------------------------------
// Group p-value combiner specification. Evaluation lives in combine.hpp.
// ---------------------------------------------------------------------------
struct CombinerSpec {
  enum class Kind {
    Simes,
    WeightedSimes,
    ReshapedWeightedSimes,
    Fisher,
    Stouffer,
    Bonferroni,
    Ruschendorf,
    Ruger,
    External
  };

  Kind kind = Kind::Simes;
  // WeightedSimes / ReshapedWeightedSimes: per-group member weights.
  // Empty means unit weights for every group.
  std::vector<std::vector<double>> within_weights;
  ReshapeSpec within_reshape;      // ReshapedWeightedSimes only
  int ruger_k = 1;                 // Ruger only
  std::vector<double> external_p;  // External only: one p-value per group

  static CombinerSpec simes() { return CombinerSpec{}; }
  static CombinerSpec weighted_simes(std::vector<std::vector<double>> w = {}) {
    CombinerSpec s;
    s.kind = Kind::WeightedSimes;
    s.within_weights = std::move(w);
    return s;
  }
  static CombinerSpec reshaped_weighted_simes(ReshapeSpec reshape,
                                              std::vector<std::vector<double>> w = {}) {
    CombinerSpec s;
    s.kind = Kind::ReshapedWeightedSimes;
    s.within_reshape = std::move(reshape);
    s.within_weights = std::move(w);
    return s;
  }
  static CombinerSpec fisher() { CombinerSpec s; s.kind = Kind::Fisher; return s; }
  static CombinerSpec stouffer() { CombinerSpec s; s.kind = Kind::Stouffer; return s; }
  static CombinerSpec bonferroni() { CombinerSpec s; s.kind = Kind::Bonferroni; return s; }
  static CombinerSpec ruschendorf() { CombinerSpec s; s.kind = Kind::Ruschendorf; return s; }
  static CombinerSpec ruger(int k) {
    CombinerSpec s;
    s.kind = Kind::Ruger;
    s.ruger_k = k;
    return s;
  }
  static CombinerSpec external(std::vector<double> group_p) {
    CombinerSpec s;
    s.kind = Kind::External;
    s.external_p = std::move(group_p);
    return s;
  }
};

enum class Dependence { Independent, Prds, Arbitrary };
enum class IcMode { Weak, Strong };

// ---------------------------------------------------------------------------
// Layer: one (possibly overlapping, possibly incomplete) partition with its
// weights, target level and adaptivity/reshaping/combiner configuration.
// ---------------------------------------------------------------------------
struct Layer {
  std::vector<std::vector<int>> groups;  // index sets A_g, 0-based
  std::vector<double> prior_weights;     // w_g > 0, sum_g u_g w_g = G
  std::vector<double> penalty_weights;   // u_g > 0
  double alpha = 0.05;
  double lambda = 1.0;  // 1 unless adaptive
  bool adaptive = false;
  ReshapeSpec reshape;
  CombinerSpec combiner;
  Dependence dependence_label = Dependence::Independent;

  int group_count() const { return static_cast<int>(groups.size()); }

  // |u . w|_inf
  double max_norm() const {
    double m = 0.0;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      m = std::max(m, penalty_weights[g] * prior_weights[g]);
    }
    return m;
  }
};

// Convenience builder: unit weights, one group per explicit index set.
inline Layer make_layer(std::vector<std::vector<int>> groups, double alpha,
                        CombinerSpec combiner = CombinerSpec::simes()) {
  Layer layer;
  layer.groups = std::move(groups);
  const std::size_t G = layer.groups.size();
  layer.prior_weights.assign(G, 1.0);
  layer.penalty_weights.assign(G, 1.0);
  layer.alpha = alpha;
  layer.combiner = std::move(combiner);
  return layer;
}

// Finest partition: one singleton group per hypothesis.
inline Layer make_finest_layer(int n, double alpha) {
  std::vector<std::vector<int>> groups(n);
  for (int i = 0; i < n; ++i) groups[i] = {i};
  return make_layer(std::move(groups), alpha);
}

struct Problem {
  std::vector<double> pvalues;
  std::vector<Layer> layers;
  IcMode ic_mode = IcMode::Weak;

  int n() const { return static_cast<int>(pvalues.size()); }
};

// Weighted discovery counts, one real coordinate per layer, k^(m) in [0, G^(m)].
using KVector = std::vector<double>;

struct RejectionResult {
  std::vector<int> elementary;                   // rejected hypothesis indices
  std::vector<std::vector<int>> per_layer;       // rejected group indices per layer
  KVector k_hat;
  std::vector<double> pi_hat;
  std::vector<std::vector<double>> group_pvalues;
};

// ---------------------------------------------------------------------------
// Validation and small structural queries
// ---------------------------------------------------------------------------

inline void check_reshape_into(const ReshapeSpec& spec, const std::string& where,
                               std::vector<std::string>& out) {
  for (auto& msg : spec.check()) out.push_back(where + ": " + msg);
}

inline std::vector<std::string> validate_layer(const Layer& layer, int n,
                                               const std::string& where) {
  std::vector<std::string> bad;
  const int G = layer.group_count();
  if (G < 1) {
    bad.push_back(where + ": layer has no groups");
    return bad;
  }
  for (int g = 0; g < G; ++g) {
    const auto& members = layer.groups[g];
    const std::string tag = where + ".groups[" + std::to_string(g) + "]";
    if (members.empty()) bad.push_back(tag + ": group is empty");
    std::vector<int> sorted = members;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t j = 0; j < sorted.size(); ++j) {
      if (sorted[j] < 0 || sorted[j] >= n)
        bad.push_back(tag + ": index " + std::to_string(sorted[j]) + " out of range [0," +
                      std::to_string(n) + ")");
      if (j > 0 && sorted[j] == sorted[j - 1])
        bad.push_back(tag + ": duplicate index " + std::to_string(sorted[j]));
    }
  }
  if (static_cast<int>(layer.prior_weights.size()) != G)
    bad.push_back(where + ": prior weight count != group count");
  if (static_cast<int>(layer.penalty_weights.size()) != G)
    bad.push_back(where + ": penalty weight count != group count");
  if (bad.empty()) {
    double uw = 0.0;
    for (int g = 0; g < G; ++g) {
      if (!(layer.prior_weights[g] > 0.0))
        bad.push_back(where + ": prior weight w[" + std::to_string(g) + "] must be > 0");
      if (!(layer.penalty_weights[g] > 0.0))
        bad.push_back(where + ": penalty weight u[" + std::to_string(g) + "] must be > 0");
      uw += layer.prior_weights[g] * layer.penalty_weights[g];
    }
    if (std::fabs(uw - G) > 1e-9 * std::max<double>(G, 1.0))
      bad.push_back(where + ": weight normalization: sum u*w = " + std::to_string(uw) +
                    " != " + std::to_string(G));
  }
  if (!(layer.alpha >= 0.0 && layer.alpha <= 1.0))
    bad.push_back(where + ": alpha must lie in [0,1]");
  if (layer.adaptive) {
    if (!(layer.lambda > 0.0 && layer.lambda < 1.0))
      bad.push_back(where + ": adaptive layer needs lambda in (0,1)");
  } else if (layer.lambda != 1.0) {
    bad.push_back(where + ": non-adaptive layer must have lambda = 1");
  }
  check_reshape_into(layer.reshape, where + ".reshape", bad);

  const auto& comb = layer.combiner;
  using CK = CombinerSpec::Kind;
  if (comb.kind == CK::WeightedSimes || comb.kind == CK::ReshapedWeightedSimes) {
    if (!comb.within_weights.empty()) {
      if (static_cast<int>(comb.within_weights.size()) != G) {
        bad.push_back(where + ": within-weight group count != G");
      } else {
        for (int g = 0; g < G; ++g) {
          if (comb.within_weights[g].size() != layer.groups[g].size())
            bad.push_back(where + ": within-weight length mismatch for group " +
                          std::to_string(g));
          for (double wv : comb.within_weights[g])
            if (!(wv > 0.0))
              bad.push_back(where + ": within-weights must be > 0 (group " +
                            std::to_string(g) + ")");
        }
      }
    }
    if (comb.kind == CK::ReshapedWeightedSimes)
      check_reshape_into(comb.within_reshape, where + ".combiner.reshape", bad);
  }
  if (comb.kind == CK::Ruger) {
    if (comb.ruger_k < 1) bad.push_back(where + ": ruger k must be >= 1");
    for (int g = 0; g < G; ++g)
      if (comb.ruger_k > static_cast<int>(layer.groups[g].size()))
        bad.push_back(where + ": ruger k exceeds size of group " + std::to_string(g));
  }
  if (comb.kind == CK::External) {
    if (static_cast<int>(comb.external_p.size()) != G) {
      bad.push_back(where + ": external p-value count != G");
    } else {
      for (int g = 0; g < G; ++g)
        if (!(comb.external_p[g] >= 0.0 && comb.external_p[g] <= 1.0))
          bad.push_back(where + ": external p-value for group " + std::to_string(g) +
                        " outside [0,1]");
    }
  }
  return bad;
}

// Returns every invariant violation with layer/group coordinates; empty = ok.
inline std::vector<std::string> validate(const Problem& problem) {
  std::vector<std::string> bad;
  const int n = problem.n();
  if (n < 1) bad.push_back("p: need at least one p-value");
  for (int i = 0; i < n; ++i) {
    const double p = problem.pvalues[i];
    if (!(p >= 0.0 && p <= 1.0) || std::isnan(p))
      bad.push_back("p[" + std::to_string(i) + "]: value " + std::to_string(p) +
                    " outside [0,1]");
  }
  if (problem.layers.empty()) bad.push_back("layers: need at least one layer");
  for (std::size_t m = 0; m < problem.layers.size(); ++m) {
    auto layer_bad =
        validate_layer(problem.layers[m], n, "layers[" + std::to_string(m) + "]");
    bad.insert(bad.end(), layer_bad.begin(), layer_bad.end());
  }
  return bad;
}

inline void validate_or_throw(const Problem& problem) {
  auto bad = validate(problem);
  if (!bad.empty()) {
    std::string msg = "invalid problem:";
    for (const auto& b : bad) msg += "\n  " + b;
    throw std::invalid_argument(msg);
  }
}

// Rescales prior weights so sum_g u_g w_g = G holds exactly.
inline void normalize_prior_weights(Layer& layer) {
  const int G = layer.group_count();
  double uw = 0.0;
  for (int g = 0; g < G; ++g) uw += layer.prior_weights[g] * layer.penalty_weights[g];
  if (!(uw > 0.0)) throw std::invalid_argument("normalize_prior_weights: sum u*w must be > 0");
  const double scale = G / uw;
  for (auto& w : layer.prior_weights) w *= scale;
}

// L^(m) = [n] \ union_g A_g
inline std::vector<int> leftover(const Layer& layer, int n) {
  std::vector<char> covered(n, 0);
  for (const auto& group : layer.groups)
    for (int i : group) {
      if (i < 0 || i >= n) throw std::out_of_range("leftover: group index out of range");
      covered[i] = 1;
    }
  std::vector<int> left;
  for (int i = 0; i < n; ++i)
    if (!covered[i]) left.push_back(i);
  return left;
}

// g^(m)(i): the groups of this layer containing hypothesis i.
inline std::vector<int> group_membership(const Layer& layer, int i) {
  if (i < 0) throw std::out_of_range("group_membership: negative index");
  std::vector<int> owners;
  for (int g = 0; g < layer.group_count(); ++g) {
    const auto& members = layer.groups[g];
    if (std::find(members.begin(), members.end(), i) != members.end()) owners.push_back(g);
  }
  return owners;
}

// membership lists for all hypotheses at once
inline std::vector<std::vector<int>> membership_table(const Layer& layer, int n) {
  std::vector<std::vector<int>> table(n);
  for (int g = 0; g < layer.group_count(); ++g)
    for (int i : layer.groups[g]) {
      if (i < 0 || i >= n) throw std::out_of_range("membership_table: group index out of range");
      table[i].push_back(g);
    }
  return table;
}

}  // namespace pfilter
