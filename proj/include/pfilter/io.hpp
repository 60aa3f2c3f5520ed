#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "pfilter/model.hpp"
#include "pfilter/montecarlo.hpp"

namespace pfilter {

using json = nlohmann::ordered_json;

struct parse_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace io_detail {

inline parse_error fail(const std::string& where, const std::string& what) {
  return parse_error(where + ": " + what);
}

inline const json& need(const json& node, const char* key, const std::string& where) {
  if (!node.contains(key)) throw fail(where, std::string("missing field '") + key + "'");
  return node.at(key);
}

inline std::vector<double> number_array(const json& node, const std::string& where) {
  if (!node.is_array()) throw fail(where, "expected an array of numbers");
  std::vector<double> out;
  out.reserve(node.size());
  for (const auto& v : node) {
    if (!v.is_number()) throw fail(where, "expected a number");
    out.push_back(v.get<double>());
  }
  return out;
}

inline std::vector<int> index_array(const json& node, const std::string& where) {
  if (!node.is_array()) throw fail(where, "expected an array of indices");
  std::vector<int> out;
  out.reserve(node.size());
  for (const auto& v : node) {
    if (!v.is_number_integer()) throw fail(where, "expected an integer index");
    out.push_back(v.get<int>());
  }
  return out;
}

}  // namespace io_detail

// reshape: "identity" | "by" | {"atoms": [[x, mass], ...]}
inline ReshapeSpec parse_reshape(const json& node, int domain, const std::string& where) {
  using io_detail::fail;
  if (node.is_string()) {
    const std::string s = node.get<std::string>();
    if (s == "identity") return ReshapeSpec::identity();
    if (s == "by") return ReshapeSpec::by(domain);
    throw fail(where, "unknown reshape '" + s + "'");
  }
  if (node.is_object() && node.contains("atoms")) {
    std::vector<std::pair<double, double>> atoms;
    for (const auto& a : node.at("atoms")) {
      if (!a.is_array() || a.size() != 2)
        throw fail(where, "each atom must be a [location, mass] pair");
      atoms.emplace_back(a.at(0).get<double>(), a.at(1).get<double>());
    }
    return ReshapeSpec::discrete(std::move(atoms));
  }
  throw fail(where, "reshape must be \"identity\", \"by\" or {\"atoms\": ...}");
}

inline json reshape_to_json(const ReshapeSpec& spec) {
  switch (spec.kind) {
    case ReshapeSpec::Kind::Identity: return json("identity");
    case ReshapeSpec::Kind::BY: return json("by");
    case ReshapeSpec::Kind::Discrete: {
      json atoms = json::array();
      for (const auto& [x, mass] : spec.atoms) atoms.push_back(json::array({x, mass}));
      return json{{"atoms", atoms}};
    }
  }
  return json("identity");
}

// combiner: "simes" | "wsimes" | "rwsimes" | "fisher" | "stouffer" |
// "bonferroni" | "ruschendorf" | {"ruger": k} | {"external": [...]} |
// {"wsimes": {"weights": [[...], ...]}} |
// {"rwsimes": {"weights": ..., "reshape": ...}}
inline CombinerSpec parse_combiner(const json& node, int group_count, int max_group_size,
                                   const std::string& where) {
  using io_detail::fail;
  auto parse_within = [&](const json& obj) {
    std::vector<std::vector<double>> w;
    if (obj.contains("weights")) {
      for (const auto& row : obj.at("weights"))
        w.push_back(io_detail::number_array(row, where + ".weights"));
    }
    return w;
  };
  if (node.is_string()) {
    const std::string s = node.get<std::string>();
    if (s == "simes") return CombinerSpec::simes();
    if (s == "wsimes") return CombinerSpec::weighted_simes();
    if (s == "rwsimes")
      return CombinerSpec::reshaped_weighted_simes(ReshapeSpec::by(max_group_size));
    if (s == "fisher") return CombinerSpec::fisher();
    if (s == "stouffer") return CombinerSpec::stouffer();
    if (s == "bonferroni") return CombinerSpec::bonferroni();
    if (s == "ruschendorf") return CombinerSpec::ruschendorf();
    throw fail(where, "unknown combiner '" + s + "'");
  }
  if (node.is_object()) {
    if (node.contains("ruger")) return CombinerSpec::ruger(node.at("ruger").get<int>());
    if (node.contains("external"))
      return CombinerSpec::external(io_detail::number_array(node.at("external"), where));
    if (node.contains("wsimes"))
      return CombinerSpec::weighted_simes(parse_within(node.at("wsimes")));
    if (node.contains("rwsimes")) {
      const json& obj = node.at("rwsimes");
      ReshapeSpec within = obj.contains("reshape")
                               ? parse_reshape(obj.at("reshape"), max_group_size, where)
                               : ReshapeSpec::by(max_group_size);
      return CombinerSpec::reshaped_weighted_simes(std::move(within), parse_within(obj));
    }
  }
  (void)group_count;
  throw fail(where, "unrecognized combiner specification");
}

inline json combiner_to_json(const CombinerSpec& spec) {
  using CK = CombinerSpec::Kind;
  auto within = [&]() {
    json rows = json::array();
    for (const auto& row : spec.within_weights) rows.push_back(row);
    return rows;
  };
  switch (spec.kind) {
    case CK::Simes: return json("simes");
    case CK::WeightedSimes:
      if (spec.within_weights.empty()) return json("wsimes");
      return json{{"wsimes", {{"weights", within()}}}};
    case CK::ReshapedWeightedSimes: {
      json obj;
      if (!spec.within_weights.empty()) obj["weights"] = within();
      obj["reshape"] = reshape_to_json(spec.within_reshape);
      return json{{"rwsimes", obj}};
    }
    case CK::Fisher: return json("fisher");
    case CK::Stouffer: return json("stouffer");
    case CK::Bonferroni: return json("bonferroni");
    case CK::Ruschendorf: return json("ruschendorf");
    case CK::Ruger: return json{{"ruger", spec.ruger_k}};
    case CK::External: return json{{"external", spec.external_p}};
  }
  return json("simes");
}

inline Dependence parse_dependence(const std::string& s, const std::string& where) {
  if (s == "independent") return Dependence::Independent;
  if (s == "prds") return Dependence::Prds;
  if (s == "arbitrary") return Dependence::Arbitrary;
  throw io_detail::fail(where, "unknown dependence label '" + s + "'");
}

inline std::string dependence_to_string(Dependence d) {
  switch (d) {
    case Dependence::Independent: return "independent";
    case Dependence::Prds: return "prds";
    case Dependence::Arbitrary: return "arbitrary";
  }
  return "independent";
}

// Parses one layer object. Missing w/u default to unit weights; `defaulted`
// is set when that happens so the CLI can log a note.
inline Layer parse_layer(const json& node, const std::string& where, bool* defaulted) {
  using io_detail::fail;
  Layer layer;
  const json& groups = io_detail::need(node, "groups", where);
  if (!groups.is_array() || groups.empty()) throw fail(where, "groups must be a nonempty array");
  int max_size = 1;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    layer.groups.push_back(
        io_detail::index_array(groups.at(g), where + ".groups[" + std::to_string(g) + "]"));
    max_size = std::max(max_size, static_cast<int>(layer.groups.back().size()));
  }
  const int G = layer.group_count();

  layer.alpha = io_detail::need(node, "alpha", where).get<double>();
  layer.adaptive = node.value("adaptive", false);
  if (node.contains("lambda")) {
    layer.lambda = node.at("lambda").get<double>();
  } else {
    layer.lambda = layer.adaptive ? 0.5 : 1.0;
  }

  if (node.contains("w")) {
    layer.prior_weights = io_detail::number_array(node.at("w"), where + ".w");
  } else {
    layer.prior_weights.assign(G, 1.0);
    if (defaulted) *defaulted = true;
  }
  if (node.contains("u")) {
    layer.penalty_weights = io_detail::number_array(node.at("u"), where + ".u");
  } else {
    layer.penalty_weights.assign(G, 1.0);
    if (defaulted) *defaulted = true;
  }

  if (node.contains("reshape"))
    layer.reshape = parse_reshape(node.at("reshape"), G, where + ".reshape");
  if (node.contains("combiner"))
    layer.combiner = parse_combiner(node.at("combiner"), G, max_size, where + ".combiner");
  if (node.contains("dependence"))
    layer.dependence_label =
        parse_dependence(node.at("dependence").get<std::string>(), where + ".dependence");
  return layer;
}

inline json layer_to_json(const Layer& layer) {
  json node;
  json groups = json::array();
  for (const auto& g : layer.groups) groups.push_back(g);
  node["groups"] = groups;
  node["alpha"] = layer.alpha;
  node["lambda"] = layer.lambda;
  node["adaptive"] = layer.adaptive;
  node["w"] = layer.prior_weights;
  node["u"] = layer.penalty_weights;
  node["reshape"] = reshape_to_json(layer.reshape);
  node["combiner"] = combiner_to_json(layer.combiner);
  node["dependence"] = dependence_to_string(layer.dependence_label);
  return node;
}

// Problem document: {"n": ..., "p": [...], "ic": "weak"|"strong", "layers": [...]}
inline Problem parse_problem(const json& doc, bool* defaulted_weights = nullptr) {
  using io_detail::fail;
  Problem problem;
  problem.pvalues = io_detail::number_array(io_detail::need(doc, "p", "problem"), "p");
  if (doc.contains("n")) {
    const int n = doc.at("n").get<int>();
    if (n != static_cast<int>(problem.pvalues.size()))
      throw fail("problem", "declared n = " + std::to_string(n) + " but p has " +
                                std::to_string(problem.pvalues.size()) + " entries");
  }
  const std::string ic = doc.value("ic", "weak");
  if (ic == "weak") problem.ic_mode = IcMode::Weak;
  else if (ic == "strong") problem.ic_mode = IcMode::Strong;
  else throw fail("ic", "must be \"weak\" or \"strong\"");

  const json& layers = io_detail::need(doc, "layers", "problem");
  if (!layers.is_array() || layers.empty()) throw fail("layers", "must be a nonempty array");
  for (std::size_t m = 0; m < layers.size(); ++m)
    problem.layers.push_back(
        parse_layer(layers.at(m), "layers[" + std::to_string(m) + "]", defaulted_weights));
  return problem;
}

inline json problem_to_json(const Problem& problem) {
  json doc;
  doc["n"] = problem.n();
  doc["p"] = problem.pvalues;
  doc["ic"] = problem.ic_mode == IcMode::Weak ? "weak" : "strong";
  json layers = json::array();
  for (const auto& layer : problem.layers) layers.push_back(layer_to_json(layer));
  doc["layers"] = layers;
  return doc;
}

inline json result_to_json(const RejectionResult& result) {
  json doc;
  doc["k_hat"] = result.k_hat;
  doc["pi_hat"] = result.pi_hat;
  doc["elementary"] = result.elementary;
  json per_layer = json::array();
  for (const auto& groups : result.per_layer) per_layer.push_back(groups);
  doc["per_layer"] = per_layer;
  json gp = json::array();
  for (const auto& row : result.group_pvalues) gp.push_back(row);
  doc["group_pvalues"] = gp;
  return doc;
}

inline json report_to_json(const SimReport& report) {
  json doc;
  doc["replications"] = report.replications;
  doc["seed"] = report.seed;
  json layers = json::array();
  for (std::size_t m = 0; m < report.layers.size(); ++m) {
    const auto& e = report.layers[m];
    layers.push_back(json{{"layer", m},
                          {"fdr", e.fdr},
                          {"fdr_se", e.fdr_se},
                          {"power", e.power},
                          {"power_se", e.power_se}});
  }
  doc["layers"] = layers;
  return doc;
}

// Simulation scenario: {"model": {...}, "ic": ..., "layers": [...],
// "alpha_grid": [...]} — the layers use the same schema as a problem document.
struct SimScenario {
  SimModel model;
  Problem problem;  // pvalues left empty; filled per replication
  std::vector<double> alpha_grid;
};

inline SimScenario parse_scenario(const json& doc) {
  using io_detail::fail;
  SimScenario sc;
  const json& model = io_detail::need(doc, "model", "scenario");
  sc.model.n = io_detail::need(model, "n", "model").get<int>();
  if (model.contains("nonnull")) {
    const auto nonnull = io_detail::index_array(model.at("nonnull"), "model.nonnull");
    std::vector<char> is_nonnull(sc.model.n, 0);
    for (int i : nonnull) {
      if (i < 0 || i >= sc.model.n) throw fail("model.nonnull", "index out of range");
      is_nonnull[i] = 1;
    }
    for (int i = 0; i < sc.model.n; ++i)
      if (!is_nonnull[i]) sc.model.null_set.push_back(i);
  } else {
    for (int i = 0; i < sc.model.n; ++i) sc.model.null_set.push_back(i);
  }
  sc.model.mu = model.value("mu", 0.0);
  if (model.contains("dependence")) {
    const json& dep = model.at("dependence");
    if (dep.is_string()) {
      if (dep.get<std::string>() != "independent")
        throw fail("model.dependence", "unknown dependence '" + dep.get<std::string>() + "'");
    } else if (dep.contains("gaussian")) {
      sc.model.dependence = SimModel::Dep::GaussianEquicorrelated;
      sc.model.rho = dep.at("gaussian").get<double>();
    } else if (dep.contains("duplicate")) {
      sc.model.dependence = SimModel::Dep::DuplicateBlocks;
      sc.model.block_size = dep.at("duplicate").get<int>();
    } else {
      throw fail("model.dependence", "expected \"independent\", {\"gaussian\": rho} or {\"duplicate\": block}");
    }
  }

  json problem_doc;
  problem_doc["p"] = std::vector<double>(sc.model.n, 0.5);  // placeholder
  problem_doc["ic"] = doc.value("ic", "weak");
  problem_doc["layers"] = io_detail::need(doc, "layers", "scenario");
  sc.problem = parse_problem(problem_doc);

  if (doc.contains("alpha_grid"))
    sc.alpha_grid = io_detail::number_array(doc.at("alpha_grid"), "alpha_grid");
  return sc;
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

inline json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw parse_error("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw parse_error(path + ": " + e.what());
  }
}

inline void save_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
}

// Flat CSV importer for the single-layer path: one p-value per line, optional
// header. Builds a finest-partition problem at the given level.
inline Problem load_csv_problem(const std::string& path, double alpha) {
  std::ifstream in(path);
  if (!in) throw parse_error("cannot open '" + path + "'");
  std::vector<double> p;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    // trim
    const auto begin = line.find_first_not_of(" \t\r");
    if (begin == std::string::npos) continue;
    const auto end = line.find_last_not_of(" \t\r");
    const std::string token = line.substr(begin, end - begin + 1);
    try {
      std::size_t used = 0;
      const double v = std::stod(token, &used);
      if (used != token.size()) throw std::invalid_argument("trailing characters");
      p.push_back(v);
    } catch (const std::exception&) {
      if (line_no == 1) continue;  // header
      throw parse_error(path + ":" + std::to_string(line_no) + ": expected a p-value, got '" +
                        token + "'");
    }
  }
  if (p.empty()) throw parse_error(path + ": no p-values found");
  Problem problem;
  problem.pvalues = std::move(p);
  problem.layers.push_back(make_finest_layer(problem.n(), alpha));
  return problem;
}

}  // namespace pfilter
