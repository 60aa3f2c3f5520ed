#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pfilter/cli.hpp"
#include "pfilter/io.hpp"
#include "support.hpp"

using namespace pfilter;
namespace fs = std::filesystem;

namespace {

const std::string kFixtures = PFILTER_FIXTURE_DIR;

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cli(std::initializer_list<std::string> args, std::string* out_text = nullptr) {
  std::vector<std::string> storage{"pfilter"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& s : storage) argv.push_back(s.c_str());
  std::ostringstream out, err;
  const int code =
      cli::run_main(static_cast<int>(argv.size()), argv.data(), out, err);
  if (out_text) *out_text = out.str() + err.str();
  return code;
}

std::string tmp_path(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "pfilter_tests";
  fs::create_directories(dir);
  return (dir / name).string();
}

}  // namespace

TEST_CASE("problem documents round-trip exactly") {
  RngStream rng(801);
  for (int it = 0; it < 200; ++it) {
    const Problem original = random_problem(rng);
    const json doc = problem_to_json(original);
    const Problem reparsed = parse_problem(doc);

    REQUIRE(reparsed.pvalues == original.pvalues);  // bit-exact numbers
    REQUIRE(reparsed.ic_mode == original.ic_mode);
    REQUIRE(reparsed.layers.size() == original.layers.size());
    for (std::size_t m = 0; m < original.layers.size(); ++m) {
      const Layer& a = original.layers[m];
      const Layer& b = reparsed.layers[m];
      REQUIRE(b.groups == a.groups);
      REQUIRE(b.prior_weights == a.prior_weights);
      REQUIRE(b.penalty_weights == a.penalty_weights);
      REQUIRE(b.alpha == a.alpha);
      REQUIRE(b.lambda == a.lambda);
      REQUIRE(b.adaptive == a.adaptive);
      REQUIRE(b.combiner.kind == a.combiner.kind);
      REQUIRE(b.reshape.kind == a.reshape.kind);
    }
    // canonical form is a fixed point of parse . serialize
    REQUIRE(problem_to_json(reparsed).dump() == doc.dump());
  }
}

TEST_CASE("fixture parses and the missing-weights default applies") {
  bool defaulted = false;
  const Problem problem =
      parse_problem(load_json(kFixtures + "/missing_weights.json"), &defaulted);
  CHECK(defaulted);
  CHECK(problem.layers[0].prior_weights == std::vector<double>(2, 1.0));
  CHECK(problem.layers[0].penalty_weights == std::vector<double>(2, 1.0));
  CHECK(validate(problem).empty());
}

TEST_CASE("malformed documents fail with diagnostics") {
  CHECK_THROWS_AS(load_json(kFixtures + "/malformed.json"), parse_error);
  CHECK_THROWS_WITH(parse_problem(json{{"p", {0.5, "x"}}, {"layers", json::array()}}),
                    Catch::Matchers::ContainsSubstring("expected a number"));
  CHECK_THROWS_WITH(parse_problem(json{{"n", 3}, {"p", {0.5}}, {"layers", json::array()}}),
                    Catch::Matchers::ContainsSubstring("declared n"));
}

TEST_CASE("CSV importer") {
  const Problem problem = load_csv_problem(kFixtures + "/pvalues.csv", 0.1);
  REQUIRE(problem.n() == 4);
  CHECK(problem.pvalues == std::vector<double>{0.01, 0.02, 0.03, 0.9});
  CHECK(problem.layers.size() == 1);
  CHECK(problem.layers[0].group_count() == 4);
  CHECK(problem.layers[0].alpha == 0.1);
}

TEST_CASE("cli run") {
  SECTION("BH fixture rejects the three smallest p-values") {
    const std::string out = tmp_path("bh_out.json");
    REQUIRE(cli({"run", "--input", kFixtures + "/bh_single_layer.json", "--output", out}) ==
            cli::kOk);
    const json doc = load_json(out);
    CHECK(doc.at("elementary").get<std::vector<int>>() == std::vector<int>{0, 1, 2});
    CHECK(doc.at("k_hat").at(0).get<double>() == 3.0);
  }

  SECTION("empty rejection case still exits 0") {
    const std::string in = tmp_path("all_ones.json");
    save_text(in, json{{"p", {1.0, 1.0}},
                       {"layers", json::array({json{{"groups", json::array({json::array({0}),
                                                                            json::array({1})})},
                                                    {"alpha", 0.1}}})}}
                      .dump());
    const std::string out = tmp_path("all_ones_out.json");
    REQUIRE(cli({"run", "--input", in, "--output", out}) == cli::kOk);
    CHECK(load_json(out).at("elementary").empty());
  }

  SECTION("CSV input runs the single-layer path") {
    const std::string out = tmp_path("csv_out.json");
    REQUIRE(cli({"run", "--input", kFixtures + "/pvalues.csv", "--output", out, "--alpha",
                 "0.1"}) == cli::kOk);
    CHECK(load_json(out).at("elementary").get<std::vector<int>>() ==
          std::vector<int>{0, 1, 2});
  }

  SECTION("validation failures exit 2 with coordinates") {
    const std::string in = tmp_path("invalid.json");
    save_text(in, json{{"p", {0.5, 2.0}},
                       {"layers", json::array({json{{"groups", json::array({json::array({0, 1})})},
                                                    {"alpha", 0.1}}})}}
                      .dump());
    std::string text;
    CHECK(cli({"run", "--input", in, "--output", tmp_path("never.json")}, &text) ==
          cli::kInvalid);
    CHECK(text.find("p[1]") != std::string::npos);
  }

  SECTION("malformed JSON exits 2") {
    CHECK(cli({"run", "--input", kFixtures + "/malformed.json", "--output",
               tmp_path("never.json")}) == cli::kInvalid);
  }
}

TEST_CASE("cli oracle") {
  SECTION("fixtures match") {
    CHECK(cli({"oracle", "--input", kFixtures + "/bh_single_layer.json"}) == cli::kOk);
    CHECK(cli({"oracle", "--input", kFixtures + "/grid_two_layer.json"}) == cli::kOk);
  }

  SECTION("oversize instance exits 3") {
    json layers = json::array();
    json singles = json::array();
    std::vector<double> p(400, 0.5);
    for (int i = 0; i < 400; ++i) singles.push_back(json::array({i}));
    for (int m = 0; m < 3; ++m) layers.push_back(json{{"groups", singles}, {"alpha", 0.2}});
    const std::string in = tmp_path("oversize.json");
    save_text(in, json{{"p", p}, {"layers", layers}}.dump());
    CHECK(cli({"oracle", "--input", in}) == cli::kOversize);
  }
}

TEST_CASE("cli simulate") {
  const std::string config = kFixtures + "/scenario_small.json";
  const std::string out1 = tmp_path("sim1.json");
  const std::string out2 = tmp_path("sim2.json");

  SECTION("writes a report and plot data; identical seeds give identical bytes") {
    REQUIRE(cli({"simulate", "--config", config, "--reps", "200", "--seed", "7",
                 "--output", out1}) == cli::kOk);
    REQUIRE(cli({"simulate", "--config", config, "--reps", "200", "--seed", "7",
                 "--output", out2}) == cli::kOk);
    CHECK(slurp(out1) == slurp(out2));
    const std::string plot1 = tmp_path("sim1.plot.csv");
    const std::string plot2 = tmp_path("sim2.plot.csv");
    CHECK(slurp(plot1) == slurp(plot2));
    CHECK(slurp(plot1).rfind("alpha,layer,", 0) == 0);

    const json report = load_json(out1);
    CHECK(report.at("replications").get<long>() == 200);
    CHECK(report.at("layers").size() == 2);
  }

  SECTION("reps = 0 exits 2") {
    CHECK(cli({"simulate", "--config", config, "--reps", "0", "--output", out1}) ==
          cli::kInvalid);
  }
}

TEST_CASE("cli check-lemmas") {
  SECTION("a small battery passes") {
    std::string text;
    CHECK(cli({"check-lemmas", "--suite", "inverse-binomial", "--reps", "2000", "--seed",
               "3"},
              &text) == cli::kOk);
    CHECK(text.find("[pass]") != std::string::npos);
  }

  SECTION("unknown suite exits 2") {
    CHECK(cli({"check-lemmas", "--suite", "bogus", "--reps", "2000"}) == cli::kInvalid);
  }

  SECTION("reps below the floor exit 2") {
    CHECK(cli({"check-lemmas", "--suite", "all", "--reps", "500"}) == cli::kInvalid);
  }
}
