#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <doctest.h>
#include <json.hpp>

#include "profe/metrics.hpp"

using namespace profe;

TEST_CASE("macro_f1") {
  SUBCASE("perfect predictions give 1.0") {
    std::vector<int> y = {0, 1, 2, 1, 0, 2};
    CHECK(macro_f1(y, y, 3) == doctest::Approx(1.0));
  }
  SUBCASE("binary hand example") {
    // preds {1,0,1,1}, truths {1,1,0,1}
    // class 0: P = 0/1, R = 0/1, F1 = 0
    // class 1: P = 2/3, R = 2/3, F1 = 2/3
    // macro = 1/3
    std::vector<int> pred = {1, 0, 1, 1};
    std::vector<int> truth = {1, 1, 0, 1};
    CHECK(macro_f1(pred, truth, 2) == doctest::Approx(1.0 / 3.0));
  }
  SUBCASE("constant predictor on balanced 10-class data") {
    // 100 samples, 10 per class, everything predicted as class 0.
    // class 0: P = 10/100, R = 1, F1 = 2*0.1/1.1 = 2/11
    // classes 1..9: F1 = 0; macro = (2/11)/10
    std::vector<int> pred(100, 0), truth(100);
    for (int i = 0; i < 100; ++i) truth[i] = i / 10;
    CHECK(macro_f1(pred, truth, 10) == doctest::Approx(0.2 / 1.1 / 10.0));
  }
  SUBCASE("classes absent from both sides are excluded") {
    std::vector<int> pred = {0, 1};
    std::vector<int> truth = {0, 1};
    // classes 2..9 never appear; denominator must stay 2, not 10
    CHECK(macro_f1(pred, truth, 10) == doctest::Approx(1.0));
  }
  SUBCASE("invariant under sample permutation") {
    std::vector<int> pred = {0, 1, 2, 2, 1, 0, 1};
    std::vector<int> truth = {0, 2, 2, 1, 1, 0, 0};
    double base = macro_f1(pred, truth, 3);
    std::vector<std::size_t> order = {3, 6, 0, 5, 2, 4, 1};
    std::vector<int> pred2, truth2;
    for (std::size_t i : order) {
      pred2.push_back(pred[i]);
      truth2.push_back(truth[i]);
    }
    CHECK(macro_f1(pred2, truth2, 3) == doctest::Approx(base));
  }
  SUBCASE("invariant under class relabeling") {
    std::vector<int> pred = {0, 1, 2, 2, 1, 0};
    std::vector<int> truth = {0, 2, 2, 1, 1, 0};
    double base = macro_f1(pred, truth, 3);
    auto swap12 = [](std::vector<int> v) {
      for (int& c : v) c = (c == 1) ? 2 : (c == 2 ? 1 : c);
      return v;
    };
    CHECK(macro_f1(swap12(pred), swap12(truth), 3) == doctest::Approx(base));
  }
  SUBCASE("empty or mismatched input rejected") {
    CHECK_THROWS_AS(macro_f1({}, {}, 3), DataError);
    CHECK_THROWS_AS(macro_f1({0, 1}, {0}, 3), DataError);
  }
}

TEST_CASE("export_metrics") {
  auto dir = std::filesystem::temp_directory_path() / "profe_metrics_test";
  std::filesystem::create_directories(dir);

  std::vector<MetricsRecord> recs = {
      {0, 0, 0.50, 100, 200, 0.0},
      {0, 1, 0.60, 100, 200, 0.0},
      {1, 0, 0.70, 250, 450, 0.0},
      {1, 1, 0.80, 250, 450, 0.0},
  };
  export_metrics(recs, "profe", dir.string());

  SUBCASE("csv header and row count") {
    std::ifstream csv(dir / "metrics.csv");
    std::string line;
    REQUIRE(std::getline(csv, line));
    CHECK(line ==
          "round,node_id,macro_f1,bytes_sent,bytes_received,elapsed_seconds");
    int rows = 0;
    while (std::getline(csv, line)) {
      if (!line.empty()) ++rows;
    }
    CHECK(rows == 4);
  }
  SUBCASE("csv first data row fields") {
    std::ifstream csv(dir / "metrics.csv");
    std::string line;
    std::getline(csv, line);
    std::getline(csv, line);
    CHECK(line == "0,0,0.500000,100,200,0.000000");
  }
  SUBCASE("summary totals equal CSV column sums") {
    std::ifstream js(dir / "summary.json");
    nlohmann::json j = nlohmann::json::parse(js);
    CHECK(j["algorithm"] == "profe");
    CHECK(j["rounds"] == 2);
    CHECK(j["total_bytes_sent"] == 700);       // 100+100+250+250
    CHECK(j["total_bytes_received"] == 1300);  // 200+200+450+450
    CHECK(j["final_mean_macro_f1"] == doctest::Approx(0.75));
    REQUIRE(j["per_round_mean_f1"].size() == 2);
    CHECK(j["per_round_mean_f1"][0]["mean_macro_f1"] ==
          doctest::Approx(0.55));
    CHECK(j["per_round_mean_f1"][1]["mean_macro_f1"] ==
          doctest::Approx(0.75));
  }
  SUBCASE("empty record list rejected") {
    CHECK_THROWS_AS(export_metrics({}, "profe", dir.string()), DataError);
  }
}
