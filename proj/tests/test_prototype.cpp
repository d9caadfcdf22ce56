#include <algorithm>
#include <cmath>
#include <random>

#include <doctest.h>

#include "profe/prototype.hpp"
#include "test_util.hpp"

using namespace profe;

namespace {

// Identity f1: repr == raw input (nonnegative data keeps ReLU inert).
SplitModel identity_repr(std::size_t d) {
  SplitModel m = SplitModel::mlp({d, d}, d, 0);
  std::vector<Tensor> params = m.param_snapshot();
  for (Tensor& t : params)
    for (float& f : t.v) f = 0.0f;
  for (std::size_t i = 0; i < d; ++i) {
    params[0].v[i * d + i] = 1.0f;
    params[2].v[i * d + i] = 1.0f;
  }
  m.load_params(params);
  return m;
}

LabeledDataset dataset_from(std::size_t width, int n_classes,
                            const std::vector<std::vector<float>>& rows,
                            const std::vector<int>& labels) {
  LabeledDataset ds;
  ds.width = width;
  ds.n_classes = n_classes;
  ds.provenance = "synthetic";
  for (const auto& r : rows) ds.x.insert(ds.x.end(), r.begin(), r.end());
  ds.y = labels;
  return ds;
}

}  // namespace

TEST_CASE("compute_local_prototypes basics") {
  SplitModel m = identity_repr(2);
  SUBCASE("single sample is its own prototype") {
    auto ds = dataset_from(2, 5, {{0.3f, 0.7f}}, {3});
    auto protos = compute_local_prototypes(m, ds);
    REQUIRE(protos.size() == 1);
    CHECK(protos[0].class_id == 3);
    CHECK(protos[0].count == 1);
    CHECK(protos[0].vec[0] == doctest::Approx(0.3));
    CHECK(protos[0].vec[1] == doctest::Approx(0.7));
  }
  SUBCASE("two samples average") {
    auto ds = dataset_from(2, 5, {{0.2f, 0.4f}, {0.6f, 0.8f}}, {1, 1});
    auto protos = compute_local_prototypes(m, ds);
    REQUIRE(protos.size() == 1);
    CHECK(protos[0].count == 2);
    CHECK(protos[0].vec[0] == doctest::Approx(0.4));
    CHECK(protos[0].vec[1] == doctest::Approx(0.6));
  }
  SUBCASE("identity f1 prototypes equal brute-force class means") {
    std::mt19937 rng(5);
    std::uniform_real_distribution<float> dist(0.0f, 1.0f);
    std::vector<std::vector<float>> rows;
    std::vector<int> labels;
    for (int i = 0; i < 40; ++i) {
      rows.push_back({dist(rng), dist(rng)});
      labels.push_back(i % 4);
    }
    auto ds = dataset_from(2, 4, rows, labels);
    auto protos = compute_local_prototypes(m, ds);
    REQUIRE(protos.size() == 4);
    for (const Prototype& p : protos) {
      double mean0 = 0.0, mean1 = 0.0;
      int n = 0;
      for (std::size_t i = 0; i < rows.size(); ++i)
        if (labels[i] == p.class_id) {
          mean0 += rows[i][0];
          mean1 += rows[i][1];
          ++n;
        }
      CHECK(p.count == static_cast<std::uint64_t>(n));
      CHECK(p.vec[0] == doctest::Approx(mean0 / n).epsilon(1e-5));
      CHECK(p.vec[1] == doctest::Approx(mean1 / n).epsilon(1e-5));
    }
  }
  SUBCASE("empty dataset rejected") {
    LabeledDataset empty;
    empty.width = 2;
    empty.n_classes = 2;
    CHECK_THROWS_AS(compute_local_prototypes(m, empty), DataError);
  }
}

TEST_CASE("aggregate_global") {
  SUBCASE("single holder keeps its prototype") {
    std::vector<std::pair<int, std::vector<Prototype>>> sets = {
        {0, {{7, {1.0f, 2.0f}, 5}}}};
    auto table = aggregate_global(sets);
    REQUIRE(table.count(7) == 1);
    CHECK(table[7].vec[0] == doctest::Approx(1.0));
    CHECK(table[7].vec[1] == doctest::Approx(2.0));
    CHECK(table[7].contributing_nodes == 1);
    CHECK(table[7].total_count == 5);
  }
  SUBCASE("hand-weighted mean: (0,0)x1 and (4,4)x3 give (3,3)") {
    std::vector<std::pair<int, std::vector<Prototype>>> sets = {
        {0, {{2, {0.0f, 0.0f}, 1}}}, {1, {{2, {4.0f, 4.0f}, 3}}}};
    auto table = aggregate_global(sets);
    CHECK(table[2].vec[0] == 3.0f);  // exact
    CHECK(table[2].vec[1] == 3.0f);
    CHECK(table[2].total_count == 4);
    CHECK(table[2].contributing_nodes == 2);
  }
  SUBCASE("literal eq4 variant divides by contributing node count") {
    std::vector<std::pair<int, std::vector<Prototype>>> sets = {
        {0, {{2, {0.0f, 0.0f}, 1}}}, {1, {{2, {4.0f, 4.0f}, 3}}}};
    auto table = aggregate_global(sets, true);
    CHECK(table[2].vec[0] == doctest::Approx(1.5));
  }
  SUBCASE("permutation invariance") {
    std::vector<std::pair<int, std::vector<Prototype>>> sets = {
        {0, {{1, {0.5f, 0.1f}, 2}}},
        {1, {{1, {0.9f, 0.3f}, 7}}},
        {2, {{1, {0.2f, 0.8f}, 4}}}};
    auto a = aggregate_global(sets);
    std::reverse(sets.begin(), sets.end());
    auto b = aggregate_global(sets);
    CHECK(a[1].vec[0] == doctest::Approx(b[1].vec[0]).epsilon(1e-6));
    CHECK(a[1].vec[1] == doctest::Approx(b[1].vec[1]).epsilon(1e-6));
    CHECK(a[1].total_count == b[1].total_count);
  }
  SUBCASE("per-class weights sum to 1") {
    std::vector<std::pair<int, std::vector<Prototype>>> sets = {
        {0, {{0, {1.0f}, 3}}}, {1, {{0, {1.0f}, 9}}}, {2, {{0, {1.0f}, 2}}}};
    auto table = aggregate_global(sets);
    // all inputs are the constant 1 vector, so the weighted mean is 1
    // exactly when the weights sum to 1
    CHECK(table[0].vec[0] == doctest::Approx(1.0).epsilon(1e-6));
  }
  SUBCASE("duplicate class from the same node rejected") {
    std::vector<std::pair<int, std::vector<Prototype>>> sets = {
        {0, {{1, {1.0f}, 1}, {1, {2.0f}, 1}}}};
    CHECK_THROWS_AS(aggregate_global(sets), ProtocolError);
  }
  SUBCASE("width mismatch rejected") {
    std::vector<std::pair<int, std::vector<Prototype>>> sets = {
        {0, {{1, {1.0f, 2.0f}, 1}}}, {1, {{1, {1.0f}, 1}}}};
    CHECK_THROWS_AS(aggregate_global(sets), DimensionError);
  }
}

TEST_CASE("shard-pooling equivalence under a frozen shared model") {
  SplitModel m = SplitModel::mlp({6, 5, 4}, 3, 33);
  std::mt19937 rng(9);
  std::uniform_real_distribution<float> dist(0.0f, 1.0f);
  std::vector<std::vector<float>> rows;
  std::vector<int> labels;
  for (int i = 0; i < 60; ++i) {
    std::vector<float> r(6);
    for (float& f : r) f = dist(rng);
    rows.push_back(r);
    labels.push_back(i % 3);
  }
  auto pooled = dataset_from(6, 3, rows, labels);

  // three disjoint shards
  std::vector<std::pair<int, std::vector<Prototype>>> sets;
  for (int node = 0; node < 3; ++node) {
    std::vector<std::vector<float>> srows;
    std::vector<int> slabels;
    for (std::size_t i = static_cast<std::size_t>(node) * 20;
         i < static_cast<std::size_t>(node + 1) * 20; ++i) {
      srows.push_back(rows[i]);
      slabels.push_back(labels[i]);
    }
    auto shard = dataset_from(6, 3, srows, slabels);
    sets.emplace_back(node, compute_local_prototypes(m, shard));
  }
  auto table = aggregate_global(sets);
  auto pooled_protos = compute_local_prototypes(m, pooled);
  for (const Prototype& p : pooled_protos) {
    REQUIRE(table.count(p.class_id) == 1);
    const auto& g = table[p.class_id];
    CHECK(g.total_count == p.count);
    for (std::size_t k = 0; k < p.vec.size(); ++k)
      CHECK(std::fabs(g.vec[k] - p.vec[k]) < 1e-5f);
  }
}

TEST_CASE("predict_nearest") {
  GlobalPrototypeTable table;
  table[0] = {{0.0f, 0.0f}, 1, 1};
  table[1] = {{10.0f, 10.0f}, 1, 1};
  SUBCASE("exact match wins") {
    GlobalPrototypeTable t;
    t[3] = {{1.0f, 2.0f}, 1, 1};
    t[5] = {{4.0f, 4.0f}, 1, 1};
    CHECK(predict_nearest({1.0f, 2.0f}, t) == 3);
  }
  SUBCASE("geometry") { CHECK(predict_nearest({1.0f, 1.0f}, table) == 0); }
  SUBCASE("tie breaks toward the smaller class id") {
    GlobalPrototypeTable t;
    t[2] = {{0.0f}, 1, 1};
    t[7] = {{2.0f}, 1, 1};
    CHECK(predict_nearest({1.0f}, t) == 2);
  }
  SUBCASE("empty table is a state error") {
    CHECK_THROWS_AS(predict_nearest({1.0f}, {}), StateError);
  }
  SUBCASE("translation invariance") {
    std::mt19937 rng(41);
    std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
    for (int trial = 0; trial < 50; ++trial) {
      GlobalPrototypeTable t;
      for (int c = 0; c < 4; ++c)
        t[c] = {{dist(rng), dist(rng), dist(rng)}, 1, 1};
      std::vector<float> repr = {dist(rng), dist(rng), dist(rng)};
      int base = predict_nearest(repr, t);
      const float shift = dist(rng) * 3.0f;
      GlobalPrototypeTable shifted = t;
      for (auto& [c, g] : shifted)
        for (float& f : g.vec) f += shift;
      std::vector<float> repr_shifted = repr;
      for (float& f : repr_shifted) f += shift;
      CHECK(predict_nearest(repr_shifted, shifted) == base);
    }
  }
}

TEST_CASE("proto_mse_term") {
  GlobalPrototypeTable table;
  table[0] = {{0.0f, 0.0f}, 1, 1};
  table[1] = {{1.0f, 1.0f}, 1, 1};

  SUBCASE("reprs equal to prototypes give 0") {
    Tensor reprs({2, 2}, {0.0f, 0.0f, 1.0f, 1.0f});
    CHECK(proto_mse_term(reprs, LabelBatch({0, 1}, 2), table) == 0.0f);
  }
  SUBCASE("hand arithmetic, d=2") {
    Tensor reprs({1, 2}, {1.0f, 0.0f});
    CHECK(proto_mse_term(reprs, LabelBatch({0}, 2), table) ==
          doctest::Approx(0.5));
  }
  SUBCASE("absent classes are excluded from the mean") {
    Tensor reprs({2, 2}, {1.0f, 0.0f, 9.0f, 9.0f});
    // class 5 has no prototype; only row 0 counts
    CHECK(proto_mse_term(reprs, LabelBatch({0, 5}, 6), table) ==
          doctest::Approx(0.5));
  }
  SUBCASE("no class present gives 0") {
    Tensor reprs({1, 2}, {1.0f, 0.0f});
    CHECK(proto_mse_term(reprs, LabelBatch({3}, 6), table) == 0.0f);
  }
  SUBCASE("batch value equals mean of per-sample mse calls") {
    std::mt19937 rng(17);
    std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
    Tensor reprs({4, 2});
    for (float& f : reprs.v) f = dist(rng);
    LabelBatch labels({0, 1, 1, 0}, 2);
    double expect = 0.0;
    for (std::size_t r = 0; r < 4; ++r) {
      Tensor row({1, 2}, {reprs.at(r, 0), reprs.at(r, 1)});
      Tensor proto({1, 2},
                   {table[labels.labels[r]].vec[0],
                    table[labels.labels[r]].vec[1]});
      expect += ops::mse(row, proto);
    }
    expect /= 4.0;
    CHECK(proto_mse_term(reprs, labels, table) ==
          doctest::Approx(expect).epsilon(1e-6));
  }
  SUBCASE("gradient flows into reprs only") {
    SplitModel m = SplitModel::mlp({3, 2}, 2, 55);
    Tensor x = testutil::random_tensor({3, 3}, 56, 0.0f, 1.0f);
    LabelBatch labels({0, 1, 0}, 2);
    testutil::check_model_grads(m, [&] {
      auto [repr, logits] = m.forward_split(x);
      return proto_mse_term(repr, labels, table);
    });
  }
}
