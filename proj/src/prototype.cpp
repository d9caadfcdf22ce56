#include "profe/prototype.hpp"

#include <cmath>
#include <limits>
#include <numeric>

namespace profe {

std::vector<Prototype> compute_local_prototypes(SplitModel& model,
                                                const LabeledDataset& data) {
  if (data.size() == 0)
    throw DataError("compute_local_prototypes: empty dataset");
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  Tensor reprs = model.forward_repr(data.batch(idx));
  const std::size_t d = reprs.cols();

  std::map<int, Prototype> acc;
  for (std::size_t i = 0; i < data.size(); ++i) {
    Prototype& p = acc[data.y[i]];
    if (p.count == 0) {
      p.class_id = data.y[i];
      p.vec.assign(d, 0.0f);
    }
    for (std::size_t k = 0; k < d; ++k) p.vec[k] += reprs.v[i * d + k];
    ++p.count;
  }
  std::vector<Prototype> out;
  out.reserve(acc.size());
  for (auto& [cls, p] : acc) {
    for (float& f : p.vec) f /= static_cast<float>(p.count);
    out.push_back(std::move(p));
  }
  return out;
}

GlobalPrototypeTable aggregate_global(
    const std::vector<std::pair<int, std::vector<Prototype>>>& prototype_sets,
    bool literal_eq4) {
  // First pass: per-class totals N_j and width check.
  std::map<int, std::uint64_t> totals;
  std::map<int, std::vector<int>> seen_from;  // duplicate detection
  std::size_t d = 0;
  for (const auto& [node_id, protos] : prototype_sets) {
    for (const Prototype& p : protos) {
      if (p.count == 0)
        throw DataError("aggregate_global: prototype with zero count");
      if (d == 0) d = p.vec.size();
      if (p.vec.size() != d)
        throw DimensionError("aggregate_global: width mismatch, expected " +
                             std::to_string(d) + " got " +
                             std::to_string(p.vec.size()));
      auto& nodes = seen_from[p.class_id];
      for (int n : nodes)
        if (n == node_id)
          throw ProtocolError("aggregate_global: duplicate class " +
                              std::to_string(p.class_id) + " from node " +
                              std::to_string(node_id));
      nodes.push_back(node_id);
      totals[p.class_id] += p.count;
    }
  }

  GlobalPrototypeTable table;
  for (const auto& [node_id, protos] : prototype_sets) {
    for (const Prototype& p : protos) {
      GlobalPrototype& g = table[p.class_id];
      if (g.vec.empty()) g.vec.assign(d, 0.0f);
      const float w = static_cast<float>(static_cast<double>(p.count) /
                                         static_cast<double>(totals[p.class_id]));
      for (std::size_t k = 0; k < d; ++k) g.vec[k] += w * p.vec[k];
      g.total_count += p.count;
      ++g.contributing_nodes;
    }
  }
  if (literal_eq4)
    for (auto& [cls, g] : table)
      for (float& f : g.vec) f /= static_cast<float>(g.contributing_nodes);
  return table;
}

int predict_nearest(const std::vector<float>& repr,
                    const GlobalPrototypeTable& table) {
  if (table.empty())
    throw StateError("predict_nearest: empty global prototype table");
  int best = 0;
  float best_d2 = std::numeric_limits<float>::infinity();
  for (const auto& [cls, g] : table) {
    if (g.vec.size() != repr.size())
      throw DimensionError("predict_nearest: repr width " +
                           std::to_string(repr.size()) + " != prototype width " +
                           std::to_string(g.vec.size()));
    float d2 = 0.0f;
    for (std::size_t k = 0; k < repr.size(); ++k) {
      float diff = repr[k] - g.vec[k];
      d2 += diff * diff;
    }
    // std::map iterates class ids in increasing order, so strict < keeps
    // the smallest class on ties.
    if (d2 < best_d2) {
      best_d2 = d2;
      best = cls;
    }
  }
  return best;
}

namespace {

// Shared setup for the scalar and autograd prototype-MSE paths: per-row
// target vectors plus an inclusion mask for classes present in the table.
std::pair<Tensor, std::vector<char>> proto_targets(
    const Tensor& repr_batch, const LabelBatch& labels,
    const GlobalPrototypeTable& table) {
  const std::size_t B = repr_batch.rows(), d = repr_batch.cols();
  if (labels.size() != B)
    throw DimensionError("proto_mse_term: batch size mismatch");
  Tensor targets(repr_batch.shape);
  std::vector<char> mask(B, 0);
  for (std::size_t r = 0; r < B; ++r) {
    auto it = table.find(labels.labels[r]);
    if (it == table.end()) continue;
    if (it->second.vec.size() != d)
      throw DimensionError("proto_mse_term: prototype width " +
                           std::to_string(it->second.vec.size()) +
                           " != repr width " + std::to_string(d));
    mask[r] = 1;
    for (std::size_t k = 0; k < d; ++k)
      targets.v[r * d + k] = it->second.vec[k];
  }
  return {std::move(targets), std::move(mask)};
}

}  // namespace

float proto_mse_term(const Tensor& repr_batch, const LabelBatch& labels,
                     const GlobalPrototypeTable& table) {
  auto [targets, mask] = proto_targets(repr_batch, labels, table);
  const std::size_t B = repr_batch.rows(), d = repr_batch.cols();
  std::size_t m = 0;
  float total = 0.0f;
  for (std::size_t r = 0; r < B; ++r) {
    if (!mask[r]) continue;
    ++m;
    for (std::size_t k = 0; k < d; ++k) {
      float diff = repr_batch.v[r * d + k] - targets.v[r * d + k];
      total += diff * diff;
    }
  }
  return m ? total / static_cast<float>(m * d) : 0.0f;
}

Var proto_mse_term(const Var& repr_batch, const LabelBatch& labels,
                   const GlobalPrototypeTable& table) {
  auto [targets, mask] = proto_targets(repr_batch->value, labels, table);
  return masked_row_mse(repr_batch, targets, mask);
}

}  // namespace profe
