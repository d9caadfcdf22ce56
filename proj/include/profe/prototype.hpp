#pragma once

#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "profe/autograd.hpp"
#include "profe/datagen.hpp"
#include "profe/nn.hpp"
#include "profe/tensor.hpp"

namespace profe {

// Mean representation of one class at one node, with its sample count.
struct Prototype {
  int class_id = 0;
  std::vector<float> vec;
  std::uint64_t count = 0;
};

struct GlobalPrototype {
  std::vector<float> vec;
  std::uint32_t contributing_nodes = 0;
  std::uint64_t total_count = 0;
};

// class_id -> aggregated prototype. May cover only a subset of classes.
using GlobalPrototypeTable = std::map<int, GlobalPrototype>;

// Per-class mean of f1 representations over the local dataset.
std::vector<Prototype> compute_local_prototypes(SplitModel& model,
                                                const LabeledDataset& data);

// Count-weighted mean across nodes. With literal_eq4 the result is
// additionally divided by the number of contributing nodes.
GlobalPrototypeTable aggregate_global(
    const std::vector<std::pair<int, std::vector<Prototype>>>& prototype_sets,
    bool literal_eq4 = false);

// Class of the Euclidean-nearest global prototype; ties break toward the
// smallest class id.
int predict_nearest(const std::vector<float>& repr,
                    const GlobalPrototypeTable& table);

// Mean over samples whose class is in the table of the per-sample MSE
// between the representation and its class prototype. 0 when no sample's
// class is present.
float proto_mse_term(const Tensor& repr_batch, const LabelBatch& labels,
                     const GlobalPrototypeTable& table);

// Autograd version; prototypes act as constants.
Var proto_mse_term(const Var& repr_batch, const LabelBatch& labels,
                   const GlobalPrototypeTable& table);

}  // namespace profe
