#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "profe/codec.hpp"
#include "profe/config.hpp"
#include "profe/datagen.hpp"
#include "profe/distill.hpp"
#include "profe/metrics.hpp"
#include "profe/nn.hpp"
#include "profe/prototype.hpp"

namespace profe {

// Full-mesh topology; node count is all there is to it.
struct Topology {
  std::size_t nodes = 0;
};

struct RoundPlan {
  std::uint32_t rounds = 1;
  std::uint32_t epochs = 1;
  Algorithm algorithm = Algorithm::ProFe;
};

struct Node {
  int id = 0;
  std::optional<SplitModel> teacher;  // ProFe only, never serialized
  SplitModel student;                 // the shared/aggregated model
  LabeledDataset train;
  LabeledDataset local_test;
  DistillConfig distill;
  GlobalPrototypeTable table;
};

// Deterministic seed derivation (splitmix64-style mixing).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                       std::uint64_t c = 0);

// One round of local optimization on the node's shard. ProFe updates the
// teacher first and the student second per batch; the teacher is skipped
// entirely once alpha_s == 0. FedAvg and FedProto train the student only.
void local_train(Node& node, Algorithm algorithm, std::uint32_t epochs,
                 float lr, std::size_t batch_size, std::uint64_t shuffle_seed);

// Quantized per-round broadcast unit for this node. FedAvg sends Fp32
// parameters, FedProto sends prototypes only.
RoundMessage build_message(const Node& node, Algorithm algorithm,
                           QuantMode quant, std::uint32_t round,
                           const std::vector<Prototype>& protos);

struct Inbox {
  std::vector<RoundMessage> messages;  // decoded peer messages
  std::size_t decode_errors = 0;
};

// Full-mesh delivery of pre-encoded messages (index == sender id). Each
// inbox receives every other node's message; undecodable messages are
// dropped and counted. The ledger records exact wire sizes.
std::vector<Inbox> broadcast_round(
    const std::vector<std::vector<std::uint8_t>>& encoded,
    const Topology& topology, ByteLedger& ledger);

// Unweighted elementwise mean of parameter sets (already dequantized).
std::vector<Tensor> aggregate_models(
    const std::vector<std::vector<Tensor>>& param_sets);

struct ExperimentResult {
  std::vector<MetricsRecord> records;
  ByteLedger ledger;
  std::uint64_t decode_errors = 0;
  double wall_seconds = 0.0;
  // FNV-1a digest of each node's post-aggregation student parameters,
  // indexed [round][node]. Equal digests across nodes witness consensus.
  std::vector<std::vector<std::uint64_t>> round_param_digests;
  std::vector<std::vector<Tensor>> final_params;  // per node
};

// FNV-1a 64 over the raw float bytes, in snapshot order.
std::uint64_t param_digest(const std::vector<Tensor>& params);

ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Dataset assembly per config (shared with the CLI and tests).
LabeledDataset load_experiment_dataset(const ExperimentConfig& cfg);

}  // namespace profe
