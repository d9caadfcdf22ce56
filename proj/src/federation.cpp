#include "profe/federation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

namespace profe {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                       std::uint64_t c) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (a + 1) +
                    0xBF58476D1CE4E5B9ull * (b + 1) +
                    0x94D049BB133111EBull * (c + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

namespace {

int log_level() {
  static int level = [] {
    const char* env = std::getenv("PROFE_LOG");
    if (!env) return 1;
    std::string s(env);
    if (s == "error") return 0;
    if (s == "debug") return 2;
    return 1;
  }();
  return level;
}

void log_info(const std::string& msg) {
  if (log_level() >= 1) std::fprintf(stderr, "[profe] %s\n", msg.c_str());
}

std::vector<std::vector<std::size_t>> make_batches(
    std::size_t n, std::size_t batch_size, std::mt19937& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    std::size_t end = std::min(n, start + batch_size);
    batches.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(start),
                         idx.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

}  // namespace

void local_train(Node& node, Algorithm algorithm, std::uint32_t epochs,
                 float lr, std::size_t batch_size,
                 std::uint64_t shuffle_seed) {
  if (node.train.size() == 0)
    throw ConfigError("node " + std::to_string(node.id) +
                      ": empty training shard");
  const bool use_teacher =
      algorithm == Algorithm::ProFe && node.distill.alpha_s > 0.0f;

  for (std::uint32_t epoch = 0; epoch < epochs; ++epoch) {
    std::mt19937 rng(static_cast<std::mt19937::result_type>(
        mix_seed(shuffle_seed, epoch)));
    for (const auto& batch_idx :
         make_batches(node.train.size(), batch_size, rng)) {
      Tensor batch = node.train.batch(batch_idx);
      std::vector<int> batch_labels;
      batch_labels.reserve(batch_idx.size());
      for (std::size_t i : batch_idx)
        batch_labels.push_back(node.train.y[i]);
      LabelBatch labels(std::move(batch_labels), node.train.n_classes);

      Tensor teacher_logits, teacher_repr;
      if (use_teacher) {
        auto [repr_t, y_t] = node.teacher->forward_split(batch);
        Var t_loss = teacher_loss(y_t, repr_t, labels, node.table,
                                  node.distill.beta_t);
        backward(t_loss);
        // The student distills from the pre-step teacher outputs.
        teacher_logits = val(y_t);
        teacher_repr = val(repr_t);
        node.teacher->sgd_step(lr);
      }

      DistillConfig cfg = node.distill;
      switch (algorithm) {
        case Algorithm::FedAvg:
          cfg.alpha_s = 0.0f;
          cfg.beta_s = 0.0f;
          break;
        case Algorithm::FedProto:
          cfg.alpha_s = 0.0f;
          break;
        case Algorithm::ProFe:
          break;
      }
      auto [repr_s, y_s] = node.student.forward_split(batch);
      Var s_loss = student_loss(y_s, teacher_logits, repr_s, teacher_repr,
                                labels, node.table, cfg);
      if (!std::isfinite(val(s_loss).v[0]))
        throw StateError("node " + std::to_string(node.id) +
                         ": non-finite training loss");
      backward(s_loss);
      node.student.sgd_step(lr);
    }
  }
}

RoundMessage build_message(const Node& node, Algorithm algorithm,
                           QuantMode quant, std::uint32_t round,
                           const std::vector<Prototype>& protos) {
  RoundMessage m;
  m.sender = static_cast<std::uint16_t>(node.id);
  m.round = round;
  m.algorithm = algorithm;
  const QuantMode param_mode =
      algorithm == Algorithm::FedAvg ? QuantMode::Fp32 : quant;
  if (algorithm != Algorithm::FedProto)
    for (const Tensor& t : node.student.param_snapshot())
      m.params.push_back(quantize(t, param_mode));
  if (algorithm != Algorithm::FedAvg) {
    for (const Prototype& p : protos) {
      ProtoRecord rec;
      rec.class_id = static_cast<std::uint16_t>(p.class_id);
      rec.count = p.count;
      rec.vec = quantize(
          Tensor({p.vec.size()}, std::vector<float>(p.vec)), quant);
      m.prototypes.push_back(std::move(rec));
    }
  }
  return m;
}

std::vector<Inbox> broadcast_round(
    const std::vector<std::vector<std::uint8_t>>& encoded,
    const Topology& topology, ByteLedger& ledger) {
  const std::size_t N = topology.nodes;
  if (encoded.size() != N)
    throw ProtocolError("broadcast_round: expected " + std::to_string(N) +
                        " messages, got " + std::to_string(encoded.size()));
  std::vector<Inbox> inboxes(N);
  for (std::size_t sender = 0; sender < N; ++sender)
    ledger.record_send(static_cast<int>(sender),
                       encoded[sender].size() * (N - 1));
  for (std::size_t receiver = 0; receiver < N; ++receiver) {
    for (std::size_t sender = 0; sender < N; ++sender) {
      if (sender == receiver) continue;
      ledger.record_receive(static_cast<int>(receiver),
                            encoded[sender].size());
      try {
        inboxes[receiver].messages.push_back(decode_message(encoded[sender]));
      } catch (const ProtocolError&) {
        ++inboxes[receiver].decode_errors;
      }
    }
  }
  return inboxes;
}

std::uint64_t param_digest(const std::vector<Tensor>& params) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (const Tensor& t : params) {
    const auto* bytes = reinterpret_cast<const std::uint8_t*>(t.v.data());
    for (std::size_t i = 0; i < t.v.size() * sizeof(float); ++i) {
      h ^= bytes[i];
      h *= 0x100000001B3ull;
    }
  }
  return h;
}

std::vector<Tensor> aggregate_models(
    const std::vector<std::vector<Tensor>>& param_sets) {
  if (param_sets.empty())
    throw ProtocolError("aggregate_models: no parameter sets");
  const std::size_t n_params = param_sets.front().size();
  for (const auto& set : param_sets) {
    if (set.size() != n_params)
      throw ProtocolError("aggregate_models: parameter count mismatch");
    for (std::size_t i = 0; i < n_params; ++i)
      if (set[i].shape != param_sets.front()[i].shape)
        throw ProtocolError("aggregate_models: architecture mismatch at "
                            "parameter " +
                            std::to_string(i));
  }
  const float inv = 1.0f / static_cast<float>(param_sets.size());
  std::vector<Tensor> out;
  out.reserve(n_params);
  for (std::size_t i = 0; i < n_params; ++i) {
    Tensor acc(param_sets.front()[i].shape);
    for (const auto& set : param_sets)
      for (std::size_t k = 0; k < acc.numel(); ++k) acc.v[k] += set[i].v[k];
    for (float& f : acc.v) f *= inv;
    out.push_back(std::move(acc));
  }
  return out;
}

LabeledDataset load_experiment_dataset(const ExperimentConfig& cfg) {
  if (cfg.dataset == "mnist") {
    LabeledDataset ds = load_mnist(cfg.data_dir);
    if (cfg.mnist_subset > 0 && cfg.mnist_subset < ds.size()) {
      std::vector<std::size_t> idx(ds.size());
      std::iota(idx.begin(), idx.end(), 0);
      std::mt19937 rng(static_cast<std::mt19937::result_type>(
          mix_seed(cfg.seed, 0x4D)));
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(cfg.mnist_subset);
      std::sort(idx.begin(), idx.end());
      ds = ds.subset(idx);
    }
    return ds;
  }
  return gen_blobs(cfg.blob_classes, cfg.blob_per_class, cfg.blob_dim,
                   cfg.blob_spread, mix_seed(cfg.seed, 0x42));
}

namespace {

std::vector<int> evaluate_predictions(Node& node, Algorithm algorithm,
                                      const LabeledDataset& test) {
  std::vector<int> preds;
  preds.reserve(test.size());
  const bool proto_inference =
      algorithm != Algorithm::FedAvg && !node.table.empty();
  const std::size_t chunk = 256;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < test.size(); start += chunk) {
    std::size_t end = std::min(test.size(), start + chunk);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    auto [repr, logits] = node.student.forward_eval(test.batch(idx));
    const std::size_t d = repr.cols(), C = logits.cols();
    for (std::size_t r = 0; r < idx.size(); ++r) {
      if (proto_inference) {
        std::vector<float> rv(repr.v.begin() + static_cast<std::ptrdiff_t>(r * d),
                              repr.v.begin() +
                                  static_cast<std::ptrdiff_t>((r + 1) * d));
        preds.push_back(predict_nearest(rv, node.table));
      } else {
        std::size_t best = 0;
        for (std::size_t c = 1; c < C; ++c)
          if (logits.v[r * C + c] > logits.v[r * C + best]) best = c;
        preds.push_back(static_cast<int>(best));
      }
    }
  }
  return preds;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto wall_start = std::chrono::steady_clock::now();

  LabeledDataset full = load_experiment_dataset(cfg);
  auto [pool, global_test] =
      split_global_test(full, 0.10, mix_seed(cfg.seed, 0x47));
  PartitionSpec spec;
  spec.scheme = cfg.partition_scheme;
  spec.class_fraction = cfg.class_fraction;
  spec.alpha = cfg.dirichlet_alpha;
  spec.nodes = cfg.nodes;
  spec.seed = mix_seed(cfg.seed, 0x50);
  std::vector<LabeledDataset> shards = partition(pool, spec);

  const std::size_t N = cfg.nodes;
  std::vector<Node> nodes;
  nodes.reserve(N);
  for (std::size_t i = 0; i < N; ++i) {
    Node node;
    node.id = static_cast<int>(i);
    auto [train, ltest] =
        split_local(shards[i], 0.80, mix_seed(cfg.seed, 0x4C, i));
    node.train = std::move(train);
    node.local_test = std::move(ltest);
    const auto& arch = cfg.algorithm == Algorithm::FedAvg
                           ? cfg.teacher_widths
                           : cfg.student_widths;
    node.student = SplitModel::mlp(
        arch, static_cast<std::size_t>(full.n_classes),
        mix_seed(cfg.seed, 0x53, i));
    if (cfg.algorithm == Algorithm::ProFe)
      node.teacher = SplitModel::mlp(
          cfg.teacher_widths, static_cast<std::size_t>(full.n_classes),
          mix_seed(cfg.seed, 0x54, i));
    node.distill = cfg.distill;
    nodes.push_back(std::move(node));
  }

  ExperimentResult result;
  Topology topology{N};

  for (std::uint32_t round = 0; round < cfg.rounds; ++round) {
    std::vector<double> train_seconds(N, 0.0);
    auto train_one = [&](std::size_t i) {
      const auto t0 = std::chrono::steady_clock::now();
      try {
        local_train(nodes[i], cfg.algorithm, cfg.epochs, cfg.learning_rate,
                    cfg.batch_size, mix_seed(cfg.seed, 0x45, i, round));
      } catch (const std::exception& e) {
        throw StateError("node " + std::to_string(i) + " round " +
                         std::to_string(round) + ": " + e.what());
      }
      train_seconds[i] =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
              .count();
    };
    if (cfg.sequential) {
      for (std::size_t i = 0; i < N; ++i) train_one(i);
    } else {
      std::vector<std::thread> workers;
      std::exception_ptr error;
      std::mutex error_mu;
      workers.reserve(N);
      for (std::size_t i = 0; i < N; ++i)
        workers.emplace_back([&, i] {
          try {
            train_one(i);
          } catch (...) {
            std::lock_guard<std::mutex> lock(error_mu);
            if (!error) error = std::current_exception();
          }
        });
      for (auto& w : workers) w.join();
      if (error) std::rethrow_exception(error);
    }

    // Prototypes from the post-training student model.
    std::vector<std::vector<Prototype>> protos(N);
    if (cfg.algorithm != Algorithm::FedAvg)
      for (std::size_t i = 0; i < N; ++i)
        protos[i] =
            compute_local_prototypes(nodes[i].student, nodes[i].train);

    std::vector<std::vector<std::uint8_t>> encoded(N);
    for (std::size_t i = 0; i < N; ++i)
      encoded[i] = encode_message(build_message(
          nodes[i], cfg.algorithm, cfg.quant, round, protos[i]));

    std::vector<Inbox> inboxes =
        broadcast_round(encoded, topology, result.ledger);
    for (const Inbox& ib : inboxes) result.decode_errors += ib.decode_errors;

    // Each node aggregates from its own inbox plus its own message as it
    // went out on the wire, in sender-id order.
    for (std::size_t i = 0; i < N; ++i) {
      Node& node = nodes[i];
      std::vector<RoundMessage> all = inboxes[i].messages;
      all.push_back(decode_message(encoded[i]));
      std::sort(all.begin(), all.end(),
                [](const RoundMessage& a, const RoundMessage& b) {
                  return a.sender < b.sender;
                });
      if (cfg.algorithm != Algorithm::FedProto) {
        std::vector<std::vector<Tensor>> param_sets;
        param_sets.reserve(all.size());
        for (const RoundMessage& m : all) {
          std::vector<Tensor> set;
          set.reserve(m.params.size());
          for (const QuantizedTensor& q : m.params)
            set.push_back(dequantize(q));
          param_sets.push_back(std::move(set));
        }
        node.student.load_params(aggregate_models(param_sets));
      }
      if (cfg.algorithm != Algorithm::FedAvg) {
        std::vector<std::pair<int, std::vector<Prototype>>> sets;
        sets.reserve(all.size());
        for (const RoundMessage& m : all) {
          std::vector<Prototype> ps;
          ps.reserve(m.prototypes.size());
          for (const ProtoRecord& rec : m.prototypes) {
            Prototype p;
            p.class_id = rec.class_id;
            p.count = rec.count;
            p.vec = dequantize(rec.vec).v;
            ps.push_back(std::move(p));
          }
          sets.emplace_back(static_cast<int>(m.sender), std::move(ps));
        }
        node.table = aggregate_global(sets, cfg.literal_eq4);
      }
      if (cfg.algorithm == Algorithm::ProFe) decay_alpha(node.distill);
    }

    std::vector<std::uint64_t> digests(N);
    for (std::size_t i = 0; i < N; ++i)
      digests[i] = param_digest(nodes[i].student.param_snapshot());
    result.round_param_digests.push_back(std::move(digests));

    // Evaluate on the global test split after aggregation.
    std::vector<int> truths = global_test.y;
    for (std::size_t i = 0; i < N; ++i) {
      std::vector<int> preds =
          evaluate_predictions(nodes[i], cfg.algorithm, global_test);
      MetricsRecord rec;
      rec.round = round;
      rec.node_id = nodes[i].id;
      rec.macro_f1 = macro_f1(preds, truths, full.n_classes);
      rec.bytes_sent = result.ledger.bytes_sent(nodes[i].id);
      rec.bytes_received = result.ledger.bytes_received(nodes[i].id);
      rec.elapsed_seconds = cfg.sequential ? 0.0 : train_seconds[i];
      result.records.push_back(rec);
    }
    log_info(cfg.algorithm_name() + " round " + std::to_string(round) +
             " done, mean f1 " +
             std::to_string(
                 std::accumulate(result.records.end() -
                                     static_cast<std::ptrdiff_t>(N),
                                 result.records.end(), 0.0,
                                 [](double a, const MetricsRecord& r) {
                                   return a + r.macro_f1;
                                 }) /
                 static_cast<double>(N)));
  }

  result.final_params.reserve(N);
  for (Node& node : nodes)
    result.final_params.push_back(node.student.param_snapshot());

  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                    wall_start)
          .count();
  return result;
}

}  // namespace profe
