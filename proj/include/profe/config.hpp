#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "profe/codec.hpp"
#include "profe/datagen.hpp"
#include "profe/distill.hpp"

namespace profe {

// Declarative description of one experiment run.
struct ExperimentConfig {
  Algorithm algorithm = Algorithm::ProFe;
  std::size_t nodes = 5;
  std::uint32_t rounds = 10;
  std::uint32_t epochs = 1;
  PartitionSpec::Scheme partition_scheme = PartitionSpec::Scheme::IID;
  double class_fraction = 0.4;  // ClassFraction only
  double dirichlet_alpha = 0.5;

  // Dataset: "mnist" loads IDX files from data_dir; "blobs" generates a
  // synthetic set.
  std::string dataset = "blobs";
  std::string data_dir;
  std::size_t mnist_subset = 0;  // 0 = whole file
  int blob_classes = 10;
  std::size_t blob_per_class = 120;
  std::size_t blob_dim = 32;
  float blob_spread = 0.08f;

  // Architectures: widths {input, hidden..., d}.
  std::vector<std::size_t> teacher_widths = {784, 256, 64};
  std::vector<std::size_t> student_widths = {784, 128, 64};

  DistillConfig distill;
  bool literal_eq4 = false;
  QuantMode quant = QuantMode::Float16;
  float learning_rate = 0.05f;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
  bool sequential = false;  // deterministic single-threaded mode
  std::string out_dir;

  void validate() const;
  std::string algorithm_name() const;
};

// JSON (de)serialization for --config files and the run-config echo.
ExperimentConfig config_from_json(const std::string& text);
std::string config_to_json(const ExperimentConfig& cfg);

}  // namespace profe
