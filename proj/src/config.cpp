#include "profe/config.hpp"

#include <json.hpp>

namespace profe {

void ExperimentConfig::validate() const {
  if (nodes < 2) throw ConfigError("nodes: need at least 2 nodes");
  if (rounds < 1) throw ConfigError("rounds: must be >= 1");
  if (epochs < 1) throw ConfigError("epochs: must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size: must be >= 1");
  if (!(learning_rate >= 0.0f)) throw ConfigError("lr: must be >= 0");
  if (dataset != "mnist" && dataset != "blobs")
    throw ConfigError("dataset: must be mnist or blobs, got '" + dataset +
                      "'");
  if (dataset == "mnist" && data_dir.empty())
    throw ConfigError("data_dir: required for dataset mnist");
  if (teacher_widths.size() < 2 || student_widths.size() < 2)
    throw ConfigError("architecture: widths need input and repr entries");
  if (teacher_widths.back() != student_widths.back())
    throw ConfigError(
        "architecture: teacher and student representation widths differ (" +
        std::to_string(teacher_widths.back()) + " vs " +
        std::to_string(student_widths.back()) + ")");
  if (partition_scheme == PartitionSpec::Scheme::ClassFraction &&
      !(class_fraction > 0.0 && class_fraction <= 1.0))
    throw ConfigError("partition: class fraction must be in (0,1]");
  if (partition_scheme == PartitionSpec::Scheme::Dirichlet &&
      !(dirichlet_alpha > 0.0))
    throw ConfigError("partition: dirichlet alpha must be > 0");
  distill.validate();
}

std::string ExperimentConfig::algorithm_name() const {
  switch (algorithm) {
    case Algorithm::ProFe: return "profe";
    case Algorithm::FedAvg: return "fedavg";
    case Algorithm::FedProto: return "fedproto";
  }
  return "unknown";
}

namespace {

Algorithm algorithm_from_name(const std::string& s) {
  if (s == "profe") return Algorithm::ProFe;
  if (s == "fedavg") return Algorithm::FedAvg;
  if (s == "fedproto") return Algorithm::FedProto;
  throw ConfigError("algorithm: unknown value '" + s + "'");
}

QuantMode quant_from_name(const std::string& s) {
  if (s == "f16") return QuantMode::Float16;
  if (s == "i16") return QuantMode::Int16Affine;
  if (s == "none") return QuantMode::Fp32;
  throw ConfigError("quant: unknown value '" + s + "'");
}

std::string quant_name(QuantMode m) {
  switch (m) {
    case QuantMode::Float16: return "f16";
    case QuantMode::Int16Affine: return "i16";
    case QuantMode::Fp32: return "none";
  }
  return "unknown";
}

std::string scheme_name(PartitionSpec::Scheme s) {
  switch (s) {
    case PartitionSpec::Scheme::IID: return "iid";
    case PartitionSpec::Scheme::ClassFraction: return "classes";
    case PartitionSpec::Scheme::Dirichlet: return "dirichlet";
  }
  return "unknown";
}

}  // namespace

ExperimentConfig config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  ExperimentConfig c;
  try {
    if (j.contains("algorithm"))
      c.algorithm = algorithm_from_name(j["algorithm"]);
    if (j.contains("nodes")) c.nodes = j["nodes"];
    if (j.contains("rounds")) c.rounds = j["rounds"];
    if (j.contains("epochs")) c.epochs = j["epochs"];
    if (j.contains("partition")) {
      const std::string s = j["partition"].value("scheme", "iid");
      if (s == "iid") c.partition_scheme = PartitionSpec::Scheme::IID;
      else if (s == "classes") {
        c.partition_scheme = PartitionSpec::Scheme::ClassFraction;
        c.class_fraction = j["partition"].value("fraction", 0.4);
      } else if (s == "dirichlet") {
        c.partition_scheme = PartitionSpec::Scheme::Dirichlet;
        c.dirichlet_alpha = j["partition"].value("alpha", 0.5);
      } else {
        throw ConfigError("partition.scheme: unknown value '" + s + "'");
      }
    }
    if (j.contains("dataset")) c.dataset = j["dataset"];
    if (j.contains("data_dir")) c.data_dir = j["data_dir"];
    if (j.contains("mnist_subset")) c.mnist_subset = j["mnist_subset"];
    if (j.contains("blobs")) {
      const auto& b = j["blobs"];
      c.blob_classes = b.value("classes", c.blob_classes);
      c.blob_per_class = b.value("per_class", c.blob_per_class);
      c.blob_dim = b.value("dim", c.blob_dim);
      c.blob_spread = b.value("spread", c.blob_spread);
    }
    if (j.contains("teacher_widths"))
      c.teacher_widths = j["teacher_widths"].get<std::vector<std::size_t>>();
    if (j.contains("student_widths"))
      c.student_widths = j["student_widths"].get<std::vector<std::size_t>>();
    if (j.contains("temperature")) c.distill.temperature = j["temperature"];
    if (j.contains("alpha_s")) c.distill.alpha_s = j["alpha_s"];
    if (j.contains("beta_s")) c.distill.beta_s = j["beta_s"];
    if (j.contains("beta_t")) c.distill.beta_t = j["beta_t"];
    if (j.contains("beta_limit")) c.distill.beta_limit = j["beta_limit"];
    if (j.contains("literal_eq4")) c.literal_eq4 = j["literal_eq4"];
    if (j.contains("quant")) c.quant = quant_from_name(j["quant"]);
    if (j.contains("learning_rate")) c.learning_rate = j["learning_rate"];
    if (j.contains("batch_size")) c.batch_size = j["batch_size"];
    if (j.contains("seed")) c.seed = j["seed"];
    if (j.contains("sequential")) c.sequential = j["sequential"];
    if (j.contains("out_dir")) c.out_dir = j["out_dir"];
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

std::string config_to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["algorithm"] = c.algorithm_name();
  j["nodes"] = c.nodes;
  j["rounds"] = c.rounds;
  j["epochs"] = c.epochs;
  nlohmann::json p;
  p["scheme"] = scheme_name(c.partition_scheme);
  if (c.partition_scheme == PartitionSpec::Scheme::ClassFraction)
    p["fraction"] = c.class_fraction;
  if (c.partition_scheme == PartitionSpec::Scheme::Dirichlet)
    p["alpha"] = c.dirichlet_alpha;
  j["partition"] = p;
  j["dataset"] = c.dataset;
  if (!c.data_dir.empty()) j["data_dir"] = c.data_dir;
  if (c.mnist_subset) j["mnist_subset"] = c.mnist_subset;
  j["blobs"] = {{"classes", c.blob_classes},
                {"per_class", c.blob_per_class},
                {"dim", c.blob_dim},
                {"spread", c.blob_spread}};
  j["teacher_widths"] = c.teacher_widths;
  j["student_widths"] = c.student_widths;
  j["temperature"] = c.distill.temperature;
  j["alpha_s"] = c.distill.alpha_s;
  j["beta_s"] = c.distill.beta_s;
  j["beta_t"] = c.distill.beta_t;
  j["beta_limit"] = c.distill.beta_limit;
  j["literal_eq4"] = c.literal_eq4;
  j["quant"] = quant_name(c.quant);
  j["learning_rate"] = c.learning_rate;
  j["batch_size"] = c.batch_size;
  j["seed"] = c.seed;
  j["sequential"] = c.sequential;
  if (!c.out_dir.empty()) j["out_dir"] = c.out_dir;
  return j.dump(2);
}

}  // namespace profe
