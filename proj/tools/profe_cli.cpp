#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "profe/federation.hpp"
#include "profe/metrics.hpp"

namespace {

profe::PartitionSpec::Scheme parse_partition(const std::string& s,
                                             double& fraction, double& alpha) {
  if (s == "iid") return profe::PartitionSpec::Scheme::IID;
  if (s.rfind("classes:", 0) == 0) {
    fraction = std::stod(s.substr(8));
    return profe::PartitionSpec::Scheme::ClassFraction;
  }
  if (s.rfind("dirichlet:", 0) == 0) {
    alpha = std::stod(s.substr(10));
    return profe::PartitionSpec::Scheme::Dirichlet;
  }
  throw CLI::ValidationError(
      "--partition", "expected iid, classes:P or dirichlet:A, got '" + s + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ProFe decentralized federated learning simulator"};
  app.require_subcommand(1);

  CLI::App* run = app.add_subcommand("run", "Run one experiment");

  std::string algo = "profe", dataset = "blobs", data_dir, partition = "iid",
              quant = "f16", out_dir = "out", config_path;
  std::size_t nodes = 5, epochs = 1, batch_size = 32, mnist_subset = 0;
  std::uint32_t rounds = 10;
  double temperature = 2.0, alpha_s = 1.0, beta_limit = 0.1, lr = 0.05;
  std::uint64_t seed = 1;
  bool sequential = false;

  run->add_option("--algo", algo, "profe|fedavg|fedproto");
  run->add_option("--dataset", dataset, "mnist|blobs");
  run->add_option("--data-dir", data_dir, "MNIST IDX file directory");
  run->add_option("--mnist-subset", mnist_subset,
                  "use only this many MNIST samples (0 = all)");
  run->add_option("--nodes", nodes, "node count (full mesh)");
  run->add_option("--rounds", rounds, "federated rounds");
  run->add_option("--epochs", epochs, "local epochs per round");
  run->add_option("--partition", partition, "iid|classes:P|dirichlet:A");
  run->add_option("--quant", quant, "f16|i16|none");
  run->add_option("--temperature", temperature, "distillation temperature");
  run->add_option("--alpha-s", alpha_s, "initial KD-term weight");
  run->add_option("--beta-limit", beta_limit, "decay cutoff for alpha_s");
  run->add_option("--lr", lr, "SGD learning rate");
  run->add_option("--batch-size", batch_size, "minibatch size");
  run->add_option("--seed", seed, "master seed");
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--config", config_path, "JSON config file (flags override)");
  run->add_flag("--sequential", sequential,
                "deterministic single-threaded mode");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    profe::ExperimentConfig cfg;
    if (!config_path.empty()) {
      std::ifstream f(config_path);
      if (!f) throw profe::ConfigError(config_path + ": cannot open");
      std::stringstream ss;
      ss << f.rdbuf();
      cfg = profe::config_from_json(ss.str());
    }
    // CLI flags override config-file values when given.
    auto given = [&](const std::string& name) {
      return run->count(name) > 0;
    };
    if (config_path.empty() || given("--algo"))
      cfg = [&] {
        auto c = cfg;
        if (algo == "profe") c.algorithm = profe::Algorithm::ProFe;
        else if (algo == "fedavg") c.algorithm = profe::Algorithm::FedAvg;
        else if (algo == "fedproto") c.algorithm = profe::Algorithm::FedProto;
        else
          throw profe::ConfigError("--algo: unknown algorithm '" + algo + "'");
        return c;
      }();
    if (config_path.empty() || given("--dataset")) cfg.dataset = dataset;
    if (config_path.empty() || given("--data-dir")) cfg.data_dir = data_dir;
    if (config_path.empty() || given("--mnist-subset"))
      cfg.mnist_subset = mnist_subset;
    if (config_path.empty() || given("--nodes")) cfg.nodes = nodes;
    if (config_path.empty() || given("--rounds")) cfg.rounds = rounds;
    if (config_path.empty() || given("--epochs"))
      cfg.epochs = static_cast<std::uint32_t>(epochs);
    if (config_path.empty() || given("--partition"))
      cfg.partition_scheme =
          parse_partition(partition, cfg.class_fraction, cfg.dirichlet_alpha);
    if (config_path.empty() || given("--quant")) {
      if (quant == "f16") cfg.quant = profe::QuantMode::Float16;
      else if (quant == "i16") cfg.quant = profe::QuantMode::Int16Affine;
      else if (quant == "none") cfg.quant = profe::QuantMode::Fp32;
      else
        throw profe::ConfigError("--quant: unknown mode '" + quant + "'");
    }
    if (config_path.empty() || given("--temperature"))
      cfg.distill.temperature = static_cast<float>(temperature);
    if (config_path.empty() || given("--alpha-s"))
      cfg.distill.alpha_s = static_cast<float>(alpha_s);
    if (config_path.empty() || given("--beta-limit"))
      cfg.distill.beta_limit = static_cast<float>(beta_limit);
    if (config_path.empty() || given("--lr"))
      cfg.learning_rate = static_cast<float>(lr);
    if (config_path.empty() || given("--batch-size"))
      cfg.batch_size = batch_size;
    if (config_path.empty() || given("--seed")) cfg.seed = seed;
    if (config_path.empty() || given("--out")) cfg.out_dir = out_dir;
    if (sequential) cfg.sequential = true;
    if (cfg.out_dir.empty()) cfg.out_dir = out_dir;

    // The stock architectures assume 784-wide MNIST input; size them to
    // the synthetic blob width unless a config file picked something else.
    const profe::ExperimentConfig stock;
    if (cfg.dataset == "blobs") {
      const std::size_t dim = cfg.blob_dim;
      if (cfg.teacher_widths == stock.teacher_widths)
        cfg.teacher_widths = {dim, 64, 32};
      if (cfg.student_widths == stock.student_widths)
        cfg.student_widths = {dim, 32, 32};
    }

    cfg.validate();
    profe::ExperimentResult result = profe::run_experiment(cfg);
    profe::export_metrics(result.records, cfg.algorithm_name(), cfg.out_dir);
    std::ofstream echo(cfg.out_dir + "/run-config.json");
    echo << profe::config_to_json(cfg) << "\n";
    std::printf("wrote %s/metrics.csv (%zu records), total sent %llu bytes\n",
                cfg.out_dir.c_str(), result.records.size(),
                static_cast<unsigned long long>(result.ledger.total_sent()));
    return 0;
  } catch (const CLI::ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const profe::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
