#include "profe/metrics.hpp"

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include <json.hpp>

namespace profe {

double macro_f1(const std::vector<int>& predictions,
                const std::vector<int>& truths, int n_classes) {
  if (predictions.empty() || predictions.size() != truths.size())
    throw DataError("macro_f1: empty or mismatched inputs");
  std::vector<std::uint64_t> tp(n_classes, 0), fp(n_classes, 0),
      fn(n_classes, 0);
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    int p = predictions[i], t = truths[i];
    if (p < 0 || p >= n_classes || t < 0 || t >= n_classes)
      throw DataError("macro_f1: class index out of range");
    if (p == t) {
      ++tp[p];
    } else {
      ++fp[p];
      ++fn[t];
    }
  }
  double sum = 0.0;
  int counted = 0;
  for (int c = 0; c < n_classes; ++c) {
    if (tp[c] + fp[c] + fn[c] == 0) continue;  // absent from both sides
    double precision =
        tp[c] + fp[c] ? static_cast<double>(tp[c]) / (tp[c] + fp[c]) : 0.0;
    double recall =
        tp[c] + fn[c] ? static_cast<double>(tp[c]) / (tp[c] + fn[c]) : 0.0;
    double f1 = precision + recall > 0.0
                    ? 2.0 * precision * recall / (precision + recall)
                    : 0.0;
    sum += f1;
    ++counted;
  }
  return counted ? sum / counted : 0.0;
}

void export_metrics(const std::vector<MetricsRecord>& records,
                    const std::string& algorithm, const std::string& dir) {
  if (records.empty()) throw DataError("export_metrics: no records");
  std::filesystem::create_directories(dir);

  const std::string csv_path = dir + "/metrics.csv";
  std::ofstream csv(csv_path);
  if (!csv) throw std::runtime_error(csv_path + ": cannot open for writing");
  csv << "round,node_id,macro_f1,bytes_sent,bytes_received,elapsed_seconds\n";
  char line[256];
  for (const MetricsRecord& r : records) {
    std::snprintf(line, sizeof line,
                  "%u,%d,%.6f,%" PRIu64 ",%" PRIu64 ",%.6f\n", r.round,
                  r.node_id, r.macro_f1, r.bytes_sent, r.bytes_received,
                  r.elapsed_seconds);
    csv << line;
  }
  csv.close();
  if (!csv) throw std::runtime_error(csv_path + ": write failed");

  // Per-round means plus whole-run totals.
  std::map<std::uint32_t, std::pair<double, int>> round_f1;
  std::uint64_t total_sent = 0, total_received = 0;
  double total_elapsed = 0.0;
  std::uint32_t last_round = 0;
  for (const MetricsRecord& r : records) {
    auto& [s, c] = round_f1[r.round];
    s += r.macro_f1;
    ++c;
    total_elapsed += r.elapsed_seconds;
    total_sent += r.bytes_sent;
    total_received += r.bytes_received;
    last_round = std::max(last_round, r.round);
  }

  nlohmann::json j;
  j["algorithm"] = algorithm;
  j["rounds"] = last_round + 1;
  j["total_bytes_sent"] = total_sent;
  j["total_bytes_received"] = total_received;
  j["total_elapsed_seconds"] = total_elapsed;
  nlohmann::json per_round = nlohmann::json::array();
  for (const auto& [round, sc] : round_f1) {
    per_round.push_back({{"round", round},
                         {"mean_macro_f1", sc.first / sc.second}});
  }
  j["per_round_mean_f1"] = per_round;
  double final_f1 = round_f1[last_round].first / round_f1[last_round].second;
  j["final_mean_macro_f1"] = final_f1;

  const std::string json_path = dir + "/summary.json";
  std::ofstream js(json_path);
  if (!js) throw std::runtime_error(json_path + ": cannot open for writing");
  js << j.dump(2) << "\n";
}

}  // namespace profe
