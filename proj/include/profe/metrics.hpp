#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "profe/errors.hpp"

namespace profe {

// Unweighted mean over classes of 2PR/(P+R). Classes absent from both
// predictions and truths are excluded; a zero denominator in P or R
// contributes 0 for that quantity.
double macro_f1(const std::vector<int>& predictions,
                const std::vector<int>& truths, int n_classes);

struct MetricsRecord {
  std::uint32_t round = 0;
  int node_id = 0;
  double macro_f1 = 0.0;         // on the global test set
  std::uint64_t bytes_sent = 0;  // cumulative
  std::uint64_t bytes_received = 0;
  double elapsed_seconds = 0.0;  // this node's training time this round
};

// Writes metrics.csv and summary.json under dir.
void export_metrics(const std::vector<MetricsRecord>& records,
                    const std::string& algorithm, const std::string& dir);

}  // namespace profe
