#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "profe/tensor.hpp"

namespace profe {

// Flat feature vectors in [0,1] with integer class labels.
struct LabeledDataset {
  std::size_t width = 0;
  int n_classes = 0;
  std::vector<float> x;  // size() * width, row-major
  std::vector<int> y;
  std::string provenance;  // "mnist" | "synthetic"

  std::size_t size() const { return y.size(); }

  const float* row(std::size_t i) const { return &x[i * width]; }

  Tensor batch(const std::vector<std::size_t>& idx) const {
    Tensor t({idx.size(), width});
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t c = 0; c < width; ++c)
        t.v[r * width + c] = x[idx[r] * width + c];
    return t;
  }

  LabeledDataset subset(const std::vector<std::size_t>& idx) const {
    LabeledDataset d;
    d.width = width;
    d.n_classes = n_classes;
    d.provenance = provenance;
    d.x.reserve(idx.size() * width);
    d.y.reserve(idx.size());
    for (std::size_t i : idx) {
      d.x.insert(d.x.end(), row(i), row(i) + width);
      d.y.push_back(y[i]);
    }
    return d;
  }
};

struct PartitionSpec {
  enum class Scheme { IID, ClassFraction, Dirichlet };
  Scheme scheme = Scheme::IID;
  double class_fraction = 1.0;  // ClassFraction only
  double alpha = 0.5;           // Dirichlet only
  std::size_t nodes = 1;
  std::uint64_t seed = 0;
};

// MNIST IDX image + label files (train-images-idx3-ubyte and
// train-labels-idx1-ubyte under dir). Pixels are scaled to [0,1].
LabeledDataset load_mnist(const std::string& dir);
LabeledDataset load_idx_pair(const std::string& images_path,
                             const std::string& labels_path);

// Seeded Gaussian clusters around distinct centers in [0,1]^dim.
LabeledDataset gen_blobs(int n_classes, std::size_t per_class,
                         std::size_t dim, float spread, std::uint64_t seed);

// Stratified split into (pool, global_test); the test side receives
// `fraction` of each class.
std::pair<LabeledDataset, LabeledDataset> split_global_test(
    const LabeledDataset& ds, double fraction, std::uint64_t seed);

// Splits the pool into one shard per node according to the scheme. Every
// class ends up at >= 1 node or a DataError is thrown.
std::vector<LabeledDataset> partition(const LabeledDataset& pool,
                                      const PartitionSpec& spec);

// 80/20 train/test split of a local shard (stratified where possible).
std::pair<LabeledDataset, LabeledDataset> split_local(
    const LabeledDataset& shard, double train_fraction, std::uint64_t seed);

// Writes a dataset as an IDX image/label file pair (28x28 when width is
// 784, otherwise 1 x width rows). Used to build MNIST-format fixtures.
void write_idx_pair(const LabeledDataset& ds, const std::string& images_path,
                    const std::string& labels_path);

}  // namespace profe
