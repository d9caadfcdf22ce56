#include "profe/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <random>

namespace profe {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_be32(std::ifstream& f, const std::string& path,
                        std::size_t offset) {
  unsigned char b[4];
  if (!f.read(reinterpret_cast<char*>(b), 4))
    throw FormatError(path + ": truncated at byte offset " +
                      std::to_string(offset));
  return (static_cast<std::uint32_t>(b[0]) << 24) |
         (static_cast<std::uint32_t>(b[1]) << 16) |
         (static_cast<std::uint32_t>(b[2]) << 8) |
         static_cast<std::uint32_t>(b[3]);
}

void write_be32(std::ofstream& f, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v)};
  f.write(reinterpret_cast<char*>(b), 4);
}

std::map<int, std::vector<std::size_t>> by_class(const LabeledDataset& ds) {
  std::map<int, std::vector<std::size_t>> m;
  for (std::size_t i = 0; i < ds.size(); ++i) m[ds.y[i]].push_back(i);
  return m;
}

}  // namespace

LabeledDataset load_idx_pair(const std::string& images_path,
                             const std::string& labels_path) {
  std::ifstream imgs(images_path, std::ios::binary);
  if (!imgs) throw FormatError(images_path + ": cannot open");
  std::uint32_t magic = read_be32(imgs, images_path, 0);
  if (magic != kImageMagic)
    throw FormatError(images_path + ": bad magic at byte offset 0, expected " +
                      std::to_string(kImageMagic) + " got " +
                      std::to_string(magic));
  const std::uint32_t n = read_be32(imgs, images_path, 4);
  const std::uint32_t rows = read_be32(imgs, images_path, 8);
  const std::uint32_t cols = read_be32(imgs, images_path, 12);

  std::ifstream labels(labels_path, std::ios::binary);
  if (!labels) throw FormatError(labels_path + ": cannot open");
  std::uint32_t lmagic = read_be32(labels, labels_path, 0);
  if (lmagic != kLabelMagic)
    throw FormatError(labels_path + ": bad magic at byte offset 0, expected " +
                      std::to_string(kLabelMagic) + " got " +
                      std::to_string(lmagic));
  const std::uint32_t ln = read_be32(labels, labels_path, 4);
  if (ln != n)
    throw FormatError(labels_path + ": label count " + std::to_string(ln) +
                      " != image count " + std::to_string(n));

  LabeledDataset ds;
  ds.width = static_cast<std::size_t>(rows) * cols;
  ds.provenance = "mnist";
  ds.x.resize(static_cast<std::size_t>(n) * ds.width);
  ds.y.resize(n);

  std::vector<unsigned char> pix(ds.width);
  for (std::uint32_t i = 0; i < n; ++i) {
    if (!imgs.read(reinterpret_cast<char*>(pix.data()),
                   static_cast<std::streamsize>(pix.size())))
      throw FormatError(images_path + ": truncated at byte offset " +
                        std::to_string(16 + static_cast<std::size_t>(i) *
                                                ds.width));
    for (std::size_t k = 0; k < ds.width; ++k)
      ds.x[i * ds.width + k] = static_cast<float>(pix[k]) / 255.0f;
  }
  std::vector<unsigned char> lab(n);
  if (!labels.read(reinterpret_cast<char*>(lab.data()), n))
    throw FormatError(labels_path + ": truncated at byte offset 8");
  int max_label = 0;
  for (std::uint32_t i = 0; i < n; ++i) {
    ds.y[i] = lab[i];
    max_label = std::max(max_label, ds.y[i]);
  }
  ds.n_classes = max_label + 1;
  return ds;
}

LabeledDataset load_mnist(const std::string& dir) {
  return load_idx_pair(dir + "/train-images-idx3-ubyte",
                       dir + "/train-labels-idx1-ubyte");
}

void write_idx_pair(const LabeledDataset& ds, const std::string& images_path,
                    const std::string& labels_path) {
  const std::uint32_t rows = ds.width == 784 ? 28 : 1;
  const std::uint32_t cols = static_cast<std::uint32_t>(ds.width) / rows;
  std::ofstream imgs(images_path, std::ios::binary);
  if (!imgs) throw FormatError(images_path + ": cannot open for writing");
  write_be32(imgs, kImageMagic);
  write_be32(imgs, static_cast<std::uint32_t>(ds.size()));
  write_be32(imgs, rows);
  write_be32(imgs, cols);
  std::vector<unsigned char> pix(ds.width);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t k = 0; k < ds.width; ++k) {
      float f = std::clamp(ds.x[i * ds.width + k], 0.0f, 1.0f);
      pix[k] = static_cast<unsigned char>(std::lround(f * 255.0f));
    }
    imgs.write(reinterpret_cast<char*>(pix.data()),
               static_cast<std::streamsize>(pix.size()));
  }
  std::ofstream labels(labels_path, std::ios::binary);
  if (!labels) throw FormatError(labels_path + ": cannot open for writing");
  write_be32(labels, kLabelMagic);
  write_be32(labels, static_cast<std::uint32_t>(ds.size()));
  for (int y : ds.y) {
    unsigned char b = static_cast<unsigned char>(y);
    labels.write(reinterpret_cast<char*>(&b), 1);
  }
}

LabeledDataset gen_blobs(int n_classes, std::size_t per_class,
                         std::size_t dim, float spread, std::uint64_t seed) {
  if (n_classes <= 0 || per_class == 0 || dim == 0)
    throw ParameterError("gen_blobs: counts must be positive");
  std::mt19937 rng(static_cast<std::mt19937::result_type>(seed));
  std::uniform_real_distribution<float> center_dist(0.1f, 0.9f);
  std::normal_distribution<float> noise(0.0f, 1.0f);

  LabeledDataset ds;
  ds.width = dim;
  ds.n_classes = n_classes;
  ds.provenance = "synthetic";
  std::vector<std::vector<float>> centers(n_classes,
                                          std::vector<float>(dim));
  for (auto& c : centers)
    for (float& f : c) f = center_dist(rng);

  for (int cls = 0; cls < n_classes; ++cls)
    for (std::size_t i = 0; i < per_class; ++i) {
      for (std::size_t k = 0; k < dim; ++k) {
        float v = centers[cls][k] + spread * noise(rng);
        ds.x.push_back(std::clamp(v, 0.0f, 1.0f));
      }
      ds.y.push_back(cls);
    }
  return ds;
}

std::pair<LabeledDataset, LabeledDataset> split_global_test(
    const LabeledDataset& ds, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw ParameterError("split_global_test: fraction must be in (0,1)");
  std::mt19937 rng(static_cast<std::mt19937::result_type>(seed));
  std::vector<std::size_t> pool_idx, test_idx;
  for (auto& [cls, idx] : by_class(ds)) {
    if (idx.size() < 2)
      throw DataError("split_global_test: class " + std::to_string(cls) +
                      " has fewer than 2 samples");
    std::vector<std::size_t> shuffled = idx;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    std::size_t n_test = static_cast<std::size_t>(
        std::lround(fraction * static_cast<double>(idx.size())));
    n_test = std::clamp<std::size_t>(n_test, 1, idx.size() - 1);
    test_idx.insert(test_idx.end(), shuffled.begin(),
                    shuffled.begin() + static_cast<std::ptrdiff_t>(n_test));
    pool_idx.insert(pool_idx.end(),
                    shuffled.begin() + static_cast<std::ptrdiff_t>(n_test),
                    shuffled.end());
  }
  std::sort(pool_idx.begin(), pool_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  return {ds.subset(pool_idx), ds.subset(test_idx)};
}

std::pair<LabeledDataset, LabeledDataset> split_local(
    const LabeledDataset& shard, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ParameterError("split_local: fraction must be in (0,1)");
  std::mt19937 rng(static_cast<std::mt19937::result_type>(seed));
  std::vector<std::size_t> train_idx, test_idx;
  for (auto& [cls, idx] : by_class(shard)) {
    std::vector<std::size_t> shuffled = idx;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    std::size_t n_train = static_cast<std::size_t>(
        std::lround(train_fraction * static_cast<double>(idx.size())));
    n_train = std::clamp<std::size_t>(n_train, 1, idx.size());
    train_idx.insert(train_idx.end(), shuffled.begin(),
                     shuffled.begin() + static_cast<std::ptrdiff_t>(n_train));
    test_idx.insert(test_idx.end(),
                    shuffled.begin() + static_cast<std::ptrdiff_t>(n_train),
                    shuffled.end());
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  return {shard.subset(train_idx), shard.subset(test_idx)};
}

namespace {

std::vector<LabeledDataset> shards_from_assignment(
    const LabeledDataset& pool,
    const std::vector<std::vector<std::size_t>>& assignment) {
  std::vector<LabeledDataset> shards;
  shards.reserve(assignment.size());
  for (auto idx : assignment) {
    std::sort(idx.begin(), idx.end());
    shards.push_back(pool.subset(idx));
  }
  return shards;
}

std::vector<double> dirichlet_draw(double alpha, std::size_t n,
                                   std::mt19937& rng) {
  std::gamma_distribution<double> gamma(alpha, 1.0);
  std::vector<double> g(n);
  double sum = 0.0;
  for (double& v : g) {
    v = gamma(rng);
    sum += v;
  }
  if (sum <= 0.0) {  // all draws underflowed; fall back to a point mass
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<double> p(n, 0.0);
    p[pick(rng)] = 1.0;
    return p;
  }
  for (double& v : g) v /= sum;
  return g;
}

}  // namespace

std::vector<LabeledDataset> partition(const LabeledDataset& pool,
                                      const PartitionSpec& spec) {
  const std::size_t N = spec.nodes;
  if (N == 0) throw ParameterError("partition: node count must be positive");
  const int n = pool.n_classes;
  auto classes = by_class(pool);
  if (static_cast<int>(classes.size()) != n)
    throw DataError("partition: pool does not cover all " + std::to_string(n) +
                    " classes");

  std::mt19937 rng(static_cast<std::mt19937::result_type>(spec.seed));
  std::vector<std::vector<std::size_t>> assignment(N);

  switch (spec.scheme) {
    case PartitionSpec::Scheme::IID: {
      for (auto& [cls, idx] : classes) {
        std::vector<std::size_t> shuffled = idx;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        for (std::size_t i = 0; i < shuffled.size(); ++i)
          assignment[i % N].push_back(shuffled[i]);
      }
      break;
    }
    case PartitionSpec::Scheme::ClassFraction: {
      const double p = spec.class_fraction;
      if (!(p > 0.0 && p <= 1.0))
        throw ParameterError("partition: class fraction must be in (0,1]");
      const int c = static_cast<int>(std::ceil(p * n));
      const int stride = std::max<int>(
          1, static_cast<int>((n + N - 1) / N));  // ceil(n/N)
      if (c < stride)
        throw DataError(
            "partition: class fraction too small to cover every class with " +
            std::to_string(N) + " nodes");
      // node i holds classes {(i*stride + m) mod n : m < c}
      std::vector<std::vector<std::size_t>> holders(n);
      for (std::size_t i = 0; i < N; ++i)
        for (int m = 0; m < c; ++m)
          holders[(static_cast<int>(i) * stride + m) % n].push_back(i);
      for (int cls = 0; cls < n; ++cls)
        if (holders[cls].empty())
          throw DataError("partition: class " + std::to_string(cls) +
                          " assigned to no node");
      for (auto& [cls, idx] : classes) {
        std::vector<std::size_t> shuffled = idx;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        const auto& h = holders[cls];
        for (std::size_t i = 0; i < shuffled.size(); ++i)
          assignment[h[i % h.size()]].push_back(shuffled[i]);
      }
      break;
    }
    case PartitionSpec::Scheme::Dirichlet: {
      if (!(spec.alpha > 0.0))
        throw ParameterError("partition: dirichlet alpha must be > 0");
      for (auto& [cls, idx] : classes) {
        std::vector<std::size_t> shuffled = idx;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        std::vector<double> props = dirichlet_draw(spec.alpha, N, rng);
        // cumulative proportional cut points; every node may receive 0 of
        // a class, coverage is checked afterwards
        std::size_t start = 0;
        double acc = 0.0;
        for (std::size_t node = 0; node < N; ++node) {
          acc += props[node];
          std::size_t end =
              node + 1 == N
                  ? shuffled.size()
                  : static_cast<std::size_t>(std::lround(
                        acc * static_cast<double>(shuffled.size())));
          end = std::max(end, start);
          for (std::size_t i = start; i < end; ++i)
            assignment[node].push_back(shuffled[i]);
          start = end;
        }
      }
      break;
    }
  }

  auto shards = shards_from_assignment(pool, assignment);
  // Every class must land on at least one node.
  std::vector<char> covered(n, 0);
  for (const auto& s : shards)
    for (int y : s.y) covered[y] = 1;
  for (int cls = 0; cls < n; ++cls)
    if (!covered[cls])
      throw DataError("partition: class " + std::to_string(cls) +
                      " held by no node");
  return shards;
}

}  // namespace profe
