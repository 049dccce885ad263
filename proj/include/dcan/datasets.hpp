#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "dcan/matrix.hpp"

namespace dcan {

inline constexpr int kUnlabeled = -1;

struct DomainDataset {
  Matrix x;
  std::vector<int> labels;  // kUnlabeled or a class index
  std::size_t class_count = 0;
  std::string name;

  std::size_t size() const noexcept { return x.rows(); }
  bool fully_labeled() const;
  void validate() const;
};

// Gaussian class clusters on a circle in 2-D. The target domain rotates then
// translates the cluster means; labels keep their meaning across domains.
struct ClusterTaskSpec {
  std::size_t classes = 5;
  std::size_t per_class = 200;
  std::array<double, 2> shift{0.0, 0.0};
  double rotation = 0.0;  // radians
  double noise = 0.1;     // per-coordinate standard deviation
  double radius = 1.0;
  std::uint64_t seed = 0;
};

struct DomainPair {
  DomainDataset source;
  DomainDataset target;
};

std::vector<std::array<double, 2>> source_cluster_means(const ClusterTaskSpec& spec);
std::vector<std::array<double, 2>> target_cluster_means(const ClusterTaskSpec& spec);

DomainPair make_shifted_clusters(const ClusterTaskSpec& spec);

// Keeps samples whose class index is below keep_classes. The class count is
// unchanged, so the classifier keeps the full source label space.
DomainDataset make_partial_target(const DomainDataset& target, std::size_t keep_classes);

DomainDataset subset(const DomainDataset& ds, std::span<const std::size_t> indices);

// UTF-8 CSV: header line, numeric feature columns, final integer "label"
// column (-1 for unlabeled).
DomainDataset load_csv(const std::filesystem::path& path, std::size_t class_count = 0);
void save_csv(const DomainDataset& ds, const std::filesystem::path& path);

// Uniform draws with replacement; the index sequence is a pure function of
// (population, n, seed).
class BatchSampler {
 public:
  BatchSampler(std::size_t population, std::size_t batch_size, std::uint64_t seed);

  std::vector<std::size_t> next();

 private:
  std::size_t batch_size_;
  std::mt19937_64 rng_;
  std::uniform_int_distribution<std::size_t> dist_;
};

}  // namespace dcan
