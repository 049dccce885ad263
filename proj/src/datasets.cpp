#include "dcan/datasets.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "dcan/error.hpp"

namespace dcan {

namespace {

std::mt19937_64 domain_rng(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    stream};
  return std::mt19937_64(seq);
}

DomainDataset sample_clusters(const std::vector<std::array<double, 2>>& means,
                              const ClusterTaskSpec& spec, std::mt19937_64 rng,
                              std::string name) {
  std::normal_distribution<double> noise(0.0, spec.noise);
  DomainDataset ds;
  ds.x = Matrix(means.size() * spec.per_class, 2);
  ds.class_count = means.size();
  ds.name = std::move(name);
  std::size_t row = 0;
  for (std::size_t c = 0; c < means.size(); ++c) {
    for (std::size_t k = 0; k < spec.per_class; ++k, ++row) {
      ds.x(row, 0) = means[c][0] + noise(rng);
      ds.x(row, 1) = means[c][1] + noise(rng);
      ds.labels.push_back(static_cast<int>(c));
    }
  }
  return ds;
}

double parse_double(std::string_view field, std::size_t line) {
  while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
  while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r'))
    field.remove_suffix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty())
    fail(ErrorKind::data, "csv line " + std::to_string(line) + ": cannot parse '" +
                              std::string(field) + "' as a number");
  return v;
}

std::vector<std::string_view> split(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(',', start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? s.npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

bool DomainDataset::fully_labeled() const {
  return std::ranges::none_of(labels, [](int l) { return l == kUnlabeled; });
}

void DomainDataset::validate() const {
  if (x.rows() == 0) fail(ErrorKind::data, "dataset '" + name + "' is empty");
  if (labels.size() != x.rows())
    fail(ErrorKind::data, "dataset '" + name + "': label count does not match rows");
  for (int l : labels)
    if (l < kUnlabeled || (l >= 0 && static_cast<std::size_t>(l) >= class_count))
      fail(ErrorKind::data, "dataset '" + name + "': label " + std::to_string(l) +
                                " outside [-1, class_count)");
  if (!all_finite(x)) fail(ErrorKind::data, "dataset '" + name + "': non-finite feature");
}

std::vector<std::array<double, 2>> source_cluster_means(const ClusterTaskSpec& spec) {
  std::vector<std::array<double, 2>> means;
  for (std::size_t c = 0; c < spec.classes; ++c) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(c) /
                         static_cast<double>(spec.classes);
    means.push_back({spec.radius * std::cos(angle), spec.radius * std::sin(angle)});
  }
  return means;
}

std::vector<std::array<double, 2>> target_cluster_means(const ClusterTaskSpec& spec) {
  const double cs = std::cos(spec.rotation);
  const double sn = std::sin(spec.rotation);
  auto means = source_cluster_means(spec);
  for (auto& m : means) {
    const double x = cs * m[0] - sn * m[1];
    const double y = sn * m[0] + cs * m[1];
    m = {x + spec.shift[0], y + spec.shift[1]};
  }
  return means;
}

DomainPair make_shifted_clusters(const ClusterTaskSpec& spec) {
  if (spec.classes < 2) fail(ErrorKind::config, "clusters: need at least 2 classes");
  if (spec.per_class < 1) fail(ErrorKind::config, "clusters: per_class must be >= 1");
  if (!(spec.noise > 0.0)) fail(ErrorKind::config, "clusters: noise must be > 0");
  if (!(spec.radius > 0.0)) fail(ErrorKind::config, "clusters: radius must be > 0");
  return {sample_clusters(source_cluster_means(spec), spec, domain_rng(spec.seed, 0), "source"),
          sample_clusters(target_cluster_means(spec), spec, domain_rng(spec.seed, 1), "target")};
}

DomainDataset make_partial_target(const DomainDataset& target, std::size_t keep_classes) {
  if (keep_classes < 1 || keep_classes > target.class_count)
    fail(ErrorKind::config, "partial target: keep_classes must be in [1, class_count]");
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < target.labels.size(); ++i)
    if (target.labels[i] >= 0 && static_cast<std::size_t>(target.labels[i]) < keep_classes)
      keep.push_back(i);
  if (keep.empty()) fail(ErrorKind::config, "partial target: no samples left after filtering");
  DomainDataset out = subset(target, keep);
  out.name = target.name + "-partial" + std::to_string(keep_classes);
  return out;
}

DomainDataset subset(const DomainDataset& ds, std::span<const std::size_t> indices) {
  DomainDataset out;
  out.x = gather_rows(ds.x, indices);
  for (std::size_t i : indices) out.labels.push_back(ds.labels[i]);
  out.class_count = ds.class_count;
  out.name = ds.name;
  return out;
}

DomainDataset load_csv(const std::filesystem::path& path, std::size_t class_count) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::data, "csv " + path.string() + ": missing header");
  const auto header = split(line);
  if (header.size() < 2) fail(ErrorKind::data, "csv line 1: need feature columns and a label");
  const std::size_t dim = header.size() - 1;

  std::vector<double> values;
  std::vector<int> labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split(line);
    if (fields.size() != dim + 1)
      fail(ErrorKind::data, "csv line " + std::to_string(line_no) + ": expected " +
                                std::to_string(dim + 1) + " fields, got " +
                                std::to_string(fields.size()));
    for (std::size_t k = 0; k < dim; ++k) values.push_back(parse_double(fields[k], line_no));
    const double label = parse_double(fields[dim], line_no);
    if (label != std::floor(label) || label < kUnlabeled)
      fail(ErrorKind::data, "csv line " + std::to_string(line_no) + ": bad label");
    labels.push_back(static_cast<int>(label));
  }

  DomainDataset ds;
  ds.x = Matrix(labels.size(), dim, std::move(values));
  ds.labels = std::move(labels);
  ds.name = path.stem().string();
  int max_label = -1;
  for (int l : ds.labels) max_label = std::max(max_label, l);
  ds.class_count = class_count != 0 ? class_count : static_cast<std::size_t>(max_label + 1);
  ds.validate();
  return ds;
}

void save_csv(const DomainDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot write " + path.string());
  for (std::size_t k = 0; k < ds.x.cols(); ++k) out << "x" << k << ",";
  out << "label\n";
  char buf[32];
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (double v : ds.x.row(i)) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
      out.write(buf, ptr - buf);
      out << ',';
    }
    out << ds.labels[i] << '\n';
  }
  if (!out) fail(ErrorKind::io, "write failed for " + path.string());
}

BatchSampler::BatchSampler(std::size_t population, std::size_t batch_size, std::uint64_t seed)
    : batch_size_(batch_size), rng_(seed), dist_(0, population == 0 ? 0 : population - 1) {
  if (population == 0) fail(ErrorKind::config, "sampler: empty population");
  if (batch_size == 0) fail(ErrorKind::config, "sampler: batch size must be >= 1");
}

std::vector<std::size_t> BatchSampler::next() {
  std::vector<std::size_t> idx(batch_size_);
  for (auto& i : idx) i = dist_(rng_);
  return idx;
}

}  // namespace dcan
