#include "fairsim/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fairsim/rng.hpp"

namespace fairsim::data {

Dataset::Dataset(int x_z_width, int x_a_width, std::vector<Record> records, Manifest manifest)
    : x_z_width_(x_z_width),
      x_a_width_(x_a_width),
      records_(std::move(records)),
      manifest_(std::move(manifest)) {
  if (x_z_width_ < 0 || x_a_width_ < 0 || x_z_width_ > 32 || x_a_width_ > 32) {
    throw InputError("dataset: channel widths must be in [0, 32]");
  }
  const std::uint32_t xz_mask =
      x_z_width_ == 32 ? ~0u : ((1u << x_z_width_) - 1u);
  const std::uint32_t xa_mask =
      x_a_width_ == 32 ? ~0u : ((1u << x_a_width_) - 1u);
  for (const Record& r : records_) {
    if ((r.x_z & ~xz_mask) != 0 || (r.x_a & ~xa_mask) != 0 || r.a > 1 || r.y > 1 || r.z > 1) {
      throw InputError("dataset: record value outside declared widths");
    }
  }
}

Matrix Dataset::feature_matrix() const {
  Matrix m(records_.size(), static_cast<std::size_t>(feature_count()));
  for (std::size_t i = 0; i < records_.size(); ++i) {
    double* row = m.row(i);
    for (int b = 0; b < x_z_width_; ++b) {
      row[b] = ((records_[i].x_z >> b) & 1u) ? 1.0 : -1.0;
    }
    for (int b = 0; b < x_a_width_; ++b) {
      row[x_z_width_ + b] = ((records_[i].x_a >> b) & 1u) ? 1.0 : -1.0;
    }
  }
  return m;
}

std::vector<std::uint8_t> Dataset::labels() const {
  std::vector<std::uint8_t> out(records_.size());
  for (std::size_t i = 0; i < records_.size(); ++i) out[i] = records_[i].y;
  return out;
}

std::vector<std::uint8_t> Dataset::groups() const {
  std::vector<std::uint8_t> out(records_.size());
  for (std::size_t i = 0; i < records_.size(); ++i) out[i] = records_[i].a;
  return out;
}

std::vector<std::uint8_t> Dataset::latent_conditions() const {
  std::vector<std::uint8_t> out(records_.size());
  for (std::size_t i = 0; i < records_.size(); ++i) out[i] = records_[i].z;
  return out;
}

Dataset inject_label_bias(const Dataset& data, int target_group, double flip_rate,
                          std::uint64_t seed) {
  if (target_group != 0 && target_group != 1) {
    throw InputError("inject_label_bias: target_group must be 0 or 1");
  }
  if (!(flip_rate >= 0.0 && flip_rate <= 1.0)) {
    throw InputError("inject_label_bias: flip_rate must be in [0,1]");
  }
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Record& r = data.record(i);
    if (r.a == target_group && r.y == 1) eligible.push_back(i);
  }
  if (eligible.empty()) {
    throw InputError("inject_label_bias: no positive records in target group");
  }
  const std::size_t flips =
      static_cast<std::size_t>(std::floor(flip_rate * static_cast<double>(eligible.size())));
  rng::SplitMix64 gen(seed);
  rng::shuffle(eligible, gen);

  std::vector<Record> records = data.records();
  for (std::size_t k = 0; k < flips; ++k) records[eligible[k]].y = 0;

  Manifest manifest = data.manifest();
  manifest.bias_injection = BiasInjection{target_group, flip_rate, seed, flips};
  return Dataset(data.x_z_width(), data.x_a_width(), std::move(records), std::move(manifest));
}

std::pair<Dataset, Dataset> split(const Dataset& data, const SplitSpec& spec) {
  if (data.empty()) throw InputError("split: empty dataset");
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    throw InputError("split: train_fraction must be in (0,1)");
  }
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng::SplitMix64 gen(spec.seed);
  rng::shuffle(order, gen);

  const std::size_t n_train =
      static_cast<std::size_t>(std::floor(spec.train_fraction * static_cast<double>(data.size())));
  std::vector<std::size_t> train_idx(order.begin(), order.begin() + n_train);
  std::vector<std::size_t> test_idx(order.begin() + n_train, order.end());
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());

  auto take = [&](const std::vector<std::size_t>& idx, const char* side) {
    std::vector<Record> records;
    records.reserve(idx.size());
    for (std::size_t i : idx) records.push_back(data.record(i));
    Manifest manifest = data.manifest();
    manifest.split = SplitInfo{spec.train_fraction, spec.seed, side};
    return Dataset(data.x_z_width(), data.x_a_width(), std::move(records), std::move(manifest));
  };
  return {take(train_idx, "train"), take(test_idx, "test")};
}

GroupStats group_stats(const Dataset& data) {
  GroupStats stats;
  stats.total = data.size();
  std::size_t count[2] = {0, 0};
  std::size_t positives[2] = {0, 0};
  std::size_t noisy[2] = {0, 0};
  for (const Record& r : data.records()) {
    const int g = r.a;
    ++count[g];
    positives[g] += r.y;
    noisy[g] += (r.y != r.z) ? 1 : 0;
  }
  auto summarise = [&](int g) -> std::optional<GroupSummary> {
    if (count[g] == 0) return std::nullopt;
    GroupSummary s;
    s.count = count[g];
    s.prevalence = static_cast<double>(positives[g]) / static_cast<double>(count[g]);
    s.noise_rate = static_cast<double>(noisy[g]) / static_cast<double>(count[g]);
    return s;
  };
  stats.group0 = summarise(0);
  stats.group1 = summarise(1);
  stats.attribute_rate =
      stats.total == 0 ? 0.0 : static_cast<double>(count[1]) / static_cast<double>(stats.total);
  return stats;
}

}  // namespace fairsim::data
