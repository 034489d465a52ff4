#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fairsim/common.hpp"

// Tabular samples drawn from a discrete SCM.  Channel bits are packed into
// 32-bit words (bit i = channel i).  The latent condition z is carried for
// evaluation only: trainers consume datasets through feature/label views that
// do not expose z (or a as an input column), while metrics may read it.

namespace fairsim::data {

struct Record {
  std::uint32_t x_z = 0;  // disease feature channels
  std::uint32_t x_a = 0;  // sensitive feature channels
  std::uint8_t a = 0;     // group attribute
  std::uint8_t y = 0;     // recorded label
  std::uint8_t z = 0;     // latent condition; oracle-only, never a model input

  bool operator==(const Record&) const = default;
};

struct BiasInjection {
  int target_group = 1;
  double flip_rate = 0.0;
  std::uint64_t seed = 0;
  std::size_t count_flipped = 0;

  bool operator==(const BiasInjection&) const = default;
};

struct SplitInfo {
  double train_fraction = 0.5;
  std::uint64_t seed = 0;
  std::string side;  // "train" or "test"

  bool operator==(const SplitInfo&) const = default;
};

struct Manifest {
  std::string config_hash;     // hash of the generating ScmConfig, hex
  std::uint64_t sample_seed = 0;
  std::optional<BiasInjection> bias_injection;
  std::optional<SplitInfo> split;

  bool operator==(const Manifest&) const = default;
};

class Dataset {
 public:
  Dataset() = default;
  Dataset(int x_z_width, int x_a_width, std::vector<Record> records, Manifest manifest);

  int x_z_width() const { return x_z_width_; }
  int x_a_width() const { return x_a_width_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const std::vector<Record>& records() const { return records_; }
  const Record& record(std::size_t i) const { return records_[i]; }
  const Manifest& manifest() const { return manifest_; }

  // Model input features: x_z channels then x_a channels, mapped to -1/+1.
  // Neither a nor z appears here.
  Matrix feature_matrix() const;
  int feature_count() const { return x_z_width_ + x_a_width_; }

  std::vector<std::uint8_t> labels() const;      // y
  std::vector<std::uint8_t> groups() const;      // a
  // Oracle-only: latent condition per record.  Evaluation code may call this;
  // training code must not.
  std::vector<std::uint8_t> latent_conditions() const;

  bool operator==(const Dataset&) const = default;

 private:
  int x_z_width_ = 0;
  int x_a_width_ = 0;
  std::vector<Record> records_;
  Manifest manifest_;
};

struct SplitSpec {
  double train_fraction = 0.5;
  std::uint64_t seed = 0;
};

// Copy with floor(flip_rate * P) of the P positive records in target_group
// relabelled y=0, chosen uniformly without replacement; z and the feature
// columns are untouched and record order is preserved.
Dataset inject_label_bias(const Dataset& data, int target_group, double flip_rate,
                          std::uint64_t seed);

// Seeded shuffle, then partition at floor(train_fraction * n).  Both sides
// keep their records in the original relative order.
std::pair<Dataset, Dataset> split(const Dataset& data, const SplitSpec& spec);

struct GroupSummary {
  std::size_t count = 0;
  double prevalence = 0.0;   // p(y=1 | a)
  double noise_rate = 0.0;   // p(y != z | a)
};

struct GroupStats {
  std::optional<GroupSummary> group0;  // absent when the group is empty
  std::optional<GroupSummary> group1;
  double attribute_rate = 0.0;         // p(a=1)
  std::size_t total = 0;
};

GroupStats group_stats(const Dataset& data);

}  // namespace fairsim::data
