#include <doctest.h>

#include <algorithm>

#include "fairsim/dataset.hpp"
#include "fairsim/rng.hpp"
#include "fairsim/scm.hpp"

using namespace fairsim;
using data::Dataset;
using data::Record;

namespace {

// a/y laid out by hand; z mirrors y so noise rates start at zero.
Dataset make_dataset(std::size_t per_cell) {
  std::vector<Record> records;
  for (int a = 0; a < 2; ++a) {
    for (int y = 0; y < 2; ++y) {
      for (std::size_t i = 0; i < per_cell; ++i) {
        Record r;
        r.a = static_cast<std::uint8_t>(a);
        r.y = static_cast<std::uint8_t>(y);
        r.z = static_cast<std::uint8_t>(y);
        r.x_z = static_cast<std::uint32_t>(i % 16);
        r.x_a = static_cast<std::uint32_t>((i * 7 + a) % 16);
        records.push_back(r);
      }
    }
  }
  return Dataset(4, 4, std::move(records), data::Manifest{});
}

}  // namespace

TEST_CASE("inject_label_bias flips an exact count of eligible records") {
  const Dataset base = make_dataset(400);  // 400 positives per group
  const Dataset biased = data::inject_label_bias(base, 1, 0.25, 99);

  REQUIRE(biased.size() == base.size());
  std::size_t flipped = 0;
  for (std::size_t i = 0; i < base.size(); ++i) {
    const Record& before = base.record(i);
    const Record& after = biased.record(i);
    CHECK(before.x_z == after.x_z);
    CHECK(before.x_a == after.x_a);
    CHECK(before.a == after.a);
    CHECK(before.z == after.z);
    if (before.y != after.y) {
      ++flipped;
      CHECK(before.a == 1);
      CHECK(before.y == 1);
      CHECK(after.y == 0);
    }
  }
  CHECK(flipped == 100);
  REQUIRE(biased.manifest().bias_injection.has_value());
  CHECK(biased.manifest().bias_injection->count_flipped == 100);
  CHECK(biased.manifest().bias_injection->flip_rate == 0.25);
  CHECK(biased.manifest().bias_injection->target_group == 1);

  // Deterministic per seed.
  CHECK(data::inject_label_bias(base, 1, 0.25, 99) == biased);
  CHECK_FALSE(data::inject_label_bias(base, 1, 0.25, 100) == biased);
}

TEST_CASE("inject_label_bias edge rates") {
  const Dataset base = make_dataset(50);
  const Dataset unchanged = data::inject_label_bias(base, 1, 0.0, 5);
  for (std::size_t i = 0; i < base.size(); ++i) {
    CHECK(unchanged.record(i).y == base.record(i).y);
  }
  const Dataset all_flipped = data::inject_label_bias(base, 1, 1.0, 5);
  for (const Record& r : all_flipped.records()) {
    if (r.a == 1) CHECK(r.y == 0);
  }
  bool group0_has_positive = false;
  for (const Record& r : all_flipped.records()) {
    if (r.a == 0 && r.y == 1) group0_has_positive = true;
  }
  CHECK(group0_has_positive);
}

TEST_CASE("inject_label_bias requires positives in the target group") {
  std::vector<Record> records(10);
  for (std::size_t i = 0; i < records.size(); ++i) {
    records[i].a = static_cast<std::uint8_t>(i % 2);
    records[i].y = 0;
  }
  const Dataset no_positives(4, 4, std::move(records), data::Manifest{});
  CHECK_THROWS_AS(data::inject_label_bias(no_positives, 1, 0.25, 1), InputError);
  CHECK_THROWS_AS(data::inject_label_bias(make_dataset(5), 2, 0.25, 1), InputError);
  CHECK_THROWS_AS(data::inject_label_bias(make_dataset(5), 1, 1.5, 1), InputError);
}

TEST_CASE("split partitions the records") {
  const Dataset base = make_dataset(25);  // 100 records
  const data::SplitSpec spec{0.5, 77};
  const auto [train, test] = data::split(base, spec);
  CHECK(train.size() == 50);
  CHECK(test.size() == 50);
  CHECK(train.manifest().split->side == "train");
  CHECK(test.manifest().split->side == "test");

  const auto [train2, test2] = data::split(base, spec);
  CHECK(train == train2);
  CHECK(test == test2);

  // Union of sides is the original multiset.
  auto key = [](const Record& r) {
    return std::tuple(r.x_z, r.x_a, r.a, r.y, r.z);
  };
  std::vector<std::tuple<std::uint32_t, std::uint32_t, int, int, int>> merged, original;
  for (const Record& r : train.records()) merged.push_back(key(r));
  for (const Record& r : test.records()) merged.push_back(key(r));
  for (const Record& r : base.records()) original.push_back(key(r));
  std::sort(merged.begin(), merged.end());
  std::sort(original.begin(), original.end());
  CHECK(merged == original);

  CHECK_THROWS_AS(data::split(Dataset(4, 4, {}, {}), spec), InputError);
  CHECK_THROWS_AS(data::split(base, data::SplitSpec{1.0, 0}), InputError);
}

TEST_CASE("group_stats") {
  const Dataset base = make_dataset(100);
  const data::GroupStats clean = data::group_stats(base);
  REQUIRE(clean.group0.has_value());
  REQUIRE(clean.group1.has_value());
  CHECK(clean.group0->noise_rate == 0.0);
  CHECK(clean.group1->noise_rate == 0.0);
  CHECK(clean.group0->prevalence == doctest::Approx(0.5));
  CHECK(clean.attribute_rate == doctest::Approx(0.5));

  const Dataset biased = data::inject_label_bias(base, 1, 0.25, 3);
  const data::GroupStats after = data::group_stats(biased);
  // 25 of 200 group-1 records flipped: noise rate 0.125 = 0.25 * p(z=1|a=1).
  CHECK(after.group1->noise_rate == doctest::Approx(0.125));
  CHECK(after.group0->noise_rate == 0.0);

  std::vector<Record> only_group0(8);
  const data::GroupStats partial = data::group_stats(Dataset(4, 4, std::move(only_group0), {}));
  CHECK(partial.group0.has_value());
  CHECK_FALSE(partial.group1.has_value());
}

TEST_CASE("feature matrix exposes channels but not the attribute or latent condition") {
  const scm::DiscreteScm scm = scm::build_scm(scm::ScmConfig{});
  const Dataset d = scm::sample_dataset(scm, 50, 5);
  const Matrix features = d.feature_matrix();
  REQUIRE(features.rows == 50);
  REQUIRE(features.cols == 8);
  for (std::size_t i = 0; i < features.rows; ++i) {
    for (std::size_t c = 0; c < features.cols; ++c) {
      CHECK((features.at(i, c) == 1.0 || features.at(i, c) == -1.0));
    }
    CHECK(features.at(i, 0) == (((d.record(i).x_z >> 0) & 1u) ? 1.0 : -1.0));
    CHECK(features.at(i, 4) == (((d.record(i).x_a >> 0) & 1u) ? 1.0 : -1.0));
  }
}
