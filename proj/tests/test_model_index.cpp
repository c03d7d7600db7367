#include "doctest.h"

#include <algorithm>
#include <stdexcept>
#include <unordered_set>

#include "bgmm/model_index.hpp"

using namespace bgmm;

TEST_CASE("construction and membership") {
  auto m = ModelIndex::from_indices(5, {0, 3});
  CHECK(m.dimension() == 5);
  CHECK(m.size() == 2);
  CHECK(m.contains(0));
  CHECK(m.contains(3));
  CHECK_FALSE(m.contains(1));
  CHECK_FALSE(m.contains(7));
  CHECK(m.indices() == std::vector<std::size_t>{0, 3});
  m.erase(0);
  CHECK(m.indices() == std::vector<std::size_t>{3});
  CHECK_THROWS_AS(m.insert(5), std::out_of_range);
  CHECK(ModelIndex(4).empty());
  CHECK(ModelIndex::full(70).size() == 70);
}

TEST_CASE("hex encoding") {
  CHECK(ModelIndex::from_indices(3, {0, 2}).to_hex() == "5");
  CHECK(ModelIndex::from_indices(50, {0, 1, 2, 3, 4, 5}).to_hex() == "000000000003f");
  CHECK(ModelIndex(1).to_hex() == "0");
  CHECK(ModelIndex::from_hex(8, "0x81") == ModelIndex::from_indices(8, {0, 7}));
  CHECK_THROWS_AS(ModelIndex::from_hex(3, "8"), std::invalid_argument);
  CHECK_THROWS_AS(ModelIndex::from_hex(3, "g"), std::invalid_argument);
  CHECK_THROWS_AS(ModelIndex::from_hex(3, ""), std::invalid_argument);
}

TEST_CASE("hex round trip across word boundaries") {
  for (std::size_t p : {1u, 4u, 63u, 64u, 65u, 130u}) {
    ModelIndex m(p);
    for (std::size_t j = 0; j < p; j += 3) m.insert(j);
    m.insert(p - 1);
    CHECK(ModelIndex::from_hex(p, m.to_hex()) == m);
  }
}

TEST_CASE("set operations") {
  const auto a = ModelIndex::from_indices(6, {0, 1, 2});
  const auto b = ModelIndex::from_indices(6, {2, 3});
  CHECK((a & b) == ModelIndex::from_indices(6, {2}));
  CHECK((a | b) == ModelIndex::from_indices(6, {0, 1, 2, 3}));
  CHECK((a - b) == ModelIndex::from_indices(6, {0, 1}));
  CHECK((a & b).is_subset_of(a));
  CHECK_FALSE(a.is_subset_of(b));
  CHECK_THROWS_AS(a | ModelIndex(5), std::invalid_argument);
}

TEST_CASE("canonical order puts smaller models first") {
  const auto m1 = ModelIndex::from_indices(4, {3});
  const auto m2 = ModelIndex::from_indices(4, {0, 1});
  const auto m3 = ModelIndex::from_indices(4, {0, 2});
  CHECK(m1 < m2);
  CHECK(m2 < m3);
  CHECK_FALSE(m3 < m2);
  CHECK_FALSE(m2 < m2);
}

TEST_CASE("enumerate_models covers the model space") {
  const auto all = enumerate_models(ModelIndex::full(4), ModelIndex(4), false);
  CHECK(all.size() == 15);
  CHECK(std::is_sorted(all.begin(), all.end()));
  std::unordered_set<ModelIndex> unique(all.begin(), all.end());
  CHECK(unique.size() == 15);
  CHECK(enumerate_models(ModelIndex::full(4), ModelIndex(4), true).size() == 16);

  const auto fixed = ModelIndex::from_indices(5, {0, 4});
  const auto sel = ModelIndex::from_indices(5, {1, 2, 3});
  const auto models = enumerate_models(sel, fixed, true);
  CHECK(models.size() == 8);
  for (const auto& m : models) CHECK(fixed.is_subset_of(m));
}
