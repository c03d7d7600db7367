#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bgmm {

/// A model: the subset of parameter coordinates {0..p-1} allowed to be nonzero.
///
/// Hex form: bit j stands for coordinate j; digits are written most
/// significant first, zero-padded to ceil(p/4) digits.
class ModelIndex {
 public:
  ModelIndex() = default;
  explicit ModelIndex(std::size_t p);

  static ModelIndex full(std::size_t p);
  static ModelIndex from_indices(std::size_t p, std::span<const std::size_t> indices);
  static ModelIndex from_indices(std::size_t p, std::initializer_list<std::size_t> indices);
  static ModelIndex from_hex(std::size_t p, std::string_view hex);

  std::size_t dimension() const { return p_; }
  std::size_t size() const;
  bool empty() const { return size() == 0; }
  bool contains(std::size_t j) const;

  void insert(std::size_t j);
  void erase(std::size_t j);

  std::vector<std::size_t> indices() const;
  std::string to_hex() const;

  ModelIndex operator&(const ModelIndex& other) const;
  ModelIndex operator|(const ModelIndex& other) const;
  /// Coordinates in *this but not in other.
  ModelIndex operator-(const ModelIndex& other) const;
  bool is_subset_of(const ModelIndex& other) const;

  bool operator==(const ModelIndex& other) const = default;

  /// Canonical order: smaller models first, then lexicographic on the sorted
  /// active coordinates.
  friend bool operator<(const ModelIndex& a, const ModelIndex& b);

  std::size_t hash() const;

 private:
  std::size_t p_ = 0;
  std::vector<std::uint64_t> words_;
};

/// Every model on the coordinates of `selectable`, each united with `fixed`.
/// The empty selection is included only when include_empty is set.
std::vector<ModelIndex> enumerate_models(const ModelIndex& selectable, const ModelIndex& fixed,
                                         bool include_empty);

}  // namespace bgmm

template <>
struct std::hash<bgmm::ModelIndex> {
  std::size_t operator()(const bgmm::ModelIndex& m) const noexcept { return m.hash(); }
};
