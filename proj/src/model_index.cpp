#include "bgmm/model_index.hpp"

#include <algorithm>
#include <bit>
#include <stdexcept>

namespace bgmm {

namespace {

std::size_t word_count(std::size_t p) { return (p + 63) / 64; }

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

ModelIndex::ModelIndex(std::size_t p) : p_(p), words_(word_count(p), 0) {}

ModelIndex ModelIndex::full(std::size_t p) {
  ModelIndex m(p);
  for (std::size_t j = 0; j < p; ++j) m.insert(j);
  return m;
}

ModelIndex ModelIndex::from_indices(std::size_t p, std::span<const std::size_t> indices) {
  ModelIndex m(p);
  for (std::size_t j : indices) m.insert(j);
  return m;
}

ModelIndex ModelIndex::from_indices(std::size_t p, std::initializer_list<std::size_t> indices) {
  return from_indices(p, std::span<const std::size_t>(indices.begin(), indices.size()));
}

ModelIndex ModelIndex::from_hex(std::size_t p, std::string_view hex) {
  if (hex.starts_with("0x") || hex.starts_with("0X")) hex.remove_prefix(2);
  if (hex.empty()) throw std::invalid_argument("empty model bitmask");
  ModelIndex m(p);
  std::size_t bit = 0;
  for (auto it = hex.rbegin(); it != hex.rend(); ++it, bit += 4) {
    const int v = hex_value(*it);
    if (v < 0) throw std::invalid_argument("invalid hex digit in model bitmask");
    for (int b = 0; b < 4; ++b) {
      if ((v >> b) & 1) {
        if (bit + b >= p) throw std::invalid_argument("model bitmask exceeds dimension");
        m.insert(bit + b);
      }
    }
  }
  return m;
}

std::size_t ModelIndex::size() const {
  std::size_t k = 0;
  for (auto w : words_) k += static_cast<std::size_t>(std::popcount(w));
  return k;
}

bool ModelIndex::contains(std::size_t j) const {
  return j < p_ && ((words_[j / 64] >> (j % 64)) & 1ULL);
}

void ModelIndex::insert(std::size_t j) {
  if (j >= p_) throw std::out_of_range("model coordinate out of range");
  words_[j / 64] |= (1ULL << (j % 64));
}

void ModelIndex::erase(std::size_t j) {
  if (j >= p_) throw std::out_of_range("model coordinate out of range");
  words_[j / 64] &= ~(1ULL << (j % 64));
}

std::vector<std::size_t> ModelIndex::indices() const {
  std::vector<std::size_t> out;
  out.reserve(size());
  for (std::size_t w = 0; w < words_.size(); ++w) {
    std::uint64_t bits = words_[w];
    while (bits) {
      const int b = std::countr_zero(bits);
      out.push_back(w * 64 + static_cast<std::size_t>(b));
      bits &= bits - 1;
    }
  }
  return out;
}

std::string ModelIndex::to_hex() const {
  static constexpr char digits[] = "0123456789abcdef";
  const std::size_t n_digits = std::max<std::size_t>(1, (p_ + 3) / 4);
  std::string out(n_digits, '0');
  for (std::size_t d = 0; d < n_digits; ++d) {
    int v = 0;
    for (int b = 0; b < 4; ++b)
      if (contains(4 * d + b)) v |= (1 << b);
    out[n_digits - 1 - d] = digits[v];
  }
  return out;
}

ModelIndex ModelIndex::operator&(const ModelIndex& other) const {
  if (p_ != other.p_) throw std::invalid_argument("model dimension mismatch");
  ModelIndex out(p_);
  for (std::size_t w = 0; w < words_.size(); ++w) out.words_[w] = words_[w] & other.words_[w];
  return out;
}

ModelIndex ModelIndex::operator|(const ModelIndex& other) const {
  if (p_ != other.p_) throw std::invalid_argument("model dimension mismatch");
  ModelIndex out(p_);
  for (std::size_t w = 0; w < words_.size(); ++w) out.words_[w] = words_[w] | other.words_[w];
  return out;
}

ModelIndex ModelIndex::operator-(const ModelIndex& other) const {
  if (p_ != other.p_) throw std::invalid_argument("model dimension mismatch");
  ModelIndex out(p_);
  for (std::size_t w = 0; w < words_.size(); ++w) out.words_[w] = words_[w] & ~other.words_[w];
  return out;
}

bool ModelIndex::is_subset_of(const ModelIndex& other) const {
  return (*this - other).empty();
}

bool operator<(const ModelIndex& a, const ModelIndex& b) {
  const std::size_t sa = a.size(), sb = b.size();
  if (sa != sb) return sa < sb;
  const auto ia = a.indices(), ib = b.indices();
  if (ia != ib) return std::lexicographical_compare(ia.begin(), ia.end(), ib.begin(), ib.end());
  return a.p_ < b.p_;
}

std::size_t ModelIndex::hash() const {
  std::size_t h = std::hash<std::size_t>{}(p_);
  for (auto w : words_) h ^= std::hash<std::uint64_t>{}(w) + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2);
  return h;
}

std::vector<ModelIndex> enumerate_models(const ModelIndex& selectable, const ModelIndex& fixed,
                                         bool include_empty) {
  const auto free = (selectable - fixed).indices();
  if (free.size() > 30) throw std::invalid_argument("model space too large to enumerate");
  std::vector<ModelIndex> out;
  const std::uint64_t total = 1ULL << free.size();
  for (std::uint64_t mask = include_empty ? 0 : 1; mask < total; ++mask) {
    ModelIndex m = fixed;
    for (std::size_t k = 0; k < free.size(); ++k)
      if ((mask >> k) & 1ULL) m.insert(free[k]);
    out.push_back(std::move(m));
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace bgmm
