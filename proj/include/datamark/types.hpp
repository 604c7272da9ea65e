#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <numbers>
#include <string>
#include <vector>

namespace datamark {

using Scalar = double;

template <typename T>
using DynamicMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using DynamicVector = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <typename T>
using DynamicArray = Eigen::Array<T, Eigen::Dynamic, 1>;

using MatrixX = DynamicMatrix<Scalar>;
using VectorX = DynamicVector<Scalar>;
using ArrayX = DynamicArray<Scalar>;

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
  std::uint64_t s = a ^ (0x9e3779b97f4a7c15ull + (b << 6) + (b >> 2));
  std::uint64_t t = s;
  return splitmix64(t);
}

/// Deterministic, splittable random stream. All randomness in the library
/// flows through this type; no global RNG state exists anywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

  std::uint64_t next_u64() { return splitmix64(state_); }

  /// Uniform in [0,1), 53-bit resolution.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  /// Standard normal via Box-Muller; consumes exactly two uniforms per call
  /// so the stream stays reproducible.
  double normal() {
    double u1 = 1.0 - next_double();  // (0,1]
    double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi_v<double> * u2);
  }

  /// Uniform integer in [0, n). Requires n > 0.
  int uniform_int(int n) {
    return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n));
  }

  /// Derives an independent child stream; children with distinct tags are
  /// decorrelated from each other and from the parent.
  Rng split(std::uint64_t stream) const { return Rng(mix64(seed_, stream + 1)); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(static_cast<int>(i)));
      std::swap(v[i - 1], v[j]);
    }
  }

  /// k distinct indices from [0, n), uniform without replacement.
  std::vector<int> sample_without_replacement(int n, int k) {
    std::vector<int> idx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    shuffle(idx);
    idx.resize(static_cast<std::size_t>(k));
    return idx;
  }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
};

/// FNV-1a 64-bit accumulator used for content fingerprints.
class Fnv1a {
 public:
  void update_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h_ ^= static_cast<std::uint64_t>(p[i]);
      h_ *= 0x100000001b3ull;
    }
  }
  void update_u64(std::uint64_t v) { update_bytes(&v, sizeof(v)); }
  void update_i64(std::int64_t v) { update_bytes(&v, sizeof(v)); }
  void update_i32(std::int32_t v) { update_bytes(&v, sizeof(v)); }
  void update_double(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    update_u64(bits);
  }
  void update_string(const std::string& s) { update_bytes(s.data(), s.size()); }

  std::uint64_t digest() const { return h_; }

  static std::string hex(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
      out[static_cast<std::size_t>(i)] = digits[v & 0xf];
      v >>= 4;
    }
    return out;
  }

 private:
  std::uint64_t h_ = 14695981039346656037ull;
};

}  // namespace datamark
