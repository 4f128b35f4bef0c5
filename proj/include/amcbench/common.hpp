#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace amcbench {

using cdouble = std::complex<double>;

inline constexpr std::string_view kVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Deterministic random source.
//
// All randomness in the toolkit flows through explicitly seeded Rng instances
// so that every artifact is a pure function of its seeds. The generator is
// self-contained (xoshiro256** seeded via splitmix64) rather than
// <random>-based: the standard distributions are implementation-defined,
// which would tie dataset bytes to a particular libstdc++.
// ---------------------------------------------------------------------------

inline uint64_t splitmix64_next(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(uint64_t seed) {
    uint64_t s = seed;
    for (auto& w : state_) w = splitmix64_next(s);
  }

  uint64_t next() {
    const uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Multiply-shift; bias is O(n / 2^64).
  uint64_t uniform_int(uint64_t n) {
    return static_cast<uint64_t>(
        (static_cast<__uint128_t>(next()) * n) >> 64);
  }

  // Standard normal via Box-Muller, pair-cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // Circularly-symmetric complex normal CN(0, 1): E[|z|^2] = 1.
  cdouble cnormal() {
    const double s = 0.70710678118654752440;
    const double re = normal();
    const double im = normal();
    return {s * re, s * im};
  }

  // Fisher-Yates shuffle of an index vector.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::array<uint64_t, 4> state_{};
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// ---------------------------------------------------------------------------
// Hashing (FNV-1a 64). Used for seed derivation, stage cache keys, and file
// checksums.
// ---------------------------------------------------------------------------

inline constexpr uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
inline constexpr uint64_t kFnvPrime = 0x100000001b3ULL;

inline uint64_t fnv1a(const void* data, size_t len, uint64_t h = kFnvOffset) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
  return h;
}

inline uint64_t fnv1a(std::string_view s, uint64_t h = kFnvOffset) {
  return fnv1a(s.data(), s.size(), h);
}

// Derives an independent child seed from a master seed, a role tag, and up to
// two indices. Streams with distinct (tag, a, b) are decorrelated.
inline uint64_t derive_seed(uint64_t master, std::string_view tag,
                            uint64_t a = 0, uint64_t b = 0) {
  uint64_t h = fnv1a(tag);
  h = fnv1a(&master, sizeof(master), h);
  h = fnv1a(&a, sizeof(a), h);
  h = fnv1a(&b, sizeof(b), h);
  uint64_t s = h;
  return splitmix64_next(s);
}

// ---------------------------------------------------------------------------
// Error types. File-format failures are distinguishable so callers can react
// to corruption vs. stale files.
// ---------------------------------------------------------------------------

struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct VersionMismatchError : FormatError {
  using FormatError::FormatError;
};

struct TruncatedFileError : FormatError {
  using FormatError::FormatError;
};

struct ChecksumError : FormatError {
  using FormatError::FormatError;
};

struct TrainingDiverged : std::runtime_error {
  explicit TrainingDiverged(int epoch_idx)
      : std::runtime_error("training diverged (NaN loss) at epoch " +
                           std::to_string(epoch_idx)),
        epoch(epoch_idx) {}
  int epoch;
};

// ---------------------------------------------------------------------------
// Little-endian byte buffer helpers for the binary containers.
// ---------------------------------------------------------------------------

class ByteWriter {
 public:
  void put_bytes(const void* data, size_t len) {
    const auto* p = static_cast<const char*>(data);
    buf_.append(p, len);
  }
  void put_u8(uint8_t v) { put_bytes(&v, 1); }
  void put_u16(uint16_t v) { put_le(v); }
  void put_u32(uint32_t v) { put_le(v); }
  void put_u64(uint64_t v) { put_le(v); }
  void put_f32(float v) {
    uint32_t bits;
    static_assert(sizeof(bits) == sizeof(v));
    std::memcpy(&bits, &v, sizeof(bits));
    put_le(bits);
  }
  const std::string& bytes() const { return buf_; }

 private:
  template <class T>
  void put_le(T v) {
    for (size_t i = 0; i < sizeof(T); ++i)
      buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::string buf_;
};

class ByteReader {
 public:
  ByteReader(const void* data, size_t len)
      : p_(static_cast<const unsigned char*>(data)), len_(len) {}

  uint8_t get_u8() { return get_le<uint8_t>(); }
  uint16_t get_u16() { return get_le<uint16_t>(); }
  uint32_t get_u32() { return get_le<uint32_t>(); }
  uint64_t get_u64() { return get_le<uint64_t>(); }
  float get_f32() {
    const uint32_t bits = get_le<uint32_t>();
    float v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
  }
  void get_bytes(void* out, size_t len) {
    require(len);
    std::memcpy(out, p_ + pos_, len);
    pos_ += len;
  }
  size_t remaining() const { return len_ - pos_; }
  size_t position() const { return pos_; }

 private:
  template <class T>
  T get_le() {
    require(sizeof(T));
    T v = 0;
    for (size_t i = 0; i < sizeof(T); ++i)
      v |= static_cast<T>(static_cast<T>(p_[pos_ + i]) << (8 * i));
    pos_ += sizeof(T);
    return v;
  }
  void require(size_t n) const {
    if (pos_ + n > len_)
      throw TruncatedFileError("unexpected end of file at byte " +
                               std::to_string(pos_));
  }
  const unsigned char* p_;
  size_t len_;
  size_t pos_ = 0;
};

// Rounds a double to the nearest binary32 value (still stored as double).
// Generation quantizes signal payloads this way so that the 32-bit on-disk
// representation round-trips bit-exactly.
inline double quantize_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

inline cdouble quantize_f32(cdouble v) {
  return {quantize_f32(v.real()), quantize_f32(v.imag())};
}

}  // namespace amcbench
