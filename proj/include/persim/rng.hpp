#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>

namespace persim::rng {

// Philox4x32-10 (Salmon et al., "Parallel random numbers: as easy as 1, 2, 3").
// A keyed bijection over a 128-bit counter: draw i of stream s is a pure
// function of (key, s, i), so any partitioning of a fill produces identical
// output and replications never share draws.

struct Block {
  std::uint32_t v[4];
};

inline Block philox4x32_10(std::uint64_t key, std::uint64_t stream,
                           std::uint64_t index) {
  constexpr std::uint32_t kMul0 = 0xD2511F53u;
  constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  std::uint32_t c0 = static_cast<std::uint32_t>(index);
  std::uint32_t c1 = static_cast<std::uint32_t>(index >> 32);
  std::uint32_t c2 = static_cast<std::uint32_t>(stream);
  std::uint32_t c3 = static_cast<std::uint32_t>(stream >> 32);
  std::uint32_t k0 = static_cast<std::uint32_t>(key);
  std::uint32_t k1 = static_cast<std::uint32_t>(key >> 32);

  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      k0 += kWeyl0;
      k1 += kWeyl1;
    }
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c0;
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c2;
    const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
    const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
    const std::uint32_t n0 = hi1 ^ c1 ^ k0;
    const std::uint32_t n1 = lo1;
    const std::uint32_t n2 = hi0 ^ c3 ^ k1;
    const std::uint32_t n3 = lo0;
    c0 = n0;
    c1 = n1;
    c2 = n2;
    c3 = n3;
  }
  return Block{{c0, c1, c2, c3}};
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Stream-id namespaces. Every consumer of randomness derives its stream id
// from the master seed context through derive_stream, so adding a consumer
// never perturbs existing draws.
enum class Domain : std::uint64_t {
  band_signal = 1,
  band_noise_session1 = 2,
  band_noise_session2 = 3,
  band_seed = 4,
  feature_subset = 5,
  impostor_pairs = 6,
  search_cell = 7,
};

inline std::uint64_t derive_stream(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x243F6A8885A308D3ull;  // pi digits, nothing-up-my-sleeve
  for (std::uint64_t p : parts) h = splitmix64(h ^ p);
  return h;
}

inline std::uint64_t derive_stream(Domain d,
                                   std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = splitmix64(0x243F6A8885A308D3ull ^
                               static_cast<std::uint64_t>(d));
  for (std::uint64_t p : parts) h = splitmix64(h ^ p);
  return h;
}

/// One logical random stream: key = experiment master seed, stream id =
/// derived substream. Word/normal draws are addressed by index.
class Stream {
 public:
  Stream(std::uint64_t key, std::uint64_t stream_id)
      : key_(key), stream_(stream_id) {}

  std::uint64_t key() const { return key_; }
  std::uint64_t stream_id() const { return stream_; }

  /// i-th 64-bit word of the stream.
  std::uint64_t word(std::uint64_t i) const {
    const Block b = philox4x32_10(key_, stream_, i >> 1);
    const unsigned half = static_cast<unsigned>(i & 1) << 1;
    return static_cast<std::uint64_t>(b.v[half]) |
           (static_cast<std::uint64_t>(b.v[half + 1]) << 32);
  }

  /// i-th standard normal draw (Box-Muller; block j yields draws 2j, 2j+1).
  double normal(std::uint64_t i) const {
    double z0, z1;
    normal_pair(i >> 1, z0, z1);
    return (i & 1) ? z1 : z0;
  }

  /// Fills out[k] with draw (first_index + k). Equivalent to calling
  /// normal() per index; block-aligned interior avoids recomputation.
  void fill_normals(std::span<double> out, std::uint64_t first_index) const {
    std::size_t k = 0;
    std::uint64_t i = first_index;
    if ((i & 1) != 0 && k < out.size()) {
      out[k++] = normal(i++);
    }
    double z0, z1;
    while (k + 1 < out.size()) {
      normal_pair(i >> 1, z0, z1);
      out[k] = z0;
      out[k + 1] = z1;
      k += 2;
      i += 2;
    }
    if (k < out.size()) out[k] = normal(i);
  }

  /// Unbiased draw in [0, bound) consuming words sequentially at *cursor.
  std::uint64_t draw_below(std::uint64_t bound, std::uint64_t& cursor) const {
    if (bound == 0) throw std::invalid_argument("draw_below: bound is 0");
    const std::uint64_t residue =
        (std::numeric_limits<std::uint64_t>::max() % bound + 1) % bound;
    const std::uint64_t accept_max =
        std::numeric_limits<std::uint64_t>::max() - residue;
    for (;;) {
      const std::uint64_t x = word(cursor++);
      if (x <= accept_max) return x % bound;
    }
  }

 private:
  void normal_pair(std::uint64_t block_index, double& z0, double& z1) const {
    const Block b = philox4x32_10(key_, stream_, block_index);
    const std::uint64_t a = static_cast<std::uint64_t>(b.v[0]) |
                            (static_cast<std::uint64_t>(b.v[1]) << 32);
    const std::uint64_t c = static_cast<std::uint64_t>(b.v[2]) |
                            (static_cast<std::uint64_t>(b.v[3]) << 32);
    // u1 in (0,1] keeps the log finite; u2 in [0,1).
    const double u1 = static_cast<double>((a >> 11) + 1) * 0x1.0p-53;
    const double u2 = static_cast<double>(c >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * std::numbers::pi * u2;
    z0 = r * std::cos(t);
    z1 = r * std::sin(t);
  }

  std::uint64_t key_;
  std::uint64_t stream_;
};

}  // namespace persim::rng
