#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace pathdrift {

/// Identifies one random stream: a master seed shared by an experiment and
/// the index of the stream within it. Equal specs reproduce equal draws.
struct SeedSpec {
  std::uint64_t master_seed = 0;
  std::uint64_t stream_index = 0;

  [[nodiscard]] SeedSpec with_stream(std::uint64_t stream) const { return {master_seed, stream}; }
  friend bool operator==(const SeedSpec&, const SeedSpec&) = default;
};

/// Philox4x32-10 counter-based block cipher (Salmon et al., SC'11). A stream
/// is fully determined by its key and counter, so any sample index can be
/// reproduced without replaying earlier draws.
class Philox4x32 {
 public:
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Block encrypt(Block ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
};

/// Per-worker random source over one Philox stream.
///
/// Key = master seed; counter = (block index, substream, stream index). The
/// substream lets one sample own several independent streams, e.g. one for
/// jump times and one for Gaussian increments.
///
/// Gaussian draws use the Marsaglia polar transform on open-interval
/// uniforms, caching the second variate of each accepted pair.
class Rng {
 public:
  explicit Rng(SeedSpec seed, std::uint32_t substream = 0)
      : key_{static_cast<std::uint32_t>(seed.master_seed),
             static_cast<std::uint32_t>(seed.master_seed >> 32)},
        substream_(substream),
        stream_lo_(static_cast<std::uint32_t>(seed.stream_index)),
        stream_hi_(static_cast<std::uint32_t>(seed.stream_index >> 32)) {}

  std::uint32_t next_u32() {
    if (pos_ == 4) refill();
    return buffer_[pos_++];
  }

  /// Uniform on the open interval (0, 1) with 53 bits of resolution.
  double uniform() {
    const std::uint32_t a = next_u32() >> 5;
    const std::uint32_t b = next_u32() >> 6;
    return (static_cast<double>(a) * 67108864.0 + static_cast<double>(b) + 0.5) *
           (1.0 / 9007199254740992.0);
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u = 0.0;
    double v = 0.0;
    double s = 0.0;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  double exponential(double rate) { return -std::log(uniform()) / rate; }

 private:
  void refill() {
    buffer_ = Philox4x32::encrypt({block_, substream_, stream_lo_, stream_hi_}, key_);
    ++block_;
    pos_ = 0;
  }

  Philox4x32::Key key_;
  std::uint32_t substream_;
  std::uint32_t stream_lo_;
  std::uint32_t stream_hi_;
  std::uint32_t block_ = 0;
  Philox4x32::Block buffer_{};
  int pos_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace pathdrift
