#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>

namespace bismut {

/// Philox4x32-10 counter-based block cipher (Salmon et al., Random123).
/// Stateless: the output is a pure function of (counter, key).
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static constexpr Counter apply(Counter ctr, Key key) noexcept {
    ctr = round(ctr, key);
    for (int r = 1; r < 10; ++r) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
      ctr = round(ctr, key);
    }
    return ctr;
  }

private:
  static constexpr Counter round(const Counter& c, const Key& k) noexcept {
    const std::uint64_t p0 = std::uint64_t{kMul0} * c[0];
    const std::uint64_t p1 = std::uint64_t{kMul1} * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
};

/// Standard normal draws addressed by (seed, path_index, step, slot).
///
/// Each Philox block yields two 53-bit uniforms and, via Box-Muller, two
/// normals. Counter layout: {block, step, path_lo, path_hi}; key = seed.
class NormalStream {
public:
  NormalStream(std::uint64_t seed, std::uint64_t path_index) noexcept
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        path_lo_(static_cast<std::uint32_t>(path_index)),
        path_hi_(static_cast<std::uint32_t>(path_index >> 32)) {}

  /// Fill `out` with the normals of one step. The values depend only on
  /// (seed, path_index, step, out.size()).
  void fill(std::uint64_t step, std::span<double> out) const noexcept {
    const auto step32 = static_cast<std::uint32_t>(step);
    std::size_t i = 0;
    for (std::uint32_t block = 0; i < out.size(); ++block) {
      const auto r = Philox4x32::apply({block, step32, path_lo_, path_hi_}, key_);
      const double u1 = to_open_unit((std::uint64_t{r[0]} << 32) | r[1]);
      const double u2 = to_half_open_unit((std::uint64_t{r[2]} << 32) | r[3]);
      const double rad = std::sqrt(-2.0 * std::log(u1));
      const double ang = 2.0 * std::numbers::pi * u2;
      out[i++] = rad * std::cos(ang);
      if (i < out.size()) out[i++] = rad * std::sin(ang);
    }
  }

  /// Uniform in (0,1]; exposed for tests.
  static double to_open_unit(std::uint64_t bits) noexcept {
    return static_cast<double>((bits >> 11) + 1) * 0x1.0p-53;
  }
  static double to_half_open_unit(std::uint64_t bits) noexcept {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
  }

private:
  Philox4x32::Key key_;
  std::uint32_t path_lo_;
  std::uint32_t path_hi_;
};

} // namespace bismut
