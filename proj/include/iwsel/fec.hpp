// SPDX-License-Identifier: Apache-2.0
//
// Forward error correction stand-in: CRC-16/CCITT, rate-1/2 K=7
// convolutional code (133/171 octal) terminated with six zero bits, soft
// max-log Viterbi, and rate matching by even puncturing or cyclic repetition.
//
// LLR convention: L = log P(b=0) / P(b=1).
#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "iwsel/error.hpp"
#include "iwsel/rng.hpp"

namespace iwsel::fec {

using Bits = std::vector<std::uint8_t>;

inline constexpr std::size_t kCrcBits = 16;
inline constexpr int kConstraint = 7;
inline constexpr std::size_t kTailBits = kConstraint - 1;
inline constexpr std::size_t kStates = 1u << (kConstraint - 1);
inline constexpr unsigned kPoly0 = 0133;
inline constexpr unsigned kPoly1 = 0171;

/// CRC-16/CCITT-FALSE (poly 0x1021, init 0xFFFF), MSB first.
inline std::uint16_t crc16(std::span<const std::uint8_t> bits) {
  std::uint16_t reg = 0xFFFF;
  for (auto b : bits) {
    const bool top = ((reg >> 15) & 1u) ^ (b & 1u);
    reg = static_cast<std::uint16_t>(reg << 1);
    if (top) reg ^= 0x1021;
  }
  return reg;
}

inline Bits attach_crc(std::span<const std::uint8_t> payload) {
  Bits out(payload.begin(), payload.end());
  const std::uint16_t c = crc16(payload);
  for (int i = 15; i >= 0; --i) out.push_back(static_cast<std::uint8_t>((c >> i) & 1u));
  return out;
}

/// True when the trailing 16 bits match the CRC of the leading bits.
inline bool check_crc(std::span<const std::uint8_t> block) {
  if (block.size() < kCrcBits) return false;
  const auto payload = block.first(block.size() - kCrcBits);
  const std::uint16_t c = crc16(payload);
  for (std::size_t i = 0; i < kCrcBits; ++i)
    if (block[payload.size() + i] != ((c >> (15 - i)) & 1u)) return false;
  return true;
}

namespace detail {

inline unsigned parity(unsigned x) { return static_cast<unsigned>(__builtin_parity(x)); }

/// Output pair for shift register `reg` (newest bit in the MSB of 7 bits).
inline std::array<std::uint8_t, 2> outputs(unsigned reg) {
  return {static_cast<std::uint8_t>(parity(reg & kPoly0)), static_cast<std::uint8_t>(parity(reg & kPoly1))};
}

}  // namespace detail

/// Rate-1/2 encoding with six tail zeros: output length 2·(bits + 6).
inline Bits conv_encode(std::span<const std::uint8_t> bits) {
  Bits out;
  out.reserve(2 * (bits.size() + kTailBits));
  unsigned state = 0;  // last six inputs, newest in bit 5
  auto push = [&](unsigned b) {
    const unsigned reg = (b << 6) | state;
    const auto o = detail::outputs(reg);
    out.push_back(o[0]);
    out.push_back(o[1]);
    state = reg >> 1;
  };
  for (auto b : bits) push(b & 1u);
  for (std::size_t i = 0; i < kTailBits; ++i) push(0);
  return out;
}

/// Soft-input Viterbi over the terminated trellis. `llr` has length
/// 2·(info + 6); returns the `info` decoded bits.
inline Bits viterbi_decode(std::span<const float> llr) {
  if (llr.size() % 2 != 0 || llr.size() < 2 * kTailBits)
    throw Error(Errc::dimension_mismatch, "viterbi input length");
  const std::size_t steps = llr.size() / 2;
  const std::size_t info = steps - kTailBits;

  // For each next state s' = (b << 5) | (s >> 1): the two predecessors are
  // s = ((s' << 1) & 63) | p, p in {0,1}, with input b = s' >> 5.
  // bm index of the branch from each predecessor
  struct Branch {
    std::uint8_t idx[2];
  };
  static const std::array<Branch, kStates> table = [] {
    std::array<Branch, kStates> t{};
    for (unsigned ns = 0; ns < kStates; ++ns) {
      const unsigned b = ns >> 5;
      for (unsigned p = 0; p < 2; ++p) {
        const unsigned s = ((ns << 1) & (kStates - 1)) | p;
        const auto o = detail::outputs((b << 6) | s);
        t[ns].idx[p] = static_cast<std::uint8_t>(o[0] * 2 + o[1]);
      }
    }
    return t;
  }();

  constexpr float kNeg = -1e30f;
  std::array<float, kStates> metric, next;
  metric.fill(kNeg);
  metric[0] = 0.0f;
  std::vector<std::uint64_t> decisions(steps);

  for (std::size_t t = 0; t < steps; ++t) {
    const float l0 = llr[2 * t], l1 = llr[2 * t + 1];
    // correlation metric: +L/2 for bit 0, -L/2 for bit 1 (scaled by 2)
    const float bm[4] = {l0 + l1, l0 - l1, -l0 + l1, -l0 - l1};
    std::uint64_t dec = 0;
    for (unsigned ns = 0; ns < kStates; ++ns) {
      const unsigned s0 = (ns << 1) & (kStates - 1);
      const float m0 = metric[s0] + bm[table[ns].idx[0]];
      const float m1 = metric[s0 | 1u] + bm[table[ns].idx[1]];
      const bool pick1 = m1 > m0;
      next[ns] = pick1 ? m1 : m0;
      dec |= std::uint64_t{pick1} << ns;
    }
    // path metric differences stay bounded; re-reference to state 0
    const float ref = next[0];
    for (unsigned s = 0; s < kStates; ++s) metric[s] = next[s] - ref;
    decisions[t] = dec;
  }

  Bits out(steps);
  unsigned state = 0;  // terminated
  for (std::size_t t = steps; t-- > 0;) {
    out[t] = static_cast<std::uint8_t>(state >> 5);
    const unsigned p = static_cast<unsigned>((decisions[t] >> state) & 1u);
    state = ((state << 1) & (kStates - 1)) | p;
  }
  out.resize(info);
  return out;
}

/// Maps E transmitted bits onto M mother-code positions: output k takes
/// mother bit floor(k·M/E) when puncturing (E < M), k mod M when repeating.
class RateMatcher {
 public:
  RateMatcher() = default;
  RateMatcher(std::size_t mother_len, std::size_t out_len) : mother_(mother_len), map_(out_len) {
    if (mother_len == 0 || out_len == 0) throw Error(Errc::dimension_mismatch, "empty rate matcher");
    for (std::size_t k = 0; k < out_len; ++k)
      map_[k] = out_len < mother_len ? static_cast<std::uint32_t>((k * mother_len) / out_len)
                                     : static_cast<std::uint32_t>(k % mother_len);
  }

  std::size_t mother_len() const { return mother_; }
  std::size_t out_len() const { return map_.size(); }

  Bits select(std::span<const std::uint8_t> mother) const {
    Bits out(map_.size());
    for (std::size_t k = 0; k < map_.size(); ++k) out[k] = mother[map_[k]];
    return out;
  }

  /// Soft combining: repeated positions add, punctured positions stay 0.
  std::vector<float> combine(std::span<const float> llr) const {
    std::vector<float> out(mother_, 0.0f);
    for (std::size_t k = 0; k < map_.size(); ++k) out[map_[k]] += llr[k];
    return out;
  }

 private:
  std::size_t mother_ = 0;
  std::vector<std::uint32_t> map_;
};

/// Fixed pseudo-random permutation of length n.
class Interleaver {
 public:
  Interleaver() = default;
  explicit Interleaver(std::size_t n, std::uint64_t seed = 0x1f2e3d4c5b6a7988ULL) : perm_(n) {
    std::iota(perm_.begin(), perm_.end(), 0u);
    Rng rng(seed ^ n);
    for (std::size_t i = n; i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(rng() % i);
      std::swap(perm_[i - 1], perm_[j]);
    }
  }

  std::size_t size() const { return perm_.size(); }

  template <typename T>
  std::vector<T> forward(std::span<const T> in) const {
    std::vector<T> out(in.size());
    for (std::size_t i = 0; i < perm_.size(); ++i) out[i] = in[perm_[i]];
    return out;
  }

  template <typename T>
  std::vector<T> inverse(std::span<const T> in) const {
    std::vector<T> out(in.size());
    for (std::size_t i = 0; i < perm_.size(); ++i) out[perm_[i]] = in[i];
    return out;
  }

 private:
  std::vector<std::uint32_t> perm_;
};

}  // namespace iwsel::fec
