// SPDX-License-Identifier: Apache-2.0
//
// Square Gray-mapped QAM with unit average power, and a max-log demapper.
// Bits alternate between the in-phase and quadrature axes: b0 → I MSB,
// b1 → Q MSB, b2 → I next, ...
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "iwsel/error.hpp"
#include "iwsel/numerics.hpp"

namespace iwsel {

class QamConstellation {
 public:
  explicit QamConstellation(unsigned bits_per_symbol) : qm_(bits_per_symbol) {
    if (qm_ != 2 && qm_ != 4 && qm_ != 6 && qm_ != 8)
      throw Error(Errc::config, "modulation order must be 2, 4, 6 or 8");
    per_dim_ = qm_ / 2;
    const unsigned levels = 1u << per_dim_;
    const double norm = std::sqrt(2.0 * (levels * levels - 1.0) / 3.0);
    level_of_label_.resize(levels);
    for (unsigned label = 0; label < levels; ++label) {
      unsigned idx = label;  // inverse Gray
      for (unsigned s = label >> 1; s != 0; s >>= 1) idx ^= s;
      level_of_label_[label] = (static_cast<double>(levels - 1) - 2.0 * idx) / norm;
    }
  }

  unsigned bits_per_symbol() const { return qm_; }

  cplx map(const std::uint8_t* bits) const {
    unsigned li = 0, lq = 0;
    for (unsigned k = 0; k < per_dim_; ++k) {
      li = (li << 1) | (bits[2 * k] & 1u);
      lq = (lq << 1) | (bits[2 * k + 1] & 1u);
    }
    return {level_of_label_[li], level_of_label_[lq]};
  }

  std::vector<cplx> map(std::span<const std::uint8_t> bits) const {
    if (bits.size() % qm_ != 0) throw Error(Errc::dimension_mismatch, "bit count not a multiple of Qm");
    std::vector<cplx> out(bits.size() / qm_);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = map(bits.data() + i * qm_);
    return out;
  }

  /// Max-log LLRs for one symbol estimate with complex noise variance
  /// `noise_var`; writes Qm values to `out`.
  void demap(cplx y, double noise_var, float* out) const {
    const double inv = 1.0 / std::max(noise_var, 1e-30);
    demap_axis(y.real(), inv, out, 0);
    demap_axis(y.imag(), inv, out, 1);
  }

  std::vector<cplx> points() const {
    std::vector<cplx> pts;
    const unsigned levels = 1u << per_dim_;
    for (unsigned i = 0; i < levels; ++i)
      for (unsigned q = 0; q < levels; ++q) pts.emplace_back(level_of_label_[i], level_of_label_[q]);
    return pts;
  }

 private:
  void demap_axis(double r, double inv, float* out, unsigned axis) const {
    const unsigned levels = 1u << per_dim_;
    std::array<double, 16> dist{};
    for (unsigned label = 0; label < levels; ++label) {
      const double d = r - level_of_label_[label];
      dist[label] = d * d;
    }
    for (unsigned k = 0; k < per_dim_; ++k) {
      const unsigned mask = 1u << (per_dim_ - 1 - k);
      double d0 = 1e300, d1 = 1e300;
      for (unsigned label = 0; label < levels; ++label) {
        if (label & mask)
          d1 = std::min(d1, dist[label]);
        else
          d0 = std::min(d0, dist[label]);
      }
      out[2 * k + axis] = static_cast<float>((d1 - d0) * inv);
    }
  }

  unsigned qm_;
  unsigned per_dim_;
  std::vector<double> level_of_label_;
};

}  // namespace iwsel
