// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "iwsel/error.hpp"
#include "iwsel/numerics.hpp"

namespace iwsel {

/// Complex samples over (subcarrier, OFDM symbol, antenna). The antenna axis
/// is innermost so each RE's vector is contiguous.
class ResourceGrid {
 public:
  ResourceGrid() = default;
  ResourceGrid(std::size_t num_sc, std::size_t num_sym, std::size_t num_ant)
      : num_sc_(num_sc), num_sym_(num_sym), num_ant_(num_ant), samples_(num_sc * num_sym * num_ant) {}

  std::size_t num_sc() const { return num_sc_; }
  std::size_t num_sym() const { return num_sym_; }
  std::size_t num_ant() const { return num_ant_; }

  std::size_t offset(std::size_t sc, std::size_t sym) const { return (sym * num_sc_ + sc) * num_ant_; }

  cplx& operator()(std::size_t sc, std::size_t sym, std::size_t ant) { return samples_[offset(sc, sym) + ant]; }
  const cplx& operator()(std::size_t sc, std::size_t sym, std::size_t ant) const {
    return samples_[offset(sc, sym) + ant];
  }

  std::span<cplx> re(std::size_t sc, std::size_t sym) { return {samples_.data() + offset(sc, sym), num_ant_}; }
  std::span<const cplx> re(std::size_t sc, std::size_t sym) const {
    return {samples_.data() + offset(sc, sym), num_ant_};
  }

  std::span<cplx> samples() { return samples_; }
  std::span<const cplx> samples() const { return samples_; }

  friend bool operator==(const ResourceGrid&, const ResourceGrid&) = default;

 private:
  std::size_t num_sc_ = 0;
  std::size_t num_sym_ = 0;
  std::size_t num_ant_ = 0;
  std::vector<cplx> samples_;
};

/// `count` matrices of identical shape stored back to back, row-major.
class MatrixStack {
 public:
  MatrixStack() = default;
  MatrixStack(std::size_t count, std::size_t rows, std::size_t cols)
      : count_(count), rows_(rows), cols_(cols), data_(count * rows * cols) {}

  std::size_t count() const { return count_; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  cplx* at(std::size_t i) { return data_.data() + i * rows_ * cols_; }
  const cplx* at(std::size_t i) const { return data_.data() + i * rows_ * cols_; }

  cplx& operator()(std::size_t i, std::size_t r, std::size_t c) { return at(i)[r * cols_ + c]; }
  const cplx& operator()(std::size_t i, std::size_t r, std::size_t c) const { return at(i)[r * cols_ + c]; }

  ComplexMatrix matrix(std::size_t i) const {
    return ComplexMatrix(rows_, cols_, std::vector<cplx>(at(i), at(i) + rows_ * cols_));
  }

  void set(std::size_t i, const ComplexMatrix& m) {
    if (m.rows() != rows_ || m.cols() != cols_) throw Error(Errc::dimension_mismatch, "matrix stack entry");
    std::copy(m.data().begin(), m.data().end(), at(i));
  }

  std::span<cplx> data() { return data_; }
  std::span<const cplx> data() const { return data_; }

  friend bool operator==(const MatrixStack&, const MatrixStack&) = default;

 private:
  std::size_t count_ = 0;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<cplx> data_;
};

}  // namespace iwsel
