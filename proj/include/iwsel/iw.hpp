// SPDX-License-Identifier: Apache-2.0
//
// Interference whitening. Per-RB covariance estimates are formed from the
// DMRS residuals and turned into a whitening covariance under one of three
// options, ordered by cost:
//
//   IWNRB  diag of the RB's own estimate          O(N)
//   IWNBW  diag of the estimate averaged over B   O(N)
//   IWRB   the RB's full estimate                 O(N^3)
//
// The received grid and channel estimate of every RE in RB b are then
// multiplied by the inverse Cholesky factor of R_IW,b.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "iwsel/error.hpp"
#include "iwsel/grid.hpp"
#include "iwsel/link.hpp"
#include "iwsel/numerics.hpp"

namespace iwsel {

enum class IwOption : int { iwnrb = 1, iwnbw = 2, iwrb = 3 };

inline constexpr IwOption kAllOptions[] = {IwOption::iwnrb, IwOption::iwnbw, IwOption::iwrb};

inline std::string to_string(IwOption o) {
  switch (o) {
    case IwOption::iwnrb: return "IWNRB";
    case IwOption::iwnbw: return "IWNBW";
    case IwOption::iwrb: return "IWRB";
  }
  return "?";
}

inline IwOption parse_iw_option(const std::string& s) {
  if (s == "IWNRB" || s == "iwnrb" || s == "1") return IwOption::iwnrb;
  if (s == "IWNBW" || s == "iwnbw" || s == "2") return IwOption::iwnbw;
  if (s == "IWRB" || s == "iwrb" || s == "3") return IwOption::iwrb;
  throw Error(Errc::config, "unknown IW option '" + s + "'");
}

inline bool is_diagonal_option(IwOption o) { return o != IwOption::iwrb; }

inline std::string complexity_class(IwOption o) { return is_diagonal_option(o) ? "O(N)" : "O(N^3)"; }

struct CovarianceSet {
  std::size_t num_rx = 0;
  std::vector<HermitianMatrix> per_rb;
  std::vector<std::size_t> sample_counts;

  std::size_t num_rb() const { return per_rb.size(); }
};

/// R̂_b = (1/|S_b|) Σ v̂ v̂ᴴ over the RB's DMRS residuals.
inline CovarianceSet estimate_rb_covariance(const Residuals& res) {
  if (res.num_rb == 0 || res.num_rx == 0) throw Error(Errc::empty_rb, "no resource blocks");
  if (res.per_rb == 0) throw Error(Errc::empty_rb, "no residuals in RB");
  if (res.data.size() != res.num_rb * res.per_rb * res.num_rx)
    throw Error(Errc::dimension_mismatch, "residual buffer size");
  const std::size_t n = res.num_rx;
  CovarianceSet cov{n, {}, std::vector<std::size_t>(res.num_rb, res.per_rb)};
  cov.per_rb.reserve(res.num_rb);
  const double scale = 1.0 / static_cast<double>(res.per_rb);
  for (std::size_t rb = 0; rb < res.num_rb; ++rb) {
    ComplexMatrix acc(n, n);
    for (std::size_t k = 0; k < res.per_rb; ++k) {
      const cplx* v = res.at(rb, k);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) acc(i, j) += v[i] * std::conj(v[j]);
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j) {
        acc(i, j) *= scale;
        acc(j, i) = std::conj(acc(i, j));
      }
    cov.per_rb.push_back(hermitian_projection(acc));
  }
  return cov;
}

/// Diagonal of (1/B) Σ_b R̂_b, accumulated on the diagonal only.
inline std::vector<double> bandwidth_diagonal(const CovarianceSet& cov) {
  std::vector<double> d(cov.num_rx, 0.0);
  for (const auto& r : cov.per_rb)
    for (std::size_t i = 0; i < cov.num_rx; ++i) d[i] += r(i, i).real();
  for (double& v : d) v /= static_cast<double>(cov.num_rb());
  return d;
}

inline std::vector<double> diagonal_of(const HermitianMatrix& r) {
  std::vector<double> d(r.dim());
  for (std::size_t i = 0; i < r.dim(); ++i) d[i] = r(i, i).real();
  return d;
}

/// R_IW,b for the chosen option.
inline HermitianMatrix build_iw_matrix(const CovarianceSet& cov, IwOption option, std::size_t rb) {
  if (rb >= cov.num_rb()) throw Error(Errc::dimension_mismatch, "RB index out of range");
  switch (option) {
    case IwOption::iwnrb: return HermitianMatrix::diagonal(diagonal_of(cov.per_rb[rb]));
    case IwOption::iwnbw: return HermitianMatrix::diagonal(bandwidth_diagonal(cov));
    case IwOption::iwrb: return cov.per_rb[rb];
  }
  throw Error(Errc::config, "bad IW option");
}

struct WhitenReport {
  IwOption option = IwOption::iwrb;
  std::vector<HermitianMatrix> r_iw;  // per RB
  OpCounter setup_ops;                // factorization + inverse
  OpCounter apply_ops;                // products with y and Ĥ
  bool diagonal_path_used = false;
  std::size_t regularized_rbs = 0;

  OpCounter op_counts() const { return setup_ops + apply_ops; }
};

struct WhitenedSlot {
  ResourceGrid grid;
  MatrixStack channel;
  WhitenReport report;
};

/// Whitens every RE of each RB (all symbols) and the per-subcarrier channel
/// estimate with L_b⁻¹, one factorization per RB.
inline WhitenedSlot whiten_slot(const ResourceGrid& rx, const MatrixStack& h_est, const CovarianceSet& cov,
                                IwOption option) {
  const std::size_t n = rx.num_ant();
  const std::size_t num_rb = cov.num_rb();
  if (cov.num_rx != n || h_est.rows() != n || h_est.count() != rx.num_sc() ||
      num_rb * kSubcarriersPerRb != rx.num_sc())
    throw Error(Errc::dimension_mismatch, "whiten_slot: grid, channel and covariance disagree");
  const std::size_t m = h_est.cols();

  WhitenedSlot out{ResourceGrid(rx.num_sc(), rx.num_sym(), n), MatrixStack(h_est.count(), n, m), {}};
  WhitenReport& rep = out.report;
  rep.option = option;
  rep.r_iw.reserve(num_rb);

  // IWNBW uses the same matrix on every RB.
  std::vector<double> bw_diag;
  if (option == IwOption::iwnbw) bw_diag = bandwidth_diagonal(cov);

  bool all_diag = true;
  std::vector<cplx> col_in(n), col_out(n);
  for (std::size_t rb = 0; rb < num_rb; ++rb) {
    HermitianMatrix r = option == IwOption::iwnbw ? HermitianMatrix::diagonal(bw_diag)
                                                  : build_iw_matrix(cov, option, rb);
    const CholeskyFactor f = cholesky(r, rep.setup_ops);
    const ComplexMatrix linv = lower_inverse(f, rep.setup_ops);
    all_diag = all_diag && f.is_diagonal;
    if (f.regularized) ++rep.regularized_rbs;
    rep.r_iw.push_back(std::move(r));
    const MatrixShape shape = classify(linv);

    for (std::size_t sc = rb * kSubcarriersPerRb; sc < (rb + 1) * kSubcarriersPerRb; ++sc) {
      for (std::size_t sym = 0; sym < rx.num_sym(); ++sym)
        detail::apply_vector(linv, shape, rx.re(sc, sym).data(), out.grid.re(sc, sym).data(), rep.apply_ops);
      const cplx* h = h_est.at(sc);
      cplx* hw = out.channel.at(sc);
      for (std::size_t c = 0; c < m; ++c) {
        for (std::size_t r2 = 0; r2 < n; ++r2) col_in[r2] = h[r2 * m + c];
        detail::apply_vector(linv, shape, col_in.data(), col_out.data(), rep.apply_ops);
        for (std::size_t r2 = 0; r2 < n; ++r2) hw[r2 * m + c] = col_out[r2];
      }
    }
  }
  rep.diagonal_path_used = all_diag;
  return out;
}

}  // namespace iwsel
