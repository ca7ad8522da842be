// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace iwsel {

enum class Errc {
  not_positive_definite,
  dimension_mismatch,
  not_square,
  not_hermitian,
  payload_too_large,
  empty_rb,
  non_positive_power,
  degenerate_dataset,
  line_search_failure,
  config,
  io,
};

inline const char* to_string(Errc code) {
  switch (code) {
    case Errc::not_positive_definite: return "NotPositiveDefinite";
    case Errc::dimension_mismatch: return "DimensionMismatch";
    case Errc::not_square: return "NotSquare";
    case Errc::not_hermitian: return "NotHermitian";
    case Errc::payload_too_large: return "PayloadTooLarge";
    case Errc::empty_rb: return "EmptyRb";
    case Errc::non_positive_power: return "NonPositivePower";
    case Errc::degenerate_dataset: return "DegenerateDataset";
    case Errc::line_search_failure: return "LineSearchFailure";
    case Errc::config: return "ConfigError";
    case Errc::io: return "IoError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace iwsel
