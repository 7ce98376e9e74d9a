// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace greenran {

/// Base class for every error the toolkit throws.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

#define GREENRAN_DEFINE_ERROR(Name)        \
  class Name : public Error {              \
  public:                                  \
    using Error::Error;                    \
  };

// gp_surrogate
GREENRAN_DEFINE_ERROR(FactorizationFailure)
GREENRAN_DEFINE_ERROR(InvalidArgument)
// beam_tracker
GREENRAN_DEFINE_ERROR(CountExceedsGrid)
GREENRAN_DEFINE_ERROR(DuplicateMeasurement)
GREENRAN_DEFINE_ERROR(SlotMismatch)
GREENRAN_DEFINE_ERROR(EmptyHistory)
// radio_env
GREENRAN_DEFINE_ERROR(OutOfHorizon)
GREENRAN_DEFINE_ERROR(UnknownPreset)
// carrier_switch
GREENRAN_DEFINE_ERROR(DegenerateLikelihood)
GREENRAN_DEFINE_ERROR(GapOverflow)
// network_env
GREENRAN_DEFINE_ERROR(NoActiveCarriers)
GREENRAN_DEFINE_ERROR(LengthMismatch)
// harness
GREENRAN_DEFINE_ERROR(ConfigError)
GREENRAN_DEFINE_ERROR(UnknownParameter)

#undef GREENRAN_DEFINE_ERROR

/// Trace-file parse failure; carries the 1-based data row that failed.
class ParseError : public Error {
public:
  ParseError(std::size_t row, const std::string& what)
      : Error("row " + std::to_string(row) + ": " + what), row_(row) {}
  std::size_t row() const noexcept { return row_; }

private:
  std::size_t row_;
};

} // namespace greenran
