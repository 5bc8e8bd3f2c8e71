#pragma once

#include <stdexcept>
#include <string>

namespace mfpm {

/// Base class for every error raised by the library. `kind()` is the stable
/// name written into reports and used by the CLI.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(kind + ": " + what), kind_(std::move(kind)), message_(what)
  {
  }
  const std::string& kind() const noexcept { return kind_; }
  /// The message without the kind prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  std::string kind_;
  std::string message_;
};

#define MFPM_DEFINE_ERROR(Name)                                             \
  class Name : public Error {                                               \
   public:                                                                  \
    explicit Name(const std::string& what) : Error(#Name, what) {}          \
  };

MFPM_DEFINE_ERROR(DimensionError)
MFPM_DEFINE_ERROR(EmptyMeasureError)
MFPM_DEFINE_ERROR(UnsupportedCouplingError)
MFPM_DEFINE_ERROR(DerivativeMismatch)
MFPM_DEFINE_ERROR(ConvexityError)
MFPM_DEFINE_ERROR(MonotonicityError)
MFPM_DEFINE_ERROR(EvaluationError)
MFPM_DEFINE_ERROR(ModeError)
MFPM_DEFINE_ERROR(RegressionError)
MFPM_DEFINE_ERROR(StallError)
MFPM_DEFINE_ERROR(InnerSolveError)
MFPM_DEFINE_ERROR(NonContractionError)
MFPM_DEFINE_ERROR(OracleBlowUpError)
MFPM_DEFINE_ERROR(ConfigError)

#undef MFPM_DEFINE_ERROR

/// Non-finite or runaway state; `step()` is the time index where it was seen.
class BlowUpError : public Error {
 public:
  BlowUpError(std::size_t step, const std::string& what)
      : Error("BlowUpError", "step " + std::to_string(step) + ": " + what), step_(step)
  {
  }
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace mfpm
