#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace fsgen {

// Base for all typed errors thrown by the library. `code()` is a stable
// machine-readable tag (the class name); what() carries the human message.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& msg)
      : std::runtime_error(code + ": " + msg), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

#define FSGEN_ERROR_TYPE(Name)                                      \
  struct Name : Error {                                             \
    explicit Name(const std::string& msg) : Error(#Name, msg) {}    \
  }

// grid
FSGEN_ERROR_TYPE(ModesExceedNyquist);
FSGEN_ERROR_TYPE(ResolutionBelowModeSupport);
FSGEN_ERROR_TYPE(ResolutionMismatch);

// random fields
FSGEN_ERROR_TYPE(CholeskyFailure);
FSGEN_ERROR_TYPE(TooFewSamples);
FSGEN_ERROR_TYPE(ChannelCountNotOne);

// operator models / autodiff
FSGEN_ERROR_TYPE(ShapeMismatch);
FSGEN_ERROR_TYPE(ChannelMismatch);
FSGEN_ERROR_TYPE(InvalidArchitecture);
FSGEN_ERROR_TYPE(TapeMismatch);
FSGEN_ERROR_TYPE(NoFunctionalHead);
FSGEN_ERROR_TYPE(CheckpointArchMismatch);

// training
FSGEN_ERROR_TYPE(NonFiniteLoss);
FSGEN_ERROR_TYPE(BadJointIndex);

// metrics
FSGEN_ERROR_TYPE(NotSymmetric);
FSGEN_ERROR_TYPE(OddCount);
FSGEN_ERROR_TYPE(EmptySet);
FSGEN_ERROR_TYPE(LengthMismatch);

// data / files
FSGEN_ERROR_TYPE(BadMagic);
FSGEN_ERROR_TYPE(TruncatedFile);
FSGEN_ERROR_TYPE(NonFiniteValue);
FSGEN_ERROR_TYPE(BadDelay);
FSGEN_ERROR_TYPE(EmptyDataset);
FSGEN_ERROR_TYPE(ZeroVariance);

// config / cli
FSGEN_ERROR_TYPE(BadConfig);

#undef FSGEN_ERROR_TYPE

}  // namespace fsgen
