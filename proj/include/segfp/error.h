#pragma once

#include <stdexcept>
#include <string>

namespace segfp {

enum class ErrorCode {
  kMalformedWav,
  kUnsupportedEncoding,
  kEmptyAudio,
  kIoError,
  kInvalidParams,
  kClipTooShort,
  kSampleRateMismatch,
  kInvalidBand,
  kInvalidConfig,
  kNoAdapterForT,
  kPoolEmpty,
  kNonUnitInput,
  kDivergenceDetected,
  kCorruptCheckpoint,
  kInvalidInput,
  kEmptyDb,
  kCorruptDb,
  kIncompatibleW,
  kOutOfRange,
  kEmptyQuerySet,
  kUnknownQuestion,
  kNoDurationFound,
  kInsufficientReport,
  kTransportError,
  kMissingReplayFile,
  kConfigError,
};

const char* error_code_name(ErrorCode code);

// Every failure raised by the library carries one of the codes above so
// callers (and tests) can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace segfp
