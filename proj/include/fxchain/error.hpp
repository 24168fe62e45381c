#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fxchain {

enum class Errc {
  InvalidArgument,
  InvalidAudio,
  SilentSignal,
  MismatchedLength,
  LengthMismatch,
  OutOfRange,
  FrequencyOutOfRange,
  HardnessOutOfRange,
  UnregisteredPrimitive,
  TooShort,
  EmptyDataset,
  EmptyCorpus,
  UnsupportedFormat,
  CorruptHeader,
  SongTooShort,
  ShapeMismatch,
  NonFiniteLoss,
  Config,
  Io,
};

std::string_view to_string(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace fxchain
