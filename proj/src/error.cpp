#include "fxchain/error.hpp"

namespace fxchain {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::InvalidAudio: return "InvalidAudio";
    case Errc::SilentSignal: return "SilentSignal";
    case Errc::MismatchedLength: return "MismatchedLength";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::FrequencyOutOfRange: return "FrequencyOutOfRange";
    case Errc::HardnessOutOfRange: return "HardnessOutOfRange";
    case Errc::UnregisteredPrimitive: return "UnregisteredPrimitive";
    case Errc::TooShort: return "TooShort";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::EmptyCorpus: return "EmptyCorpus";
    case Errc::UnsupportedFormat: return "UnsupportedFormat";
    case Errc::CorruptHeader: return "CorruptHeader";
    case Errc::SongTooShort: return "SongTooShort";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::Config: return "ConfigError";
    case Errc::Io: return "IoError";
  }
  return "Unknown";
}

}  // namespace fxchain
