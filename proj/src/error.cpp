#include "tag2cred/error.hpp"

namespace tag2cred {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::TooShort: return "TooShort";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::NoHostname: return "NoHostname";
    case Errc::UnknownSuffix: return "UnknownSuffix";
    case Errc::RedirectLoop: return "RedirectLoop";
    case Errc::UnknownCategory: return "UnknownCategory";
    case Errc::BadThresholds: return "BadThresholds";
    case Errc::NotFound: return "NotFound";
    case Errc::Transport: return "Transport";
    case Errc::ParseFailure: return "ParseFailure";
    case Errc::MalformedJson: return "MalformedJson";
    case Errc::MissingField: return "MissingField";
    case Errc::UnknownLabel: return "UnknownLabel";
    case Errc::TaggerUnavailable: return "TaggerUnavailable";
    case Errc::InvalidOutput: return "InvalidOutput";
    case Errc::MissingTag: return "MissingTag";
    case Errc::EmptyTraining: return "EmptyTraining";
    case Errc::EmptySubset: return "EmptySubset";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::MissingIds: return "MissingIds";
    case Errc::SingleClass: return "SingleClass";
    case Errc::NonFinite: return "NonFinite";
    case Errc::FeatureSpaceMismatch: return "FeatureSpaceMismatch";
    case Errc::TooFewDomains: return "TooFewDomains";
    case Errc::TooFewChannels: return "TooFewChannels";
    case Errc::EmptySet: return "EmptySet";
    case Errc::ZeroShare: return "ZeroShare";
    case Errc::TooFewPrototypes: return "TooFewPrototypes";
    case Errc::ZeroMedian: return "ZeroMedian";
    case Errc::MissingInput: return "MissingInput";
    case Errc::SchemaVersionMismatch: return "SchemaVersionMismatch";
    case Errc::ConfigInvalid: return "ConfigInvalid";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace tag2cred
