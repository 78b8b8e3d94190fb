#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tag2cred {

enum class Errc {
  TooShort,
  LengthMismatch,
  NoHostname,
  UnknownSuffix,
  RedirectLoop,
  UnknownCategory,
  BadThresholds,
  NotFound,
  Transport,
  ParseFailure,
  MalformedJson,
  MissingField,
  UnknownLabel,
  TaggerUnavailable,
  InvalidOutput,
  MissingTag,
  EmptyTraining,
  EmptySubset,
  DimensionMismatch,
  MissingIds,
  SingleClass,
  NonFinite,
  FeatureSpaceMismatch,
  TooFewDomains,
  TooFewChannels,
  EmptySet,
  ZeroShare,
  TooFewPrototypes,
  ZeroMedian,
  MissingInput,
  SchemaVersionMismatch,
  ConfigInvalid,
  Io,
};

std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace tag2cred
