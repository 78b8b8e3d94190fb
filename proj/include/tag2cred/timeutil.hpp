#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace tag2cred {

/// Parses "YYYY-MM-DD[THH:MM[:SS[.frac]]][Z|+HH:MM|-HH:MM]" or a decimal
/// epoch-seconds string. Returns UTC epoch seconds.
std::optional<std::int64_t> parse_timestamp(std::string_view text);

std::string format_utc(std::int64_t epoch_seconds);

/// ISO-8601 week key ("2025-W23"), Monday-start, UTC.
std::string iso_week_key(std::int64_t epoch_seconds);

/// Epoch seconds of 00:00 UTC on the Monday starting the week.
std::int64_t week_start(std::int64_t epoch_seconds);

}  // namespace tag2cred
