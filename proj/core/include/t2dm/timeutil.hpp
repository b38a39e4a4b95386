#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace t2dm {

// Seconds since the Unix epoch, UTC, no leap seconds.
using EpochSeconds = int64_t;

// Parses strict ISO-8601 `YYYY-MM-DDTHH:MM:SS` (a single space instead of 'T'
// is tolerated). Returns nullopt on any malformation or out-of-range field.
std::optional<EpochSeconds> parse_iso8601(const std::string& s);

std::string format_iso8601(EpochSeconds t);

inline constexpr EpochSeconds kSecondsPerDay = 86400;

}  // namespace t2dm
