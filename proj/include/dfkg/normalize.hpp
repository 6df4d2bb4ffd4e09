#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "dfkg/entity.hpp"

namespace dfkg {

enum class EpochUnit { Seconds, Millis };

/// "DD Month YYYY HH:MM:SS" in `zone`, 24-hour clock, English month names.
/// Throws Error(OutOfRangeEpoch) outside years 0001-9999 and
/// Error(UnknownZone) for an unknown zone.
std::string normalize_timestamp(std::int64_t epoch, EpochUnit unit, const std::string& zone);

/// Canonical form of a value of the given type, shared by graph node identity
/// and ground-truth matching. nullopt when the value does not parse as that
/// type (e.g. an "Email" without a domain).
std::optional<std::string> normalize_value(EntityType type, std::string_view value);

/// Trims and collapses whitespace runs to a single space.
std::string collapse_whitespace(std::string_view value);

/// Display name for a known Android package, e.g. "com.instagram.android" -> "Instagram".
std::optional<std::string> known_app_name(std::string_view package);

/// True for reverse-domain package names such as "com.snapchat.android".
bool looks_like_package(std::string_view segment);

/// App name for a package: the bundled mapping when known, else the last
/// non-generic segment capitalized. `mapped` reports which route applied.
std::string app_name_for_package(std::string_view package, bool* mapped = nullptr);

/// First package segment of a "/"-separated path resolved to an app name.
std::optional<std::string> app_name_from_path(std::string_view path);

}  // namespace dfkg
