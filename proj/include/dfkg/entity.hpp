#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace dfkg {

/// The closed set of artifact labels a refinement engine may emit.
enum class EntityType {
    AppName,
    Username,
    HumanName,
    PhoneNumber,
    Email,
    SearchKeyword,
    Message,
    MacAddress,
    Longitude,
    Latitude,
    Address,
    Timestamp,
};

inline constexpr std::array<EntityType, 12> kAllEntityTypes = {
    EntityType::AppName,       EntityType::Username,   EntityType::HumanName,  EntityType::PhoneNumber,
    EntityType::Email,         EntityType::SearchKeyword, EntityType::Message, EntityType::MacAddress,
    EntityType::Longitude,     EntityType::Latitude,   EntityType::Address,    EntityType::Timestamp,
};

/// Exact wire label, e.g. "Search keyword".
std::string_view label(EntityType type);

/// Exact-match label lookup; nullopt for anything outside the closed set.
std::optional<EntityType> parse_entity_type(std::string_view label);

/// Destination CSV file for artifacts of this type, e.g. "Phone_number.csv".
std::string_view artifact_csv_name(EntityType type);

/// An unordered relationship type between two entity types.
struct TypePair {
    EntityType first;
    EntityType second;

    bool operator==(const TypePair&) const = default;
};

/// The eleven relationship types a graph edge may carry, in reporting order.
inline constexpr std::array<TypePair, 11> kEdgeTaxonomy = {{
    {EntityType::Timestamp, EntityType::AppName},
    {EntityType::Email, EntityType::AppName},
    {EntityType::AppName, EntityType::SearchKeyword},
    {EntityType::MacAddress, EntityType::AppName},
    {EntityType::Timestamp, EntityType::Email},
    {EntityType::Timestamp, EntityType::SearchKeyword},
    {EntityType::Timestamp, EntityType::MacAddress},
    {EntityType::HumanName, EntityType::Timestamp},
    {EntityType::HumanName, EntityType::AppName},
    {EntityType::PhoneNumber, EntityType::AppName},
    {EntityType::PhoneNumber, EntityType::Email},
}};

/// The taxonomy entry for an unordered pair of types, oriented as listed.
std::optional<TypePair> taxonomy_pair(EntityType a, EntityType b);

/// Position in kEdgeTaxonomy.
std::size_t taxonomy_index(const TypePair& pair);

/// "Timestamp|App Name".
std::string type_pair_key(const TypePair& pair);

}  // namespace dfkg
