#include "dfkg/entity.hpp"

namespace dfkg {

std::string_view label(EntityType type) {
    switch (type) {
        case EntityType::AppName: return "App Name";
        case EntityType::Username: return "Username";
        case EntityType::HumanName: return "Human Name";
        case EntityType::PhoneNumber: return "Phone Number";
        case EntityType::Email: return "Email";
        case EntityType::SearchKeyword: return "Search keyword";
        case EntityType::Message: return "Message";
        case EntityType::MacAddress: return "MAC Address";
        case EntityType::Longitude: return "Longitude";
        case EntityType::Latitude: return "Latitude";
        case EntityType::Address: return "Address";
        case EntityType::Timestamp: return "Timestamp";
    }
    return "";
}

std::optional<EntityType> parse_entity_type(std::string_view text) {
    for (EntityType t : kAllEntityTypes)
        if (label(t) == text) return t;
    return std::nullopt;
}

std::string_view artifact_csv_name(EntityType type) {
    switch (type) {
        case EntityType::AppName: return "Appname.csv";
        case EntityType::Username: return "Username.csv";
        case EntityType::HumanName: return "Name.csv";
        case EntityType::PhoneNumber: return "Phone_number.csv";
        case EntityType::Email: return "Email.csv";
        case EntityType::SearchKeyword: return "Google_Search.csv";
        case EntityType::Message: return "Message.csv";
        case EntityType::MacAddress: return "Mac_addr.csv";
        case EntityType::Longitude: return "Longitude.csv";
        case EntityType::Latitude: return "Latitude.csv";
        case EntityType::Address: return "Address.csv";
        case EntityType::Timestamp: return "Timestamp.csv";
    }
    return "";
}

std::optional<TypePair> taxonomy_pair(EntityType a, EntityType b) {
    for (const auto& p : kEdgeTaxonomy) {
        if ((p.first == a && p.second == b) || (p.first == b && p.second == a)) return p;
    }
    return std::nullopt;
}

std::size_t taxonomy_index(const TypePair& pair) {
    for (std::size_t i = 0; i < kEdgeTaxonomy.size(); ++i)
        if (kEdgeTaxonomy[i] == pair) return i;
    return kEdgeTaxonomy.size();
}

std::string type_pair_key(const TypePair& pair) {
    return std::string(label(pair.first)) + "|" + std::string(label(pair.second));
}

}  // namespace dfkg
