#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dfkg/consolidate.hpp"
#include "dfkg/entity.hpp"

namespace dfkg::graph {

struct EntityNode {
    std::string node_id;  // "<label>|<normalized value>"
    EntityType entity_type = EntityType::AppName;
    std::string value;
    std::vector<std::string> provenance;  // sorted uids
    int max_confidence = 0;

    bool operator==(const EntityNode&) const = default;
};

struct RelationEdge {
    std::string edge_id;
    TypePair type_pair{EntityType::Timestamp, EntityType::AppName};
    std::string source;  // node of type_pair.first
    std::string target;  // node of type_pair.second
    std::vector<std::string> provenance;  // sorted uids in which both endpoints co-occur
    std::string hypothesis;

    bool operator==(const RelationEdge&) const = default;
};

struct IsolatedGroup {
    std::string app_name;
    std::vector<std::string> members;

    bool operator==(const IsolatedGroup&) const = default;
};

inline constexpr std::string_view kUnattributed = "(unattributed)";

struct ForensicGraph {
    std::string device_id;
    int min_confidence = 5;
    std::vector<EntityNode> nodes;  // sorted by node_id
    std::vector<RelationEdge> edges;  // sorted by taxonomy order, then endpoints
    std::vector<IsolatedGroup> isolated_groups;

    const EntityNode* find_node(std::string_view node_id) const;
    const RelationEdge* find_edge(std::string_view edge_id) const;
};

/// One reviewable hypothesis: an edge as evidenced by one source row.
struct HypothesisInstance {
    std::string edge_id;
    std::string uid;
    TypePair type_pair{EntityType::Timestamp, EntityType::AppName};
    std::string source_value;
    std::string target_value;
    std::string hypothesis;
};

/// Canonical node value: normalize_value when it applies, else the
/// whitespace-collapsed text.
std::string node_value(EntityType type, std::string_view value);
std::string node_id(EntityType type, std::string_view value);

std::string edge_id(const TypePair& pair, std::string_view source, std::string_view target);

/// Sentence for an edge whose endpoints carry the given values.
std::string generate_hypothesis(const TypePair& pair, std::string_view source_value, std::string_view target_value);

/// Nodes from artifacts with confidence >= min_confidence, taxonomy edges from
/// co-occurrence inside one record, and degree-0 nodes grouped by app.
ForensicGraph build_graph(const std::vector<consolidate::EvidenceRecord>& records, int min_confidence = 5,
                          const std::string& device_id = {});

/// Degree-0 nodes grouped by the app of their first attributable provenance path.
std::vector<IsolatedGroup> group_isolated(const ForensicGraph& graph,
                                          const std::vector<consolidate::EvidenceRecord>& records);

/// Every (edge, uid) pair, in edge order then uid order.
std::vector<HypothesisInstance> hypothesis_instances(const ForensicGraph& graph);

nlohmann::ordered_json to_json(const ForensicGraph& graph);
ForensicGraph graph_from_json(const nlohmann::json& j);
/// Serialized graph.json bytes (2-space indent, trailing LF).
std::string graph_json(const ForensicGraph& graph);
std::string graph_dot(const ForensicGraph& graph);

}  // namespace dfkg::graph
