#include "dfkg/graph.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "dfkg/error.hpp"
#include "dfkg/normalize.hpp"
#include "dfkg/util.hpp"

namespace dfkg::graph {

namespace {

std::string value_part(std::string_view node) {
    auto bar = node.find('|');
    return std::string(bar == std::string_view::npos ? node : node.substr(bar + 1));
}

void insert_sorted(std::vector<std::string>& v, const std::string& s) {
    auto it = std::lower_bound(v.begin(), v.end(), s);
    if (it == v.end() || *it != s) v.insert(it, s);
}

TypePair parse_type_pair(const std::string& key) {
    auto bar = key.find('|');
    if (bar == std::string::npos) throw Error(ErrorCode::InvalidInput, "bad type_pair: " + key);
    auto a = parse_entity_type(key.substr(0, bar));
    auto b = parse_entity_type(key.substr(bar + 1));
    if (!a || !b) throw Error(ErrorCode::InvalidInput, "bad type_pair: " + key);
    auto pair = taxonomy_pair(*a, *b);
    if (!pair || pair->first != *a) throw Error(ErrorCode::InvalidInput, "type_pair outside taxonomy: " + key);
    return *pair;
}

std::string dot_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') out.push_back('\\');
        out.push_back(c);
    }
    return out;
}

}  // namespace

const EntityNode* ForensicGraph::find_node(std::string_view id) const {
    auto it = std::lower_bound(nodes.begin(), nodes.end(), id,
                               [](const EntityNode& n, std::string_view k) { return n.node_id < k; });
    return it != nodes.end() && it->node_id == id ? &*it : nullptr;
}

const RelationEdge* ForensicGraph::find_edge(std::string_view id) const {
    for (const auto& e : edges)
        if (e.edge_id == id) return &e;
    return nullptr;
}

std::string node_value(EntityType type, std::string_view value) {
    if (auto n = normalize_value(type, value)) return *n;
    return collapse_whitespace(value);
}

std::string node_id(EntityType type, std::string_view value) {
    return std::string(label(type)) + "|" + node_value(type, value);
}

std::string edge_id(const TypePair& pair, std::string_view source, std::string_view target) {
    std::string key = type_pair_key(pair);
    key.push_back('\n');
    key.append(source);
    key.push_back('\n');
    key.append(target);
    return sha256_hex(key).substr(0, 16);
}

std::string generate_hypothesis(const TypePair& pair, std::string_view s, std::string_view t) {
    std::string a(s), b(t);
    switch (taxonomy_index(pair)) {
        case 0: return "User interacted with " + b + " on " + a + ".";
        case 1: return "User account associated with the email " + a + " was linked to " + b + ".";
        case 2: return "User performed a Google search for \"" + b + "\" in " + a + ".";
        case 3: return "Device with MAC address " + a + " was connected via " + b + ".";
        case 4: return "User interacted with content associated with the email " + b + " on " + a + ".";
        case 5: return "User searched for \"" + b + "\" at " + a + ".";
        case 6: return "Device with MAC " + b + " connected on " + a + ".";
        case 7: return "User interacted with " + a + " on " + b + ".";
        case 8: return "User interacted with " + a + " on " + b + ".";
        case 9: return "The phone number " + a + " is associated with " + b + ".";
        case 10: return "The email " + b + " is associated with the phone number " + a + ".";
    }
    return {};
}

ForensicGraph build_graph(const std::vector<consolidate::EvidenceRecord>& records, int min_confidence,
                          const std::string& device_id) {
    ForensicGraph g;
    g.device_id = device_id;
    g.min_confidence = min_confidence;

    std::map<std::string, EntityNode> nodes;
    struct EdgeKey {
        std::size_t tax;
        std::string source, target;
        auto operator<=>(const EdgeKey&) const = default;
    };
    std::map<EdgeKey, std::set<std::string>> edges;

    for (const auto& r : records) {
        std::vector<std::pair<EntityType, std::string>> present;
        for (const auto& a : r.artifacts) {
            if (a.confidence < min_confidence) continue;
            std::string id = node_id(a.entity_type, a.refined_value);
            auto [it, fresh] = nodes.try_emplace(id);
            EntityNode& n = it->second;
            if (fresh) {
                n.node_id = id;
                n.entity_type = a.entity_type;
                n.value = node_value(a.entity_type, a.refined_value);
            }
            insert_sorted(n.provenance, a.uid);
            n.max_confidence = std::max(n.max_confidence, a.confidence);
            if (std::find(present.begin(), present.end(), std::pair{a.entity_type, id}) == present.end())
                present.emplace_back(a.entity_type, id);
        }
        for (std::size_t i = 0; i < present.size(); ++i) {
            for (std::size_t j = i + 1; j < present.size(); ++j) {
                auto pair = taxonomy_pair(present[i].first, present[j].first);
                if (!pair) continue;
                const auto& [ti, ni] = present[i];
                const auto& nj = present[j].second;
                bool forward = pair->first == ti && (pair->first != pair->second || ni < nj);
                EdgeKey key{taxonomy_index(*pair), forward ? ni : nj, forward ? nj : ni};
                edges[key].insert(r.uid);
            }
        }
    }

    for (auto& [id, n] : nodes) g.nodes.push_back(std::move(n));
    for (auto& [key, uids] : edges) {
        RelationEdge e;
        e.type_pair = kEdgeTaxonomy[key.tax];
        e.source = key.source;
        e.target = key.target;
        e.edge_id = edge_id(e.type_pair, e.source, e.target);
        e.provenance.assign(uids.begin(), uids.end());
        e.hypothesis = generate_hypothesis(e.type_pair, value_part(e.source), value_part(e.target));
        g.edges.push_back(std::move(e));
    }
    g.isolated_groups = group_isolated(g, records);
    return g;
}

std::vector<IsolatedGroup> group_isolated(const ForensicGraph& graph,
                                          const std::vector<consolidate::EvidenceRecord>& records) {
    std::set<std::string, std::less<>> linked;
    for (const auto& e : graph.edges) {
        linked.insert(e.source);
        linked.insert(e.target);
    }
    std::map<std::string, std::string, std::less<>> path_of;
    for (const auto& r : records) path_of.emplace(r.uid, r.path);

    std::map<std::string, std::vector<std::string>> groups;
    for (const auto& n : graph.nodes) {
        if (linked.count(n.node_id)) continue;
        std::string app(kUnattributed);
        for (const auto& uid : n.provenance) {
            auto it = path_of.find(uid);
            if (it == path_of.end()) continue;
            if (auto name = app_name_from_path(it->second)) {
                app = *name;
                break;
            }
        }
        groups[app].push_back(n.node_id);
    }
    std::vector<IsolatedGroup> out;
    for (auto& [app, members] : groups) {
        std::sort(members.begin(), members.end());
        out.push_back({app, std::move(members)});
    }
    return out;
}

std::vector<HypothesisInstance> hypothesis_instances(const ForensicGraph& graph) {
    std::vector<HypothesisInstance> out;
    for (const auto& e : graph.edges)
        for (const auto& uid : e.provenance)
            out.push_back({e.edge_id, uid, e.type_pair, value_part(e.source), value_part(e.target), e.hypothesis});
    return out;
}

nlohmann::ordered_json to_json(const ForensicGraph& g) {
    nlohmann::ordered_json j;
    j["device_id"] = g.device_id;
    j["min_confidence"] = g.min_confidence;
    auto nodes = nlohmann::ordered_json::array();
    for (const auto& n : g.nodes) {
        nlohmann::ordered_json o;
        o["node_id"] = n.node_id;
        o["entity_type"] = label(n.entity_type);
        o["value"] = n.value;
        o["provenance"] = n.provenance;
        o["max_confidence"] = n.max_confidence;
        nodes.push_back(std::move(o));
    }
    j["nodes"] = std::move(nodes);
    auto edges = nlohmann::ordered_json::array();
    for (const auto& e : g.edges) {
        nlohmann::ordered_json o;
        o["edge_id"] = e.edge_id;
        o["type_pair"] = type_pair_key(e.type_pair);
        o["endpoints"] = {e.source, e.target};
        o["provenance"] = e.provenance;
        o["hypothesis"] = e.hypothesis;
        edges.push_back(std::move(o));
    }
    j["edges"] = std::move(edges);
    auto groups = nlohmann::ordered_json::array();
    for (const auto& grp : g.isolated_groups) {
        nlohmann::ordered_json o;
        o["app_name"] = grp.app_name;
        o["members"] = grp.members;
        groups.push_back(std::move(o));
    }
    j["isolated_groups"] = std::move(groups);
    return j;
}

ForensicGraph graph_from_json(const nlohmann::json& j) {
    try {
        ForensicGraph g;
        g.device_id = j.value("device_id", std::string{});
        g.min_confidence = j.value("min_confidence", 5);
        for (const auto& o : j.at("nodes")) {
            EntityNode n;
            n.node_id = o.at("node_id").get<std::string>();
            auto type = parse_entity_type(o.at("entity_type").get<std::string>());
            if (!type) throw Error(ErrorCode::InvalidInput, "bad node entity_type");
            n.entity_type = *type;
            n.value = o.at("value").get<std::string>();
            n.provenance = o.at("provenance").get<std::vector<std::string>>();
            n.max_confidence = o.at("max_confidence").get<int>();
            g.nodes.push_back(std::move(n));
        }
        for (const auto& o : j.at("edges")) {
            RelationEdge e;
            e.edge_id = o.at("edge_id").get<std::string>();
            e.type_pair = parse_type_pair(o.at("type_pair").get<std::string>());
            const auto& ends = o.at("endpoints");
            e.source = ends.at(0).get<std::string>();
            e.target = ends.at(1).get<std::string>();
            e.provenance = o.at("provenance").get<std::vector<std::string>>();
            e.hypothesis = o.at("hypothesis").get<std::string>();
            g.edges.push_back(std::move(e));
        }
        for (const auto& o : j.at("isolated_groups"))
            g.isolated_groups.push_back(
                {o.at("app_name").get<std::string>(), o.at("members").get<std::vector<std::string>>()});
        return g;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidInput, std::string("malformed graph: ") + e.what());
    }
}

std::string graph_json(const ForensicGraph& g) { return to_json(g).dump(2) + "\n"; }

std::string graph_dot(const ForensicGraph& g) {
    std::string out = "graph dfkg {\n";
    for (const auto& n : g.nodes)
        out += "  \"" + dot_escape(n.node_id) + "\" [label=\"" + dot_escape(n.value) + "\", type=\"" +
               std::string(label(n.entity_type)) + "\"];\n";
    for (const auto& e : g.edges)
        out += "  \"" + dot_escape(e.source) + "\" -- \"" + dot_escape(e.target) + "\" [label=\"" +
               std::to_string(e.provenance.size()) + "\"];\n";
    for (const auto& grp : g.isolated_groups) {
        out += "  subgraph \"cluster_" + dot_escape(grp.app_name) + "\" {\n    label=\"" + dot_escape(grp.app_name) +
               "\";\n";
        for (const auto& m : grp.members) out += "    \"" + dot_escape(m) + "\";\n";
        out += "  }\n";
    }
    out += "}\n";
    return out;
}

}  // namespace dfkg::graph
