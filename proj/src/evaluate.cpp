#include "dfkg/evaluate.hpp"

#include <algorithm>
#include <set>
#include <tuple>

#include "dfkg/error.hpp"
#include "dfkg/normalize.hpp"

namespace dfkg::evaluate {

namespace {

using Key = std::pair<EntityType, std::string>;

std::optional<std::string> canonical(EntityType type, const std::string& value) {
    auto n = normalize_value(type, value);
    if (!n || n->empty()) return std::nullopt;
    return n;
}

std::optional<TypePair> parse_pair_key(const std::string& key, bool& reversed) {
    auto bar = key.find('|');
    if (bar == std::string::npos) return std::nullopt;
    auto a = parse_entity_type(key.substr(0, bar));
    auto b = parse_entity_type(key.substr(bar + 1));
    if (!a || !b) return std::nullopt;
    auto pair = taxonomy_pair(*a, *b);
    if (!pair) return std::nullopt;
    reversed = pair->first != *a;
    return pair;
}

}  // namespace

GroundTruth ground_truth_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw Error(ErrorCode::InvalidInput, "ground truth must be a JSON object");
    GroundTruth gt;
    if (auto it = j.find("artifacts"); it != j.end()) {
        if (!it->is_array()) throw Error(ErrorCode::InvalidInput, "ground truth artifacts must be an array");
        for (std::size_t i = 0; i < it->size(); ++i) {
            const auto& o = (*it)[i];
            std::string item = "artifacts[" + std::to_string(i) + "]";
            if (!o.is_object() || !o.contains("entity_type") || !o.contains("value") || !o["entity_type"].is_string() ||
                !o["value"].is_string()) {
                gt.issues.push_back({item, "malformed entry"});
                continue;
            }
            auto type = parse_entity_type(o["entity_type"].get<std::string>());
            if (!type) {
                gt.issues.push_back({item, "illegal entity_type"});
                continue;
            }
            auto value = canonical(*type, o["value"].get<std::string>());
            if (!value) {
                gt.issues.push_back({item, "NormalizationMismatch: value does not normalize as " + std::string(label(*type))});
                continue;
            }
            GtArtifact a{*type, *value, std::nullopt};
            if (o.contains("uid") && o["uid"].is_string()) a.uid = o["uid"].get<std::string>();
            gt.artifacts.push_back(std::move(a));
        }
    }
    if (auto it = j.find("relationships"); it != j.end()) {
        if (!it->is_array()) throw Error(ErrorCode::InvalidInput, "ground truth relationships must be an array");
        for (std::size_t i = 0; i < it->size(); ++i) {
            const auto& o = (*it)[i];
            std::string item = "relationships[" + std::to_string(i) + "]";
            if (!o.is_object() || !o.contains("type_pair") || !o["type_pair"].is_string() || !o.contains("values") ||
                !o["values"].is_array() || o["values"].size() != 2 || !o["values"][0].is_string() ||
                !o["values"][1].is_string()) {
                gt.issues.push_back({item, "malformed entry"});
                continue;
            }
            bool reversed = false;
            auto pair = parse_pair_key(o["type_pair"].get<std::string>(), reversed);
            if (!pair) {
                gt.issues.push_back({item, "type_pair outside the edge taxonomy"});
                continue;
            }
            std::string v0 = o["values"][0].get<std::string>(), v1 = o["values"][1].get<std::string>();
            if (reversed) std::swap(v0, v1);
            auto s = canonical(pair->first, v0);
            auto t = canonical(pair->second, v1);
            if (!s || !t) {
                gt.issues.push_back({item, "NormalizationMismatch: relationship value does not normalize"});
                continue;
            }
            gt.relationships.push_back({*pair, *s, *t});
        }
    }
    return gt;
}

nlohmann::ordered_json to_json(const GroundTruth& gt) {
    nlohmann::ordered_json j;
    auto arts = nlohmann::ordered_json::array();
    for (const auto& a : gt.artifacts) {
        nlohmann::ordered_json o;
        o["entity_type"] = label(a.entity_type);
        o["value"] = a.value;
        if (a.uid) o["uid"] = *a.uid;
        arts.push_back(std::move(o));
    }
    j["artifacts"] = std::move(arts);
    auto rels = nlohmann::ordered_json::array();
    for (const auto& r : gt.relationships) {
        nlohmann::ordered_json o;
        o["type_pair"] = type_pair_key(r.type_pair);
        o["values"] = {r.source, r.target};
        rels.push_back(std::move(o));
    }
    j["relationships"] = std::move(rels);
    return j;
}

nlohmann::ordered_json to_json(const Tally& t) {
    nlohmann::ordered_json j;
    j["true_extractions"] = t.true_extractions;
    j["total_potential_extractions"] = t.total_potential_extractions;
    j["tp"] = t.tp;
    j["fp"] = t.fp;
    j["fn"] = t.fn;
    j["correctly_consolidated"] = t.correctly_consolidated;
    j["total_consolidated"] = t.total_consolidated;
    j["correct_connections"] = t.correct_connections;
    j["total_connections"] = t.total_connections;
    j["artifacts_matching_context"] = t.artifacts_matching_context;
    j["artifacts_with_intact_custody"] = t.artifacts_with_intact_custody;
    j["total_artifacts"] = t.total_artifacts;
    j["exact_value_matches"] = t.exact_value_matches;
    return j;
}

Tally tally_from_json(const nlohmann::json& j) {
    try {
        Tally t;
        t.true_extractions = j.at("true_extractions").get<std::uint64_t>();
        t.total_potential_extractions = j.at("total_potential_extractions").get<std::uint64_t>();
        t.tp = j.at("tp").get<std::uint64_t>();
        t.fp = j.at("fp").get<std::uint64_t>();
        t.fn = j.at("fn").get<std::uint64_t>();
        t.correctly_consolidated = j.at("correctly_consolidated").get<std::uint64_t>();
        t.total_consolidated = j.at("total_consolidated").get<std::uint64_t>();
        t.correct_connections = j.at("correct_connections").get<std::uint64_t>();
        t.total_connections = j.at("total_connections").get<std::uint64_t>();
        t.artifacts_matching_context = j.at("artifacts_matching_context").get<std::uint64_t>();
        t.artifacts_with_intact_custody = j.at("artifacts_with_intact_custody").get<std::uint64_t>();
        t.total_artifacts = j.at("total_artifacts").get<std::uint64_t>();
        t.exact_value_matches = j.at("exact_value_matches").get<std::uint64_t>();
        return t;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidInput, std::string("malformed tally: ") + e.what());
    }
}

std::string Percent::str() const {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%lld.%02lld", hundredths < 0 ? "-" : "",
                  static_cast<long long>(std::llabs(hundredths) / 100), static_cast<long long>(std::llabs(hundredths) % 100));
    return buf;
}

std::optional<Percent> percent(std::uint64_t num, std::uint64_t den) {
    if (den == 0) return std::nullopt;
    unsigned __int128 n = static_cast<unsigned __int128>(num) * 20000u + den;
    unsigned __int128 q = n / (static_cast<unsigned __int128>(den) * 2u);
    return Percent{static_cast<std::int64_t>(q)};
}

std::optional<Percent> MetricsReport::get(std::string_view name) const {
    auto it = metrics.find(name);
    return it == metrics.end() ? std::nullopt : it->second;
}

MetricsReport compute_metrics(const Tally& t) {
    MetricsReport r;
    r.tally = t;
    r.metrics["EEA"] = percent(t.true_extractions, t.total_potential_extractions);
    r.metrics["ECA"] = percent(t.correctly_consolidated, t.total_consolidated);
    r.metrics["KGCA"] = percent(t.correct_connections, t.total_connections);
    r.metrics["FAP"] = percent(t.tp, t.tp + t.fp);
    r.metrics["FAR"] = percent(t.tp, t.tp + t.fn);
    if (r.metrics["FAP"] && r.metrics["FAR"] && t.tp > 0)
        r.metrics["FAF1"] = percent(2 * t.tp, 2 * t.tp + t.fp + t.fn);
    else
        r.metrics["FAF1"] = std::nullopt;
    r.metrics["AIS"] = percent(t.exact_value_matches, t.total_potential_extractions);
    r.metrics["CCA"] = percent(t.artifacts_with_intact_custody, t.total_artifacts);
    r.metrics["CCS"] = percent(t.artifacts_matching_context, t.tp);
    return r;
}

nlohmann::ordered_json metric_json(const std::optional<Percent>& p) {
    if (!p) return "undefined";
    return p->value();
}

std::optional<std::string> verify_record(const flatten::FlatRecord& record, const std::string& device_id) {
    auto parsed = flatten::parse_uid(record.uid);
    if (!parsed) return "malformed uid";
    std::string expected;
    try {
        expected = flatten::make_uid({device_id, record.path, record.database, record.table, record.lid});
    } catch (const Error&) {
        return "invalid source coordinates";
    }
    if (expected != record.uid) return "uid mismatch";
    return std::nullopt;
}

CustodyReport audit_custody(const std::vector<refine::RefinedArtifact>& artifacts,
                            const flatten::RecordIndex& records, const std::string& device_id) {
    CustodyReport report;
    std::set<std::string, std::less<>> duplicates(records.duplicate_uids().begin(), records.duplicate_uids().end());
    for (const auto& a : artifacts) {
        const flatten::FlatRecord* rec = records.find(a.uid);
        if (!rec) {
            report.breaches.push_back({a.uid, "unknown uid"});
            continue;
        }
        if (duplicates.count(a.uid)) {
            report.breaches.push_back({a.uid, "duplicate uid"});
            continue;
        }
        if (auto reason = verify_record(*rec, device_id)) {
            report.breaches.push_back({a.uid, *reason});
            continue;
        }
        ++report.intact;
    }
    return report;
}

std::vector<std::string> uid_collisions(const flatten::RecordIndex& records) { return records.duplicate_uids(); }

ConnectionCount count_connections(const graph::ForensicGraph& g, const verdicts::VerdictStore* verdicts,
                                  const GroundTruth* gt, bool strict) {
    std::set<std::tuple<std::size_t, std::string, std::string>> rels;
    if (gt)
        for (const auto& r : gt->relationships) rels.emplace(taxonomy_index(r.type_pair), r.source, r.target);
    ConnectionCount c;
    for (const auto& inst : graph::hypothesis_instances(g)) {
        auto v = verdicts ? verdicts->state(inst.edge_id, inst.uid) : verdicts::Verdict::Pending;
        bool in_gt = rels.count({taxonomy_index(inst.type_pair), inst.source_value, inst.target_value}) > 0;
        switch (v) {
            case verdicts::Verdict::Valid: ++c.valid; break;
            case verdicts::Verdict::Invalid: ++c.invalid; break;
            case verdicts::Verdict::Pending: ++c.pending; break;
        }
        bool counted = strict || v != verdicts::Verdict::Pending || in_gt;
        bool correct = v == verdicts::Verdict::Valid || (v == verdicts::Verdict::Pending && in_gt);
        if (counted) ++c.total;
        if (counted && correct) ++c.correct;
    }
    return c;
}

MatchResult match_ground_truth(const MatchInput& in, const GroundTruth* gt) {
    if (!in.artifacts || !in.records || !in.graph || !in.index)
        throw Error(ErrorCode::InvalidInput, "match_ground_truth needs artifacts, records, graph and index");
    MatchResult out;
    Tally& t = out.tally;

    if (gt) {
        std::map<Key, std::vector<std::optional<std::string>>> expected;
        for (const auto& g : gt->artifacts) expected[{g.entity_type, g.value}].push_back(g.uid);

        std::set<Key> produced;
        for (const auto& a : *in.artifacts) {
            Key key{a.entity_type, graph::node_value(a.entity_type, a.refined_value)};
            produced.insert(key);
            auto it = expected.find(key);
            if (it == expected.end()) {
                ++t.fp;
                continue;
            }
            ++t.tp;
            if (a.refined_value == key.second) ++t.exact_value_matches;
            if (std::any_of(it->second.begin(), it->second.end(),
                            [&](const auto& uid) { return !uid || *uid == a.uid; }))
                ++t.artifacts_matching_context;
        }
        for (const auto& g : gt->artifacts)
            if (!produced.count({g.entity_type, g.value})) ++t.fn;
        t.true_extractions = t.tp;
        t.total_potential_extractions = in.artifacts->size();

        for (const auto& r : *in.records) {
            ++t.total_consolidated;
            bool wrong = false;
            for (const auto& a : r.artifacts) {
                auto it = expected.find({a.entity_type, graph::node_value(a.entity_type, a.refined_value)});
                if (it == expected.end() || it->second.empty()) continue;
                bool pinned_elsewhere = std::all_of(it->second.begin(), it->second.end(),
                                                    [&](const auto& uid) { return uid && *uid != r.uid; });
                if (pinned_elsewhere) {
                    wrong = true;
                    break;
                }
            }
            if (!wrong) ++t.correctly_consolidated;
        }
    }

    auto conn = count_connections(*in.graph, in.verdicts, gt, in.strict);
    t.correct_connections = conn.correct;
    t.total_connections = conn.total;

    out.custody = audit_custody(*in.artifacts, *in.index, in.device_id);
    t.artifacts_with_intact_custody = out.custody.intact;
    t.total_artifacts = in.artifacts->size();
    return out;
}

}  // namespace dfkg::evaluate
