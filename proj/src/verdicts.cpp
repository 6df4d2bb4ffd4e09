#include "dfkg/verdicts.hpp"

#include <algorithm>

#include "dfkg/error.hpp"

namespace dfkg::verdicts {

std::string_view to_string(Verdict v) {
    switch (v) {
        case Verdict::Pending: return "pending";
        case Verdict::Valid: return "valid";
        case Verdict::Invalid: return "invalid";
    }
    return "pending";
}

std::optional<Verdict> parse_verdict(std::string_view s) {
    if (s == "pending") return Verdict::Pending;
    if (s == "valid") return Verdict::Valid;
    if (s == "invalid") return Verdict::Invalid;
    return std::nullopt;
}

nlohmann::ordered_json to_json(const VerdictRecord& r) {
    nlohmann::ordered_json j;
    j["edge_id"] = r.edge_id;
    j["uid"] = r.uid;
    j["verdict"] = to_string(r.verdict);
    j["reviewer"] = r.reviewer;
    j["note"] = r.note;
    j["decided_at"] = r.decided_at;
    return j;
}

const VerdictRecord* VerdictStore::find(std::string_view edge_id, std::string_view uid) const {
    auto it = entries_.find({std::string(edge_id), std::string(uid)});
    return it == entries_.end() ? nullptr : &it->second;
}

Verdict VerdictStore::state(std::string_view edge_id, std::string_view uid) const {
    const VerdictRecord* r = find(edge_id, uid);
    return r ? r->verdict : Verdict::Pending;
}

VerdictStore::Outcome VerdictStore::apply(const VerdictRecord& s, const graph::ForensicGraph& graph,
                                          const std::string& now) {
    const graph::RelationEdge* edge = graph.find_edge(s.edge_id);
    if (!edge) throw Error(ErrorCode::UnknownEdge, "no edge " + s.edge_id);
    if (!std::binary_search(edge->provenance.begin(), edge->provenance.end(), s.uid))
        throw Error(ErrorCode::UnknownUid, "uid " + s.uid + " is not an instance of edge " + s.edge_id);

    Verdict current = state(s.edge_id, s.uid);
    if (s.verdict == Verdict::Pending)
        throw Error(ErrorCode::IllegalTransition, "a verdict cannot be reset to pending");
    if (s.verdict == current) {
        Outcome o;
        o.record = *find(s.edge_id, s.uid);
        return o;
    }
    if (current != Verdict::Pending && s.note.empty())
        throw Error(ErrorCode::IllegalTransition,
                    std::string("changing ") + std::string(to_string(current)) + " to " +
                        std::string(to_string(s.verdict)) + " requires a note");

    VerdictRecord rec = s;
    rec.decided_at = now;
    nlohmann::ordered_json audit;
    audit["timestamp"] = now;
    audit["edge_id"] = rec.edge_id;
    audit["uid"] = rec.uid;
    audit["from"] = to_string(current);
    audit["to"] = to_string(rec.verdict);
    audit["reviewer"] = rec.reviewer;
    audit["note"] = rec.note;
    entries_[{rec.edge_id, rec.uid}] = rec;
    return {rec, true, std::move(audit)};
}

nlohmann::ordered_json VerdictStore::to_json() const {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& [key, r] : entries_) arr.push_back(verdicts::to_json(r));
    nlohmann::ordered_json j;
    j["verdicts"] = std::move(arr);
    return j;
}

VerdictStore VerdictStore::from_json(const nlohmann::json& j) {
    VerdictStore store;
    try {
        for (const auto& o : j.at("verdicts")) {
            VerdictRecord r;
            r.edge_id = o.at("edge_id").get<std::string>();
            r.uid = o.at("uid").get<std::string>();
            auto v = parse_verdict(o.at("verdict").get<std::string>());
            if (!v) throw Error(ErrorCode::InvalidInput, "bad verdict value");
            r.verdict = *v;
            r.reviewer = o.value("reviewer", std::string{});
            r.note = o.value("note", std::string{});
            r.decided_at = o.value("decided_at", std::string{});
            store.entries_[{r.edge_id, r.uid}] = std::move(r);
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidInput, std::string("malformed verdicts: ") + e.what());
    }
    return store;
}

}  // namespace dfkg::verdicts
