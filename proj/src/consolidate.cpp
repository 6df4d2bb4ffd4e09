#include "dfkg/consolidate.hpp"

#include <map>

#include "dfkg/error.hpp"

namespace dfkg::consolidate {

std::vector<EvidenceRecord> consolidate(const std::vector<refine::RefinedArtifact>& artifacts,
                                        const flatten::RecordIndex& records) {
    std::map<std::string, EvidenceRecord, std::less<>> groups;
    for (const auto& a : artifacts) {
        auto it = groups.find(a.uid);
        if (it == groups.end()) {
            const flatten::FlatRecord* src = records.find(a.uid);
            if (!src) throw Error(ErrorCode::DanglingUid, "artifact uid has no source record: " + a.uid);
            EvidenceRecord r{src->uid, src->database, src->table, src->path, src->lid, {}};
            it = groups.emplace(a.uid, std::move(r)).first;
        }
        it->second.artifacts.push_back(a);
    }
    std::vector<EvidenceRecord> out;
    out.reserve(groups.size());
    for (auto& [uid, r] : groups) out.push_back(std::move(r));
    return out;
}

std::string evidence_jsonl(const std::vector<EvidenceRecord>& records) {
    std::string out;
    for (const auto& r : records) {
        nlohmann::ordered_json j;
        j["uid"] = r.uid;
        j["source"] = {{"database", r.database}, {"table", r.table}, {"path", r.path}, {"lid", r.lid}};
        auto arr = nlohmann::ordered_json::array();
        for (const auto& a : r.artifacts) arr.push_back(refine::to_json(a));
        j["artifacts"] = std::move(arr);
        out += j.dump();
        out.push_back('\n');
    }
    return out;
}

std::vector<EvidenceRecord> parse_evidence_jsonl(std::string_view text) {
    std::vector<EvidenceRecord> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() : nl + 1;
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line.begin(), line.end(), nullptr, false);
        if (j.is_discarded()) throw Error(ErrorCode::InvalidInput, "malformed evidence record line");
        try {
            EvidenceRecord r;
            r.uid = j.at("uid").get<std::string>();
            const auto& s = j.at("source");
            r.database = s.at("database").get<std::string>();
            r.table = s.at("table").get<std::string>();
            r.path = s.at("path").get<std::string>();
            r.lid = s.at("lid").get<std::uint64_t>();
            for (const auto& a : j.at("artifacts")) r.artifacts.push_back(refine::artifact_from_json(a));
            out.push_back(std::move(r));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::InvalidInput, std::string("malformed evidence record: ") + e.what());
        }
    }
    return out;
}

}  // namespace dfkg::consolidate
