#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dfkg/graph.hpp"

namespace dfkg::verdicts {

enum class Verdict { Pending, Valid, Invalid };

std::string_view to_string(Verdict v);
std::optional<Verdict> parse_verdict(std::string_view s);

struct VerdictRecord {
    std::string edge_id;
    std::string uid;
    Verdict verdict = Verdict::Pending;
    std::string reviewer;
    std::string note;
    std::string decided_at;

    bool operator==(const VerdictRecord&) const = default;
};

nlohmann::ordered_json to_json(const VerdictRecord& r);

/// Verdict state per hypothesis instance (edge_id, uid). Instances without an
/// entry are pending.
class VerdictStore {
public:
    Verdict state(std::string_view edge_id, std::string_view uid) const;
    const VerdictRecord* find(std::string_view edge_id, std::string_view uid) const;

    struct Outcome {
        VerdictRecord record;
        bool changed = false;
        std::optional<nlohmann::ordered_json> audit;  // present iff changed
    };

    /// Validates and applies a submission. Throws Error(UnknownEdge) for an
    /// edge not in `graph`, Error(UnknownUid) for a uid outside the edge's
    /// provenance and Error(IllegalTransition) for a disallowed change.
    /// Resubmitting the current verdict is a no-op.
    Outcome apply(const VerdictRecord& submission, const graph::ForensicGraph& graph, const std::string& now);

    const std::map<std::pair<std::string, std::string>, VerdictRecord>& entries() const { return entries_; }

    nlohmann::ordered_json to_json() const;
    static VerdictStore from_json(const nlohmann::json& j);

private:
    std::map<std::pair<std::string, std::string>, VerdictRecord> entries_;
};

}  // namespace dfkg::verdicts
