#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "dfkg/flatten.hpp"
#include "dfkg/refine.hpp"

namespace dfkg::consolidate {

/// All artifacts refined from one source row, with the row's coordinates.
struct EvidenceRecord {
    std::string uid;
    std::string database;
    std::string table;
    std::string path;
    std::uint64_t lid = 0;
    std::vector<refine::RefinedArtifact> artifacts;

    bool operator==(const EvidenceRecord&) const = default;
};

/// Groups artifacts by uid (stable within a group), ordered by uid.
/// Throws Error(DanglingUid) when an artifact has no source record.
std::vector<EvidenceRecord> consolidate(const std::vector<refine::RefinedArtifact>& artifacts,
                                        const flatten::RecordIndex& records);

std::string evidence_jsonl(const std::vector<EvidenceRecord>& records);
std::vector<EvidenceRecord> parse_evidence_jsonl(std::string_view text);

}  // namespace dfkg::consolidate
