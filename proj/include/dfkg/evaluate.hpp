#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dfkg/consolidate.hpp"
#include "dfkg/graph.hpp"
#include "dfkg/verdicts.hpp"

namespace dfkg::evaluate {

struct GtArtifact {
    EntityType entity_type = EntityType::AppName;
    std::string value;  // canonical form
    std::optional<std::string> uid;
};

struct GtRelationship {
    TypePair type_pair{EntityType::Timestamp, EntityType::AppName};
    std::string source;  // canonical value of type_pair.first
    std::string target;  // canonical value of type_pair.second
};

struct GtIssue {
    std::string item;  // e.g. "artifacts[3]"
    std::string reason;
};

struct GroundTruth {
    std::vector<GtArtifact> artifacts;
    std::vector<GtRelationship> relationships;
    std::vector<GtIssue> issues;  // entries dropped because their value failed normalization
};

/// Parses ground_truth.json; values are canonicalized with the graph-node
/// rules and entries that fail are reported in `issues` instead of kept.
GroundTruth ground_truth_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const GroundTruth& gt);

struct Tally {
    std::uint64_t true_extractions = 0;
    std::uint64_t total_potential_extractions = 0;
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
    std::uint64_t correctly_consolidated = 0;
    std::uint64_t total_consolidated = 0;
    std::uint64_t correct_connections = 0;
    std::uint64_t total_connections = 0;
    std::uint64_t artifacts_matching_context = 0;
    std::uint64_t artifacts_with_intact_custody = 0;
    std::uint64_t total_artifacts = 0;
    std::uint64_t exact_value_matches = 0;  // refined_value byte-equal to the canonical gt value

    bool operator==(const Tally&) const = default;
};

nlohmann::ordered_json to_json(const Tally& t);
Tally tally_from_json(const nlohmann::json& j);

/// A percentage held as exact hundredths, e.g. 9524 for 95.24.
struct Percent {
    std::int64_t hundredths = 0;
    double value() const { return static_cast<double>(hundredths) / 100.0; }
    std::string str() const;  // "95.24"
    bool operator==(const Percent&) const = default;
};

/// num/den as a percentage rounded half-up to two decimals; nullopt when den is 0.
std::optional<Percent> percent(std::uint64_t num, std::uint64_t den);

inline constexpr std::array<std::string_view, 9> kMetricNames = {"EEA", "ECA", "KGCA", "FAP", "FAR",
                                                                  "FAF1", "AIS", "CCA", "CCS"};

struct MetricsReport {
    std::map<std::string, std::optional<Percent>, std::less<>> metrics;  // nullopt = undefined
    Tally tally;

    std::optional<Percent> get(std::string_view name) const;
};

/// Pure. Undefined metrics are those with an empty denominator.
MetricsReport compute_metrics(const Tally& t);

/// JSON value of a metric: a number with two decimals or the string "undefined".
nlohmann::ordered_json metric_json(const std::optional<Percent>& p);

struct CustodyBreach {
    std::string uid;
    std::string reason;
};

struct CustodyReport {
    std::uint64_t intact = 0;
    std::vector<CustodyBreach> breaches;
};

/// An artifact is intact when its uid resolves to a record whose coordinates
/// re-derive the same uid for `device_id`.
CustodyReport audit_custody(const std::vector<refine::RefinedArtifact>& artifacts,
                            const flatten::RecordIndex& records, const std::string& device_id);

/// Checks one record against make_uid; returns the breach reason if any.
std::optional<std::string> verify_record(const flatten::FlatRecord& record, const std::string& device_id);

/// Full-uid collisions across the run (a hard error for the pipeline).
std::vector<std::string> uid_collisions(const flatten::RecordIndex& records);

struct MatchInput {
    const std::vector<refine::RefinedArtifact>* artifacts = nullptr;  // all refined artifacts, pre-threshold
    const std::vector<consolidate::EvidenceRecord>* records = nullptr;
    const graph::ForensicGraph* graph = nullptr;
    const flatten::RecordIndex* index = nullptr;
    const verdicts::VerdictStore* verdicts = nullptr;  // may be null
    std::string device_id;
    bool strict = false;  // pending instances count as failures
};

struct MatchResult {
    Tally tally;
    CustodyReport custody;
};

/// Classifies artifacts against ground truth and tallies every metric input.
/// Without ground truth (`gt` null) the gt-dependent denominators stay 0, so
/// those metrics come out undefined; custody and adjudicated connections are
/// still counted.
MatchResult match_ground_truth(const MatchInput& in, const GroundTruth* gt);

/// Hypothesis instance bookkeeping. An instance is correct iff its verdict is
/// valid, or it is pending and its relationship is in gt. The denominator is
/// adjudicated plus gt-matched instances, or every instance when `strict`.
struct ConnectionCount {
    std::uint64_t correct = 0;
    std::uint64_t total = 0;
    std::uint64_t valid = 0;
    std::uint64_t invalid = 0;
    std::uint64_t pending = 0;
};
ConnectionCount count_connections(const graph::ForensicGraph& g, const verdicts::VerdictStore* verdicts,
                                  const GroundTruth* gt, bool strict);

}  // namespace dfkg::evaluate
