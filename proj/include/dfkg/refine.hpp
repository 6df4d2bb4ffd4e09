#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <mutex>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dfkg/entity.hpp"
#include "dfkg/flatten.hpp"

namespace dfkg::refine {

struct RefinedArtifact {
    std::string uid;
    EntityType entity_type = EntityType::AppName;
    std::string refined_value;
    int confidence = 0;  // 1..10
    std::string engine;

    bool operator==(const RefinedArtifact&) const = default;
};

nlohmann::ordered_json to_json(const RefinedArtifact& a);
/// Throws Error(InvalidInput) when a stored artifact is malformed.
RefinedArtifact artifact_from_json(const nlohmann::json& j);

/// A refinement engine turns flattened records into typed artifacts. It must
/// not alter the records and may only emit uids present in its batch.
class RefinementEngine {
public:
    virtual ~RefinementEngine() = default;
    virtual std::string id() const = 0;

    struct BatchResult {
        std::vector<RefinedArtifact> artifacts;
        std::vector<std::string> warnings;
        bool refined = true;  // false when the engine gave up on the batch
    };
    virtual BatchResult refine(const std::vector<flatten::FlatRecord>& batch) = 0;
};

/// Instructions and data sent to a language-model engine.
struct Prompt {
    std::string instructions;  // fixed task description plus the response-format directive
    std::string data;          // one line per record
    std::string text() const { return instructions + "\n\n" + data; }
};

/// The fixed task description given to language-model engines.
std::string_view refinement_instructions();

/// Serialized record line: "UID | DB | TN | FP | LID | pairs-JSON".
std::string record_line(const flatten::FlatRecord& record);

/// Throws Error(EmptyBatch) for an empty batch.
Prompt build_prompt(const std::vector<flatten::FlatRecord>& batch);

struct ParseWarning {
    std::size_t line = 0;  // 1-based
    std::string reason;
};

struct ParseResult {
    std::vector<RefinedArtifact> artifacts;
    std::vector<ParseWarning> warnings;
};

/// Total parser for JSON-lines engine output: every line yields exactly one
/// artifact or one warning. Never throws.
ParseResult parse_refinement(std::string_view raw, const std::set<std::string, std::less<>>& valid_uids,
                             const std::string& engine_id);

/// Artifacts with confidence >= min_confidence, order preserved.
std::vector<RefinedArtifact> apply_threshold(const std::vector<RefinedArtifact>& artifacts, int min_confidence = 5);

// --- deterministic rule engine ------------------------------------------------

struct MockOptions {
    std::string zone = "America/New_York";
};

/// Deterministic rule-based extraction over every column value of `record`.
std::vector<RefinedArtifact> mock_refine(const flatten::FlatRecord& record, const MockOptions& options = {});

class MockEngine final : public RefinementEngine {
public:
    explicit MockEngine(MockOptions options = {}) : options_(std::move(options)) {}
    std::string id() const override { return "mock-rules-v1"; }
    BatchResult refine(const std::vector<flatten::FlatRecord>& batch) override;

private:
    MockOptions options_;
};

// --- remote chat-completion engine --------------------------------------------

struct RemoteOptions {
    std::string endpoint;  // http(s)://host[:port]/path
    std::string model = "gpt-4";
    std::string token_env = "DFKG_ENGINE_TOKEN";
    int max_attempts = 4;  // one try plus three retries
    std::chrono::milliseconds backoff{500};
    std::chrono::seconds timeout{120};
    std::string audit_path;  // refine_audit.jsonl; empty disables auditing
};

class RemoteEngine final : public RefinementEngine {
public:
    explicit RemoteEngine(RemoteOptions options);
    std::string id() const override { return "remote:" + options_.model; }
    BatchResult refine(const std::vector<flatten::FlatRecord>& batch) override;

private:
    void audit(const std::vector<flatten::FlatRecord>& batch, int attempt, int status, const std::string& body);

    RemoteOptions options_;
    std::mutex audit_mu_;
};

// --- orchestration ----------------------------------------------------------------

struct RefineOptions {
    std::size_t batch_size = 40;
    std::size_t max_in_flight = 4;
};

struct RefineOutcome {
    std::vector<RefinedArtifact> artifacts;  // sorted by uid, stable within a uid
    std::vector<std::string> warnings;
    std::vector<std::vector<std::string>> unrefined_batches;  // uids per failed batch
};

/// Splits `records` into batches, runs them through `engine` with bounded
/// concurrency and merges the results in uid order. Artifacts whose uid is not
/// in their batch are dropped with a warning.
RefineOutcome refine_records(RefinementEngine& engine, const std::vector<flatten::FlatRecord>& records,
                             const RefineOptions& options = {});

/// Per-type CSV files (uid,refined_value,confidence), keyed by file name; every
/// type gets a file, possibly header-only.
std::map<std::string, std::string> artifact_csvs(const std::vector<RefinedArtifact>& artifacts);

std::string artifacts_jsonl(const std::vector<RefinedArtifact>& artifacts);
std::vector<RefinedArtifact> parse_artifacts_jsonl(std::string_view text);

}  // namespace dfkg::refine
