#include "dfkg/refine.hpp"

#include <algorithm>
#include <atomic>
#include <thread>

#include "dfkg/csv.hpp"
#include "dfkg/error.hpp"
#include "dfkg/normalize.hpp"

namespace dfkg::refine {

namespace {

constexpr std::string_view kTaskInstructions =
    R"(You are a forensic artifact refinement engine. Your task is to analyze each input row from a CSV file extracted from a mobile application database. Each row contains metadata and column-value pairs. Identify valid forensic artifacts, refine them, assign confidence scores, and output each artifact individually in the required format.
Each row contains:
Database Name (DB), Table Name (TN), File Path (FP), Row Line Number (LID), Unique Identifier (UID), One or more column-value pairs
Your task is to:
1) Use column names and metadata to determine the context of each value.
2) Extract only valid forensic artifacts of the following types:
     Email
     Phone Number
     Human Name (real human names)
     Username
     App Name (convert package names to recognizable names)
     Timestamp (convert to human-readable format)
     Search Keyword (from queries and titles)
     Message (user-generated text like SMS or chat)
     MAC Address
     Longitude
     Latitude
     Address (only identifiable physical locations)
3) For each artifact:
     Refine the value by correcting inconsistencies, removing obfuscations (e.g., encoded characters), and converting to a human-readable forensic format.
     Assign a confidence score between 1 (low certainty) and 10 (high certainty).
     Only retain artifacts with a confidence score of 5 or higher.
4) Output Structure (F):
    For every valid artifact identified, output a structured entry including:
     Entity Type (Exact label from the list below)
     Refined Value (The cleaned, normalized, human-readable artifact)
     Confidence Score (An integer from 1 to 10)
     Each extracted artifact must be listed separately, even if multiple artifacts are extracted from the same input row.
     In Output Use the exact entity type labels listed below for all output entries:
     App Name, Username, Human Name, Phone Number, Email, Search keyword, Message, MAC Address, Longitude, Latitude, Address, Timestamp.
5) Important rules:
     Do not include irrelevant system-level fields or Android internal configuration metadata
     Only use values that can be reliably interpreted based on column names and context
     Do not infer or invent artifact types not listed above
     If a value is partially recovered or decoded, include it only if confidence ≥ 5
     Each artifact must be written individually, not grouped or merged)";

constexpr std::string_view kFormatDirective =
    R"(Input format: each input row is one line of the form
UID | DB | TN | FP | LID | {"column":"value",...}
Response format: answer with JSON lines only, one artifact per line and no other text:
{"uid":"<UID of the source row>","entity_type":"<exact label>","refined_value":"<refined value>","confidence":<integer 1-10>})";

std::string combined_instructions() {
    return std::string(kTaskInstructions) + "\n\n" + std::string(kFormatDirective);
}

}  // namespace

nlohmann::ordered_json to_json(const RefinedArtifact& a) {
    nlohmann::ordered_json j;
    j["uid"] = a.uid;
    j["entity_type"] = label(a.entity_type);
    j["refined_value"] = a.refined_value;
    j["confidence"] = a.confidence;
    j["engine"] = a.engine;
    return j;
}

RefinedArtifact artifact_from_json(const nlohmann::json& j) {
    try {
        RefinedArtifact a;
        a.uid = j.at("uid").get<std::string>();
        auto type = parse_entity_type(j.at("entity_type").get<std::string>());
        if (!type) throw Error(ErrorCode::InvalidInput, "illegal entity_type in stored artifact");
        a.entity_type = *type;
        a.refined_value = j.at("refined_value").get<std::string>();
        a.confidence = j.at("confidence").get<int>();
        a.engine = j.value("engine", std::string{});
        if (a.confidence < 1 || a.confidence > 10 || a.refined_value.empty())
            throw Error(ErrorCode::InvalidInput, "stored artifact violates invariants: " + a.uid);
        return a;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidInput, std::string("malformed artifact: ") + e.what());
    }
}

std::string_view refinement_instructions() {
    static const std::string text = combined_instructions();
    return text;
}

std::string record_line(const flatten::FlatRecord& r) {
    return r.uid + " | " + r.database + " | " + r.table + " | " + r.path + " | " + std::to_string(r.lid) + " | " +
           flatten::pairs_json(r);
}

Prompt build_prompt(const std::vector<flatten::FlatRecord>& batch) {
    if (batch.empty()) throw Error(ErrorCode::EmptyBatch, "cannot build a prompt for zero records");
    Prompt p;
    p.instructions = std::string(refinement_instructions());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        if (i) p.data.push_back('\n');
        p.data += record_line(batch[i]);
    }
    return p;
}

ParseResult parse_refinement(std::string_view raw, const std::set<std::string, std::less<>>& valid_uids,
                             const std::string& engine_id) {
    ParseResult result;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < raw.size()) {
        std::size_t nl = raw.find('\n', pos);
        std::string_view line = raw.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = (nl == std::string_view::npos) ? raw.size() : nl + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

        auto warn = [&](std::string reason) { result.warnings.push_back({line_no, std::move(reason)}); };

        if (line.find_first_not_of(" \t") == std::string_view::npos) {
            warn("empty line");
            continue;
        }
        auto j = nlohmann::json::parse(line.begin(), line.end(), nullptr, false);
        if (j.is_discarded()) {
            warn("invalid JSON");
            continue;
        }
        if (!j.is_object()) {
            warn("not a JSON object");
            continue;
        }
        auto uid = j.find("uid");
        if (uid == j.end() || !uid->is_string()) {
            warn("missing uid");
            continue;
        }
        if (!valid_uids.count(uid->get_ref<const std::string&>())) {
            warn("unknown uid");
            continue;
        }
        auto type_it = j.find("entity_type");
        if (type_it == j.end() || !type_it->is_string()) {
            warn("missing entity_type");
            continue;
        }
        auto type = parse_entity_type(type_it->get_ref<const std::string&>());
        if (!type) {
            warn("illegal entity_type");
            continue;
        }
        auto value_it = j.find("refined_value");
        if (value_it == j.end() || !value_it->is_string()) {
            warn("missing refined_value");
            continue;
        }
        std::string value = collapse_whitespace(value_it->get_ref<const std::string&>());
        if (value.empty()) {
            warn("empty refined_value");
            continue;
        }
        auto conf_it = j.find("confidence");
        if (conf_it == j.end() || !conf_it->is_number_integer()) {
            warn("confidence not an integer");
            continue;
        }
        std::int64_t conf = conf_it->is_number_unsigned()
                                ? static_cast<std::int64_t>(std::min<std::uint64_t>(conf_it->get<std::uint64_t>(), 1000))
                                : conf_it->get<std::int64_t>();
        if (conf < 1 || conf > 10) {
            warn("confidence out of range");
            continue;
        }
        result.artifacts.push_back(
            {uid->get<std::string>(), *type, std::move(value), static_cast<int>(conf), engine_id});
    }
    return result;
}

std::vector<RefinedArtifact> apply_threshold(const std::vector<RefinedArtifact>& artifacts, int min_confidence) {
    if (min_confidence < 1 || min_confidence > 10)
        throw Error(ErrorCode::InvalidConfig, "min_confidence must be within 1..10");
    std::vector<RefinedArtifact> out;
    std::copy_if(artifacts.begin(), artifacts.end(), std::back_inserter(out),
                 [&](const RefinedArtifact& a) { return a.confidence >= min_confidence; });
    return out;
}

RefineOutcome refine_records(RefinementEngine& engine, const std::vector<flatten::FlatRecord>& records,
                             const RefineOptions& options) {
    const std::size_t batch_size = std::max<std::size_t>(options.batch_size, 1);
    std::vector<std::vector<flatten::FlatRecord>> batches;
    for (std::size_t i = 0; i < records.size(); i += batch_size) {
        auto end = std::min(records.size(), i + batch_size);
        batches.emplace_back(records.begin() + static_cast<std::ptrdiff_t>(i),
                             records.begin() + static_cast<std::ptrdiff_t>(end));
    }

    std::vector<RefinementEngine::BatchResult> results(batches.size());
    std::vector<std::string> failures(batches.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t b; (b = next.fetch_add(1)) < batches.size();) {
            try {
                results[b] = engine.refine(batches[b]);
            } catch (const std::exception& e) {
                results[b].refined = false;
                failures[b] = e.what();
            }
        }
    };
    const std::size_t workers = std::min(std::max<std::size_t>(options.max_in_flight, 1), batches.size());
    std::vector<std::thread> pool;
    for (std::size_t i = 1; i < workers; ++i) pool.emplace_back(worker);
    if (workers > 0) worker();
    for (auto& t : pool) t.join();

    RefineOutcome out;
    for (std::size_t b = 0; b < batches.size(); ++b) {
        std::set<std::string, std::less<>> uids;
        for (const auto& r : batches[b]) uids.insert(r.uid);
        auto& res = results[b];
        if (!failures[b].empty()) out.warnings.push_back("batch " + std::to_string(b) + ": " + failures[b]);
        for (auto& w : res.warnings) out.warnings.push_back("batch " + std::to_string(b) + ": " + w);
        if (!res.refined) {
            out.unrefined_batches.emplace_back(uids.begin(), uids.end());
            continue;
        }
        for (auto& a : res.artifacts) {
            if (!uids.count(a.uid)) {
                out.warnings.push_back("batch " + std::to_string(b) + ": dropped artifact for foreign uid " + a.uid);
                continue;
            }
            out.artifacts.push_back(std::move(a));
        }
    }
    std::stable_sort(out.artifacts.begin(), out.artifacts.end(),
                     [](const RefinedArtifact& a, const RefinedArtifact& b) { return a.uid < b.uid; });
    return out;
}

std::map<std::string, std::string> artifact_csvs(const std::vector<RefinedArtifact>& artifacts) {
    std::map<std::string, std::string> files;
    for (EntityType t : kAllEntityTypes)
        files[std::string(artifact_csv_name(t))] = csv::format_row({"uid", "refined_value", "confidence"});
    for (const auto& a : artifacts)
        files[std::string(artifact_csv_name(a.entity_type))] +=
            csv::format_row({a.uid, a.refined_value, std::to_string(a.confidence)});
    return files;
}

std::string artifacts_jsonl(const std::vector<RefinedArtifact>& artifacts) {
    std::string out;
    for (const auto& a : artifacts) {
        out += to_json(a).dump();
        out.push_back('\n');
    }
    return out;
}

std::vector<RefinedArtifact> parse_artifacts_jsonl(std::string_view text) {
    std::vector<RefinedArtifact> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() : nl + 1;
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line.begin(), line.end(), nullptr, false);
        if (j.is_discarded()) throw Error(ErrorCode::InvalidInput, "malformed artifact line");
        out.push_back(artifact_from_json(j));
    }
    return out;
}

}  // namespace dfkg::refine
