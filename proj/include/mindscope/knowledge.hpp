#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

namespace mindscope::knowledge {

struct BiasDescriptor {
    std::string id;
    std::size_t catalog_index = 0;
    std::string name;
    std::vector<std::string> aliases;
    std::string description;
    std::string example;

    bool operator==(const BiasDescriptor&) const = default;
};

nlohmann::json to_json(const BiasDescriptor& d);

struct SearchHit {
    const BiasDescriptor* entry = nullptr;
    double score = 0.0;  // cosine similarity in [0, 1]
};

/// Lowercased alphanumeric tokens with common English stopwords removed.
std::vector<std::string> tokenize(std::string_view text);

/// The cognitive-bias catalog with a TF-IDF index over name, aliases and
/// description. Immutable after construction.
class KnowledgeLibrary {
public:
    KnowledgeLibrary() = default;

    /// Throws DuplicateIdError or RecordError (line numbers are 1-based
    /// positions in `entries`).
    static KnowledgeLibrary from_entries(std::vector<BiasDescriptor> entries);
    static KnowledgeLibrary load(const std::filesystem::path& path);

    const std::vector<BiasDescriptor>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

    /// Exact id lookup; throws NotFound.
    const BiasDescriptor& get(std::string_view id) const;
    const BiasDescriptor* find(std::string_view id) const;

    /// Matches an id, display name or alias, ignoring case and punctuation.
    const BiasDescriptor* resolve(std::string_view name_or_alias) const;

    /// Up to top_k entries with positive similarity, best first; ties go to
    /// the lower catalog_index.
    std::vector<SearchHit> search(std::string_view query, std::size_t top_k) const;

    std::string to_jsonl() const;

private:
    using SparseVector = std::map<std::string, double>;

    SparseVector weigh(const std::vector<std::string>& tokens) const;
    void build_index();

    std::vector<BiasDescriptor> entries_;
    std::unordered_map<std::string, std::size_t> by_id_;
    std::unordered_map<std::string, std::size_t> by_phrase_;
    std::unordered_map<std::string, double> idf_;
    std::vector<SparseVector> doc_vectors_;
};

}  // namespace mindscope::knowledge
