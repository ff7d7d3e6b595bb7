#include "mindscope/knowledge.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <unordered_set>

#include "mindscope/error.hpp"
#include "mindscope/util.hpp"

namespace mindscope::knowledge {

using nlohmann::json;

namespace {

const std::unordered_set<std::string>& stopwords() {
    static const std::unordered_set<std::string> words = {
        "a",    "an",   "and",  "are",   "as",    "at",   "be",    "been", "but",  "by",   "for",  "from",
        "has",  "have", "in",   "into",  "is",    "it",   "its",   "of",   "on",   "one",  "or",   "such",
        "than", "that", "the",  "their", "them",  "they", "this",  "to",   "was",  "were", "when", "which",
        "while", "who", "with", "would", "i",     "you",  "we",    "he",   "she",  "his",  "her",  "our",
        "do",   "does", "not",  "so",    "if",    "then", "there", "these", "those", "what", "will", "can"};
    return words;
}

void normalize(std::map<std::string, double>& v) {
    double norm = 0.0;
    for (const auto& [_, w] : v) norm += w * w;
    norm = std::sqrt(norm);
    if (norm == 0.0) return;
    for (auto& [_, w] : v) w /= norm;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    auto flush = [&] {
        if (!current.empty() && !stopwords().count(current)) tokens.push_back(current);
        current.clear();
    };
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else {
            flush();
        }
    }
    flush();
    return tokens;
}

json to_json(const BiasDescriptor& d) {
    return {{"id", d.id},
            {"catalog_index", d.catalog_index},
            {"name", d.name},
            {"aliases", d.aliases},
            {"description", d.description},
            {"example", d.example}};
}

KnowledgeLibrary KnowledgeLibrary::from_entries(std::vector<BiasDescriptor> entries) {
    KnowledgeLibrary lib;
    std::set<std::size_t> indices;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        if (e.id.empty()) throw RecordError(i + 1, "empty bias id");
        if (!lib.by_id_.emplace(e.id, i).second) throw DuplicateIdError("duplicate bias id '" + e.id + "'");
        if (!indices.insert(e.catalog_index).second) {
            throw RecordError(i + 1, "duplicate catalog_index " + std::to_string(e.catalog_index));
        }
    }
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (entries[i].catalog_index >= entries.size()) {
            throw RecordError(i + 1, "catalog_index " + std::to_string(entries[i].catalog_index) +
                                         " breaks the contiguous range 0.." + std::to_string(entries.size() - 1));
        }
    }
    std::sort(entries.begin(), entries.end(),
              [](const BiasDescriptor& a, const BiasDescriptor& b) { return a.catalog_index < b.catalog_index; });
    lib.entries_ = std::move(entries);
    lib.by_id_.clear();
    for (std::size_t i = 0; i < lib.entries_.size(); ++i) lib.by_id_.emplace(lib.entries_[i].id, i);
    lib.build_index();
    return lib;
}

KnowledgeLibrary KnowledgeLibrary::load(const std::filesystem::path& path) {
    std::vector<BiasDescriptor> entries;
    std::set<std::string> ids;
    for_each_json_line(path, [&](std::size_t line_no, const json& r) {
        BiasDescriptor d;
        try {
            d.id = r.at("id").get<std::string>();
            d.catalog_index = r.at("catalog_index").get<std::size_t>();
            d.name = r.at("name").get<std::string>();
            d.aliases = r.value("aliases", std::vector<std::string>{});
            d.description = r.value("description", std::string{});
            d.example = r.value("example", std::string{});
        } catch (const json::exception& e) {
            throw RecordError(line_no, std::string("bad library entry: ") + e.what());
        }
        if (!ids.insert(d.id).second) throw DuplicateIdError("duplicate bias id '" + d.id + "' at line " + std::to_string(line_no));
        entries.push_back(std::move(d));
    });
    return from_entries(std::move(entries));
}

void KnowledgeLibrary::build_index() {
    by_phrase_.clear();
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const auto& e = entries_[i];
        by_phrase_.emplace(normalize_phrase(e.id), i);
        by_phrase_.emplace(normalize_phrase(e.name), i);
        for (const auto& alias : e.aliases) by_phrase_.emplace(normalize_phrase(alias), i);
    }

    std::vector<std::vector<std::string>> docs;
    std::unordered_map<std::string, std::size_t> df;
    for (const auto& e : entries_) {
        std::string text = e.name;
        for (const auto& alias : e.aliases) text += " " + alias;
        text += " " + e.description;
        docs.push_back(tokenize(text));
        for (const auto& term : std::set<std::string>(docs.back().begin(), docs.back().end())) ++df[term];
    }
    const double n = static_cast<double>(entries_.size());
    idf_.clear();
    for (const auto& [term, count] : df) idf_[term] = std::log((1.0 + n) / (1.0 + static_cast<double>(count))) + 1.0;
    doc_vectors_.clear();
    for (const auto& tokens : docs) doc_vectors_.push_back(weigh(tokens));
}

KnowledgeLibrary::SparseVector KnowledgeLibrary::weigh(const std::vector<std::string>& tokens) const {
    SparseVector v;
    for (const auto& t : tokens) {
        auto it = idf_.find(t);
        if (it != idf_.end()) v[t] += it->second;
    }
    normalize(v);
    return v;
}

const BiasDescriptor* KnowledgeLibrary::find(std::string_view id) const {
    auto it = by_id_.find(std::string(id));
    return it == by_id_.end() ? nullptr : &entries_[it->second];
}

const BiasDescriptor& KnowledgeLibrary::get(std::string_view id) const {
    if (const auto* d = find(id)) return *d;
    throw NotFound("unknown bias id '" + std::string(id) + "'");
}

const BiasDescriptor* KnowledgeLibrary::resolve(std::string_view name_or_alias) const {
    if (const auto* d = find(name_or_alias)) return d;
    auto it = by_phrase_.find(normalize_phrase(name_or_alias));
    return it == by_phrase_.end() ? nullptr : &entries_[it->second];
}

std::vector<SearchHit> KnowledgeLibrary::search(std::string_view query, std::size_t top_k) const {
    if (top_k == 0) throw ConfigError("search top_k must be >= 1");
    const SparseVector q = weigh(tokenize(query));
    std::vector<SearchHit> hits;
    if (q.empty()) return hits;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        double dot = 0.0;
        const auto& d = doc_vectors_[i];
        for (const auto& [term, w] : q) {
            if (auto it = d.find(term); it != d.end()) dot += w * it->second;
        }
        if (dot > 0.0) hits.push_back({&entries_[i], std::min(1.0, dot)});
    }
    std::stable_sort(hits.begin(), hits.end(), [](const SearchHit& a, const SearchHit& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.entry->catalog_index < b.entry->catalog_index;
    });
    if (hits.size() > top_k) hits.resize(top_k);
    return hits;
}

std::string KnowledgeLibrary::to_jsonl() const {
    std::string out;
    for (const auto& e : entries_) out += to_json(e).dump() + "\n";
    return out;
}

}  // namespace mindscope::knowledge
