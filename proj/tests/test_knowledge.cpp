#include <gtest/gtest.h>

#include "mindscope/error.hpp"
#include "mindscope/knowledge.hpp"
#include "mindscope/util.hpp"
#include "support/paths.hpp"

using namespace mindscope;
using namespace mindscope::knowledge;

namespace {

const KnowledgeLibrary& library() {
    static const KnowledgeLibrary lib = KnowledgeLibrary::load(fixtures::library_path());
    return lib;
}

BiasDescriptor entry(std::string id, std::size_t index, std::string description) {
    BiasDescriptor d;
    d.id = id;
    d.catalog_index = index;
    d.name = id;
    d.description = std::move(description);
    return d;
}

}  // namespace

TEST(Load, BundledLibraryHasSeventyTwoContiguousEntries) {
    const auto& lib = library();
    ASSERT_EQ(lib.size(), 72u);
    for (std::size_t i = 0; i < lib.size(); ++i) EXPECT_EQ(lib.entries()[i].catalog_index, i);
}

TEST(Load, DuplicateIdIsRejected) {
    EXPECT_THROW(KnowledgeLibrary::from_entries({entry("anchoring", 0, "a"), entry("anchoring", 1, "b")}),
                 DuplicateIdError);
}

TEST(Load, EmptyFileGivesEmptyLibrary) {
    fixtures::TempDir dir("lib");
    write_file(dir / "empty.jsonl", "");
    const auto lib = KnowledgeLibrary::load(dir / "empty.jsonl");
    EXPECT_TRUE(lib.empty());
    EXPECT_TRUE(lib.search("anchor", 5).empty());
}

TEST(Load, BadRecordReportsLineNumber) {
    fixtures::TempDir dir("lib");
    write_file(dir / "bad.jsonl", "{\"id\": \"x\", \"catalog_index\": 0, \"name\": \"X\"}\n{\"id\": 3}\n");
    try {
        KnowledgeLibrary::load(dir / "bad.jsonl");
        FAIL();
    } catch (const RecordError& e) {
        EXPECT_EQ(e.line_no(), 2u);
    }
}

TEST(Load, MissingFileIsIoError) { EXPECT_THROW(KnowledgeLibrary::load("/nonexistent/lib.jsonl"), IoError); }

TEST(Load, NonContiguousIndicesAreRejected) {
    EXPECT_THROW(KnowledgeLibrary::from_entries({entry("a", 0, "x"), entry("b", 2, "y")}), RecordError);
}

TEST(Get, ExactIdLookup) {
    const auto& d = library().get("sunk-cost-fallacy");
    EXPECT_EQ(d.name, "Sunk cost fallacy");
    EXPECT_THROW(library().get("zeta-bias"), NotFound);
    EXPECT_EQ(library().find("zeta-bias"), nullptr);
}

TEST(Get, AliasResolvesToTheCanonicalEntry) {
    const auto* d = library().resolve("sunk cost effect");
    ASSERT_NE(d, nullptr);
    EXPECT_EQ(d, &library().get("sunk-cost-fallacy"));
    EXPECT_EQ(library().resolve("Framing Effect"), &library().get("framing-effect"));
    EXPECT_EQ(library().resolve("ANCHORING-BIAS"), &library().get("anchoring"));
    EXPECT_EQ(library().resolve("zeta bias"), nullptr);
}

TEST(Search, VerbatimDescriptionRanksItsEntryFirst) {
    for (const auto& d : library().entries()) {
        const auto hits = library().search(d.description, 3);
        ASSERT_FALSE(hits.empty()) << d.id;
        EXPECT_EQ(hits[0].entry->id, d.id);
    }
}

TEST(Search, NoSharedTermsGivesNoHits) { EXPECT_TRUE(library().search("xylophone quasar", 5).empty()); }

TEST(Search, EqualScoresBreakTiesByCatalogIndex) {
    auto first = entry("b-first", 0, "shared words only");
    auto second = entry("a-second", 1, "shared words only");
    first.name = second.name = "Twin";
    const auto lib = KnowledgeLibrary::from_entries({first, second, entry("c", 2, "other")});
    const auto hits = lib.search("shared words", 5);
    ASSERT_EQ(hits.size(), 2u);
    EXPECT_DOUBLE_EQ(hits[0].score, hits[1].score);
    EXPECT_EQ(hits[0].entry->id, "b-first");
    EXPECT_EQ(hits[1].entry->id, "a-second");
}

TEST(Search, ScoresAreNonincreasingAndBounded) {
    const auto hits = library().search("relying on the first number offered when estimating a price", 10);
    ASSERT_FALSE(hits.empty());
    EXPECT_LE(hits.size(), 10u);
    for (std::size_t i = 0; i < hits.size(); ++i) {
        EXPECT_GT(hits[i].score, 0.0);
        EXPECT_LE(hits[i].score, 1.0 + 1e-12);
        if (i > 0) EXPECT_LE(hits[i].score, hits[i - 1].score);
    }
    EXPECT_EQ(hits[0].entry->id, "anchoring");
}

TEST(Search, IsDeterministic) {
    const auto a = library().search("losses loom larger than gains", 5);
    const auto b = library().search("losses loom larger than gains", 5);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].entry, b[i].entry);
        EXPECT_EQ(a[i].score, b[i].score);
    }
}

TEST(RoundTrip, SerializeThenLoadPreservesEveryEntry) {
    fixtures::TempDir dir("lib");
    write_file(dir / "lib.jsonl", library().to_jsonl());
    const auto again = KnowledgeLibrary::load(dir / "lib.jsonl");
    ASSERT_EQ(again.size(), library().size());
    for (const auto& d : library().entries()) EXPECT_EQ(again.get(d.id), d);
}

TEST(Tokenize, DropsStopwordsAndPunctuation) {
    EXPECT_EQ(tokenize("The Anchor, and the price!"), (std::vector<std::string>{"anchor", "price"}));
}
