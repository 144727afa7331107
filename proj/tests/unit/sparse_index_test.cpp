#include "unitrank/errors.hpp"
#include "unitrank/query_understanding.hpp"
#include "unitrank/sparse_index.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace unitrank;
namespace ut = unitrank::testing;

namespace {

SparseIndex tiny_index() {
    // d1: "a a b", d2: "c"; avgdl = 2
    return SparseIndex::build(CorpusStore::build({{"d1", "a a b", 0}, {"d2", "c", 0}}, AnalyzerConfig::plain()));
}

TokenSeq tokens(const std::string& text) {
    return analyze(text, AnalyzerConfig::plain());
}

CorpusStore store_from(const std::vector<ut::BagDoc>& docs) {
    std::vector<Document> out;
    for (const auto& d : docs) out.push_back({d.id, ut::join(d.terms), 0});
    return CorpusStore::build(std::move(out), AnalyzerConfig::english());
}

}  // namespace

TEST(SparseIndex, BuildCountsPostings) {
    const auto index = tiny_index();
    EXPECT_EQ(index.num_docs(), 2u);
    EXPECT_DOUBLE_EQ(index.avgdl(), 2.0);
    ASSERT_EQ(index.postings("a").size(), 1u);
    EXPECT_EQ(index.postings("a")[0], (Posting{0, 2}));
    EXPECT_EQ(index.postings("b")[0], (Posting{0, 1}));
    EXPECT_EQ(index.postings("c")[0], (Posting{1, 1}));
    EXPECT_TRUE(index.postings("zzz").empty());
    EXPECT_EQ(index.terms(), (std::vector<std::string>{"a", "b", "c"}));
}

TEST(SparseIndex, EmptyDocumentHasLengthZero) {
    const auto index =
        SparseIndex::build(CorpusStore::build({{"d1", "x y", 0}, {"d2", "", 0}}, AnalyzerConfig::plain()));
    EXPECT_EQ(index.doc_length(static_cast<std::uint32_t>(index.ordinal("d2"))), 0u);
    EXPECT_DOUBLE_EQ(index.avgdl(), 1.0);
    for (const auto& t : index.terms()) {
        for (const auto& p : index.postings(t)) EXPECT_NE(index.doc_ids()[p.doc], "d2");
    }
}

TEST(SparseIndex, DocFreqMatchesNestedScan) {
    std::mt19937_64 rng(99);
    const auto docs = ut::random_corpus(rng, 50, 8);
    const auto index = SparseIndex::build(store_from(docs));
    for (const auto& term : index.terms()) {
        std::uint32_t df = 0;
        for (const auto& d : docs) {
            if (std::find(d.terms.begin(), d.terms.end(), term) != d.terms.end()) ++df;
        }
        EXPECT_EQ(index.doc_freq(term), df) << term;
        const auto list = index.postings(term);
        for (std::size_t i = 1; i < list.size(); ++i) {
            EXPECT_LT(index.doc_ids()[list[i - 1].doc], index.doc_ids()[list[i].doc]);
        }
    }
}

TEST(Idf, ClosedFormValues) {
    EXPECT_NEAR(idf(2, 1), std::log(2.0), 1e-15);
    EXPECT_NEAR(idf(2, 1), 0.693147, 1e-6);
    EXPECT_NEAR(idf(2, 0), std::log(6.0), 1e-15);
    EXPECT_NEAR(idf(2, 0), 1.791759, 1e-6);
    for (std::uint64_t n : {1u, 2u, 10u, 1000u}) {
        EXPECT_GT(idf(n, n), 0.0);
        EXPECT_NEAR(idf(n, n), std::log(1.0 + 0.5 / (static_cast<double>(n) + 0.5)), 1e-15);
    }
    const auto index = tiny_index();
    EXPECT_NEAR(idf("a", index), std::log(2.0), 1e-15);
    EXPECT_NEAR(idf("unseen", index), std::log(6.0), 1e-15);
}

TEST(Bm25, NoOverlapScoresZero) {
    EXPECT_EQ(bm25_score(tokens("zzz"), "d1", tiny_index(), SparseParams{}), 0.0);
}

TEST(Bm25, HandComputedValue) {
    const SparseParams p{0.9, 0.4, 0.4};
    const double expected = std::log(2.0) * (3.8 / 3.08) * 1.0;
    const double got = bm25_score(tokens("a"), "d1", tiny_index(), p);
    EXPECT_NEAR(got, expected, 1e-12);
    EXPECT_NEAR(got, 0.855182, 1e-6);
}

TEST(Bm25, RepeatedQueryTermScalesBySevenSixths) {
    const SparseParams p{0.9, 0.4, 0.4};
    const auto index = tiny_index();
    const double once = bm25_score(tokens("a"), "d1", index, p);
    const double twice = bm25_score(tokens("a a"), "d1", index, p);
    EXPECT_NEAR(twice / once, 7.0 / 6.0, 1e-12);
}

TEST(Bm25, UnknownDocIsAnError) {
    EXPECT_THROW(bm25_score(tokens("a"), "nope", tiny_index(), SparseParams{}), InputError);
}

TEST(SparseRetrieve, ReturnsAllMatchesWhenKIsLarge) {
    const auto list = sparse_retrieve_topk(tokens("a c"), tiny_index(), SparseParams{}, 1000);
    ASSERT_EQ(list.size(), 2u);
    EXPECT_TRUE(is_ranked(list));
}

TEST(SparseRetrieve, SingleDocCorpus) {
    const auto index = SparseIndex::build(CorpusStore::build({{"solo", "x y", 0}}, AnalyzerConfig::plain()));
    const auto list = sparse_retrieve_topk(tokens("y"), index, SparseParams{}, 5);
    ASSERT_EQ(list.size(), 1u);
    EXPECT_EQ(list[0].doc_id, "solo");
    EXPECT_EQ(list[0].score, bm25_score(tokens("y"), "solo", index, SparseParams{}));
}

TEST(SparseRetrieve, UnitTextJoinsSubQueryAndInterpretation) {
    const auto index = tiny_index();
    RetrievalUnit unit{"q1#u0", "a", "c"};
    EXPECT_EQ(unit_text(unit), "a c");
    EXPECT_EQ(sparse_retrieve_topk(unit, index, SparseParams{}, 10),
              sparse_retrieve_topk(tokens("a c"), index, SparseParams{}, 10));
    unit.interpretation.clear();
    EXPECT_EQ(unit_text(unit), "a");
}

TEST(SparseRetrieve, TruncatesAndBreaksTiesById) {
    const auto index = SparseIndex::build(
        CorpusStore::build({{"b", "t", 0}, {"a", "t", 0}, {"c", "t", 0}, {"d", "u", 0}}, AnalyzerConfig::plain()));
    const auto list = sparse_retrieve_topk(tokens("t"), index, SparseParams{}, 2);
    ASSERT_EQ(list.size(), 2u);
    EXPECT_EQ(list[0].doc_id, "a");
    EXPECT_EQ(list[1].doc_id, "b");
    EXPECT_THROW(sparse_retrieve_topk(tokens("t"), index, SparseParams{}, 0), InputError);
}

TEST(SparseRetrieve, MatchesBruteForceOnRandomCorpora) {
    std::mt19937_64 rng(31337);
    std::uniform_real_distribution<double> k1d(0.0, 2.0), bd(0.0, 1.0), k3d(0.0, 10.0);
    for (int round = 0; round < 100; ++round) {
        const auto docs = ut::random_corpus(rng, 50, 8);
        const auto index = SparseIndex::build(store_from(docs));
        const SparseParams p{k1d(rng), bd(rng), k3d(rng)};
        const auto query = ut::random_query(rng, 8);
        const auto expected = ut::brute_ranking(query, docs, p.k1, p.b, p.k3);
        const auto got = sparse_retrieve_topk(analyze(ut::join(query), index.analyzer()), index, p, 1000);
        ASSERT_EQ(got.size(), expected.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            EXPECT_EQ(got[i].doc_id, expected[i].doc_id);
            EXPECT_NEAR(got[i].score, expected[i].score, 1e-9);
        }
    }
}

TEST(SparseParams, Validation) {
    EXPECT_NO_THROW(SparseParams{}.validate());
    EXPECT_THROW((SparseParams{-1, 0.4, 0.4}.validate()), InputError);
    EXPECT_THROW((SparseParams{0.9, 1.5, 0.4}.validate()), InputError);
    EXPECT_THROW((SparseParams{0.9, 0.4, -0.1}.validate()), InputError);
}

// Properties of the scoring function.

TEST(QueryFactor, SingleOccurrenceIsNeutral) {
    for (double k3 : {0.0, 0.2, 0.4, 0.9, 2.0, 5.0, 50.0, 1e6}) EXPECT_EQ(query_term_factor(1, k3), 1.0) << k3;
}

TEST(QueryFactor, RepeatedTermsGrowWithK3AndApproachTf) {
    for (double fq : {2.0, 3.0, 7.0}) {
        double prev = query_term_factor(fq, 0.0);
        EXPECT_EQ(prev, 1.0);
        for (double k3 : {0.2, 0.4, 0.9, 2.0, 5.0, 50.0}) {
            const double f = query_term_factor(fq, k3);
            EXPECT_GT(f, prev);
            EXPECT_LT(f, fq);
            prev = f;
        }
        EXPECT_NEAR(query_term_factor(fq, 1e12), fq, 1e-9);
    }
}

TEST(QueryFactor, RepeatedToSingleWeightRatioRisesWithK3) {
    // f(2)/f(1) = 2(k3+1)/(k3+2): a lower k3 flattens repetition toward a single occurrence.
    double prev = 0.0;
    for (double k3 : {0.2, 0.4, 0.9, 2.0, 5.0, 50.0}) {
        const double ratio = query_term_factor(2, k3) / query_term_factor(1, k3);
        EXPECT_NEAR(ratio, 2 * (k3 + 1) / (k3 + 2), 1e-15);
        EXPECT_GT(ratio, prev);
        prev = ratio;
    }
}

TEST(DocFactor, IncreasingAndConcaveInTf) {
    std::vector<double> s;
    for (int tf = 0; tf <= 10; ++tf) s.push_back(doc_term_factor(tf, 5.0, 4.0, 0.9, 0.4));
    for (std::size_t i = 1; i < s.size(); ++i) EXPECT_GT(s[i], s[i - 1]);
    for (std::size_t i = 2; i < s.size(); ++i) EXPECT_LT(s[i] - s[i - 1], s[i - 1] - s[i - 2]);
}

TEST(DocFactor, LengthNormalization) {
    for (double tf : {1.0, 3.0}) {
        // b = 0: no dependence on length.
        EXPECT_EQ(doc_term_factor(tf, 2.0, 5.0, 1.2, 0.0), doc_term_factor(tf, 50.0, 5.0, 1.2, 0.0));
        // b = 1: longer documents never score higher.
        double prev = doc_term_factor(tf, 1.0, 5.0, 1.2, 1.0);
        for (double len : {2.0, 5.0, 10.0, 100.0}) {
            const double f = doc_term_factor(tf, len, 5.0, 1.2, 1.0);
            EXPECT_LE(f, prev);
            prev = f;
        }
    }
}

TEST(SparseIndexFile, RoundTripIsExactAndByteStable) {
    std::mt19937_64 rng(5);
    const auto docs = ut::random_corpus(rng, 30, 8);
    const auto index = SparseIndex::build(store_from(docs));
    ut::TempDir dir;
    index.save(dir.file("a.idx"));
    const auto loaded = SparseIndex::load(dir.file("a.idx"));
    loaded.save(dir.file("b.idx"));
    EXPECT_EQ(ut::read_file(dir.path() / "a.idx"), ut::read_file(dir.path() / "b.idx"));
    EXPECT_EQ(loaded.doc_ids(), index.doc_ids());
    EXPECT_EQ(loaded.avgdl(), index.avgdl());
    EXPECT_EQ(loaded.analyzer(), index.analyzer());
    EXPECT_EQ(loaded.terms(), index.terms());
    for (const auto& t : index.terms()) {
        EXPECT_TRUE(std::equal(index.postings(t).begin(), index.postings(t).end(), loaded.postings(t).begin(),
                               loaded.postings(t).end()));
    }
    const auto q = analyze("alpha bravo delta", index.analyzer());
    EXPECT_EQ(sparse_retrieve_topk(q, index, {}, 100), sparse_retrieve_topk(q, loaded, {}, 100));
}

TEST(SparseIndexFile, RejectsDamagedFiles) {
    const auto index = tiny_index();
    ut::TempDir dir;
    index.save(dir.file("ok.idx"));
    const std::string bytes = ut::read_file(dir.path() / "ok.idx");

    ut::write_file(dir.path() / "trunc.idx", bytes.substr(0, bytes.size() - 3));
    EXPECT_THROW(SparseIndex::load(dir.file("trunc.idx")), InputError);
    ut::write_file(dir.path() / "extra.idx", bytes + "x");
    EXPECT_THROW(SparseIndex::load(dir.file("extra.idx")), InputError);
    ut::write_file(dir.path() / "magic.idx", "NOTINDEX" + bytes.substr(8));
    EXPECT_THROW(SparseIndex::load(dir.file("magic.idx")), InputError);
    EXPECT_THROW(SparseIndex::load(dir.file("missing.idx")), InputError);
}
