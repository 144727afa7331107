#include "unitrank/errors.hpp"
#include "unitrank/fusion.hpp"
#include "unitrank/sparse_index.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <map>
#include <random>

using namespace unitrank;
namespace ut = unitrank::testing;

namespace {

ScoredList ranked(ScoredList l) {
    std::sort(l.begin(), l.end(), ranks_before);
    return l;
}

std::vector<ScoredList> random_lists(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> m(1, 5), n(0, 15), doc(0, 25);
    std::uniform_real_distribution<double> score(0.0, 10.0);
    std::vector<ScoredList> lists(m(rng));
    for (auto& l : lists) {
        std::map<std::string, double> picked;
        const int count = n(rng);
        for (int i = 0; i < count; ++i) picked["d" + std::to_string(doc(rng))] = score(rng);
        for (const auto& [d, s] : picked) l.push_back({d, s});
        l = ranked(l);
    }
    return lists;
}

}  // namespace

TEST(FuseSum, SingleListIsIdentity) {
    const ScoredList l = ranked({{"a", 3}, {"b", 2}, {"c", 1}});
    EXPECT_EQ(fuse_sum(std::vector<ScoredList>{l}, 100), l);
    EXPECT_EQ(fuse_sum(std::vector<ScoredList>{l}, 2), ScoredList(l.begin(), l.begin() + 2));
}

TEST(FuseSum, AddsScoresAcrossLists) {
    const auto out = fuse_sum(std::vector<ScoredList>{{{"d", 2.0}}, {{"d", 3.0}, {"e", 1.0}}}, 10);
    ASSERT_EQ(out.size(), 2u);
    EXPECT_EQ(out[0], (ScoredDoc{"d", 5.0}));
    EXPECT_EQ(out[1], (ScoredDoc{"e", 1.0}));
}

TEST(FuseMax, KeepsBestScore) {
    const ScoredList l = ranked({{"a", 3}, {"b", 2}});
    EXPECT_EQ(fuse_max(std::vector<ScoredList>{l}, 10), l);
    const auto out = fuse_max(std::vector<ScoredList>{{{"d", 2.0}}, {{"d", 3.0}}}, 10);
    EXPECT_EQ(out, (ScoredList{{"d", 3.0}}));
}

TEST(FuseRrf, FormulaValues) {
    const std::vector<ScoredList> lists{{{"d", 9}, {"x", 8}}, {{"y", 9}, {"z", 8}, {"d", 7}}};
    const auto out = fuse_rrf(lists, 60, 10);
    const auto it = std::find_if(out.begin(), out.end(), [](const ScoredDoc& s) { return s.doc_id == "d"; });
    ASSERT_NE(it, out.end());
    EXPECT_EQ(it->score, 1.0 / 61 + 1.0 / 63);

    const auto single = fuse_rrf(std::vector<ScoredList>{{{"only", 0.1}}}, 60, 10);
    EXPECT_EQ(single, (ScoredList{{"only", 1.0 / 61}}));
}

TEST(FuseRrf, TiesBrokenByDocId) {
    const auto out = fuse_rrf(std::vector<ScoredList>{{{"b", 5}}, {{"a", 1}}}, 60, 10);
    ASSERT_EQ(out.size(), 2u);
    EXPECT_EQ(out[0].doc_id, "a");
    EXPECT_EQ(out[1].doc_id, "b");
    EXPECT_EQ(out[0].score, out[1].score);
}

TEST(FuseRrf, RejectsNonPositiveK) {
    EXPECT_THROW(fuse_rrf(std::vector<ScoredList>{{{"a", 1}}}, 0, 10), InputError);
    FusionConfig c;
    c.rrf_k = -1;
    EXPECT_THROW(c.validate(), InputError);
}

TEST(FuseRrf, SingleListKeepsOrder) {
    std::mt19937_64 rng(12);
    for (int i = 0; i < 50; ++i) {
        auto lists = random_lists(rng);
        const auto& l = lists.front();
        const auto out = fuse_rrf(std::vector<ScoredList>{l}, 60, 1000);
        ASSERT_EQ(out.size(), l.size());
        for (std::size_t j = 0; j < l.size(); ++j) EXPECT_EQ(out[j].doc_id, l[j].doc_id);
    }
}

TEST(Fusion, MethodNamesAndDispatch) {
    for (auto m : {FusionMethod::sum, FusionMethod::max, FusionMethod::rrf, FusionMethod::concat}) {
        EXPECT_EQ(fusion_method_from_string(to_string(m)), m);
    }
    EXPECT_THROW(fusion_method_from_string("avg"), InputError);
    const std::vector<ScoredList> lists{{{"a", 1}}, {{"a", 2}}};
    FusionConfig c;
    c.method = FusionMethod::max;
    EXPECT_EQ(fuse(lists, c), (ScoredList{{"a", 2}}));
    c.method = FusionMethod::concat;
    EXPECT_EQ(fuse(lists, c), (ScoredList{{"a", 3}}));
}

TEST(Fusion, DepthGuard) {
    EXPECT_NO_THROW(check_depths(1000, 100));
    EXPECT_NO_THROW(check_depths(100, 100));
    EXPECT_THROW(check_depths(50, 100), InputError);
}

TEST(ConcatUnits, MergesTexts) {
    UnitSet single{"7", "q", {{"q7#u0", "A", "x"}}, Mode::sparse};
    EXPECT_EQ(concat_units(single), single.units[0]);

    UnitSet two{"7", "q", {{"q7#u0", "A", "x"}, {"q7#u1", "B", "y"}}, Mode::sparse};
    const auto merged = concat_units(two);
    EXPECT_EQ(merged.sub_query, "A B");
    EXPECT_EQ(merged.interpretation, "x y");
    EXPECT_EQ(merged.unit_id, "q7#concat");

    two.units[0].interpretation.clear();
    EXPECT_EQ(concat_units(two).interpretation, "y");
    EXPECT_THROW(concat_units(UnitSet{"7", "q", {}, Mode::sparse}), InputError);
}

namespace {

std::pair<ScoredList, ScoredList> sum_and_concat(const UnitSet& set) {
    const auto index = SparseIndex::build(CorpusStore::build(
        {{"a", "alpha alpha filler", 0}, {"b", "bravo filler", 0}, {"c", "alpha bravo filler filler", 0}},
        AnalyzerConfig::english()));
    const SparseParams p{0.9, 0.4, 0.4};
    std::vector<ScoredList> lists;
    for (const auto& u : set.units) lists.push_back(sparse_retrieve_topk(u, index, p, 100));
    return {fuse_sum(lists, 100), sparse_retrieve_topk(concat_units(set), index, p, 100)};
}

}  // namespace

TEST(ConcatUnits, SparseConcatEqualsSumForDisjointUnits) {
    // BM25 adds up per term, so merging units with no shared term changes nothing.
    const auto [summed, concat] = sum_and_concat({"1", "q", {{"q1#u0", "alpha", ""}, {"q1#u1", "bravo", ""}}, Mode::sparse});
    ASSERT_EQ(summed.size(), concat.size());
    for (std::size_t i = 0; i < summed.size(); ++i) {
        EXPECT_EQ(summed[i].doc_id, concat[i].doc_id);
        EXPECT_NEAR(summed[i].score, concat[i].score, 1e-12);
    }
}

TEST(ConcatUnits, SparseConcatSaturatesSharedTerms) {
    // A term in two units counts twice under sum but only f(2) < 2 times
    // inside one merged unit.
    const auto [summed, concat] =
        sum_and_concat({"1", "q", {{"q1#u0", "alpha", ""}, {"q1#u1", "alpha bravo", ""}}, Mode::sparse});
    ASSERT_EQ(summed.size(), concat.size());
    bool differs = false;
    for (std::size_t i = 0; i < summed.size(); ++i) differs |= std::abs(summed[i].score - concat[i].score) > 1e-9;
    EXPECT_TRUE(differs);
}

// Properties.

TEST(FusionProperty, SumEqualsPerListRecomputation) {
    std::mt19937_64 rng(21);
    for (int i = 0; i < 100; ++i) {
        const auto lists = random_lists(rng);
        const auto out = fuse_sum(lists, 1000);
        for (const auto& d : out) {
            double expected = 0;
            for (const auto& l : lists) {
                for (const auto& e : l) {
                    if (e.doc_id == d.doc_id) expected += e.score;
                }
            }
            EXPECT_NEAR(d.score, expected, 1e-9);
        }
        EXPECT_TRUE(is_ranked(out));
    }
}

TEST(FusionProperty, SingleListSumAndMaxAgree) {
    std::mt19937_64 rng(22);
    for (int i = 0; i < 50; ++i) {
        const auto l = random_lists(rng).front();
        EXPECT_EQ(fuse_sum(std::vector<ScoredList>{l}, 1000), l);
        EXPECT_EQ(fuse_max(std::vector<ScoredList>{l}, 1000), l);
    }
}

TEST(FusionProperty, PermutationInvariant) {
    std::mt19937_64 rng(23);
    for (int i = 0; i < 50; ++i) {
        auto lists = random_lists(rng);
        const auto sum = fuse_sum(lists, 1000);
        const auto mx = fuse_max(lists, 1000);
        const auto rrf = fuse_rrf(lists, 60, 1000);
        std::shuffle(lists.begin(), lists.end(), rng);
        EXPECT_EQ(fuse_sum(lists, 1000), sum);
        EXPECT_EQ(fuse_max(lists, 1000), mx);
        EXPECT_EQ(fuse_rrf(lists, 60, 1000), rrf);
    }
}
