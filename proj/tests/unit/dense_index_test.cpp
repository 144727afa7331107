#include "unitrank/dense_index.hpp"
#include "unitrank/errors.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <random>

using namespace unitrank;
namespace ut = unitrank::testing;

namespace {

std::string le32(std::uint32_t v) {
    std::string s(4, '\0');
    std::memcpy(s.data(), &v, 4);
    return s;
}

std::string record(const std::string& id, const std::vector<float>& v) {
    std::string s(2, '\0');
    const auto n = static_cast<std::uint16_t>(id.size());
    std::memcpy(s.data(), &n, 2);
    s += id;
    s.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(float));
    return s;
}

std::vector<float> random_vec(std::mt19937_64& rng, std::size_t dim) {
    std::normal_distribution<float> g(0.0f, 1.0f);
    std::vector<float> v(dim);
    for (auto& x : v) x = g(rng);
    return v;
}

// Naive dot product summed from the last component backwards.
double reverse_dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = a.size(); i-- > 0;) s += a[i] * b[i];
    return s;
}

double cosine(std::span<const float> a, std::span<const float> b) {
    double ab = 0, aa = 0, bb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ab += double(a[i]) * b[i];
        aa += double(a[i]) * a[i];
        bb += double(b[i]) * b[i];
    }
    return ab / std::sqrt(aa * bb);
}

}  // namespace

TEST(EmbeddingFile, LoadsHandWrittenBinary) {
    ut::TempDir dir;
    ut::write_file(dir.path() / "e.bin", "REDIEMB1" + le32(2) + record("d1", {1.0f, 0.0f}));
    const auto f = load_embeddings(dir.file("e.bin"));
    EXPECT_EQ(f.dim(), 2u);
    ASSERT_EQ(f.size(), 1u);
    EXPECT_EQ(f.ids()[0], "d1");
    EXPECT_EQ(f.row(0)[0], 1.0f);
    EXPECT_EQ(f.row(0)[1], 0.0f);
}

TEST(EmbeddingFile, DimensionMismatchNamesRecord) {
    ut::TempDir dir;
    ut::write_file(dir.path() / "e.jsonl", "{\"id\":\"d0\",\"vector\":[1,2]}\n{\"id\":\"d1\",\"vector\":[1,0,3]}\n");
    try {
        load_embeddings(dir.file("e.jsonl"));
        FAIL() << "expected an error";
    } catch (const InputError& e) {
        EXPECT_NE(std::string(e.what()).find("\"d1\""), std::string::npos) << e.what();
    }
    EmbeddingFile f(2);
    EXPECT_THROW(f.add("d1", std::vector<float>{1, 0, 3}), InputError);
}

TEST(EmbeddingFile, RejectsDuplicatesTruncationAndGarbage) {
    ut::TempDir dir;
    ut::write_file(dir.path() / "dup.bin", "REDIEMB1" + le32(1) + record("a", {1}) + record("a", {2}));
    EXPECT_THROW(load_embeddings(dir.file("dup.bin")), InputError);

    const std::string good = "REDIEMB1" + le32(3) + record("a", {1, 2, 3}) + record("bb", {4, 5, 6});
    ut::write_file(dir.path() / "trunc.bin", good.substr(0, good.size() - 5));
    try {
        load_embeddings(dir.file("trunc.bin"));
        FAIL() << "expected an error";
    } catch (const InputError& e) {
        EXPECT_NE(std::string(e.what()).find("truncated"), std::string::npos) << e.what();
        EXPECT_NE(std::string(e.what()).find("\"a\""), std::string::npos) << e.what();
    }
    ut::write_file(dir.path() / "nan.jsonl", "{\"id\":\"a\",\"vector\":[1, \"x\"]}\n");
    EXPECT_THROW(load_embeddings(dir.file("nan.jsonl")), InputError);
    ut::write_file(dir.path() / "inf.bin", "REDIEMB1" + le32(1) + record("a", {INFINITY}));
    EXPECT_THROW(load_embeddings(dir.file("inf.bin")), InputError);
    ut::write_file(dir.path() / "empty.bin", "REDIEMB1" + le32(4));
    EXPECT_THROW(load_embeddings(dir.file("empty.bin")), InputError);
    ut::write_file(dir.path() / "zero.bin", "REDIEMB1" + le32(0));
    EXPECT_THROW(load_embeddings(dir.file("zero.bin")), InputError);
    EXPECT_THROW(load_embeddings(dir.file("missing.bin")), InputError);
}

TEST(EmbeddingFile, RoundTripBothFormats) {
    std::mt19937_64 rng(1);
    EmbeddingFile f(16);
    for (int i = 0; i < 10; ++i) f.add("v" + std::to_string(i), random_vec(rng, 16));
    ut::TempDir dir;
    for (auto fmt : {EmbeddingFormat::binary, EmbeddingFormat::jsonl}) {
        const auto path = dir.file(fmt == EmbeddingFormat::binary ? "r.bin" : "r.jsonl");
        save_embeddings(path, f, fmt);
        const auto back = load_embeddings(path);
        ASSERT_EQ(back.ids(), f.ids());
        for (std::size_t i = 0; i < f.size(); ++i) {
            for (std::size_t j = 0; j < 16; ++j) EXPECT_NEAR(back.row(i)[j], f.row(i)[j], 1e-6);
        }
    }
    // The binary layout is exactly magic, dim, then records.
    std::string expected = "REDIEMB1" + le32(16);
    for (std::size_t i = 0; i < f.size(); ++i) {
        expected += record(f.ids()[i], std::vector<float>(f.row(i).begin(), f.row(i).end()));
    }
    EXPECT_EQ(ut::read_file(dir.path() / "r.bin"), expected);
}

TEST(DenseIndex, NormalizesRowsAndStripsDocPrefix) {
    std::mt19937_64 rng(2);
    EmbeddingFile f(8);
    for (int i = 0; i < 5; ++i) f.add("doc:d" + std::to_string(4 - i), random_vec(rng, 8));
    const auto index = DenseIndex::build(f, true);
    EXPECT_TRUE(index.normalized());
    EXPECT_EQ(index.doc_ids(), (std::vector<std::string>{"d0", "d1", "d2", "d3", "d4"}));
    for (std::size_t i = 0; i < index.size(); ++i) {
        double n = 0;
        for (float x : index.row(i)) n += double(x) * x;
        EXPECT_NEAR(std::sqrt(n), 1.0, 1e-6);
    }
    // Prefix kept when not every id carries it.
    f.add("plain", random_vec(rng, 8));
    EXPECT_EQ(DenseIndex::build(f, false).doc_ids().front(), "doc:d0");
}

TEST(FuseQueryEmbedding, Endpoints) {
    const std::vector<double> s{1, 0}, t{0, 1};
    EXPECT_EQ(fuse_query_embedding(s, t, 1.0), s);
    EXPECT_EQ(fuse_query_embedding(s, t, 0.0), t);
    EXPECT_EQ(fuse_query_embedding(s, t, 0.5), (std::vector<double>{0.5, 0.5}));
    const std::vector<double> v{0.3, -2.0, 7.5};
    for (double l : {0.0, 0.25, 0.5, 1.0}) {
        const auto f = fuse_query_embedding(v, v, l);
        for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(f[i], v[i], 1e-15);
    }
    EXPECT_THROW(fuse_query_embedding(s, std::vector<double>{1, 2, 3}, 0.5), InputError);
    EXPECT_THROW(fuse_query_embedding(s, t, 1.5), InputError);
}

TEST(DenseScore, Basics) {
    const std::vector<double> fused{0.5, 0.5};
    EXPECT_EQ(dense_score(fused, std::vector<float>{1, 0}), 0.5);
    EXPECT_EQ(dense_score(std::vector<double>{1, 0}, std::vector<double>{0, 1}), 0.0);
    EXPECT_THROW(dense_score(fused, std::vector<float>{1, 0, 0}), InputError);
}

TEST(DenseScore, MatchesIndependentSummation) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    for (int i = 0; i < 100; ++i) {
        std::vector<double> a(16), b(16);
        for (auto& x : a) x = g(rng);
        for (auto& x : b) x = g(rng);
        EXPECT_NEAR(dense_score(a, b), reverse_dot(a, b), 1e-12);
    }
}

TEST(DenseRetrieve, SelfSimilarDocRanksFirst) {
    std::mt19937_64 rng(4);
    EmbeddingFile docs(16), queries(16);
    for (int i = 0; i < 20; ++i) docs.add("d" + std::to_string(i), random_vec(rng, 16));
    const auto target = docs.row(7);
    queries.add("subq:u", std::vector<float>(target.begin(), target.end()));
    const auto index = DenseIndex::build(docs, true);
    const auto list = dense_retrieve_topk("subq:u", std::nullopt, queries, index, DenseParams{}, 100);
    ASSERT_EQ(list.size(), 20u);
    EXPECT_EQ(list[0].doc_id, "d7");
    EXPECT_NEAR(list[0].score, 1.0, 1e-6);
    EXPECT_TRUE(is_ranked(list));
    EXPECT_THROW(dense_retrieve_topk("subq:missing", std::nullopt, queries, index, DenseParams{}, 5), InputError);
}

TEST(DenseRetrieve, MatchesBruteForceSort) {
    std::mt19937_64 rng(5);
    for (int round = 0; round < 20; ++round) {
        EmbeddingFile docs(16), queries(16);
        for (int i = 0; i < 20; ++i) docs.add("d" + std::to_string(i), random_vec(rng, 16));
        queries.add("s", random_vec(rng, 16));
        queries.add("t", random_vec(rng, 16));
        for (bool normalize : {true, false}) {
            const DenseParams p{0.3, normalize};
            const auto index = DenseIndex::build(docs, normalize);
            const auto got = dense_retrieve_topk("s", std::string_view("t"), queries, index, p, 7);

            auto prep = [&](std::span<const float> v) {
                return normalize ? l2_normalized(v) : std::vector<double>(v.begin(), v.end());
            };
            const auto s = prep(queries.row(0)), t = prep(queries.row(1));
            std::vector<double> fused(16);
            for (int j = 0; j < 16; ++j) fused[j] = 0.3 * s[j] + 0.7 * t[j];
            ScoredList all;
            for (std::size_t i = 0; i < docs.size(); ++i) {
                std::vector<double> row;
                for (float x : index.row(i)) row.push_back(x);
                all.push_back({index.doc_ids()[i], reverse_dot(fused, row)});
            }
            std::sort(all.begin(), all.end(), ranks_before);
            ASSERT_EQ(got.size(), 7u);
            for (std::size_t i = 0; i < 7; ++i) {
                EXPECT_EQ(got[i].doc_id, all[i].doc_id);
                EXPECT_NEAR(got[i].score, all[i].score, 1e-12);
            }
        }
    }
}

TEST(DenseRetrieve, LambdaEndpointsReduceToSingleEmbedding) {
    std::mt19937_64 rng(6);
    EmbeddingFile docs(16), queries(16);
    for (int i = 0; i < 20; ++i) docs.add("d" + std::to_string(i), random_vec(rng, 16));
    queries.add("s", random_vec(rng, 16));
    queries.add("t", random_vec(rng, 16));
    const auto index = DenseIndex::build(docs, true);
    EXPECT_EQ(dense_retrieve_topk("s", std::string_view("t"), queries, index, {1.0, true}, 20),
              dense_retrieve_topk("s", std::nullopt, queries, index, {1.0, true}, 20));
    EXPECT_EQ(dense_retrieve_topk("s", std::string_view("t"), queries, index, {0.0, true}, 20),
              dense_retrieve_topk("t", std::nullopt, queries, index, {0.0, true}, 20));
}

TEST(DenseProperty, NormalizedInnerProductIsCosine) {
    std::mt19937_64 rng(8);
    for (int i = 0; i < 100; ++i) {
        const auto a = random_vec(rng, 16), b = random_vec(rng, 16);
        const auto na = l2_normalized(a);
        EmbeddingFile f(16);
        f.add("b", b);
        const auto index = DenseIndex::build(f, true);
        const double ip = dense_score(na, index.row(0));
        EXPECT_NEAR(ip, cosine(a, b), 1e-6);
        EXPECT_LE(std::abs(ip), 1.0 + 1e-6);
    }
}

TEST(DenseProperty, RetrievalIsRepeatable) {
    std::mt19937_64 rng(9);
    EmbeddingFile docs(16), queries(16);
    for (int i = 0; i < 20; ++i) docs.add("d" + std::to_string(i), random_vec(rng, 16));
    queries.add("s", random_vec(rng, 16));
    const auto index = DenseIndex::build(docs, true);
    const auto first = dense_retrieve_topk("s", std::nullopt, queries, index, {}, 10);
    for (int i = 0; i < 5; ++i) EXPECT_EQ(dense_retrieve_topk("s", std::nullopt, queries, index, {}, 10), first);
}

TEST(DenseIds, Prefixes) {
    EXPECT_EQ(subq_embedding_id("q1#u0"), "subq:q1#u0");
    EXPECT_EQ(interp_embedding_id("q1#u0"), "interp:q1#u0");
}
