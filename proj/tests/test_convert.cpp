#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "suffixforge/convert.hpp"
#include "suffixforge/errors.hpp"
#include "suffixforge/rng.hpp"

using namespace suffixforge;

namespace {

std::vector<std::string> number_words(int n) {
    std::vector<std::string> w;
    for (int i = 0; i < n; ++i) w.push_back("w" + std::to_string(i));
    return w;
}

EmbeddingTable random_table(Rng& rng, int v, int d) {
    EmbeddingTable t;
    t.e = Mat(v, d);
    for (int i = 0; i < v; ++i)
        for (int j = 0; j < d; ++j) t.e(i, j) = rng.normal();
    return t;
}

}  // namespace

TEST_CASE("de_embed agrees with the exhaustive cosine reference") {
    Rng rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        const int v = 8 + static_cast<int>(rng.bounded(56));
        const int d = 3 + static_cast<int>(rng.bounded(13));
        const int k = 1 + static_cast<int>(rng.bounded(5));
        const int L = 1 + static_cast<int>(rng.bounded(4));
        const EmbeddingTable table = random_table(rng, v, d);
        const Vocab vocab(number_words(v - kNumReserved));
        Mat jbemb(L, d);
        for (int i = 0; i < L; ++i)
            for (int j = 0; j < d; ++j) jbemb(i, j) = rng.normal();

        const PoolBundle pool = de_embed(jbemb, table, vocab, k);
        REQUIRE(pool.length() == L);
        REQUIRE(pool.k == k);
        const auto reference = oracles::naive_pool(jbemb, table.e, k);
        for (int pos = 0; pos < L; ++pos) {
            const auto& want = reference[static_cast<size_t>(pos)];
            const PoolColumn& col = pool.columns[static_cast<size_t>(pos)];
            REQUIRE(col.entries.size() == static_cast<size_t>(k));
            for (int i = 0; i < k; ++i) {
                const PoolEntry& got = col.entries[static_cast<size_t>(i)];
                CHECK(got.token == want[static_cast<size_t>(i)].token);
                CHECK(std::abs(got.sim - want[static_cast<size_t>(i)].sim) <= 1e-12);
                CHECK(got.word == vocab.word(got.token));
                CHECK((col.embeddings.row(i) - table.e.row(got.token)).cwiseAbs().maxCoeff() ==
                      0.0);
            }
            for (int i = 0; i + 1 < k; ++i)
                CHECK(col.entries[static_cast<size_t>(i)].sim >=
                      col.entries[static_cast<size_t>(i + 1)].sim);
        }
    }
}

TEST_CASE("exact table rows invert to themselves with similarity exactly one") {
    Rng rng(11);
    const int v = 20, d = 8;
    const EmbeddingTable table = random_table(rng, v, d);
    const Vocab vocab(number_words(v - kNumReserved));
    const TokenSeq ids = {5, 11, 19, 4};
    const Mat jbemb = suffix_to_prefix_embeddings(ids, table);
    for (size_t i = 0; i < ids.size(); ++i)
        CHECK((jbemb.row(static_cast<Eigen::Index>(i)) - table.e.row(ids[i]))
                  .cwiseAbs()
                  .maxCoeff() == 0.0);

    const PoolBundle pool = de_embed(jbemb, table, vocab, 1);
    for (size_t i = 0; i < ids.size(); ++i) {
        CHECK(pool.columns[i].entries[0].token == ids[i]);
        CHECK(pool.columns[i].entries[0].sim == 1.0);
    }
    CHECK_THROWS_AS(suffix_to_prefix_embeddings({v}, table), DomainError);
}

TEST_CASE("de_embed tie-breaks duplicate rows toward the lower id") {
    Rng rng(13);
    EmbeddingTable table = random_table(rng, 12, 6);
    table.e.row(9) = table.e.row(5);
    const Vocab vocab(number_words(8));
    Mat jbemb = table.e.row(5);
    const PoolBundle pool = de_embed(jbemb, table, vocab, 3);
    CHECK(pool.columns[0].entries[0].token == 5);
    CHECK(pool.columns[0].entries[1].token == 9);
    CHECK(pool.columns[0].entries[0].sim == 1.0);
    CHECK(pool.columns[0].entries[1].sim == 1.0);
}

TEST_CASE("de_embed validates k and embedding rows") {
    Rng rng(17);
    const EmbeddingTable table = random_table(rng, 10, 4);
    const Vocab vocab(number_words(6));
    Mat jbemb = Mat::Ones(2, 4);
    CHECK_THROWS_AS(de_embed(jbemb, table, vocab, 0), DomainError);
    CHECK_THROWS_AS(de_embed(jbemb, table, vocab, 11), DomainError);
    CHECK_THROWS_AS(de_embed(Mat::Ones(2, 3), table, vocab, 2), DimensionError);
    jbemb.row(1).setZero();
    CHECK_THROWS_WITH_AS(de_embed(jbemb, table, vocab, 2), doctest::Contains("position 1"),
                         DegenerateEncodingError);
}

TEST_CASE("candidate zero is the per-position argmax and duplicates collapse") {
    Rng rng(19);
    const int v = 16, d = 6, L = 3;
    const EmbeddingTable table = random_table(rng, v, d);
    const Vocab vocab(number_words(v - kNumReserved));
    Mat jbemb(L, d);
    for (int i = 0; i < L; ++i)
        for (int j = 0; j < d; ++j) jbemb(i, j) = rng.normal();

    const PoolBundle pool = de_embed(jbemb, table, vocab, 4);
    const auto cands = sample_candidates(pool, 12, 99);
    REQUIRE(!cands.empty());
    CHECK(cands.size() <= 12);
    const CandidateSuffix& first = cands[0];
    REQUIRE(first.ids.size() == static_cast<size_t>(L));
    for (int pos = 0; pos < L; ++pos) {
        CHECK(first.k_indices[static_cast<size_t>(pos)] == 0);
        CHECK(first.ids[static_cast<size_t>(pos)] ==
              pool.columns[static_cast<size_t>(pos)].entries[0].token);
    }
    // every candidate is distinct and space-joins its own words
    std::set<std::string> seen;
    for (const auto& c : cands) {
        CHECK(seen.insert(c.words).second);
        std::string joined;
        for (size_t i = 0; i < c.ids.size(); ++i) {
            if (i) joined += ' ';
            joined += vocab.word(c.ids[i]);
        }
        CHECK(joined == c.words);
    }
    // same seed, same draw
    const auto again = sample_candidates(pool, 12, 99);
    REQUIRE(again.size() == cands.size());
    for (size_t i = 0; i < cands.size(); ++i) CHECK(again[i].ids == cands[i].ids);

    const PoolBundle tight = de_embed(jbemb, table, vocab, 1);
    CHECK(sample_candidates(tight, 20, 1).size() == 1);
    CHECK_THROWS_AS(sample_candidates(pool, 0, 1), DomainError);
}

TEST_CASE("re-embedding exact candidates scores one") {
    Rng rng(23);
    const int v = 14, d = 5;
    const EmbeddingTable table = random_table(rng, v, d);
    const Vocab vocab(number_words(v - kNumReserved));
    const TokenSeq ids = {4, 8, 13};
    const Mat jbemb = suffix_to_prefix_embeddings(ids, table);
    CandidateSuffix cand;
    cand.ids = ids;
    CHECK(re_embed_similarity(jbemb, cand, table) == 1.0);
    cand.ids = {4, 8};
    CHECK_THROWS_AS(re_embed_similarity(jbemb, cand, table), DimensionError);
}

TEST_CASE("pool and candidate json bodies round-trip") {
    Rng rng(29);
    const int v = 12, d = 4, L = 2;
    const EmbeddingTable table = random_table(rng, v, d);
    const Vocab vocab(number_words(v - kNumReserved));
    Mat jbemb(L, d);
    for (int i = 0; i < L; ++i)
        for (int j = 0; j < d; ++j) jbemb(i, j) = rng.normal();
    const PoolBundle pool = de_embed(jbemb, table, vocab, 3);

    const std::string pj = pool_to_json(pool);
    CHECK(pj.find("\"k\": 3") != std::string::npos);
    CHECK(pj.find("\"columns\"") != std::string::npos);

    const auto cands = sample_candidates(pool, 6, 5);
    const std::string cj = candidates_to_json(cands, 5, 6);
    const auto back = candidates_from_json(cj);
    REQUIRE(back.size() == cands.size());
    for (size_t i = 0; i < cands.size(); ++i) {
        CHECK(back[i].ids == cands[i].ids);
        CHECK(back[i].words == cands[i].words);
        CHECK(back[i].k_indices == cands[i].k_indices);
    }
    CHECK_THROWS_AS(candidates_from_json("not json"), FormatError);
    CHECK_THROWS_AS(candidates_from_json("{}"), FormatError);
}
