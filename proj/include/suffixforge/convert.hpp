#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "suffixforge/models.hpp"
#include "suffixforge/textcore.hpp"

namespace suffixforge {

struct PoolEntry {
    int token = 0;
    std::string word;
    double sim = 0.0;
};

struct PoolColumn {
    std::vector<PoolEntry> entries;  // K entries, similarity non-increasing
    Mat embeddings;                  // K x d, row i = table row of entries[i]
};

// per-position top-K nearest embedding rows (cosine), one column per suffix
// position
struct PoolBundle {
    int k = 0;
    std::vector<PoolColumn> columns;  // length L

    int length() const { return static_cast<int>(columns.size()); }
};

// Nearest table rows by cosine per embedding row; ties break toward the
// lowest token id. Zero-norm rows are rejected naming the position.
PoolBundle de_embed(const Mat& jbemb, const EmbeddingTable& table, const Vocab& vocab, int k);

struct CandidateSuffix {
    std::string words;
    TokenSeq ids;
    std::vector<int> k_indices;  // pool row picked at each position
};

// Candidate 0 always takes the top-1 at every position; the rest draw pool
// rows uniformly per position. Duplicates are removed after sampling, so at
// most n distinct candidates come back, in draw order.
std::vector<CandidateSuffix> sample_candidates(const PoolBundle& pool, int n, uint64_t seed);

// mean per-position cosine between the optimized embeddings and the
// candidate's re-embedded rows
double re_embed_similarity(const Mat& jbemb, const CandidateSuffix& cand,
                           const EmbeddingTable& table);

// exact table-row lookup, bitwise
Mat suffix_to_prefix_embeddings(const TokenSeq& ids, const EmbeddingTable& table);

// JSON artifact bodies (stable key order)
std::string pool_to_json(const PoolBundle& pool);
std::string candidates_to_json(const std::vector<CandidateSuffix>& cands, uint64_t seed,
                               int requested);
std::vector<CandidateSuffix> candidates_from_json(const std::string& body);

}  // namespace suffixforge
