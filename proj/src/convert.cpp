#include "suffixforge/convert.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "suffixforge/rng.hpp"

namespace suffixforge {

using ordered_json = nlohmann::ordered_json;

PoolBundle de_embed(const Mat& jbemb, const EmbeddingTable& table, const Vocab& vocab, int k) {
    table.validate();
    const int v = table.vocab_size();
    if (k < 1) throw DomainError("de_embed: k must be >= 1");
    if (k > v)
        throw DomainError("de_embed: k " + std::to_string(k) + " exceeds vocab size " +
                          std::to_string(v));
    if (jbemb.cols() != table.dim())
        throw DimensionError("de_embed: embedding dim " + std::to_string(jbemb.cols()) +
                             " != table dim " + std::to_string(table.dim()));
    if (vocab.size() != v)
        throw DimensionError("de_embed: vocab size " + std::to_string(vocab.size()) +
                             " != table rows " + std::to_string(v));

    PoolBundle pool;
    pool.k = k;
    pool.columns.resize(jbemb.rows());
    for (Eigen::Index l = 0; l < jbemb.rows(); ++l) {
        const Vec row = jbemb.row(l).transpose();
        if (row.norm() == 0.0)
            throw DegenerateEncodingError("de_embed: zero-norm embedding at position " +
                                          std::to_string(l));
        std::vector<double> sims(v);
        for (int t = 0; t < v; ++t) sims[t] = cosine(row, table.e.row(t).transpose());
        std::vector<int> order(v);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            if (sims[a] != sims[b]) return sims[a] > sims[b];
            return a < b;
        });
        PoolColumn& col = pool.columns[static_cast<size_t>(l)];
        col.embeddings.resize(k, table.dim());
        col.entries.reserve(k);
        for (int i = 0; i < k; ++i) {
            const int t = order[static_cast<size_t>(i)];
            col.entries.push_back(PoolEntry{t, vocab.word(t), sims[static_cast<size_t>(t)]});
            col.embeddings.row(i) = table.e.row(t);
        }
    }
    return pool;
}

std::vector<CandidateSuffix> sample_candidates(const PoolBundle& pool, int n, uint64_t seed) {
    if (n < 1) throw DomainError("sample_candidates: n must be >= 1");
    if (pool.columns.empty()) throw DomainError("sample_candidates: empty pool");
    for (const auto& col : pool.columns)
        if (static_cast<int>(col.entries.size()) != pool.k)
            throw DomainError("sample_candidates: ragged pool");

    const int l = pool.length();
    Rng rng(derive_seed(seed, "candidates"));
    std::vector<CandidateSuffix> out;
    std::set<TokenSeq> seen;

    auto build = [&](const std::vector<int>& ks) {
        CandidateSuffix c;
        c.k_indices = ks;
        c.ids.reserve(l);
        for (int pos = 0; pos < l; ++pos) {
            const PoolEntry& e = pool.columns[static_cast<size_t>(pos)]
                                     .entries[static_cast<size_t>(ks[static_cast<size_t>(pos)])];
            c.ids.push_back(e.token);
            if (pos) c.words += ' ';
            c.words += e.word;
        }
        return c;
    };

    for (int draw = 0; draw < n; ++draw) {
        std::vector<int> ks(l, 0);
        if (draw > 0)
            for (int pos = 0; pos < l; ++pos)
                ks[static_cast<size_t>(pos)] = static_cast<int>(rng.bounded(pool.k));
        CandidateSuffix c = build(ks);
        if (seen.insert(c.ids).second) out.push_back(std::move(c));
    }
    return out;
}

double re_embed_similarity(const Mat& jbemb, const CandidateSuffix& cand,
                           const EmbeddingTable& table) {
    if (static_cast<Eigen::Index>(cand.ids.size()) != jbemb.rows())
        throw DimensionError("re_embed_similarity: candidate length " +
                             std::to_string(cand.ids.size()) + " != embedding rows " +
                             std::to_string(jbemb.rows()));
    if (cand.ids.empty()) throw DomainError("re_embed_similarity: empty candidate");
    double total = 0.0;
    for (size_t l = 0; l < cand.ids.size(); ++l) {
        const int t = cand.ids[l];
        if (t < 0 || t >= table.vocab_size())
            throw DomainError("re_embed_similarity: token " + std::to_string(t) +
                              " out of range");
        total += cosine(jbemb.row(static_cast<Eigen::Index>(l)).transpose(),
                        table.e.row(t).transpose());
    }
    return total / static_cast<double>(cand.ids.size());
}

Mat suffix_to_prefix_embeddings(const TokenSeq& ids, const EmbeddingTable& table) {
    Mat out(static_cast<Eigen::Index>(ids.size()), table.dim());
    for (size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || ids[i] >= table.vocab_size())
            throw DomainError("suffix_to_prefix_embeddings: token " + std::to_string(ids[i]) +
                              " out of range");
        out.row(static_cast<Eigen::Index>(i)) = table.e.row(ids[i]);
    }
    return out;
}

std::string pool_to_json(const PoolBundle& pool) {
    ordered_json j;
    j["k"] = pool.k;
    j["l"] = pool.length();
    j["columns"] = ordered_json::array();
    for (int pos = 0; pos < pool.length(); ++pos) {
        ordered_json col;
        col["position"] = pos;
        col["entries"] = ordered_json::array();
        for (const auto& e : pool.columns[static_cast<size_t>(pos)].entries) {
            ordered_json entry;
            entry["token"] = e.token;
            entry["word"] = e.word;
            entry["sim"] = e.sim;
            col["entries"].push_back(entry);
        }
        j["columns"].push_back(col);
    }
    return j.dump(2) + "\n";
}

std::string candidates_to_json(const std::vector<CandidateSuffix>& cands, uint64_t seed,
                               int requested) {
    ordered_json j;
    j["seed"] = seed;
    j["requested"] = requested;
    j["candidates"] = ordered_json::array();
    for (const auto& c : cands) {
        ordered_json e;
        e["words"] = c.words;
        e["ids"] = c.ids;
        e["k_indices"] = c.k_indices;
        j["candidates"].push_back(e);
    }
    return j.dump(2) + "\n";
}

std::vector<CandidateSuffix> candidates_from_json(const std::string& body) {
    ordered_json j;
    try {
        j = ordered_json::parse(body);
    } catch (const std::exception& e) {
        throw FormatError(std::string("candidates: invalid json: ") + e.what());
    }
    if (!j.contains("candidates") || !j["candidates"].is_array())
        throw FormatError("candidates: missing candidates array");
    std::vector<CandidateSuffix> out;
    for (const auto& e : j["candidates"]) {
        CandidateSuffix c;
        c.words = e.at("words").get<std::string>();
        c.ids = e.at("ids").get<TokenSeq>();
        c.k_indices = e.at("k_indices").get<std::vector<int>>();
        out.push_back(std::move(c));
    }
    return out;
}

}  // namespace suffixforge
