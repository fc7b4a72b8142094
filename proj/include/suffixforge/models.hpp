#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "suffixforge/numkernel.hpp"

namespace suffixforge {

// V x d rows; row id doubles as token id (tied with the LM output head).
struct EmbeddingTable {
    Mat e;

    int vocab_size() const { return static_cast<int>(e.rows()); }
    int dim() const { return static_cast<int>(e.cols()); }
    void validate() const;
};

// Single-block causal decoder: one attention head, a tanh feed-forward layer,
// residual connections, logits tied to the embedding table (H * E^T).
struct FrozenLM {
    EmbeddingTable table;
    Mat wq, wk, wv;  // d x d
    Mat wf;          // d x d
    Vec bf;          // d

    int dim() const { return table.dim(); }
    void validate() const;
};

// H x W x C pixels in [0, 255], continuous during optimization; row-major
// (y, x, channel) flattening.
struct ImageTensor {
    int h = 0, w = 0, c = 0;
    Vec pix;

    int size() const { return h * w * c; }
    int offset(int y, int x, int ch) const { return (y * w + x) * c + ch; }
    void validate_shape() const;
    void validate_box() const;  // every pixel within [0, 255]
};

// Non-overlapping square patches, one shared projection plus a shared
// two-layer tanh MLP applied per patch; output is out_len x dim.
struct VisualModule {
    int patch = 0;
    int out_len = 0;              // patch count (= suffix length L)
    int img_h = 0, img_w = 0, img_c = 0;
    Mat w_patch;                  // (patch*patch*img_c) x d
    Mat w1, w2;                   // d x d
    Vec b1, b2;                   // d

    int dim() const { return static_cast<int>(w_patch.cols()); }
    int patch_dim() const { return patch * patch * img_c; }
    void validate() const;
};

struct VisualCache {
    Mat u;   // L x patch_dim, pixel patches scaled to [0, 1]
    Mat h1;  // L x d
    Mat y;   // L x d
};

// CLIP-style pair: the image side reuses the pipeline's visual module
// instance (mean-pooled rows), the text side is a bag-of-embeddings mean
// through a d x d projection.
struct DualEncoder {
    const VisualModule* visual = nullptr;
    const EmbeddingTable* table = nullptr;
    const Mat* text_proj = nullptr;  // d x d
};

// The frozen model bundle used by every stage. Weights never change after
// construction; content_hash guards that.
struct FrozenSystem {
    FrozenLM lm;
    VisualModule visual;
    Mat text_proj;  // d x d

    int dim() const { return lm.dim(); }
    DualEncoder dual() const { return DualEncoder{&visual, &lm.table, &text_proj}; }
    void validate() const;
};

// ---- forward ops ----

Mat visual_encode(const VisualModule& vm, const ImageTensor& img, VisualCache* cache = nullptr);

// [<bos> row; suffix embedding rows (optional); query token rows]
Mat build_prefix(const EmbeddingTable& table, const Mat* suffix_emb, const TokenSeq& query);

// Teacher-forced sum of next-token log-probabilities of `answer` given the
// prefix embedding rows. Always <= 0.
double lm_log_likelihood(const FrozenLM& lm, const Mat& prefix, const TokenSeq& answer);

// Greedy decoding until <eos> or max_len tokens; ties pick the lowest id;
// <eos> is not included in the returned sequence.
TokenSeq generate_greedy(const FrozenLM& lm, const Mat& prefix, int max_len);

Vec encode_image(const DualEncoder& enc, const ImageTensor& img);
Vec encode_phrase(const DualEncoder& enc, const TokenSeq& phrase);
double clip_similarity(const DualEncoder& enc, const ImageTensor& img, const TokenSeq& phrase);

// ---- construction / persistence ----

struct SystemParams {
    uint64_t seed = 0;
    int vocab_size = 64;  // >= 8
    int dim = 32;
    int suffix_len = 8;   // visual rows = patch count
    int patch = 4;
    int img_h = 8, img_w = 16, img_c = 3;
    // visual outputs get strong linear routes toward this many embedding rows,
    // standing in for image-text pretraining alignment
    int visual_anchors = 2;
    double anchor_pull = 2.0;
};

FrozenSystem generate_system(const SystemParams& params);

// binary model file: magic "SFMODEL1", u32 LE header (V, d, L, patch, H, W,
// C), then f64 LE row-major weights in declared field order
std::vector<unsigned char> serialize_system(const FrozenSystem& sys);
FrozenSystem deserialize_system(const std::vector<unsigned char>& bytes);
void save_system(const FrozenSystem& sys, const std::string& path);
FrozenSystem load_system(const std::string& path);

// FNV-1a 64 over the serialized byte stream, as fixed-width hex
std::string content_hash(const FrozenSystem& sys);

}  // namespace suffixforge
