#pragma once

#include <vector>

#include "suffixforge/models.hpp"
#include "suffixforge/numkernel.hpp"

namespace suffixforge {

struct LmGradResult {
    double value = 0.0;  // teacher-forced log-likelihood
    Mat d_prefix;        // derivative w.r.t. every prefix row
};

// Reverse-mode through logits, feed-forward, attention and the residual
// stream; answer rows are table lookups and absorb no gradient.
LmGradResult lm_log_likelihood_grad(const FrozenLM& lm, const Mat& prefix,
                                    const TokenSeq& answer);

// d(pixels) from d(visual rows); needs the cache of the matching forward pass
Vec visual_backward(const VisualModule& vm, const VisualCache& cache, const Mat& d_y);

struct MatchGradResult {
    double value = 0.0;  // sum over phrases of cosine(image enc, phrase enc)
    Vec d_pix;
};

MatchGradResult match_similarity_grad(const FrozenSystem& sys, const ImageTensor& img,
                                      const std::vector<TokenSeq>& phrases);

}  // namespace suffixforge
