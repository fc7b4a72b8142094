#pragma once

#include <cstdint>
#include <vector>

#include "suffixforge/models.hpp"
#include "suffixforge/numkernel.hpp"

namespace suffixforge {

enum class PNorm { Inf, Two };

struct AttackConfig {
    double epsilon = 32.0;
    PNorm p_norm = PNorm::Inf;
    double step_size = 4.0;  // epsilon / 8 by default
    int iters = 500;
    uint64_t seed = 0;
    int num_pairs = 0;  // 0 = use every supplied pair
};

struct PGDState {
    ImageTensor x_init;
    Vec delta;          // final perturbation; x_init + delta stays feasible
    ImageTensor best_x;
    double best_obj = 0.0;
    std::vector<double> trace;  // objective per iterate, iters + 1 entries
};

// Feasibility projection: p-norm ball of radius epsilon around zero composed
// with the [0, 255] pixel box around x_init. For the 2-norm the order is
// radial rescale, box clamp, then a final rescale if the clamp re-grew the
// norm (it cannot, by convexity, but the guard stays).
Vec project(const Vec& delta, const ImageTensor& x_init, const AttackConfig& cfg);

// forward-only total log-likelihood of the pairs' answers given the image
double objective_value(const FrozenSystem& sys, std::span<const TokenPair> pairs,
                       const ImageTensor& img);

// Maximum-likelihood image attack: ascend the teacher-forced likelihood of
// the target answers, projecting every iterate into the feasible set.
// Sign steps under the inf norm, normalized gradient steps under the 2-norm.
PGDState pgd_jailbreak(const FrozenSystem& sys, const std::vector<TokenPair>& pairs,
                       const ImageTensor& x_init, const AttackConfig& cfg);

struct MatchConfig {
    double step_size = 2.0;
    int iters = 300;
    std::vector<TokenSeq> phrases;
};

struct MatchResult {
    ImageTensor x;
    std::vector<double> trace;  // mean phrase similarity per iterate
    double best_sim = 0.0;
};

// Image-text semantic matching: sign-gradient ascent on the mean cosine
// between the pooled image encoding and the phrase encodings, within the
// pixel box. Returns the best iterate, never worse than the input.
MatchResult match_init(const FrozenSystem& sys, const ImageTensor& x, const MatchConfig& cfg);

// mean phrase similarity for each corpus image
std::vector<double> corpus_scores(const FrozenSystem& sys, const std::vector<ImageTensor>& corpus,
                                  const std::vector<TokenSeq>& phrases);

// index of the best-scoring corpus image; ties pick the lowest index
size_t rank_images(const FrozenSystem& sys, const std::vector<ImageTensor>& corpus,
                   const std::vector<TokenSeq>& phrases);

// uniform draw over the corpus
size_t random_init(const std::vector<ImageTensor>& corpus, uint64_t seed);

struct SoftPromptConfig {
    double step_size = 0.5;
    int iters = 200;
    int num_pairs = 0;
};

// Unconstrained embedding-space baseline: plain gradient ascent on the same
// objective over a zero-initialized suffix-length embedding block; returns
// the best iterate.
Mat soft_prompt_baseline(const FrozenSystem& sys, const std::vector<TokenPair>& pairs,
                         int suffix_len, const SoftPromptConfig& cfg);

}  // namespace suffixforge
