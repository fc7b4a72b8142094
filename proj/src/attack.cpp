#include "suffixforge/attack.hpp"

#include <cmath>

#include "suffixforge/grad.hpp"
#include "suffixforge/parallel.hpp"
#include "suffixforge/rng.hpp"

namespace suffixforge {

namespace {

void validate_attack_cfg(const AttackConfig& cfg) {
    if (cfg.epsilon <= 0.0) throw DomainError("attack: epsilon must be positive");
    if (cfg.step_size <= 0.0) throw DomainError("attack: step size must be positive");
    if (cfg.iters < 0) throw DomainError("attack: iters must be >= 0");
    if (cfg.num_pairs < 0) throw DomainError("attack: num_pairs must be >= 0");
}

std::span<const TokenPair> pair_slice(const std::vector<TokenPair>& pairs, int num_pairs) {
    if (pairs.empty()) throw DomainError("attack: no pairs supplied");
    size_t m = pairs.size();
    if (num_pairs > 0) {
        if (static_cast<size_t>(num_pairs) > pairs.size())
            throw DomainError("attack: num_pairs " + std::to_string(num_pairs) +
                              " exceeds supplied pairs " + std::to_string(pairs.size()));
        m = static_cast<size_t>(num_pairs);
    }
    return {pairs.data(), m};
}

ImageTensor apply_delta(const ImageTensor& x_init, const Vec& delta) {
    ImageTensor x = x_init;
    x.pix = x_init.pix + delta;
    return x;
}

void check_feasible(const Vec& delta, const ImageTensor& x_init, const AttackConfig& cfg) {
    const Vec x = x_init.pix + delta;
    if (x.minCoeff() < 0.0 || x.maxCoeff() > 255.0)
        throw InternalError("attack: iterate escaped the pixel box");
    if (cfg.p_norm == PNorm::Inf) {
        if (delta.lpNorm<Eigen::Infinity>() > cfg.epsilon * (1.0 + 1e-9))
            throw InternalError("attack: iterate escaped the inf-norm budget");
    } else if (delta.norm() > cfg.epsilon * (1.0 + 1e-9)) {
        throw InternalError("attack: iterate escaped the 2-norm budget");
    }
}

}  // namespace

Vec project(const Vec& delta, const ImageTensor& x_init, const AttackConfig& cfg) {
    validate_attack_cfg(cfg);
    x_init.validate_box();
    if (delta.size() != x_init.pix.size())
        throw DimensionError("project: delta length " + std::to_string(delta.size()) +
                             " != pixel count " + std::to_string(x_init.pix.size()));
    Vec d = delta;
    if (cfg.p_norm == PNorm::Inf) {
        d = d.cwiseMax(-cfg.epsilon).cwiseMin(cfg.epsilon);
    } else {
        const double n = d.norm();
        if (n > cfg.epsilon) d *= cfg.epsilon / n;
    }
    // componentwise box intersection; coordinates already inside keep their
    // exact value instead of drifting through x + d - x round trips
    for (Eigen::Index i = 0; i < d.size(); ++i) {
        const double t = x_init.pix(i) + d(i);
        if (t < 0.0)
            d(i) = -x_init.pix(i);
        else if (t > 255.0)
            d(i) = 255.0 - x_init.pix(i);
    }
    if (cfg.p_norm == PNorm::Two) {
        const double n = d.norm();
        if (n > cfg.epsilon) d *= cfg.epsilon / n;
    }
    assert_finite(d, "project");
    return d;
}

double objective_value(const FrozenSystem& sys, std::span<const TokenPair> pairs,
                       const ImageTensor& img) {
    if (pairs.empty()) throw DomainError("objective: no pairs");
    img.validate_box();
    const Mat jbemb = visual_encode(sys.visual, img);
    std::vector<double> values(pairs.size());
    parallel_for(pairs.size(), [&](size_t i) {
        const Mat prefix = build_prefix(sys.lm.table, &jbemb, pairs[i].query);
        values[i] = lm_log_likelihood(sys.lm, prefix, pairs[i].answer);
    });
    double total = 0.0;
    for (double v : values) total += v;
    return total;
}

PGDState pgd_jailbreak(const FrozenSystem& sys, const std::vector<TokenPair>& pairs,
                       const ImageTensor& x_init, const AttackConfig& cfg) {
    validate_attack_cfg(cfg);
    x_init.validate_box();
    const auto slice = pair_slice(pairs, cfg.num_pairs);

    PGDState st;
    st.x_init = x_init;
    st.delta = Vec::Zero(x_init.pix.size());
    st.best_obj = -std::numeric_limits<double>::infinity();
    st.trace.reserve(static_cast<size_t>(cfg.iters) + 1);

    ImageTensor x = x_init;
    for (int it = 0; it < cfg.iters; ++it) {
        const GradResult g = grad_objective(sys, slice, x);
        st.trace.push_back(g.value);
        if (g.value > st.best_obj) {
            st.best_obj = g.value;
            st.best_x = x;
        }
        const Vec grad = g.grad.col(0);
        if (cfg.p_norm == PNorm::Inf) {
            st.delta += cfg.step_size * grad.array().sign().matrix();
        } else {
            const double n = grad.norm();
            if (n > 0.0) st.delta += (cfg.step_size / n) * grad;
        }
        st.delta = project(st.delta, x_init, cfg);
        check_feasible(st.delta, x_init, cfg);
        x = apply_delta(x_init, st.delta);
    }
    const double final_obj = objective_value(sys, slice, x);
    st.trace.push_back(final_obj);
    if (final_obj > st.best_obj) {
        st.best_obj = final_obj;
        st.best_x = x;
    }
    return st;
}

MatchResult match_init(const FrozenSystem& sys, const ImageTensor& x0, const MatchConfig& cfg) {
    if (cfg.step_size <= 0.0) throw DomainError("match: step size must be positive");
    if (cfg.iters < 0) throw DomainError("match: iters must be >= 0");
    if (cfg.phrases.empty()) throw DomainError("match: no phrases");
    x0.validate_box();
    const double inv = 1.0 / static_cast<double>(cfg.phrases.size());

    MatchResult res;
    res.x = x0;
    res.best_sim = -std::numeric_limits<double>::infinity();
    res.trace.reserve(static_cast<size_t>(cfg.iters) + 1);

    ImageTensor x = x0;
    for (int it = 0; it < cfg.iters; ++it) {
        const MatchGradResult g = match_similarity_grad(sys, x, cfg.phrases);
        const double mean_sim = g.value * inv;
        res.trace.push_back(mean_sim);
        if (mean_sim > res.best_sim) {
            res.best_sim = mean_sim;
            res.x = x;
        }
        x.pix += cfg.step_size * g.d_pix.array().sign().matrix();
        x.pix = x.pix.cwiseMax(0.0).cwiseMin(255.0);
    }
    double final_sim = 0.0;
    for (const auto& ph : cfg.phrases) final_sim += clip_similarity(sys.dual(), x, ph);
    final_sim *= inv;
    res.trace.push_back(final_sim);
    if (final_sim > res.best_sim) {
        res.best_sim = final_sim;
        res.x = x;
    }
    return res;
}

std::vector<double> corpus_scores(const FrozenSystem& sys, const std::vector<ImageTensor>& corpus,
                                  const std::vector<TokenSeq>& phrases) {
    if (corpus.empty()) throw DomainError("rank: empty corpus");
    if (phrases.empty()) throw DomainError("rank: no phrases");
    std::vector<double> scores(corpus.size());
    parallel_for(corpus.size(), [&](size_t i) {
        double s = 0.0;
        for (const auto& ph : phrases) s += clip_similarity(sys.dual(), corpus[i], ph);
        scores[i] = s / static_cast<double>(phrases.size());
    });
    return scores;
}

size_t rank_images(const FrozenSystem& sys, const std::vector<ImageTensor>& corpus,
                   const std::vector<TokenSeq>& phrases) {
    const auto scores = corpus_scores(sys, corpus, phrases);
    size_t best = 0;
    for (size_t i = 1; i < scores.size(); ++i)
        if (scores[i] > scores[best]) best = i;
    return best;
}

size_t random_init(const std::vector<ImageTensor>& corpus, uint64_t seed) {
    if (corpus.empty()) throw DomainError("random_init: empty corpus");
    Rng rng(derive_seed(seed, "random-init"));
    return static_cast<size_t>(rng.bounded(corpus.size()));
}

Mat soft_prompt_baseline(const FrozenSystem& sys, const std::vector<TokenPair>& pairs,
                         int suffix_len, const SoftPromptConfig& cfg) {
    if (suffix_len <= 0) throw DomainError("soft prompt: suffix length must be positive");
    if (cfg.step_size <= 0.0) throw DomainError("soft prompt: step size must be positive");
    if (cfg.iters < 0) throw DomainError("soft prompt: iters must be >= 0");
    const auto slice = pair_slice(pairs, cfg.num_pairs);
    const int d = sys.dim();

    Mat emb = Mat::Zero(suffix_len, d);
    Mat best = emb;
    double best_obj = -std::numeric_limits<double>::infinity();

    auto eval_and_grad = [&](const Mat& e, Mat* grad) {
        std::vector<double> values(slice.size());
        std::vector<Mat> grads(slice.size());
        parallel_for(slice.size(), [&](size_t i) {
            const Mat prefix = build_prefix(sys.lm.table, &e, slice[i].query);
            if (grad) {
                LmGradResult r = lm_log_likelihood_grad(sys.lm, prefix, slice[i].answer);
                values[i] = r.value;
                grads[i] = r.d_prefix.middleRows(1, suffix_len);
            } else {
                values[i] = lm_log_likelihood(sys.lm, prefix, slice[i].answer);
            }
        });
        double total = 0.0;
        if (grad) grad->setZero(suffix_len, d);
        for (size_t i = 0; i < slice.size(); ++i) {
            total += values[i];
            if (grad) *grad += grads[i];
        }
        return total;
    };

    for (int it = 0; it < cfg.iters; ++it) {
        Mat g;
        const double v = eval_and_grad(emb, &g);
        if (v > best_obj) {
            best_obj = v;
            best = emb;
        }
        emb += cfg.step_size * g;
    }
    const double v = eval_and_grad(emb, nullptr);
    if (v > best_obj) best = emb;
    return best;
}

}  // namespace suffixforge
