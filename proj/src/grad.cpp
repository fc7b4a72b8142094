#include "suffixforge/grad.hpp"

#include <cmath>

#include "suffixforge/parallel.hpp"

namespace suffixforge {

LmGradResult lm_log_likelihood_grad(const FrozenLM& lm, const Mat& prefix,
                                    const TokenSeq& answer) {
    if (prefix.rows() < 1) throw DomainError("lm: prefix must be non-empty");
    if (prefix.cols() != lm.dim()) throw DimensionError("lm: prefix dim != model dim");
    if (answer.empty()) throw DomainError("lm: answer must be non-empty");

    const int d = lm.dim();
    const int p0 = static_cast<int>(prefix.rows());
    const int alen = static_cast<int>(answer.size());
    const Eigen::Index t_len = p0 + alen;
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));

    Mat x(t_len, d);
    x.topRows(p0) = prefix;
    for (int j = 0; j < alen; ++j) {
        if (answer[j] < 0 || answer[j] >= lm.table.vocab_size())
            throw DomainError("lm: answer token " + std::to_string(answer[j]) + " out of range");
        x.row(p0 + j) = lm.table.e.row(answer[j]);
    }

    // forward, keeping intermediates
    Mat q = x * lm.wq;
    Mat k = x * lm.wk;
    Mat v = x * lm.wv;
    Mat s = (q * k.transpose()) * scale;
    Mat p = Mat::Zero(t_len, t_len);
    for (Eigen::Index t = 0; t < t_len; ++t) {
        const Vec row = s.row(t).head(t + 1);
        p.row(t).head(t + 1) = softmax(row).transpose();
    }
    Mat a = p * v;
    Mat u = x + a;
    Mat f = ((u * lm.wf).rowwise() + lm.bf.transpose()).array().tanh();
    Mat h = u + f;
    Mat logits = h * lm.table.e.transpose();

    // log-likelihood and d(ll)/dH, only answer positions carry signal
    double ll = 0.0;
    Mat dh = Mat::Zero(t_len, d);
    for (int j = 0; j < alen; ++j) {
        const Eigen::Index pos = p0 - 1 + j;
        const Vec row = logits.row(pos).transpose();
        ll += log_softmax_pick(row, answer[j]);
        const Vec sm = softmax(row);
        dh.row(pos) = lm.table.e.row(answer[j]) - (sm.transpose() * lm.table.e);
    }

    // H = U + tanh(U wf + bf)
    Mat dz = dh.cwiseProduct(Mat::Ones(t_len, d) - f.cwiseProduct(f));
    Mat du = dh + dz * lm.wf.transpose();

    // U = X + P V
    Mat dx = du;
    Mat dp = du * v.transpose();
    Mat dv = p.transpose() * du;

    // masked row-wise softmax backward
    Mat ds = Mat::Zero(t_len, t_len);
    for (Eigen::Index t = 0; t < t_len; ++t) {
        const auto pv = p.row(t).head(t + 1);
        const auto dpv = dp.row(t).head(t + 1);
        const double dot = (pv.array() * dpv.array()).sum();
        ds.row(t).head(t + 1) = pv.array() * (dpv.array() - dot);
    }

    // S = scale Q K^T
    Mat dq = scale * (ds * k);
    Mat dk = scale * (ds.transpose() * q);

    dx += dq * lm.wq.transpose() + dk * lm.wk.transpose() + dv * lm.wv.transpose();

    LmGradResult out;
    out.value = ll;
    out.d_prefix = dx.topRows(p0);
    assert_finite(out.d_prefix, "lm gradient");
    return out;
}

Vec visual_backward(const VisualModule& vm, const VisualCache& cache, const Mat& d_y) {
    if (d_y.rows() != vm.out_len || d_y.cols() != vm.dim())
        throw DimensionError("visual_backward: gradient must be L x d");
    const Mat ones_ld = Mat::Ones(vm.out_len, vm.dim());
    Mat dz2 = d_y.cwiseProduct(ones_ld - cache.y.cwiseProduct(cache.y));
    Mat dh1 = dz2 * vm.w2.transpose();
    Mat dz1 = dh1.cwiseProduct(ones_ld - cache.h1.cwiseProduct(cache.h1));
    Mat du = dz1 * (vm.w_patch * vm.w1).transpose();

    Vec d_pix = Vec::Zero(static_cast<Eigen::Index>(vm.img_h) * vm.img_w * vm.img_c);
    const int p = vm.patch;
    const int cols_in_grid = vm.img_w / p;
    for (int l = 0; l < vm.out_len; ++l) {
        const int pr = l / cols_in_grid;
        const int pc = l % cols_in_grid;
        int idx = 0;
        for (int py = 0; py < p; ++py)
            for (int px = 0; px < p; ++px)
                for (int ch = 0; ch < vm.img_c; ++ch) {
                    const int off = ((pr * p + py) * vm.img_w + (pc * p + px)) * vm.img_c + ch;
                    d_pix(off) = du(l, idx++) / 255.0;
                }
    }
    assert_finite(d_pix, "visual gradient");
    return d_pix;
}

GradResult grad_objective(const FrozenSystem& sys, std::span<const TokenPair> pairs,
                          const ImageTensor& img) {
    if (pairs.empty()) throw DomainError("grad_objective: no pairs");
    img.validate_box();
    VisualCache cache;
    const Mat jbemb = visual_encode(sys.visual, img, &cache);
    const int l_rows = sys.visual.out_len;

    std::vector<double> values(pairs.size());
    std::vector<Mat> d_jb(pairs.size());
    parallel_for(pairs.size(), [&](size_t i) {
        const Mat prefix = build_prefix(sys.lm.table, &jbemb, pairs[i].query);
        LmGradResult r = lm_log_likelihood_grad(sys.lm, prefix, pairs[i].answer);
        values[i] = r.value;
        d_jb[i] = r.d_prefix.middleRows(1, l_rows);  // rows after <bos>
    });

    double value = 0.0;
    Mat d_rows = Mat::Zero(l_rows, sys.dim());
    for (size_t i = 0; i < pairs.size(); ++i) {
        value += values[i];
        d_rows += d_jb[i];
    }

    GradResult out;
    out.value = value;
    out.grad = visual_backward(sys.visual, cache, d_rows);
    assert_finite(out.grad, "grad_objective");
    return out;
}

MatchGradResult match_similarity_grad(const FrozenSystem& sys, const ImageTensor& img,
                                      const std::vector<TokenSeq>& phrases) {
    if (phrases.empty()) throw DomainError("match: no phrases");
    img.validate_box();
    VisualCache cache;
    const Mat rows = visual_encode(sys.visual, img, &cache);
    const Vec enc_v = rows.colwise().mean().transpose();
    const double nv = enc_v.norm();
    if (nv == 0.0)
        throw DegenerateEncodingError("match: image encoding has zero norm");

    const DualEncoder enc = sys.dual();
    double total = 0.0;
    Vec d_enc_v = Vec::Zero(sys.dim());
    for (const auto& ph : phrases) {
        const Vec enc_l = encode_phrase(enc, ph);
        const double nl = enc_l.norm();
        if (nl == 0.0)
            throw DegenerateEncodingError("match: phrase encoding has zero norm");
        const double c = enc_v.dot(enc_l) / (nv * nl);
        total += c;
        d_enc_v += enc_l / (nv * nl) - (c / (nv * nv)) * enc_v;
    }

    // mean pool: every visual row sees d_enc_v / L
    Mat d_rows(rows.rows(), rows.cols());
    for (Eigen::Index l = 0; l < rows.rows(); ++l)
        d_rows.row(l) = d_enc_v.transpose() / static_cast<double>(rows.rows());

    MatchGradResult out;
    out.value = total;
    out.d_pix = visual_backward(sys.visual, cache, d_rows);
    return out;
}

}  // namespace suffixforge
