#include "suffixforge/models.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "suffixforge/rng.hpp"
#include "suffixforge/textcore.hpp"

namespace suffixforge {

namespace {

constexpr char kMagic[8] = {'S', 'F', 'M', 'O', 'D', 'E', 'L', '1'};

void require(bool ok, const std::string& msg) {
    if (!ok) throw DomainError(msg);
}

}  // namespace

void EmbeddingTable::validate() const {
    require(e.rows() >= 8, "embedding table: vocab size must be >= 8, got " +
                               std::to_string(e.rows()));
    require(e.cols() >= 1, "embedding table: dim must be positive");
    assert_finite(e, "embedding table");
    bool all_same = true;
    for (Eigen::Index i = 0; i < e.rows(); ++i) {
        if (e.row(i).norm() == 0.0)
            throw DomainError("embedding table: zero row at id " + std::to_string(i));
        if (i > 0 && e.row(i) != e.row(0)) all_same = false;
    }
    if (e.rows() > 1 && all_same)
        throw DomainError("embedding table: all rows identical");
}

void FrozenLM::validate() const {
    table.validate();
    const int d = table.dim();
    auto chk = [&](const Mat& m, const char* name) {
        if (m.rows() != d || m.cols() != d)
            throw DimensionError(std::string("lm: ") + name + " must be " + std::to_string(d) +
                                 "x" + std::to_string(d));
        assert_finite(m, name);
    };
    chk(wq, "wq");
    chk(wk, "wk");
    chk(wv, "wv");
    chk(wf, "wf");
    if (bf.size() != d) throw DimensionError("lm: bf must have length d");
    assert_finite(bf, "bf");
}

void ImageTensor::validate_shape() const {
    require(h > 0 && w > 0 && c > 0, "image: dimensions must be positive");
    require(pix.size() == static_cast<Eigen::Index>(size()),
            "image: pixel buffer has " + std::to_string(pix.size()) + " entries, expected " +
                std::to_string(size()));
    assert_finite(pix, "image");
}

void ImageTensor::validate_box() const {
    validate_shape();
    if (pix.minCoeff() < 0.0 || pix.maxCoeff() > 255.0)
        throw DomainError("image: pixel outside [0, 255]");
}

void VisualModule::validate() const {
    require(patch > 0 && out_len > 0 && img_h > 0 && img_w > 0 && img_c > 0,
            "visual: dimensions must be positive");
    require(img_h % patch == 0 && img_w % patch == 0,
            "visual: image " + std::to_string(img_h) + "x" + std::to_string(img_w) +
                " not divisible by patch " + std::to_string(patch));
    const int grid = (img_h / patch) * (img_w / patch);
    require(grid == out_len, "visual: patch grid " + std::to_string(grid) +
                                 " != output length " + std::to_string(out_len));
    const int d = dim();
    require(w_patch.rows() == patch_dim() && w_patch.cols() == d,
            "visual: patch map must be patch_dim x d");
    require(w1.rows() == d && w1.cols() == d && w2.rows() == d && w2.cols() == d,
            "visual: mlp layers must be d x d");
    require(b1.size() == d && b2.size() == d, "visual: biases must have length d");
    assert_finite(w_patch, "w_patch");
    assert_finite(w1, "w1");
    assert_finite(w2, "w2");
    assert_finite(b1, "b1");
    assert_finite(b2, "b2");
}

void FrozenSystem::validate() const {
    lm.validate();
    visual.validate();
    const int d = lm.dim();
    require(visual.dim() == d, "system: visual dim != lm dim");
    require(text_proj.rows() == d && text_proj.cols() == d, "system: text_proj must be d x d");
    assert_finite(text_proj, "text_proj");
}

Mat visual_encode(const VisualModule& vm, const ImageTensor& img, VisualCache* cache) {
    vm.validate();
    img.validate_shape();
    if (img.h != vm.img_h || img.w != vm.img_w || img.c != vm.img_c)
        throw DimensionError("visual: image " + std::to_string(img.h) + "x" +
                             std::to_string(img.w) + "x" + std::to_string(img.c) +
                             " does not match module " + std::to_string(vm.img_h) + "x" +
                             std::to_string(vm.img_w) + "x" + std::to_string(vm.img_c));
    const int p = vm.patch;
    const int cols_in_grid = vm.img_w / p;
    const int pd = vm.patch_dim();
    Mat u(vm.out_len, pd);
    for (int l = 0; l < vm.out_len; ++l) {
        const int pr = l / cols_in_grid;
        const int pc = l % cols_in_grid;
        int k = 0;
        for (int py = 0; py < p; ++py)
            for (int px = 0; px < p; ++px)
                for (int ch = 0; ch < img.c; ++ch)
                    u(l, k++) = img.pix(img.offset(pr * p + py, pc * p + px, ch)) / 255.0;
    }
    Mat h1 = ((u * vm.w_patch * vm.w1).rowwise() + vm.b1.transpose()).array().tanh();
    Mat y = ((h1 * vm.w2).rowwise() + vm.b2.transpose()).array().tanh();
    assert_finite(y, "visual_encode");
    if (cache) {
        cache->u = std::move(u);
        cache->h1 = h1;
        cache->y = y;
    }
    return y;
}

Mat build_prefix(const EmbeddingTable& table, const Mat* suffix_emb, const TokenSeq& query) {
    const int d = table.dim();
    int rows = 1 + static_cast<int>(query.size());
    if (suffix_emb) {
        if (suffix_emb->cols() != d)
            throw DimensionError("build_prefix: suffix embedding dim " +
                                 std::to_string(suffix_emb->cols()) + " != table dim " +
                                 std::to_string(d));
        rows += static_cast<int>(suffix_emb->rows());
    }
    Mat prefix(rows, d);
    int r = 0;
    prefix.row(r++) = table.e.row(kBos);
    if (suffix_emb)
        for (Eigen::Index i = 0; i < suffix_emb->rows(); ++i)
            prefix.row(r++) = suffix_emb->row(i);
    for (int t : query) {
        if (t < 0 || t >= table.vocab_size())
            throw DomainError("build_prefix: token " + std::to_string(t) + " out of range");
        prefix.row(r++) = table.e.row(t);
    }
    return prefix;
}

namespace {

// shared forward pass; logits for every position
Mat lm_forward_logits(const FrozenLM& lm, const Mat& x) {
    const int d = lm.dim();
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    const Eigen::Index t_len = x.rows();
    Mat q = x * lm.wq;
    Mat k = x * lm.wk;
    Mat v = x * lm.wv;
    Mat s = (q * k.transpose()) * scale;
    Mat p = Mat::Zero(t_len, t_len);
    for (Eigen::Index t = 0; t < t_len; ++t) {
        Vec row = s.row(t).head(t + 1);
        p.row(t).head(t + 1) = softmax(row).transpose();
    }
    Mat a = p * v;
    Mat u = x + a;
    Mat f = ((u * lm.wf).rowwise() + lm.bf.transpose()).array().tanh();
    Mat h = u + f;
    return h * lm.table.e.transpose();
}

}  // namespace

double lm_log_likelihood(const FrozenLM& lm, const Mat& prefix, const TokenSeq& answer) {
    if (prefix.rows() < 1) throw DomainError("lm: prefix must be non-empty");
    if (prefix.cols() != lm.dim()) throw DimensionError("lm: prefix dim != model dim");
    if (answer.empty()) throw DomainError("lm: answer must be non-empty");
    const int p0 = static_cast<int>(prefix.rows());
    const int alen = static_cast<int>(answer.size());
    Mat x(p0 + alen, lm.dim());
    x.topRows(p0) = prefix;
    for (int j = 0; j < alen; ++j) {
        if (answer[j] < 0 || answer[j] >= lm.table.vocab_size())
            throw DomainError("lm: answer token " + std::to_string(answer[j]) + " out of range");
        x.row(p0 + j) = lm.table.e.row(answer[j]);
    }
    const Mat logits = lm_forward_logits(lm, x);
    double ll = 0.0;
    for (int j = 0; j < alen; ++j) {
        const Vec row = logits.row(p0 - 1 + j).transpose();
        ll += log_softmax_pick(row, answer[j]);
    }
    return ll;
}

TokenSeq generate_greedy(const FrozenLM& lm, const Mat& prefix, int max_len) {
    if (prefix.rows() < 1) throw DomainError("lm: prefix must be non-empty");
    if (prefix.cols() != lm.dim()) throw DimensionError("lm: prefix dim != model dim");
    if (max_len < 0) throw DomainError("lm: max_len must be >= 0");
    Mat x = prefix;
    TokenSeq out;
    for (int step = 0; step < max_len; ++step) {
        const Mat logits = lm_forward_logits(lm, x);
        const Eigen::Index last = x.rows() - 1;
        int best = 0;
        double best_v = logits(last, 0);
        for (int t = 1; t < lm.table.vocab_size(); ++t) {
            if (logits(last, t) > best_v) {
                best_v = logits(last, t);
                best = t;
            }
        }
        if (best == kEos) break;
        out.push_back(best);
        x.conservativeResize(x.rows() + 1, Eigen::NoChange);
        x.row(x.rows() - 1) = lm.table.e.row(best);
    }
    return out;
}

Vec encode_image(const DualEncoder& enc, const ImageTensor& img) {
    const Mat rows = visual_encode(*enc.visual, img);
    return rows.colwise().mean().transpose();
}

Vec encode_phrase(const DualEncoder& enc, const TokenSeq& phrase) {
    if (phrase.empty()) throw DomainError("dual encoder: empty phrase");
    const int d = enc.table->dim();
    Vec mean = Vec::Zero(d);
    for (int t : phrase) {
        if (t < 0 || t >= enc.table->vocab_size())
            throw DomainError("dual encoder: token " + std::to_string(t) + " out of range");
        mean += enc.table->e.row(t).transpose();
    }
    mean /= static_cast<double>(phrase.size());
    return enc.text_proj->transpose() * mean;
}

double clip_similarity(const DualEncoder& enc, const ImageTensor& img, const TokenSeq& phrase) {
    return cosine(encode_image(enc, img), encode_phrase(enc, phrase));
}

FrozenSystem generate_system(const SystemParams& sp) {
    if (sp.vocab_size < 8) throw DomainError("generate_system: vocab size must be >= 8");
    if (sp.dim < 2) throw DomainError("generate_system: dim must be >= 2");
    const int d = sp.dim;
    const int v = sp.vocab_size;
    const int pd = sp.patch * sp.patch * sp.img_c;

    auto gauss = [](Rng& r, Eigen::Index rows, Eigen::Index cols, double sd) {
        Mat m(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = sd * r.normal();
        return m;
    };

    FrozenSystem sys;
    {
        Rng r(derive_seed(sp.seed, "table"));
        sys.lm.table.e = gauss(r, v, d, 1.0 / std::sqrt(static_cast<double>(d)));
    }
    {
        Rng r(derive_seed(sp.seed, "attn"));
        const double sd = 1.0 / std::sqrt(static_cast<double>(d));
        sys.lm.wq = gauss(r, d, d, sd);
        sys.lm.wk = gauss(r, d, d, sd);
        sys.lm.wv = gauss(r, d, d, sd);
    }
    {
        Rng r(derive_seed(sp.seed, "ffn"));
        sys.lm.wf = gauss(r, d, d, 1.0 / std::sqrt(static_cast<double>(d)));
        sys.lm.bf = gauss(r, d, 1, 0.05).col(0);
    }
    {
        Rng r(derive_seed(sp.seed, "visual"));
        sys.visual.patch = sp.patch;
        sys.visual.out_len = sp.suffix_len;
        sys.visual.img_h = sp.img_h;
        sys.visual.img_w = sp.img_w;
        sys.visual.img_c = sp.img_c;
        sys.visual.w_patch = gauss(r, pd, d, 1.2 / std::sqrt(static_cast<double>(pd)));
        sys.visual.w1 = gauss(r, d, d, 1.2 / std::sqrt(static_cast<double>(d)));
        sys.visual.w2 = gauss(r, d, d, 0.6 / std::sqrt(static_cast<double>(d)));
        // routes toward a few embedding rows: a stand-in for image-text
        // pretraining, so visual outputs live near token directions. The w2
        // route makes that alignment steerable from pixels, the b2 component
        // keeps the output distribution itself near the anchor rows.
        const int n_anchor = std::min(sp.visual_anchors, v - kNumReserved);
        Vec b2_anchor = Vec::Zero(d);
        for (int a = 0; a < n_anchor; ++a) {
            const int tok = kNumReserved + static_cast<int>(r.bounded(v - kNumReserved));
            Vec dir = sys.lm.table.e.row(tok).transpose();
            const double n = dir.norm();
            if (n == 0.0) continue;
            dir /= n;
            Vec route = gauss(r, d, 1, 1.0).col(0);
            route /= route.norm();
            sys.visual.w2 += sp.anchor_pull * (route * dir.transpose());
            b2_anchor += (0.5 * sp.anchor_pull / n_anchor) * dir;
        }
        // center the first tanh layer at a mid-gray input
        const Mat mid = Mat::Constant(1, pd, 0.5);
        sys.visual.b1 = -(mid * sys.visual.w_patch * sys.visual.w1).row(0).transpose() +
                        gauss(r, d, 1, 0.05).col(0);
        sys.visual.b2 = b2_anchor + gauss(r, d, 1, 0.05).col(0);
    }
    {
        Rng r(derive_seed(sp.seed, "textproj"));
        sys.text_proj = gauss(r, d, d, 1.2 / std::sqrt(static_cast<double>(d)));
    }
    sys.validate();
    return sys;
}

namespace {

void put_u32(std::vector<unsigned char>& out, uint32_t v) {
    out.push_back(static_cast<unsigned char>(v & 0xff));
    out.push_back(static_cast<unsigned char>((v >> 8) & 0xff));
    out.push_back(static_cast<unsigned char>((v >> 16) & 0xff));
    out.push_back(static_cast<unsigned char>((v >> 24) & 0xff));
}

void put_mat(std::vector<unsigned char>& out, const Mat& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            const double x = m(i, j);
            unsigned char b[8];
            std::memcpy(b, &x, 8);
            out.insert(out.end(), b, b + 8);
        }
}

void put_vec(std::vector<unsigned char>& out, const Vec& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double x = v(i);
        unsigned char b[8];
        std::memcpy(b, &x, 8);
        out.insert(out.end(), b, b + 8);
    }
}

class ByteReader {
public:
    ByteReader(const std::vector<unsigned char>& b) : b_(b) {}

    uint32_t u32() {
        need(4);
        uint32_t v = static_cast<uint32_t>(b_[pos_]) | (static_cast<uint32_t>(b_[pos_ + 1]) << 8) |
                     (static_cast<uint32_t>(b_[pos_ + 2]) << 16) |
                     (static_cast<uint32_t>(b_[pos_ + 3]) << 24);
        pos_ += 4;
        return v;
    }

    Mat mat(Eigen::Index rows, Eigen::Index cols) {
        need(static_cast<size_t>(rows) * static_cast<size_t>(cols) * 8);
        Mat m(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < cols; ++j) {
                double x;
                std::memcpy(&x, b_.data() + pos_, 8);
                pos_ += 8;
                m(i, j) = x;
            }
        return m;
    }

    Vec vec(Eigen::Index n) {
        Mat m = mat(n, 1);
        return m.col(0);
    }

    size_t remaining() const { return b_.size() - pos_; }

private:
    void need(size_t n) {
        if (b_.size() - pos_ < n)
            throw FormatError("model file: truncated at byte " + std::to_string(pos_));
    }
    const std::vector<unsigned char>& b_;
    size_t pos_ = 0;
};

}  // namespace

std::vector<unsigned char> serialize_system(const FrozenSystem& sys) {
    sys.validate();
    std::vector<unsigned char> out;
    out.insert(out.end(), kMagic, kMagic + 8);
    put_u32(out, static_cast<uint32_t>(sys.lm.table.vocab_size()));
    put_u32(out, static_cast<uint32_t>(sys.dim()));
    put_u32(out, static_cast<uint32_t>(sys.visual.out_len));
    put_u32(out, static_cast<uint32_t>(sys.visual.patch));
    put_u32(out, static_cast<uint32_t>(sys.visual.img_h));
    put_u32(out, static_cast<uint32_t>(sys.visual.img_w));
    put_u32(out, static_cast<uint32_t>(sys.visual.img_c));
    put_mat(out, sys.lm.table.e);
    put_mat(out, sys.lm.wq);
    put_mat(out, sys.lm.wk);
    put_mat(out, sys.lm.wv);
    put_mat(out, sys.lm.wf);
    put_vec(out, sys.lm.bf);
    put_mat(out, sys.visual.w_patch);
    put_mat(out, sys.visual.w1);
    put_vec(out, sys.visual.b1);
    put_mat(out, sys.visual.w2);
    put_vec(out, sys.visual.b2);
    put_mat(out, sys.text_proj);
    return out;
}

FrozenSystem deserialize_system(const std::vector<unsigned char>& bytes) {
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 8) != 0)
        throw FormatError("model file: bad magic (expected SFMODEL1)");
    std::vector<unsigned char> body(bytes.begin() + 8, bytes.end());
    ByteReader r(body);
    const uint32_t v = r.u32();
    const uint32_t d = r.u32();
    const uint32_t l = r.u32();
    const uint32_t patch = r.u32();
    const uint32_t ih = r.u32();
    const uint32_t iw = r.u32();
    const uint32_t ic = r.u32();
    if (v < 8 || d == 0 || l == 0 || patch == 0 || ih == 0 || iw == 0 || ic == 0)
        throw FormatError("model file: invalid header dimensions");
    FrozenSystem sys;
    sys.lm.table.e = r.mat(v, d);
    sys.lm.wq = r.mat(d, d);
    sys.lm.wk = r.mat(d, d);
    sys.lm.wv = r.mat(d, d);
    sys.lm.wf = r.mat(d, d);
    sys.lm.bf = r.vec(d);
    sys.visual.patch = static_cast<int>(patch);
    sys.visual.out_len = static_cast<int>(l);
    sys.visual.img_h = static_cast<int>(ih);
    sys.visual.img_w = static_cast<int>(iw);
    sys.visual.img_c = static_cast<int>(ic);
    sys.visual.w_patch = r.mat(static_cast<Eigen::Index>(patch) * patch * ic, d);
    sys.visual.w1 = r.mat(d, d);
    sys.visual.b1 = r.vec(d);
    sys.visual.w2 = r.mat(d, d);
    sys.visual.b2 = r.vec(d);
    sys.text_proj = r.mat(d, d);
    if (r.remaining() != 0)
        throw FormatError("model file: " + std::to_string(r.remaining()) + " trailing bytes");
    try {
        sys.validate();
    } catch (const Error& e) {
        throw FormatError(std::string("model file: invalid contents: ") + e.what());
    }
    return sys;
}

void save_system(const FrozenSystem& sys, const std::string& path) {
    const auto bytes = serialize_system(sys);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("model file: cannot write '" + path + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("model file: write failed for '" + path + "'");
}

FrozenSystem load_system(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("model file: cannot open '" + path + "'");
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    return deserialize_system(bytes);
}

std::string content_hash(const FrozenSystem& sys) {
    const auto bytes = serialize_system(sys);
    const uint64_t h = fnv1a64(bytes.data(), bytes.size());
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

}  // namespace suffixforge
