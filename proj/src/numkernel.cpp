#include "suffixforge/numkernel.hpp"

#include <cmath>
#include <string>

namespace suffixforge {

void assert_finite(const Mat& m, const char* what) {
    if (!m.allFinite())
        throw InternalError(std::string(what) + ": non-finite value produced");
}

void assert_finite(const Vec& v, const char* what) {
    if (!v.allFinite())
        throw InternalError(std::string(what) + ": non-finite value produced");
}

Mat matmul(const Mat& a, const Mat& b) {
    if (a.cols() != b.rows())
        throw DimensionError("matmul: shape mismatch " + std::to_string(a.rows()) + "x" +
                             std::to_string(a.cols()) + " * " + std::to_string(b.rows()) + "x" +
                             std::to_string(b.cols()));
    Mat out(a.rows(), b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < b.cols(); ++j) {
            double acc = 0.0;
            for (Eigen::Index k = 0; k < a.cols(); ++k) acc += a(i, k) * b(k, j);
            out(i, j) = acc;
        }
    }
    assert_finite(out, "matmul");
    return out;
}

Vec softmax(const Vec& logits) {
    if (logits.size() == 0) throw DomainError("softmax: empty input");
    const double m = logits.maxCoeff();
    Vec e = (logits.array() - m).exp();
    const double s = e.sum();
    e /= s;
    assert_finite(e, "softmax");
    return e;
}

double log_softmax_pick(const Vec& logits, int index) {
    if (logits.size() == 0) throw DomainError("log_softmax_pick: empty input");
    if (index < 0 || index >= logits.size())
        throw DomainError("log_softmax_pick: index " + std::to_string(index) +
                          " out of range for " + std::to_string(logits.size()) + " logits");
    const double m = logits.maxCoeff();
    const double lse = std::log((logits.array() - m).exp().sum());
    const double v = logits(index) - m - lse;
    if (!std::isfinite(v)) throw InternalError("log_softmax_pick: non-finite value produced");
    return v;
}

Mat finite_diff_grad(const std::function<double(const Mat&)>& f, const Mat& x, double h) {
    if (h <= 0.0) throw DomainError("finite_diff_grad: step must be positive");
    Mat g(x.rows(), x.cols());
    Mat probe = x;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            const double orig = probe(i, j);
            probe(i, j) = orig + h;
            const double fp = f(probe);
            probe(i, j) = orig - h;
            const double fm = f(probe);
            probe(i, j) = orig;
            g(i, j) = (fp - fm) / (2.0 * h);
        }
    }
    assert_finite(g, "finite_diff_grad");
    return g;
}

double cosine(const Vec& a, const Vec& b) {
    if (a.size() != b.size())
        throw DimensionError("cosine: length mismatch " + std::to_string(a.size()) + " vs " +
                             std::to_string(b.size()));
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0)
        throw DegenerateEncodingError("cosine: zero-norm vector has no direction");
    if (a == b) return 1.0;  // identical vectors, exactly
    return a.dot(b) / (na * nb);
}

}  // namespace suffixforge
