#include <cmath>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "suffixforge/numkernel.hpp"
#include "suffixforge/rng.hpp"

using namespace suffixforge;

namespace {

Mat random_mat(Rng& rng, Eigen::Index r, Eigen::Index c, double sd = 1.0) {
    Mat m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = sd * rng.normal();
    return m;
}

Vec random_vec(Rng& rng, Eigen::Index n, double sd = 1.0) {
    Vec v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = sd * rng.normal();
    return v;
}

}  // namespace

TEST_CASE("matmul matches the scalar-loop reference bit for bit") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::Index m = 1 + static_cast<Eigen::Index>(rng.bounded(7));
        const Eigen::Index k = 1 + static_cast<Eigen::Index>(rng.bounded(9));
        const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng.bounded(6));
        const Mat a = random_mat(rng, m, k);
        const Mat b = random_mat(rng, k, n);
        const Mat got = matmul(a, b);
        const Mat want = oracles::naive_matmul(a, b);
        REQUIRE(got.rows() == want.rows());
        REQUIRE(got.cols() == want.cols());
        for (Eigen::Index i = 0; i < m; ++i)
            for (Eigen::Index j = 0; j < n; ++j) CHECK(got(i, j) == want(i, j));
    }
}

TEST_CASE("matmul rejects mismatched inner dimensions") {
    Rng rng(3);
    const Mat a = random_mat(rng, 2, 3);
    const Mat b = random_mat(rng, 4, 2);
    CHECK_THROWS_AS(matmul(a, b), DimensionError);
}

TEST_CASE("softmax normalizes, preserves order, and matches the reference") {
    Rng rng(21);
    for (int trial = 0; trial < 10; ++trial) {
        const Vec v = random_vec(rng, 2 + static_cast<Eigen::Index>(rng.bounded(9)), 3.0);
        const Vec got = softmax(v);
        const Vec want = oracles::naive_softmax(v);
        CHECK(std::abs(got.sum() - 1.0) < 1e-12);
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            CHECK(got(i) > 0.0);
            CHECK(got(i) == doctest::Approx(want(i)).epsilon(1e-14));
        }
    }
}

TEST_CASE("softmax survives large logits and is shift invariant") {
    Vec v(3);
    v << 1000.0, 999.0, -1000.0;
    const Vec p = softmax(v);
    CHECK(std::isfinite(p.sum()));
    CHECK(p(0) > p(1));
    CHECK(p(2) < 1e-300);

    Rng rng(5);
    const Vec base = random_vec(rng, 6);
    const Vec shifted = base.array() + 123.25;
    const Vec a = softmax(base);
    const Vec b = softmax(shifted);
    for (Eigen::Index i = 0; i < base.size(); ++i)
        CHECK(a(i) == doctest::Approx(b(i)).epsilon(1e-12));
}

TEST_CASE("log_softmax_pick equals the log of the softmax entry") {
    Rng rng(31);
    for (int trial = 0; trial < 10; ++trial) {
        const Vec v = random_vec(rng, 5, 4.0);
        for (int i = 0; i < 5; ++i) {
            const double got = log_softmax_pick(v, i);
            CHECK(got <= 0.0);
            CHECK(got == doctest::Approx(v(i) - oracles::naive_logsumexp(v)).epsilon(1e-13));
        }
    }
    const Vec v = random_vec(rng, 4);
    CHECK_THROWS_AS(log_softmax_pick(v, -1), DomainError);
    CHECK_THROWS_AS(log_softmax_pick(v, 4), DomainError);
}

TEST_CASE("finite differences recover the gradient of a quadratic") {
    Rng rng(41);
    const Mat x = random_mat(rng, 3, 4);
    const auto f = [](const Mat& m) { return m.array().square().sum(); };
    const Mat g = finite_diff_grad(f, x, 1e-4);
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = 0; j < x.cols(); ++j)
            CHECK(g(i, j) == doctest::Approx(2.0 * x(i, j)).epsilon(1e-6));
}

TEST_CASE("cosine handles the standard cases") {
    Vec a(3), b(3);
    a << 1.0, 0.0, 0.0;
    b << 0.0, 2.0, 0.0;
    CHECK(cosine(a, b) == doctest::Approx(0.0));
    CHECK(cosine(a, a) == 1.0);  // bitwise-identical inputs, exactly one
    Vec c = -3.0 * a;
    CHECK(cosine(a, c) == doctest::Approx(-1.0));
    Vec scaled = 7.5 * b;
    CHECK(cosine(b, scaled) == doctest::Approx(1.0));
    const Vec zero = Vec::Zero(3);
    CHECK_THROWS_AS(cosine(a, zero), DegenerateEncodingError);
}

TEST_CASE("assert_finite rejects NaN and infinity") {
    Mat m = Mat::Zero(2, 2);
    CHECK_NOTHROW(assert_finite(m, "test"));
    m(1, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(assert_finite(m, "test"), InternalError);
    m(1, 1) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(assert_finite(m, "test"), InternalError);
}

TEST_CASE("rng streams are deterministic and tag-separated") {
    Rng a(99), b(99);
    for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
    CHECK(derive_seed(1, "attack") != derive_seed(1, "candidates"));
    CHECK(derive_seed(1, "attack") != derive_seed(2, "attack"));
    CHECK(derive_seed(7, "x") == derive_seed(7, "x"));
}

TEST_CASE("rng bounded draws stay in range and look uniform") {
    Rng rng(123);
    std::vector<int> counts(4, 0);
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        const uint64_t v = rng.bounded(4);
        REQUIRE(v < 4);
        ++counts[static_cast<size_t>(v)];
    }
    // 3 sigma around n/4 for a binomial with p = 1/4
    const double sigma = std::sqrt(n * 0.25 * 0.75);
    for (int c : counts) CHECK(std::abs(c - n / 4) < 3.0 * sigma);
    CHECK_THROWS_AS(rng.bounded(0), DomainError);
}

TEST_CASE("rng normal has sane first moments") {
    Rng rng(7);
    double sum = 0.0, sq = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        sum += x;
        sq += x * x;
    }
    CHECK(std::abs(sum / n) < 0.05);
    CHECK(std::abs(sq / n - 1.0) < 0.05);
}

TEST_CASE("rng shuffle permutes without losing elements") {
    Rng rng(55);
    std::vector<int> v(20);
    for (int i = 0; i < 20; ++i) v[static_cast<size_t>(i)] = i;
    const std::vector<int> orig = v;
    rng.shuffle(v);
    CHECK(v != orig);  // 1/20! chance of false alarm
    std::set<int> seen(v.begin(), v.end());
    CHECK(seen.size() == 20);
}
