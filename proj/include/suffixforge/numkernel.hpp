#pragma once

#include <Eigen/Dense>
#include <functional>
#include <span>
#include <vector>

#include "suffixforge/errors.hpp"

namespace suffixforge {

// All numeric state is dense, row-major, double precision.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;
using TokenSeq = std::vector<int>;

// one tokenized (query, answer) pair used by likelihood objectives
struct TokenPair {
    TokenSeq query;
    TokenSeq answer;
};

struct GradResult {
    double value = 0.0;
    Mat grad;  // same shape as the differentiated input
};

void assert_finite(const Mat& m, const char* what);
void assert_finite(const Vec& v, const char* what);

// Plain product with a fixed accumulation order (row-major triple loop, no
// reassociation), so results are reproducible bit-for-bit.
Mat matmul(const Mat& a, const Mat& b);

// Numerically shifted softmax; sums to 1 within 1e-12.
Vec softmax(const Vec& logits);

// log(softmax(logits)[index]) without materialising the softmax; always <= 0.
double log_softmax_pick(const Vec& logits, int index);

// Central finite differences, h per coordinate; the oracle against which all
// analytic gradients are checked.
Mat finite_diff_grad(const std::function<double(const Mat&)>& f, const Mat& x, double h);

// cosine of two vectors; bitwise-identical inputs give exactly 1.0
double cosine(const Vec& a, const Vec& b);

struct FrozenSystem;   // models.hpp
struct ImageTensor;    // models.hpp

// Teacher-forced total log-likelihood of the pairs' answers given the image,
// plus its analytic gradient with respect to every pixel (column vector of
// length h*w*c).
GradResult grad_objective(const FrozenSystem& sys, std::span<const TokenPair> pairs,
                          const ImageTensor& img);

}  // namespace suffixforge
