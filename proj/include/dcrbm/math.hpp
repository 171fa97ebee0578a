#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include <Eigen/Dense>

namespace dcrbm {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Rng = std::mt19937_64;

/// Logistic function, evaluated without overflow for any finite input.
double sigmoid(double x);

/// log(1 + exp(x)) without overflow.
double softplus(double x);

/// log(sum(exp(x))) with max-subtraction. Empty input gives -inf.
double log_sum_exp(const Eigen::Ref<const Vector>& x);

/// Softmax with max-subtraction.
Vector softmax(const Eigen::Ref<const Vector>& logits);

Matrix sigmoid(const Eigen::Ref<const Matrix>& x);

/// Independent stream derived from a user seed and a purpose name
/// ("data", "init", "cd", "generation", ...). `index` separates jobs that
/// share a purpose.
Rng substream(std::uint64_t seed, std::string_view name, std::uint64_t index = 0);

/// Bernoulli draws with the given success probabilities.
Matrix sample_bernoulli(const Eigen::Ref<const Matrix>& probs, Rng& rng);

/// Draws an index from a discrete distribution.
Index sample_categorical(const Eigen::Ref<const Vector>& probs, Rng& rng);

}  // namespace dcrbm
