#include "dcrbm/math.hpp"

#include <cmath>
#include <limits>

namespace dcrbm {

double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) {
  if (x > 0.0) {
    return x + std::log1p(std::exp(-x));
  }
  return std::log1p(std::exp(x));
}

double log_sum_exp(const Eigen::Ref<const Vector>& x) {
  if (x.size() == 0) {
    return -std::numeric_limits<double>::infinity();
  }
  const double m = x.maxCoeff();
  if (!std::isfinite(m)) {
    return m;
  }
  return m + std::log((x.array() - m).exp().sum());
}

Vector softmax(const Eigen::Ref<const Vector>& logits) {
  const double m = logits.maxCoeff();
  Vector e = (logits.array() - m).exp().matrix();
  return e / e.sum();
}

Matrix sigmoid(const Eigen::Ref<const Matrix>& x) {
  return x.unaryExpr([](double v) { return sigmoid(v); });
}

Rng substream(std::uint64_t seed, std::string_view name, std::uint64_t index) {
  // FNV-1a over the purpose name.
  std::uint64_t h = 1469598103934665603ULL;
  for (const char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return Rng(seq);
}

Matrix sample_bernoulli(const Eigen::Ref<const Matrix>& probs, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Matrix out(probs.rows(), probs.cols());
  // Fixed traversal order keeps draws reproducible regardless of storage order.
  for (Index r = 0; r < probs.rows(); ++r) {
    for (Index c = 0; c < probs.cols(); ++c) {
      out(r, c) = unif(rng) < probs(r, c) ? 1.0 : 0.0;
    }
  }
  return out;
}

Index sample_categorical(const Eigen::Ref<const Vector>& probs, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng) * probs.sum();
  double acc = 0.0;
  for (Index k = 0; k < probs.size(); ++k) {
    acc += probs[k];
    if (u < acc) {
      return k;
    }
  }
  return probs.size() - 1;
}

}  // namespace dcrbm
