#include <doctest.h>

#include <cmath>
#include <random>

#include "dcrbm/error.hpp"
#include "dcrbm/models.hpp"

using namespace dcrbm;

namespace {

DcrbmParams random_params(const ModelDims& dims, double scale, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  DcrbmParams p = DcrbmParams::zeros(dims);
  auto fill = [&](auto& m) {
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  };
  fill(p.a), fill(p.b), fill(p.W);
  if (dims.discriminative()) fill(p.s), fill(p.U);
  if (dims.conditional()) fill(p.A), fill(p.B);
  return p;
}

Vector random_vector(Index n, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

Vector bits(std::uint64_t code, Index n) {
  Vector h(n);
  for (Index j = 0; j < n; ++j) h[j] = double((code >> j) & 1U);
  return h;
}

// p(y | v, hist) by summing exp(-E) over every hidden configuration, written
// out term by term from the energy definition.
Vector brute_force_posterior(const DcrbmParams& p, const Vector& v, const Vector& hist_flat) {
  const Index K = p.dims.labels, H = p.dims.hidden;
  Vector c = p.a, d = p.b;
  if (hist_flat.size() > 0) {
    c += p.A.transpose() * hist_flat;
    d += p.B.transpose() * hist_flat;
  }
  Vector log_w(K);
  for (Index k = 0; k < K; ++k) {
    std::vector<double> terms;
    for (std::uint64_t code = 0; code < (1ULL << H); ++code) {
      const Vector h = bits(code, H);
      double e = 0.5 * (c - v).squaredNorm() - p.s[k];
      for (Index j = 0; j < H; ++j) e -= h[j] * (d[j] + p.U(j, k));
      e -= v.dot(p.W * h);
      terms.push_back(-e);
    }
    const double m = *std::max_element(terms.begin(), terms.end());
    double acc = 0.0;
    for (const double t : terms) acc += std::exp(t - m);
    log_w[k] = m + std::log(acc);
  }
  const double m = log_w.maxCoeff();
  Vector out = (log_w.array() - m).exp();
  return out / out.sum();
}

}  // namespace

TEST_CASE("binary RBM energy by hand") {
  RbmParams p{Vector(2), Vector(1), Matrix(2, 1)};
  p.a << 0.5, -1.0;
  p.b << 2.0;
  p.W << 1.0, 3.0;
  Vector v(2), h(1);
  v << 1, 1;
  h << 1;
  // -(0.5 - 1) - 2 - (1 + 3)
  CHECK(rbm_energy(v, h, p, VisibleUnit::binary) == doctest::Approx(-5.5));
  h << 0;
  CHECK(rbm_energy(v, h, p, VisibleUnit::binary) == doctest::Approx(0.5));
}

TEST_CASE("Gaussian energy has a positive quadratic term") {
  RbmParams p{Vector(1), Vector(1), Matrix(1, 1)};
  p.a << 1.0;
  p.b << 0.0;
  p.W << 0.0;
  Vector v(1), h(1);
  v << 3.0;
  h << 0.0;
  CHECK(rbm_energy(v, h, p, VisibleUnit::gaussian) == doctest::Approx(2.0));
}

TEST_CASE("energy rejects non-binary hidden states") {
  RbmParams p{Vector::Zero(2), Vector::Zero(2), Matrix::Zero(2, 2)};
  Vector v = Vector::Zero(2), h(2);
  h << 0.5, 1.0;
  CHECK_THROWS_AS(rbm_energy(v, h, p, VisibleUnit::binary), ValueError);
  CHECK_THROWS_AS(rbm_energy(Vector::Zero(3), Vector::Zero(2), p, VisibleUnit::binary), ShapeError);
}

TEST_CASE("RBM conditionals match ratios of Boltzmann weights") {
  const ModelDims dims{3, 2, 0, 0, VisibleUnit::binary};
  const DcrbmParams full = random_params(dims, 1.0, 3);
  const RbmParams& p = full;
  Vector v(3);
  v << 1, 0, 1;
  const Vector ph = rbm_h_given_v(v, p);
  for (Index j = 0; j < 2; ++j) {
    double on = 0.0, total = 0.0;
    for (std::uint64_t code = 0; code < 4; ++code) {
      const Vector h = bits(code, 2);
      const double w = std::exp(-rbm_energy(v, h, p, VisibleUnit::binary));
      total += w;
      if (h[j] == 1.0) on += w;
    }
    CHECK(ph[j] == doctest::Approx(on / total).epsilon(1e-12));
  }
  Vector h(2);
  h << 1, 0;
  const Vector pv = rbm_v_given_h(h, p, VisibleUnit::binary);
  for (Index i = 0; i < 3; ++i) {
    Vector v1 = v, v0 = v;
    v1[i] = 1;
    v0[i] = 0;
    const double w1 = std::exp(-rbm_energy(v1, h, p, VisibleUnit::binary));
    const double w0 = std::exp(-rbm_energy(v0, h, p, VisibleUnit::binary));
    CHECK(pv[i] == doctest::Approx(w1 / (w0 + w1)).epsilon(1e-12));
  }
  const Vector mean = rbm_v_given_h(h, p, VisibleUnit::gaussian);
  CHECK((mean - (p.a + p.W * h)).norm() < 1e-15);
}

TEST_CASE("y_given_h is a softmax over s + U^T h") {
  LabelParams p{Vector(3), Matrix(2, 3)};
  p.s << 0.1, -0.2, 0.3;
  p.U << 1, 2, 3, -1, 0, 1;
  Vector h(2);
  h << 1, 1;
  const LabelDist y = y_given_h(h, p);
  const double z = std::exp(0.1) + std::exp(1.8) + std::exp(4.3);
  CHECK(y.probs[0] == doctest::Approx(std::exp(0.1) / z));
  CHECK(y.probs[2] == doctest::Approx(std::exp(4.3) / z));
  CHECK(y.argmax() == 2);
}

TEST_CASE("one-hot helpers") {
  CHECK(label_index(one_hot(2, 4)) == 2);
  Vector bad(3);
  bad << 1, 1, 0;
  CHECK_THROWS_AS(label_index(bad), ValueError);
  CHECK_THROWS(one_hot(4, 4));
}

TEST_CASE("history is flattened oldest frame first") {
  RowMatrix frames(2, 2);
  frames << 1, 2, 3, 4;
  HistoryWindow w = HistoryWindow::from_frames(frames);
  CHECK(w.frames() == 2);
  CHECK(w.flat()[0] == 1);
  CHECK(w.flat()[3] == 4);
  Vector next(2);
  next << 5, 6;
  w.push(next);
  CHECK(w.frame(0)[0] == 3);
  CHECK(w.frame(1)[1] == 6);
}

TEST_CASE("dynamic biases by hand") {
  const ModelDims dims{1, 1, 2, 2, VisibleUnit::gaussian};
  DcrbmParams p = DcrbmParams::zeros(dims);
  p.a << 0.5;
  p.b << -1.0;
  p.A << 2.0, 3.0;  // weights on oldest, newest
  p.B << 1.0, -1.0;
  p.U << 0.25, 0.75;
  Vector flat(2);
  flat << 10, 100;
  const HistoryWindow hist(flat, 1);
  const DynamicBiases none = dynamic_biases(p, hist, std::nullopt);
  CHECK(none.c[0] == doctest::Approx(0.5 + 20 + 300));
  CHECK(none.d[0] == doctest::Approx(-1 + 10 - 100));
  const DynamicBiases with = dynamic_biases(p, hist, Index{1});
  CHECK(with.d[0] == doctest::Approx(-91 + 0.75));
  CHECK(with.c[0] == doctest::Approx(none.c[0]));
}

TEST_CASE("zero history reduces the CRBM to an RBM") {
  const ModelDims dims{3, 4, 0, 2, VisibleUnit::gaussian};
  const DcrbmParams p = random_params(dims, 0.5, 9);
  const HistoryWindow zeros(2, 3);
  const Vector v = random_vector(3, 10);
  const CrbmConditionals cond = crbm_conditionals(v, Vector::Zero(4), zeros, p);
  CHECK((cond.hidden_probs - rbm_h_given_v(v, p)).norm() < 1e-15);
  CHECK((cond.visible_means - p.a).norm() < 1e-15);
}

TEST_CASE("DCRBM posterior equals brute-force enumeration") {
  for (std::uint64_t trial = 0; trial < 12; ++trial) {
    const Index K = 2 + Index(trial % 2), n = trial % 3 == 0 ? 0 : 2;
    const ModelDims dims{3, 2 + Index(trial % 7), K, n, VisibleUnit::gaussian};
    const DcrbmParams p = random_params(dims, 0.8, 100 + trial);
    const Vector v = random_vector(3, 200 + trial);
    const Vector flat = random_vector(dims.history_size(), 300 + trial);
    const LabelDist closed = dcrbm_posterior(v, HistoryWindow(flat, 3), p);
    const Vector oracle = brute_force_posterior(p, v, flat);
    CHECK((closed.probs - oracle).cwiseAbs().maxCoeff() < 1e-12);
    const Matrix batch = dcrbm_log_posterior_batch(p, v.transpose(), flat.transpose());
    CHECK((softmax(batch.row(0).transpose()) - oracle).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("hidden conditionals match the enumerated joint table") {
  const ModelDims dims{2, 3, 3, 2, VisibleUnit::gaussian};
  const DcrbmParams p = random_params(dims, 1.0, 42);
  const Vector v = random_vector(2, 1);
  const HistoryWindow hist(random_vector(4, 2), 2);
  const JointTable table = enumerate_joint(p, v, hist);
  CHECK(table.labels() == 3);
  CHECK(table.hidden() == 3);
  CHECK(table.label_marginal().probs.sum() == doctest::Approx(1.0).epsilon(1e-14));
  for (Index k = 0; k < 3; ++k) {
    CHECK((table.hidden_marginal(k) - dcrbm_h_given_vy(v, k, hist, p)).cwiseAbs().maxCoeff() <
          1e-12);
  }
  const Vector post = dcrbm_posterior(v, hist, p).probs;
  Vector mixed = Vector::Zero(3);
  for (Index k = 0; k < 3; ++k) mixed += post[k] * dcrbm_h_given_vy(v, k, hist, p);
  CHECK((table.hidden_marginal() - mixed).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("Gaussian DCRBM density integrates to one") {
  // Dv = 1, so the visible integral can be done by quadrature and compared
  // with the closed-form Gaussian integral over v for every (y, h).
  const ModelDims dims{1, 2, 2, 1, VisibleUnit::gaussian};
  const DcrbmParams p = random_params(dims, 0.6, 77);
  const HistoryWindow hist(random_vector(1, 78), 1);
  const Vector c = p.a + p.A.transpose() * hist.flat();
  double z_closed = 0.0;
  for (Index k = 0; k < 2; ++k) {
    for (std::uint64_t code = 0; code < 4; ++code) {
      const Vector h = bits(code, 2);
      const Vector d = p.b + p.U.col(k) + p.B.transpose() * hist.flat();
      const double wh = (p.W * h)[0];
      z_closed += std::sqrt(2 * M_PI) * std::exp(p.s[k] + d.dot(h) + c[0] * wh + 0.5 * wh * wh);
    }
  }
  // Composite Simpson over [-30, 30].
  const int steps = 20000;
  const double lo = -30.0, hi = 30.0, step = (hi - lo) / steps;
  double integral = 0.0;
  double mean = 0.0;
  for (int i = 0; i <= steps; ++i) {
    Vector v(1);
    v << lo + i * step;
    double density = 0.0;
    for (Index k = 0; k < 2; ++k) {
      for (std::uint64_t code = 0; code < 4; ++code) {
        density += std::exp(-dcrbm_energy(one_hot(k, 2), v, bits(code, 2), hist, p));
      }
    }
    const double weight = (i == 0 || i == steps) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    integral += weight * density;
    mean += weight * density * v[0];
  }
  integral *= step / 3.0;
  mean *= step / 3.0;
  CHECK(integral / z_closed == doctest::Approx(1.0).epsilon(1e-9));
  // E[v] under the model = sum_{y,h} p(y,h) (c + W h).
  double expected_mean = 0.0;
  for (Index k = 0; k < 2; ++k) {
    for (std::uint64_t code = 0; code < 4; ++code) {
      const Vector h = bits(code, 2);
      const Vector d = p.b + p.U.col(k) + p.B.transpose() * hist.flat();
      const double wh = (p.W * h)[0];
      const double w =
          std::sqrt(2 * M_PI) * std::exp(p.s[k] + d.dot(h) + c[0] * wh + 0.5 * wh * wh);
      expected_mean += w / z_closed * (c[0] + wh);
    }
  }
  CHECK(mean / integral == doctest::Approx(expected_mean).epsilon(1e-9));
}

TEST_CASE("DRBM energy adds the label terms once") {
  DrbmParams p;
  p.a = Vector::Zero(1);
  p.b = Vector::Zero(1);
  p.W = Matrix::Zero(1, 1);
  p.s = Vector(2);
  p.s << 0.5, 1.5;
  p.U = Matrix(1, 2);
  p.U << 2.0, 4.0;
  Vector v = Vector::Zero(1), h = Vector::Ones(1);
  CHECK(drbm_energy(one_hot(1, 2), v, h, p) == doctest::Approx(-5.5));
}

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS((ModelDims{0, 2, 0, 0, VisibleUnit::binary}.validate()), ShapeError);
  CHECK_THROWS_AS((ModelDims{2, 2, 1, 0, VisibleUnit::binary}.validate()), ShapeError);
  DcrbmParams p = DcrbmParams::zeros({2, 3, 2, 1, VisibleUnit::gaussian});
  p.validate();
  p.W = Matrix::Zero(3, 2);
  CHECK_THROWS_AS(p.validate(), ShapeError);
  p = DcrbmParams::zeros({2, 3, 2, 1, VisibleUnit::gaussian});
  p.a[0] = std::nan("");
  CHECK_THROWS_AS(p.validate(), ValueError);
}

TEST_CASE("initialization is seeded and small") {
  const ModelDims dims{4, 5, 3, 2, VisibleUnit::gaussian};
  Rng r1(5), r2(5);
  const DcrbmParams p1 = DcrbmParams::initialize(dims, r1);
  const DcrbmParams p2 = DcrbmParams::initialize(dims, r2);
  CHECK(p1.W == p2.W);
  CHECK(p1.B == p2.B);
  CHECK(p1.a.isZero());
  CHECK(p1.W.cwiseAbs().maxCoeff() < 0.1);
}

TEST_CASE("enumeration is limited to small hidden layers") {
  const DcrbmParams p = DcrbmParams::zeros({1, kMaxEnumeratedHidden + 1, 2, 0, VisibleUnit::gaussian});
  CHECK_THROWS_AS(enumerate_joint(p, Vector::Zero(1), HistoryWindow(0, 1)), ShapeError);
}
