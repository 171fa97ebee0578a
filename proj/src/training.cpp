#include "dcrbm/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "dcrbm/error.hpp"

namespace dcrbm {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ValueError("learning rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ValueError("momentum must lie in [0, 1)");
  if (weight_decay < 0.0) throw ValueError("weight decay must be >= 0");
  if (cd_steps < 1) throw ValueError("cd steps must be >= 1");
  if (batch_size < 1) throw ValueError("batch size must be >= 1");
  if (epochs < 0) throw ValueError("epochs must be >= 0");
  if (history < 0) throw ValueError("history order must be >= 0");
  if (momentum_start_epoch < 0) throw ValueError("momentum start epoch must be >= 0");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ValueError("lr decay must lie in (0, 1]");
}

nlohmann::json to_json(const TrainConfig& cfg) {
  return {{"learning_rate", cfg.learning_rate},
          {"momentum", cfg.momentum},
          {"momentum_start_epoch", cfg.momentum_start_epoch},
          {"weight_decay", cfg.weight_decay},
          {"cd_steps", cfg.cd_steps},
          {"epochs", cfg.epochs},
          {"batch_size", cfg.batch_size},
          {"seed", cfg.seed},
          {"history", cfg.history},
          {"resample_labels", cfg.resample_labels},
          {"sample_visible", cfg.sample_visible},
          {"lr_decay", cfg.lr_decay}};
}

GradientEstimate GradientEstimate::zeros(const ModelDims& dims) {
  GradientEstimate g;
  g.a = Vector::Zero(dims.visible);
  g.b = Vector::Zero(dims.hidden);
  g.s = Vector::Zero(dims.labels);
  g.W = Matrix::Zero(dims.visible, dims.hidden);
  g.U = Matrix::Zero(dims.hidden, dims.labels);
  g.A = Matrix::Zero(dims.history_size(), dims.visible);
  g.B = Matrix::Zero(dims.history_size(), dims.hidden);
  return g;
}

double GradientEstimate::max_abs() const {
  double m = 0.0;
  auto upd = [&m](const auto& x) {
    if (x.size() > 0) m = std::max(m, x.cwiseAbs().maxCoeff());
  };
  upd(a);
  upd(b);
  upd(s);
  upd(W);
  upd(U);
  upd(A);
  upd(B);
  return m;
}

GradientEstimate cd_difference(const PhaseState& data, const PhaseState& recon,
                               const Eigen::Ref<const Matrix>& history) {
  const Index n = data.visible.rows();
  if (n == 0) throw ValueError("empty phase statistics");
  if (recon.visible.rows() != n || history.rows() != n || data.hidden.rows() != n ||
      recon.hidden.rows() != n) {
    throw ShapeError("phase statistics have inconsistent batch sizes");
  }
  const double inv = 1.0 / static_cast<double>(n);
  GradientEstimate g;
  const Matrix dv = data.visible - recon.visible;
  const Matrix dh = data.hidden - recon.hidden;
  g.a = dv.colwise().sum().transpose() * inv;
  g.b = dh.colwise().sum().transpose() * inv;
  g.W = (data.visible.transpose() * data.hidden - recon.visible.transpose() * recon.hidden) * inv;
  if (data.labels.size() > 0) {
    g.s = (data.labels - recon.labels).colwise().sum().transpose() * inv;
    g.U = (data.hidden.transpose() * data.labels - recon.hidden.transpose() * recon.labels) * inv;
  } else {
    g.s = Vector::Zero(0);
    g.U = Matrix::Zero(data.hidden.cols(), 0);
  }
  g.A = history.transpose() * dv * inv;
  g.B = history.transpose() * dh * inv;
  return g;
}

namespace {

void check_batch(const DcrbmParams& p, const Batch& batch) {
  if (batch.size() == 0) throw ValueError("empty batch");
  if (batch.visible.cols() != p.dims.visible) {
    throw ShapeError("batch visible width " + std::to_string(batch.visible.cols()) +
                     " does not match model " + std::to_string(p.dims.visible));
  }
  if (batch.history.cols() != p.dims.history_size() || batch.history.rows() != batch.size()) {
    throw ShapeError("batch history does not match the model's history order");
  }
  if (p.dims.discriminative()) {
    if (static_cast<Index>(batch.labels.size()) != batch.size()) {
      throw ValueError("labelled model requires a label for every sample");
    }
    for (const Index k : batch.labels) {
      if (k < 0 || k >= p.dims.labels) throw ValueError("label out of range");
    }
  }
}

Matrix one_hot_rows(const std::vector<Index>& labels, Index count) {
  Matrix y = Matrix::Zero(static_cast<Index>(labels.size()), count);
  for (std::size_t r = 0; r < labels.size(); ++r) y(static_cast<Index>(r), labels[r]) = 1.0;
  return y;
}

// History and bias contributions, fixed across the CD chain.
struct StaticTerms {
  Matrix visible;  // a + A^T hist
  Matrix hidden;   // b + B^T hist
};

StaticTerms static_terms(const DcrbmParams& p, const Batch& batch) {
  StaticTerms t;
  if (p.dims.history_size() > 0) {
    t.visible = batch.history * p.A;
    t.hidden = batch.history * p.B;
  } else {
    t.visible = Matrix::Zero(batch.size(), p.dims.visible);
    t.hidden = Matrix::Zero(batch.size(), p.dims.hidden);
  }
  t.visible.rowwise() += p.a.transpose();
  t.hidden.rowwise() += p.b.transpose();
  return t;
}

Matrix hidden_probs(const DcrbmParams& p, const StaticTerms& st, const Matrix& visible,
                    const Matrix& labels) {
  Matrix logits = st.hidden;
  logits.noalias() += visible * p.W;
  if (labels.size() > 0) logits.noalias() += labels * p.U.transpose();
  return sigmoid(logits);
}

}  // namespace

PhaseState positive_phase(const DcrbmParams& p, const Batch& batch) {
  check_batch(p, batch);
  const StaticTerms st = static_terms(p, batch);
  PhaseState data;
  data.visible = batch.visible;
  if (p.dims.discriminative()) data.labels = one_hot_rows(batch.labels, p.dims.labels);
  data.hidden = hidden_probs(p, st, data.visible, data.labels);
  return data;
}

GradientEstimate cd_step(const DcrbmParams& p, const Batch& batch, const TrainConfig& cfg,
                         Rng& rng) {
  check_batch(p, batch);
  if (cfg.cd_steps < 1) throw ValueError("cd steps must be >= 1");
  const StaticTerms st = static_terms(p, batch);
  PhaseState data;
  data.visible = batch.visible;
  if (p.dims.discriminative()) data.labels = one_hot_rows(batch.labels, p.dims.labels);
  data.hidden = hidden_probs(p, st, data.visible, data.labels);

  PhaseState recon;
  Matrix hidden_sample = sample_bernoulli(data.hidden, rng);
  double recon_error = 0.0;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Index step = 0; step < cfg.cd_steps; ++step) {
    Matrix act = st.visible;
    act.noalias() += hidden_sample * p.W.transpose();
    if (p.dims.unit == VisibleUnit::binary) {
      recon.visible = sigmoid(act);
      if (cfg.sample_visible) recon.visible = sample_bernoulli(recon.visible, rng);
    } else {
      recon.visible = std::move(act);
      if (cfg.sample_visible) {
        for (Index r = 0; r < recon.visible.rows(); ++r) {
          for (Index c = 0; c < recon.visible.cols(); ++c) recon.visible(r, c) += normal(rng);
        }
      }
    }
    if (p.dims.discriminative()) {
      if (cfg.resample_labels) {
        Matrix logits = hidden_sample * p.U;
        logits.rowwise() += p.s.transpose();
        recon.labels = Matrix::Zero(batch.size(), p.dims.labels);
        for (Index r = 0; r < batch.size(); ++r) {
          const Vector probs = softmax(logits.row(r).transpose());
          recon.labels(r, sample_categorical(probs, rng)) = 1.0;
        }
      } else {
        recon.labels = data.labels;
      }
    }
    recon.hidden = hidden_probs(p, st, recon.visible, recon.labels);
    if (step == 0) {
      recon_error = (data.visible - recon.visible).squaredNorm() /
                    static_cast<double>(data.visible.size());
    }
    if (step + 1 < cfg.cd_steps) hidden_sample = sample_bernoulli(recon.hidden, rng);
  }
  GradientEstimate g = cd_difference(data, recon, batch.history);
  g.reconstruction_error = recon_error;
  return g;
}

void apply_update(DcrbmParams& p, const GradientEstimate& g, const TrainConfig& cfg,
                  GradientEstimate& velocity) {
  if (velocity.a.size() != p.a.size()) velocity = GradientEstimate::zeros(p.dims);
  const double lr = cfg.learning_rate;
  const double m = cfg.momentum;
  const double wd = cfg.weight_decay;
  velocity.a = m * velocity.a + lr * g.a;
  velocity.b = m * velocity.b + lr * g.b;
  velocity.s = m * velocity.s + lr * g.s;
  velocity.W = m * velocity.W + lr * (g.W - wd * p.W);
  velocity.U = m * velocity.U + lr * (g.U - wd * p.U);
  velocity.A = m * velocity.A + lr * (g.A - wd * p.A);
  velocity.B = m * velocity.B + lr * (g.B - wd * p.B);
  p.a += velocity.a;
  p.b += velocity.b;
  p.s += velocity.s;
  p.W += velocity.W;
  p.U += velocity.U;
  p.A += velocity.A;
  p.B += velocity.B;
}

nlohmann::json to_json(const TrainReport& report, bool include_timing) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : report.epochs) {
    nlohmann::json rec{{"epoch", e.epoch}, {"reconstruction_error", e.reconstruction_error}};
    rec["heldout_accuracy"] = e.heldout_accuracy ? nlohmann::json(*e.heldout_accuracy) : nullptr;
    epochs.push_back(std::move(rec));
  }
  nlohmann::json doc{{"epochs", std::move(epochs)}};
  if (include_timing) doc["wall_seconds"] = report.wall_seconds;
  return doc;
}

Batch make_batch(const WindowedDataset& data, const std::vector<std::size_t>& items) {
  Batch batch;
  data.gather(items, batch.visible, batch.history);
  bool labelled = true;
  for (const std::size_t i : items) labelled = labelled && data.items()[i].label.has_value();
  if (labelled) {
    batch.labels.reserve(items.size());
    for (const std::size_t i : items) batch.labels.push_back(*data.items()[i].label);
  }
  return batch;
}

double reconstruction_error(const DcrbmParams& p, const WindowedDataset& data) {
  if (data.empty()) return 0.0;
  constexpr std::size_t kChunk = 1024;
  double total = 0.0;
  std::vector<std::size_t> items;
  for (std::size_t start = 0; start < data.size(); start += kChunk) {
    items.clear();
    for (std::size_t i = start; i < std::min(data.size(), start + kChunk); ++i) items.push_back(i);
    const Batch batch = make_batch(data, items);
    check_batch(p, batch);
    const StaticTerms st = static_terms(p, batch);
    const Matrix labels =
        p.dims.discriminative() ? one_hot_rows(batch.labels, p.dims.labels) : Matrix();
    Matrix recon = st.visible;
    recon.noalias() += hidden_probs(p, st, batch.visible, labels) * p.W.transpose();
    if (p.dims.unit == VisibleUnit::binary) recon = sigmoid(recon);
    total += (batch.visible - recon).squaredNorm();
  }
  return total / static_cast<double>(data.size() * static_cast<std::size_t>(p.dims.visible));
}

double window_accuracy(const DcrbmParams& p, const WindowedDataset& data) {
  if (!p.dims.discriminative()) throw ShapeError("accuracy requires a labelled model");
  if (data.empty()) return 0.0;
  constexpr std::size_t kChunk = 1024;
  std::size_t correct = 0;
  std::vector<std::size_t> items;
  for (std::size_t start = 0; start < data.size(); start += kChunk) {
    items.clear();
    for (std::size_t i = start; i < std::min(data.size(), start + kChunk); ++i) items.push_back(i);
    Matrix v, h;
    data.gather(items, v, h);
    const Matrix scores = dcrbm_log_posterior_batch(p, v, h);
    for (std::size_t r = 0; r < items.size(); ++r) {
      Index k = 0;
      scores.row(static_cast<Index>(r)).maxCoeff(&k);
      const auto& label = data.items()[items[r]].label;
      if (label && *label == k) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

TrainReport train(DcrbmParams& p, const WindowedDataset& data, const TrainConfig& cfg,
                  const WindowedDataset* heldout) {
  cfg.validate();
  p.validate();
  if (data.empty()) throw DataError("training dataset is empty");
  if (data.history() != p.dims.history || data.visible() != p.dims.visible) {
    throw ShapeError("dataset windows (history " + std::to_string(data.history()) + ", width " +
                     std::to_string(data.visible()) + ") do not match the model");
  }
  const auto start = std::chrono::steady_clock::now();
  TrainReport report;
  Rng rng = substream(cfg.seed, "cd");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  GradientEstimate velocity = GradientEstimate::zeros(p.dims);
  const auto batch_size = static_cast<std::size_t>(cfg.batch_size);
  for (Index epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    TrainConfig step_cfg = cfg;
    if (epoch < cfg.momentum_start_epoch) step_cfg.momentum = 0.0;
    if (cfg.epochs > 1) {
      step_cfg.learning_rate *=
          std::pow(cfg.lr_decay, static_cast<double>(epoch) / static_cast<double>(cfg.epochs - 1));
    }
    std::vector<std::size_t> items;
    for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
      const std::size_t end = std::min(order.size(), begin + batch_size);
      items.assign(order.begin() + static_cast<std::ptrdiff_t>(begin),
                   order.begin() + static_cast<std::ptrdiff_t>(end));
      const Batch batch = make_batch(data, items);
      const GradientEstimate g = cd_step(p, batch, step_cfg, rng);
      apply_update(p, g, step_cfg, velocity);
    }
    EpochRecord rec{epoch, reconstruction_error(p, data), std::nullopt};
    if (heldout != nullptr && p.dims.discriminative() && !heldout->empty()) {
      rec.heldout_accuracy = window_accuracy(p, *heldout);
    }
    report.epochs.push_back(rec);
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

// --- exact oracles ---------------------------------------------------------

namespace {

void require_tiny_binary(const RbmParams& p) {
  if (p.a.size() + p.b.size() > kMaxEnumeratedUnits) {
    throw ShapeError("exact enumeration limited to " + std::to_string(kMaxEnumeratedUnits) +
                     " units in total");
  }
  if (p.W.rows() != p.a.size() || p.W.cols() != p.b.size()) throw ShapeError("W shape mismatch");
}

void require_binary_data(const Eigen::Ref<const Matrix>& data, Index visible) {
  if (data.cols() != visible) throw ShapeError("data width does not match the model");
  if (data.rows() == 0) throw ValueError("empty dataset");
  if (((data.array() != 0.0) && (data.array() != 1.0)).any()) {
    throw ValueError("exact likelihood requires binary data");
  }
}

/// log sum_h exp(-E(v, h)) by enumeration over h.
double log_marginal(const RbmParams& p, const Vector& v) {
  const Index nh = p.b.size();
  Vector terms(Index{1} << nh);
  for (Index c = 0; c < terms.size(); ++c) {
    terms[c] = -rbm_energy(v, hidden_config(static_cast<std::uint64_t>(c), nh), p,
                           VisibleUnit::binary);
  }
  return log_sum_exp(terms);
}

}  // namespace

double log_partition(const RbmParams& p) {
  require_tiny_binary(p);
  const Index nv = p.a.size();
  const Index nh = p.b.size();
  Vector terms(Index{1} << (nv + nh));
  for (Index vc = 0; vc < (Index{1} << nv); ++vc) {
    const Vector v = hidden_config(static_cast<std::uint64_t>(vc), nv);
    for (Index hc = 0; hc < (Index{1} << nh); ++hc) {
      terms[(vc << nh) | hc] = -rbm_energy(v, hidden_config(static_cast<std::uint64_t>(hc), nh), p,
                                           VisibleUnit::binary);
    }
  }
  return log_sum_exp(terms);
}

double exact_loglik(const RbmParams& p, const Eigen::Ref<const Matrix>& data) {
  require_tiny_binary(p);
  require_binary_data(data, p.a.size());
  const double log_z = log_partition(p);
  double total = 0.0;
  for (Index r = 0; r < data.rows(); ++r) total += log_marginal(p, data.row(r).transpose()) - log_z;
  return total / static_cast<double>(data.rows());
}

GradientEstimate exact_gradient(const RbmParams& p, const Eigen::Ref<const Matrix>& data) {
  require_tiny_binary(p);
  require_binary_data(data, p.a.size());
  const Index nv = p.a.size();
  const Index nh = p.b.size();
  GradientEstimate g;
  g.a = Vector::Zero(nv);
  g.b = Vector::Zero(nh);
  g.W = Matrix::Zero(nv, nh);
  const double inv_n = 1.0 / static_cast<double>(data.rows());
  for (Index r = 0; r < data.rows(); ++r) {
    const Vector v = data.row(r).transpose();
    const Vector ph = rbm_h_given_v(v, p);
    g.a += v * inv_n;
    g.b += ph * inv_n;
    g.W += v * ph.transpose() * inv_n;
  }
  const double log_z = log_partition(p);
  for (Index vc = 0; vc < (Index{1} << nv); ++vc) {
    const Vector v = hidden_config(static_cast<std::uint64_t>(vc), nv);
    for (Index hc = 0; hc < (Index{1} << nh); ++hc) {
      const Vector h = hidden_config(static_cast<std::uint64_t>(hc), nh);
      const double prob = std::exp(-rbm_energy(v, h, p, VisibleUnit::binary) - log_z);
      g.a -= prob * v;
      g.b -= prob * h;
      g.W -= prob * v * h.transpose();
    }
  }
  return g;
}

double grad_check(const RbmParams& p, const Eigen::Ref<const Matrix>& data, double eps) {
  if (!(eps > 0.0)) throw ValueError("finite-difference step must be > 0");
  const GradientEstimate analytic = exact_gradient(p, data);
  RbmParams q = p;
  double worst = 0.0;
  auto probe = [&](double& param, double exact) {
    const double saved = param;
    param = saved + eps;
    const double up = exact_loglik(q, data);
    param = saved - eps;
    const double down = exact_loglik(q, data);
    param = saved;
    const double numeric = (up - down) / (2.0 * eps);
    worst = std::max(worst, std::abs(exact - numeric) / std::max(1.0, std::abs(numeric)));
  };
  for (Index i = 0; i < q.a.size(); ++i) probe(q.a[i], analytic.a[i]);
  for (Index j = 0; j < q.b.size(); ++j) probe(q.b[j], analytic.b[j]);
  for (Index i = 0; i < q.W.rows(); ++i) {
    for (Index j = 0; j < q.W.cols(); ++j) probe(q.W(i, j), analytic.W(i, j));
  }
  return worst;
}

}  // namespace dcrbm
