#include "dcrbm/models.hpp"

#include <cmath>
#include <sstream>

#include "dcrbm/error.hpp"

namespace dcrbm {
namespace {

std::string shape_str(Index r, Index c) {
  std::ostringstream os;
  os << r << "x" << c;
  return os.str();
}

void require_size(const char* what, Index got, Index want) {
  if (got != want) {
    throw ShapeError(std::string(what) + ": expected length " + std::to_string(want) + ", got " +
                     std::to_string(got));
  }
}

void require_shape(const char* what, const Matrix& m, Index rows, Index cols) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ShapeError(std::string(what) + ": expected " + shape_str(rows, cols) + ", got " +
                     shape_str(m.rows(), m.cols()));
  }
}

void require_binary(const char* what, const Eigen::Ref<const Vector>& x) {
  for (Index i = 0; i < x.size(); ++i) {
    if (x[i] != 0.0 && x[i] != 1.0) {
      throw ValueError(std::string(what) + " must be binary");
    }
  }
}

void require_rbm_shapes(const RbmParams& p, Index visible, Index hidden) {
  require_size("visible", visible, p.a.size());
  require_size("hidden", hidden, p.b.size());
  require_shape("W", p.W, p.a.size(), p.b.size());
}

void require_history(const HistoryWindow& hist, const HistoryParams& p, Index visible) {
  const Index expected = p.A.rows();
  if (hist.flat().size() != expected || (expected > 0 && hist.visible() != visible)) {
    throw ShapeError("history window: expected " + std::to_string(expected) +
                     " values, got " + std::to_string(hist.flat().size()));
  }
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

}  // namespace

std::string to_string(VisibleUnit unit) {
  return unit == VisibleUnit::binary ? "binary" : "gaussian";
}

VisibleUnit visible_unit_from_string(const std::string& name) {
  if (name == "binary") return VisibleUnit::binary;
  if (name == "gaussian") return VisibleUnit::gaussian;
  throw ValueError("unknown visible unit '" + name + "'");
}

void ModelDims::validate() const {
  if (visible < 1) throw ShapeError("visible dimension must be >= 1");
  if (hidden < 1) throw ShapeError("hidden dimension must be >= 1");
  if (history < 0) throw ShapeError("history order must be >= 0");
  if (labels < 0 || labels == 1) throw ShapeError("label count must be 0 (unlabelled) or >= 2");
}

DcrbmParams DcrbmParams::zeros(const ModelDims& dims) {
  dims.validate();
  DcrbmParams p;
  p.dims = dims;
  p.a = Vector::Zero(dims.visible);
  p.b = Vector::Zero(dims.hidden);
  p.W = Matrix::Zero(dims.visible, dims.hidden);
  p.s = Vector::Zero(dims.labels);
  p.U = Matrix::Zero(dims.hidden, dims.labels);
  p.A = Matrix::Zero(dims.history_size(), dims.visible);
  p.B = Matrix::Zero(dims.history_size(), dims.hidden);
  return p;
}

DcrbmParams DcrbmParams::initialize(const ModelDims& dims, Rng& rng) {
  DcrbmParams p = zeros(dims);
  std::normal_distribution<double> normal(0.0, 0.01);
  auto fill = [&](Matrix& m) {
    for (Index r = 0; r < m.rows(); ++r) {
      for (Index c = 0; c < m.cols(); ++c) m(r, c) = normal(rng);
    }
  };
  fill(p.W);
  fill(p.U);
  fill(p.A);
  fill(p.B);
  return p;
}

void DcrbmParams::validate() const {
  dims.validate();
  require_size("a", a.size(), dims.visible);
  require_size("b", b.size(), dims.hidden);
  require_shape("W", W, dims.visible, dims.hidden);
  require_size("s", s.size(), dims.labels);
  require_shape("U", U, dims.hidden, dims.labels);
  require_shape("A", A, dims.history_size(), dims.visible);
  require_shape("B", B, dims.history_size(), dims.hidden);
  if (!all_finite(a) || !all_finite(b) || !all_finite(W) || !all_finite(s) || !all_finite(U) ||
      !all_finite(A) || !all_finite(B)) {
    throw ValueError("parameters contain non-finite entries");
  }
}

DrbmParams DcrbmParams::as_drbm() const {
  DrbmParams p;
  p.a = a;
  p.b = b;
  p.W = W;
  p.s = s;
  p.U = U;
  return p;
}

HistoryWindow::HistoryWindow(Index frames, Index visible)
    : flat_(Vector::Zero(frames * visible)), visible_(visible) {}

HistoryWindow::HistoryWindow(Vector flat, Index visible) : flat_(std::move(flat)), visible_(visible) {
  if (visible_ < 0 || (visible_ > 0 && flat_.size() % visible_ != 0) ||
      (visible_ == 0 && flat_.size() != 0)) {
    throw ShapeError("history length is not a multiple of the frame width");
  }
}

HistoryWindow HistoryWindow::from_frames(const Eigen::Ref<const RowMatrix>& frames) {
  HistoryWindow w(frames.rows(), frames.cols());
  for (Index t = 0; t < frames.rows(); ++t) {
    w.flat_.segment(t * frames.cols(), frames.cols()) = frames.row(t).transpose();
  }
  return w;
}

void HistoryWindow::push(const Eigen::Ref<const Vector>& frame) {
  require_size("history frame", frame.size(), visible_);
  const Index n = frames();
  if (n == 0) return;
  if (n > 1) {
    const Vector tail = flat_.tail((n - 1) * visible_);
    flat_.head((n - 1) * visible_) = tail;
  }
  flat_.tail(visible_) = frame;
}

Index LabelDist::argmax() const {
  Index k = 0;
  probs.maxCoeff(&k);
  return k;
}

Vector one_hot(Index label, Index count) {
  if (label < 0 || label >= count) {
    throw ValueError("label " + std::to_string(label) + " out of range for " +
                     std::to_string(count) + " classes");
  }
  Vector y = Vector::Zero(count);
  y[label] = 1.0;
  return y;
}

Index label_index(const Eigen::Ref<const Vector>& y) {
  Index selected = -1;
  for (Index k = 0; k < y.size(); ++k) {
    if (y[k] == 1.0) {
      if (selected >= 0) throw ValueError("label vector is not one-hot");
      selected = k;
    } else if (y[k] != 0.0) {
      throw ValueError("label vector is not one-hot");
    }
  }
  if (selected < 0) throw ValueError("label vector is not one-hot");
  return selected;
}

double rbm_energy(const Eigen::Ref<const Vector>& v, const Eigen::Ref<const Vector>& h,
                  const RbmParams& p, VisibleUnit unit) {
  require_rbm_shapes(p, v.size(), h.size());
  require_binary("hidden configuration", h);
  double visible_term = 0.0;
  if (unit == VisibleUnit::binary) {
    require_binary("binary visible configuration", v);
    visible_term = -p.a.dot(v);
  } else {
    visible_term = 0.5 * (p.a - v).squaredNorm();
  }
  return visible_term - p.b.dot(h) - v.dot(p.W * h);
}

Vector rbm_h_given_v(const Eigen::Ref<const Vector>& v, const RbmParams& p) {
  require_size("visible", v.size(), p.a.size());
  require_shape("W", p.W, p.a.size(), p.b.size());
  const Vector logits = p.b + p.W.transpose() * v;
  return logits.unaryExpr([](double x) { return sigmoid(x); });
}

Vector rbm_v_given_h(const Eigen::Ref<const Vector>& h, const RbmParams& p, VisibleUnit unit) {
  require_size("hidden", h.size(), p.b.size());
  require_shape("W", p.W, p.a.size(), p.b.size());
  Vector act = p.a + p.W * h;
  if (unit == VisibleUnit::binary) {
    act = act.unaryExpr([](double x) { return sigmoid(x); });
  }
  return act;
}

Vector rbm_sample_v(const Eigen::Ref<const Vector>& h, const RbmParams& p, VisibleUnit unit,
                    Rng& rng) {
  Vector params = rbm_v_given_h(h, p, unit);
  if (unit == VisibleUnit::binary) {
    return sample_bernoulli(params, rng);
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Index i = 0; i < params.size(); ++i) params[i] += normal(rng);
  return params;
}

double drbm_energy(const Eigen::Ref<const Vector>& y, const Eigen::Ref<const Vector>& v,
                   const Eigen::Ref<const Vector>& h, const DrbmParams& p) {
  require_size("label", y.size(), p.s.size());
  require_shape("U", p.U, p.b.size(), p.s.size());
  const Index k = label_index(y);
  const double base = rbm_energy(v, h, p, VisibleUnit::gaussian);
  return base - p.s[k] - h.dot(p.U.col(k));
}

LabelDist y_given_h(const Eigen::Ref<const Vector>& h, const LabelParams& p) {
  require_size("hidden", h.size(), p.U.rows());
  require_size("label bias", p.s.size(), p.U.cols());
  const Vector logits = p.s + p.U.transpose() * h;
  return LabelDist{softmax(logits)};
}

DynamicBiases dynamic_biases(const CrbmParams& p, const HistoryWindow& hist) {
  require_history(hist, p, p.a.size());
  DynamicBiases out{p.a, p.b};
  if (hist.flat().size() > 0) {
    out.c.noalias() += p.A.transpose() * hist.flat();
    out.d.noalias() += p.B.transpose() * hist.flat();
  }
  return out;
}

DynamicBiases dynamic_biases(const DcrbmParams& p, const HistoryWindow& hist,
                             std::optional<Index> label) {
  DynamicBiases out = dynamic_biases(static_cast<const CrbmParams&>(p), hist);
  if (label) {
    if (*label < 0 || *label >= p.U.cols()) {
      throw ValueError("label " + std::to_string(*label) + " out of range");
    }
    out.d += p.U.col(*label);
  }
  return out;
}

CrbmConditionals crbm_conditionals(const Eigen::Ref<const Vector>& v,
                                   const Eigen::Ref<const Vector>& h, const HistoryWindow& hist,
                                   const CrbmParams& p) {
  require_rbm_shapes(p, v.size(), h.size());
  const DynamicBiases db = dynamic_biases(p, hist);
  CrbmConditionals out;
  out.hidden_probs = (db.d + p.W.transpose() * v).unaryExpr([](double x) { return sigmoid(x); });
  out.visible_means = db.c + p.W * h;
  return out;
}

double crbm_energy(const Eigen::Ref<const Vector>& v, const Eigen::Ref<const Vector>& h,
                   const HistoryWindow& hist, const CrbmParams& p) {
  require_rbm_shapes(p, v.size(), h.size());
  require_binary("hidden configuration", h);
  const DynamicBiases db = dynamic_biases(p, hist);
  return 0.5 * (db.c - v).squaredNorm() - db.d.dot(h) - v.dot(p.W * h);
}

double dcrbm_energy(const Eigen::Ref<const Vector>& y, const Eigen::Ref<const Vector>& v,
                    const Eigen::Ref<const Vector>& h, const HistoryWindow& hist,
                    const DcrbmParams& p) {
  require_size("label", y.size(), p.s.size());
  require_rbm_shapes(p, v.size(), h.size());
  require_binary("hidden configuration", h);
  const Index k = label_index(y);
  const DynamicBiases db = dynamic_biases(p, hist, k);
  const double visible_term =
      p.dims.unit == VisibleUnit::gaussian ? 0.5 * (db.c - v).squaredNorm() : -db.c.dot(v);
  return visible_term - db.d.dot(h) - p.s[k] - v.dot(p.W * h);
}

Vector dcrbm_h_given_vy(const Eigen::Ref<const Vector>& v, Index label,
                        const HistoryWindow& hist, const DcrbmParams& p) {
  require_size("visible", v.size(), p.a.size());
  const DynamicBiases db = dynamic_biases(p, hist, label);
  return (db.d + p.W.transpose() * v).unaryExpr([](double x) { return sigmoid(x); });
}

LabelDist dcrbm_posterior(const Eigen::Ref<const Vector>& v, const HistoryWindow& hist,
                          const DcrbmParams& p) {
  require_size("visible", v.size(), p.a.size());
  if (p.s.size() < 2) throw ShapeError("posterior requires a labelled model");
  const DynamicBiases db = dynamic_biases(p, hist, std::nullopt);
  const Vector shared = db.d + p.W.transpose() * v;
  Vector log_q(p.s.size());
  for (Index k = 0; k < p.s.size(); ++k) {
    double acc = p.s[k];
    for (Index j = 0; j < shared.size(); ++j) acc += softplus(shared[j] + p.U(j, k));
    log_q[k] = acc;
  }
  return LabelDist{softmax(log_q)};
}

Matrix dcrbm_log_posterior_batch(const DcrbmParams& p, const Eigen::Ref<const Matrix>& visible,
                                 const Eigen::Ref<const Matrix>& history) {
  if (visible.cols() != p.dims.visible || history.cols() != p.dims.history_size() ||
      visible.rows() != history.rows()) {
    throw ShapeError("posterior batch shapes do not match the model");
  }
  if (!p.dims.discriminative()) throw ShapeError("posterior requires a labelled model");
  Matrix shared = visible * p.W;
  if (history.cols() > 0) shared.noalias() += history * p.B;
  shared.rowwise() += p.b.transpose();
  Matrix out(visible.rows(), p.dims.labels);
  for (Index k = 0; k < p.dims.labels; ++k) {
    const Matrix logits = shared.rowwise() + p.U.col(k).transpose();
    out.col(k) = logits.unaryExpr([](double x) { return softplus(x); }).rowwise().sum();
    out.col(k).array() += p.s[k];
  }
  return out;
}

Index JointTable::hidden() const {
  Index h = 0;
  while ((Index{1} << h) < log_weights.cols()) ++h;
  return h;
}

LabelDist JointTable::label_marginal() const {
  Vector per_label(labels());
  for (Index k = 0; k < labels(); ++k) per_label[k] = log_sum_exp(log_weights.row(k).transpose());
  return LabelDist{softmax(per_label)};
}

Vector JointTable::hidden_marginal(Index label) const {
  const Index nh = hidden();
  const Vector row = log_weights.row(label).transpose();
  const double log_z = log_sum_exp(row);
  Vector out = Vector::Zero(nh);
  for (Index c = 0; c < row.size(); ++c) {
    const double w = std::exp(row[c] - log_z);
    for (Index j = 0; j < nh; ++j) {
      if ((c >> j) & 1) out[j] += w;
    }
  }
  return out;
}

Vector JointTable::hidden_marginal() const {
  const LabelDist py = label_marginal();
  Vector out = Vector::Zero(hidden());
  for (Index k = 0; k < labels(); ++k) out += py.probs[k] * hidden_marginal(k);
  return out;
}

Vector hidden_config(std::uint64_t bits, Index hidden) {
  Vector h(hidden);
  for (Index j = 0; j < hidden; ++j) h[j] = static_cast<double>((bits >> j) & 1U);
  return h;
}

JointTable enumerate_joint(const DcrbmParams& p, const Eigen::Ref<const Vector>& v,
                           const HistoryWindow& hist) {
  const Index nh = p.b.size();
  if (nh > kMaxEnumeratedHidden) {
    throw ShapeError("enumeration limited to " + std::to_string(kMaxEnumeratedHidden) +
                     " hidden units, model has " + std::to_string(nh));
  }
  const Index nk = p.s.size();
  if (nk < 2) throw ShapeError("enumeration requires a labelled model");
  const Index configs = Index{1} << nh;
  JointTable table;
  table.log_weights.resize(nk, configs);
  for (Index k = 0; k < nk; ++k) {
    const Vector y = one_hot(k, nk);
    for (Index c = 0; c < configs; ++c) {
      table.log_weights(k, c) = -dcrbm_energy(y, v, hidden_config(c, nh), hist, p);
    }
  }
  table.weights = table.log_weights.array().exp().matrix();
  return table;
}

}  // namespace dcrbm
