#pragma once

// Parameterizations, energies and exact conditionals for the model ladder
//   RBM -> DRBM (labels) -> CRBM (history) -> DCRBM (labels + history).
//
// Conventions:
//   W   visible x hidden
//   U   hidden x labels
//   A   (history * visible) x visible    autoregressive visible weights
//   B   (history * visible) x hidden     history-to-hidden weights
// A history window is flattened frame-major, oldest frame first.
//
// In the labelled models the label-hidden weight u_{j,k} enters the energy
// exactly once, through the dynamic hidden bias d_{j,k} = b_j + u_{j,k} + B^T v_<t.

#include <optional>
#include <string>
#include <vector>

#include "dcrbm/math.hpp"

namespace dcrbm {

enum class VisibleUnit { binary, gaussian };

std::string to_string(VisibleUnit unit);
VisibleUnit visible_unit_from_string(const std::string& name);

struct ModelDims {
  Index visible = 0;
  Index hidden = 0;
  Index labels = 0;   ///< 0 for the unlabelled models (RBM, CRBM)
  Index history = 0;  ///< frames of history; 0 for RBM, DRBM
  VisibleUnit unit = VisibleUnit::gaussian;

  bool discriminative() const { return labels > 0; }
  bool conditional() const { return history > 0; }
  Index history_size() const { return history * visible; }

  /// Throws ShapeError when a count is out of range.
  void validate() const;

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

struct RbmParams {
  Vector a;  ///< visible bias
  Vector b;  ///< hidden bias
  Matrix W;
};

struct LabelParams {
  Vector s;  ///< label bias
  Matrix U;  ///< hidden x labels
};

struct HistoryParams {
  Matrix A;
  Matrix B;
};

struct DrbmParams : RbmParams, LabelParams {};

struct CrbmParams : RbmParams, HistoryParams {};

/// Full parameter set {a, b, s, A, B, W, U}. Sub-models leave the unused
/// tensors empty (labels == 0 or history == 0).
struct DcrbmParams : CrbmParams, LabelParams {
  ModelDims dims;

  static DcrbmParams zeros(const ModelDims& dims);

  /// Weights W, U, A, B ~ Normal(0, 0.01^2); biases zero.
  static DcrbmParams initialize(const ModelDims& dims, Rng& rng);

  /// Throws ShapeError on any tensor/dims disagreement, ValueError on
  /// non-finite entries.
  void validate() const;

  DrbmParams as_drbm() const;
};

/// Past n frames feeding the autoregressive terms.
class HistoryWindow {
 public:
  HistoryWindow() = default;
  /// n zero frames of width `visible`.
  HistoryWindow(Index frames, Index visible);
  /// Takes a flattened window (frame-major, oldest first).
  HistoryWindow(Vector flat, Index visible);

  /// Rows are frames, oldest first.
  static HistoryWindow from_frames(const Eigen::Ref<const RowMatrix>& frames);

  Index frames() const { return visible_ == 0 ? 0 : flat_.size() / visible_; }
  Index visible() const { return visible_; }
  const Vector& flat() const { return flat_; }

  /// Frame i, 0 = oldest.
  Eigen::VectorBlock<const Vector> frame(Index i) const {
    return flat_.segment(i * visible_, visible_);
  }

  /// Drops the oldest frame and appends `frame` as the newest.
  void push(const Eigen::Ref<const Vector>& frame);

 private:
  Vector flat_;
  Index visible_ = 0;
};

struct LabelDist {
  Vector probs;

  Index argmax() const;
};

struct DynamicBiases {
  Vector c;  ///< effective visible bias
  Vector d;  ///< effective hidden bias
};

/// One-hot vector of length `count` selecting `label`.
Vector one_hot(Index label, Index count);

/// Returns the selected index; throws ValueError unless y is one-hot.
Index label_index(const Eigen::Ref<const Vector>& y);

// --- RBM -------------------------------------------------------------------

double rbm_energy(const Eigen::Ref<const Vector>& v, const Eigen::Ref<const Vector>& h,
                  const RbmParams& p, VisibleUnit unit);

Vector rbm_h_given_v(const Eigen::Ref<const Vector>& v, const RbmParams& p);

/// Bernoulli probabilities (binary) or unit-variance Gaussian means.
Vector rbm_v_given_h(const Eigen::Ref<const Vector>& h, const RbmParams& p, VisibleUnit unit);

/// Draws a visible sample from rbm_v_given_h.
Vector rbm_sample_v(const Eigen::Ref<const Vector>& h, const RbmParams& p, VisibleUnit unit,
                    Rng& rng);

// --- DRBM ------------------------------------------------------------------

/// Gaussian visible energy with a label layer.
double drbm_energy(const Eigen::Ref<const Vector>& y, const Eigen::Ref<const Vector>& v,
                   const Eigen::Ref<const Vector>& h, const DrbmParams& p);

/// softmax_k(s_k + sum_j u_{jk} h_j)
LabelDist y_given_h(const Eigen::Ref<const Vector>& h, const LabelParams& p);

// --- CRBM / DCRBM ----------------------------------------------------------

DynamicBiases dynamic_biases(const CrbmParams& p, const HistoryWindow& hist);

/// With a label, d additionally carries u_{., label}.
DynamicBiases dynamic_biases(const DcrbmParams& p, const HistoryWindow& hist,
                             std::optional<Index> label);

struct CrbmConditionals {
  Vector hidden_probs;
  Vector visible_means;
};

CrbmConditionals crbm_conditionals(const Eigen::Ref<const Vector>& v,
                                   const Eigen::Ref<const Vector>& h, const HistoryWindow& hist,
                                   const CrbmParams& p);

double crbm_energy(const Eigen::Ref<const Vector>& v, const Eigen::Ref<const Vector>& h,
                   const HistoryWindow& hist, const CrbmParams& p);

/// Gaussian visible term, or -c.v when dims.unit is binary.
double dcrbm_energy(const Eigen::Ref<const Vector>& y, const Eigen::Ref<const Vector>& v,
                    const Eigen::Ref<const Vector>& h, const HistoryWindow& hist,
                    const DcrbmParams& p);

Vector dcrbm_h_given_vy(const Eigen::Ref<const Vector>& v, Index label,
                        const HistoryWindow& hist, const DcrbmParams& p);

/// Exact p(y | v_t, v_<t), computed as s_k + sum_j softplus(d_{jk} + W_j . v)
/// in log space.
LabelDist dcrbm_posterior(const Eigen::Ref<const Vector>& v, const HistoryWindow& hist,
                          const DcrbmParams& p);

/// Unnormalized log-posteriors for a batch: rows are samples, columns labels.
/// `visible` is N x Dv, `history` is N x (n*Dv).
Matrix dcrbm_log_posterior_batch(const DcrbmParams& p, const Eigen::Ref<const Matrix>& visible,
                                 const Eigen::Ref<const Matrix>& history);

/// Exhaustive (label, hidden) table for a fixed (v_t, v_<t). Column index
/// encodes the hidden configuration: bit j of the column is h_j.
struct JointTable {
  Matrix log_weights;  ///< labels x 2^hidden, -E(y, v, h)
  Matrix weights;      ///< exp(log_weights)

  Index labels() const { return log_weights.rows(); }
  Index hidden() const;

  /// p(y | v, hist)
  LabelDist label_marginal() const;
  /// p(h_j = 1 | y = label, v, hist)
  Vector hidden_marginal(Index label) const;
  /// p(h_j = 1 | v, hist), labels summed out.
  Vector hidden_marginal() const;
};

inline constexpr Index kMaxEnumeratedHidden = 12;

/// Throws ShapeError when hidden > kMaxEnumeratedHidden or the model has no labels.
JointTable enumerate_joint(const DcrbmParams& p, const Eigen::Ref<const Vector>& v,
                           const HistoryWindow& hist);

/// Hidden configuration encoded by `bits` (bit j -> h_j).
Vector hidden_config(std::uint64_t bits, Index hidden);

}  // namespace dcrbm
