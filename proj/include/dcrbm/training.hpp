#pragma once

#include <optional>
#include <vector>

#include <json.hpp>

#include "dcrbm/data.hpp"
#include "dcrbm/models.hpp"

namespace dcrbm {

struct TrainConfig {
  double learning_rate = 2e-2;
  double momentum = 0.9;
  Index momentum_start_epoch = 5;  ///< momentum is 0 for earlier epochs
  double weight_decay = 2e-4;      ///< W, U, A, B only
  Index cd_steps = 1;
  Index epochs = 40;
  Index batch_size = 64;
  std::uint64_t seed = 0;
  Index history = 15;
  bool resample_labels = true;  ///< re-draw y from p(y|h) in the negative phase
  bool sample_visible = false;  ///< sample v in the negative phase instead of mean-field
  /// Ratio of the last epoch's learning rate to the first; geometric in
  /// between; 1 keeps the rate constant.
  double lr_decay = 0.05;

  /// Throws ValueError on out-of-range settings.
  void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);

/// One tensor per parameter group, shaped like DcrbmParams. Also used as the
/// momentum velocity.
struct GradientEstimate {
  Vector a, b, s;
  Matrix W, U, A, B;
  /// Mean squared difference between data and first reconstruction.
  double reconstruction_error = 0.0;

  static GradientEstimate zeros(const ModelDims& dims);
  double max_abs() const;
};

/// Batch of windowed samples. `labels` is empty for unlabelled models.
struct Batch {
  Matrix visible;  ///< N x Dv
  Matrix history;  ///< N x (n * Dv)
  std::vector<Index> labels;

  Index size() const { return visible.rows(); }
};

/// Sufficient statistics of one CD phase: visible values, hidden
/// probabilities and label vectors (one-hot or probabilities).
struct PhaseState {
  Matrix visible;
  Matrix hidden;
  Matrix labels;  ///< N x K, empty for unlabelled models
};

/// Batch-averaged <.>_data - <.>_recon for all seven groups. A and B
/// differences are weighted by the clamped history values.
GradientEstimate cd_difference(const PhaseState& data, const PhaseState& recon,
                               const Eigen::Ref<const Matrix>& history);

/// Positive phase: hidden probabilities given data and labels.
PhaseState positive_phase(const DcrbmParams& p, const Batch& batch);

/// CD-k gradient estimate. Throws ValueError when a labelled model gets no
/// labels, ShapeError on dimension mismatch.
GradientEstimate cd_step(const DcrbmParams& p, const Batch& batch, const TrainConfig& cfg,
                         Rng& rng);

/// velocity <- momentum * velocity + lr * (g - decay * weights)
/// params   <- params + velocity
void apply_update(DcrbmParams& p, const GradientEstimate& g, const TrainConfig& cfg,
                  GradientEstimate& velocity);

struct EpochRecord {
  Index epoch;
  double reconstruction_error;  ///< after the epoch's updates, on the training windows
  std::optional<double> heldout_accuracy;  ///< window-level, labelled models only
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  double wall_seconds = 0.0;
};

/// Wall time is left out unless requested so that reports are reproducible.
nlohmann::json to_json(const TrainReport& report, bool include_timing = false);

Batch make_batch(const WindowedDataset& data, const std::vector<std::size_t>& items);

/// Epochs of shuffled minibatch CD + update. Throws DataError on an empty
/// dataset, ShapeError if the window order differs from the model's.
TrainReport train(DcrbmParams& p, const WindowedDataset& data, const TrainConfig& cfg,
                  const WindowedDataset* heldout = nullptr);

/// Mean squared error of the deterministic reconstruction
/// v -> p(h | v, y, hist) -> E[v | h], per visible dimension.
double reconstruction_error(const DcrbmParams& p, const WindowedDataset& data);

/// Fraction of windows whose arg-max posterior equals the label.
double window_accuracy(const DcrbmParams& p, const WindowedDataset& data);

// --- exact oracles for tiny binary RBMs -----------------------------------

inline constexpr Index kMaxEnumeratedUnits = 20;

/// log Z by summing exp(-E) over every (v, h).
double log_partition(const RbmParams& p);

/// Average log p(v) over the rows of `data` (binary, N x Dv).
double exact_loglik(const RbmParams& p, const Eigen::Ref<const Matrix>& data);

/// d/dtheta of exact_loglik with model expectations by enumeration. Only
/// a, b, W are filled.
GradientEstimate exact_gradient(const RbmParams& p, const Eigen::Ref<const Matrix>& data);

/// max |analytic - numeric| / max(1, |numeric|) over a, b, W, with central
/// differences of step eps.
double grad_check(const RbmParams& p, const Eigen::Ref<const Matrix>& data, double eps);

}  // namespace dcrbm
