#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dcrbm/math.hpp"
#include "dcrbm/models.hpp"

namespace dcrbm {

/// T x Dv frames. For skeletal data each frame stacks actor A's joints then
/// actor B's joints, three coordinates per joint, joint 0 being the root.
struct DyadSequence {
  std::string id;
  RowMatrix frames;
  std::optional<Index> label;

  Index length() const { return frames.rows(); }
};

struct DyadDataset {
  Index visible = 0;
  Index joints = 0;  ///< joints per actor; 0 for non-skeletal data
  double frame_rate = 30.0;
  std::vector<std::string> label_names;
  std::map<std::string, std::string> metadata;
  std::vector<DyadSequence> sequences;

  Index label_count() const { return static_cast<Index>(label_names.size()); }

  /// Checks frame widths, finiteness and label ranges. Throws DataError.
  void validate() const;
};

/// Dataset restricted to the given sequence indices (header copied).
DyadDataset subset(const DyadDataset& data, const std::vector<std::size_t>& indices);

/// Column range of one actor in a skeletal frame.
struct ActorSpan {
  Index offset;
  Index width;
};
ActorSpan actor_span(const DyadDataset& data, int actor);

// --- normalization ---------------------------------------------------------

inline constexpr double kStdFloor = 1e-6;

struct NormalizationStats {
  Vector mean;
  Vector std;
  std::vector<bool> floored;  ///< dimensions whose std was raised to kStdFloor

  Index floored_count() const;
};

struct NormalizedData {
  DyadDataset data;
  NormalizationStats stats;
  std::vector<Eigen::Vector3d> origins;  ///< per sequence
};

/// Midpoint of both actors' root joints at the first frame; zero for
/// non-skeletal data.
Eigen::Vector3d sequence_origin(const DyadSequence& seq, Index joints);

/// Subtracts each sequence's origin from every joint, then z-scores each
/// dimension with statistics of these sequences.
NormalizedData normalize(const DyadDataset& data);

/// Same transform with statistics fixed (e.g. from the training folds).
NormalizedData apply_normalization(const DyadDataset& data, const NormalizationStats& stats);

RowMatrix denormalize(const Eigen::Ref<const RowMatrix>& frames, const NormalizationStats& stats,
                      const Eigen::Vector3d& origin, Index joints);

// --- windowing -------------------------------------------------------------

struct WindowRef {
  std::size_t sequence;
  Index t;  ///< 0-based frame index of v_t
  std::optional<Index> label;
};

/// Windows (v_t, v_{t-n..t-1}) over a shared, immutable dataset.
class WindowedDataset {
 public:
  WindowedDataset() = default;
  WindowedDataset(std::shared_ptr<const DyadDataset> data, Index history);

  Index history() const { return history_; }
  Index visible() const { return data_ ? data_->visible : 0; }
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  const std::vector<WindowRef>& items() const { return items_; }
  const DyadDataset& source() const { return *data_; }

  Vector frame(std::size_t item) const;
  HistoryWindow history_window(std::size_t item) const;

  /// Gathers visible rows (N x Dv) and flattened histories (N x n*Dv).
  void gather(const std::vector<std::size_t>& items, Matrix& visible, Matrix& history) const;

 private:
  std::shared_ptr<const DyadDataset> data_;
  Index history_ = 0;
  std::vector<WindowRef> items_;
};

/// One item per t in [n, T-1]. Throws DataError if a sequence has <= n frames.
WindowedDataset window(const DyadDataset& data, Index history);

// --- synthetic dyads -------------------------------------------------------

struct SynthConfig {
  std::vector<double> coupling{0.0, 0.5, 0.9};  ///< rho per class
  Index samples_per_class = 100;
  Index frames = 300;
  Index joints = 2;
  Index lag = 5;
  double noise_std = 0.05;
  double tempo = 0.15;  ///< rad/frame
  std::uint64_t seed = 0;
  Index history = 15;  ///< checked against frames and lag

  void validate() const;
};

/// Actor A: per-coordinate sinusoid at a per-sequence tempo plus a low-pass
/// random walk. Actor B: rho * (A delayed by `lag`) + (1 - rho) * independent
/// trajectory + noise. Label = index of rho.
DyadDataset synthesize(const SynthConfig& cfg);

/// Mean over coordinates of corr(A_{t-lag}, B_t) for one skeletal sequence.
double lag_cross_correlation(const DyadSequence& seq, Index joints, Index lag);

// --- cross validation ------------------------------------------------------

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Stratified sequence-level split into k folds.
std::vector<Fold> kfold_split(const DyadDataset& data, Index k, std::uint64_t seed);

}  // namespace dcrbm
