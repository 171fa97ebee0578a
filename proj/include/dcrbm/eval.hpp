#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dcrbm/data.hpp"
#include "dcrbm/generation.hpp"
#include "dcrbm/models.hpp"
#include "dcrbm/training.hpp"

namespace dcrbm {

/// (||generated - truth|| / ||truth||)^2 over all frames and dimensions, or
/// over the free dimensions of `mask` when given. Throws ValueError when the
/// ground truth has zero norm, ShapeError on shape mismatch.
double generation_error(const Eigen::Ref<const RowMatrix>& generated,
                        const Eigen::Ref<const RowMatrix>& truth, const ClampMask* mask = nullptr);

struct Metrics {
  Index fold = -1;
  double accuracy = 0.0;                 ///< sequence level
  std::optional<double> window_accuracy; ///< per-window arg-max
  Eigen::MatrixXi confusion;             ///< rows: true label, cols: predicted
  Vector precision;
  Vector recall;

  Index total() const { return confusion.sum(); }
};

/// Confusion matrix and derived scores from paired label lists.
Metrics metrics_from_predictions(const std::vector<Index>& truth, const std::vector<Index>& predicted,
                                 Index labels);

enum class Aggregation { majority_vote, mean_posterior };

/// Per-window arg-max posterior, aggregated to one label per sequence.
/// Throws MismatchError when the data's label count differs from the model's.
Metrics classify_dataset(const DcrbmParams& p, const WindowedDataset& test,
                         Aggregation aggregation = Aggregation::majority_vote);

// --- cross validation ------------------------------------------------------

struct CvOptions {
  Index folds = 5;
  Index hidden = 50;
  VisibleUnit unit = VisibleUnit::gaussian;
  TrainConfig train;  ///< train.history sets the model's history order
  std::uint64_t seed = 0;
  Aggregation aggregation = Aggregation::majority_vote;
};

struct FoldResult {
  Metrics metrics;
  TrainReport report;
  DcrbmParams params;
  NormalizationStats stats;  ///< from the training folds
};

struct CvResult {
  std::vector<FoldResult> folds;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  double mean_window_accuracy = 0.0;
};

/// Stratified split, then per fold: normalize with training statistics,
/// train a fresh DCRBM and classify the held-out sequences.
CvResult cross_validate(const DyadDataset& data, const CvOptions& opts);

enum class GenSetting { partial, full };
std::string to_string(GenSetting setting);
GenSetting gen_setting_from_string(const std::string& name);

struct GenErrorCurve {
  std::string method;  ///< "dcrbm", "mean-pose", "persistence"
  GenSetting setting = GenSetting::partial;
  std::optional<Index> class_level;
  std::vector<Index> lengths;
  std::vector<double> mean;
  std::vector<double> std;
  std::vector<std::vector<double>> per_item;  ///< [length][instance]
};

struct GenEvalOptions {
  std::vector<Index> lengths{16, 50, 100, 200, 300};
  GenSetting setting = GenSetting::partial;
  Index iters = kDefaultGibbsIters;
  std::uint64_t seed = 0;
  std::size_t max_instances = 50;
};

/// Observed dims in the partial setting: the first actor.
ClampMask partial_mask(Index visible);

/// Rolls out each test sequence (already normalized) from its first n frames
/// for every requested length and scores it against the frames that follow.
/// Throws DataError when a sequence is shorter than n + max length.
GenErrorCurve gen_error_curve(const DcrbmParams& p, const DyadDataset& test,
                              const GenEvalOptions& opts);

enum class BaselineMode { mean_pose, persistence };

/// mean-pose predicts `mean_frame` at every step; persistence repeats the
/// last seed frame. Deterministic.
GenErrorCurve baseline_error(const DyadDataset& test, const GenEvalOptions& opts, Index history,
                             BaselineMode mode, const Eigen::Ref<const Vector>& mean_frame);

nlohmann::json to_json(const Metrics& m);
nlohmann::json to_json(const GenErrorCurve& c);
/// Per-fold metrics and epoch records plus the aggregate; no parameters.
nlohmann::json to_json(const CvResult& cv);
/// One row per (method, setting, class level, length).
std::string curves_to_csv(const std::vector<GenErrorCurve>& curves);

/// Neumaier-compensated mean.
double compensated_mean(const std::vector<double>& xs);

}  // namespace dcrbm
