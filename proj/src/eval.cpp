#include "dcrbm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "dcrbm/error.hpp"
#include "dcrbm/training.hpp"

namespace dcrbm {

double generation_error(const Eigen::Ref<const RowMatrix>& generated,
                        const Eigen::Ref<const RowMatrix>& truth, const ClampMask* mask) {
  if (generated.rows() != truth.rows() || generated.cols() != truth.cols()) {
    throw ShapeError("generated and ground-truth sequences differ in shape");
  }
  if (mask != nullptr && mask->size() != truth.cols()) throw ShapeError("mask width mismatch");
  double diff = 0.0;
  double norm = 0.0;
  for (Index d = 0; d < truth.cols(); ++d) {
    if (mask != nullptr && (*mask)[d]) continue;
    diff += (generated.col(d) - truth.col(d)).squaredNorm();
    norm += truth.col(d).squaredNorm();
  }
  if (!(norm > 0.0)) throw ValueError("ground truth has zero norm");
  return diff / norm;
}

Metrics metrics_from_predictions(const std::vector<Index>& truth, const std::vector<Index>& predicted,
                                 Index labels) {
  if (truth.size() != predicted.size()) throw ShapeError("prediction count differs from truth");
  Metrics m;
  m.confusion = Eigen::MatrixXi::Zero(labels, labels);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= labels || predicted[i] < 0 || predicted[i] >= labels) {
      throw ValueError("label out of range");
    }
    ++m.confusion(truth[i], predicted[i]);
  }
  const double total = static_cast<double>(truth.size());
  m.accuracy = total > 0.0 ? static_cast<double>(m.confusion.trace()) / total : 0.0;
  m.precision = Vector::Zero(labels);
  m.recall = Vector::Zero(labels);
  for (Index k = 0; k < labels; ++k) {
    const int col = m.confusion.col(k).sum();
    const int row = m.confusion.row(k).sum();
    if (col > 0) m.precision[k] = static_cast<double>(m.confusion(k, k)) / col;
    if (row > 0) m.recall[k] = static_cast<double>(m.confusion(k, k)) / row;
  }
  return m;
}

Metrics classify_dataset(const DcrbmParams& p, const WindowedDataset& test, Aggregation aggregation) {
  if (!p.dims.discriminative()) throw MismatchError("classification requires a labelled model");
  const Index k_model = p.dims.labels;
  if (test.source().label_count() != 0 && test.source().label_count() != k_model) {
    throw MismatchError("data has " + std::to_string(test.source().label_count()) +
                        " classes, model has " + std::to_string(k_model));
  }
  if (test.history() != p.dims.history || test.visible() != p.dims.visible) {
    throw MismatchError("data windows do not match the model's visible width or history order");
  }
  const std::size_t nseq = test.source().sequences.size();
  Eigen::MatrixXd votes = Eigen::MatrixXd::Zero(static_cast<Index>(nseq), k_model);
  std::vector<Index> window_truth, window_pred;
  constexpr std::size_t kChunk = 1024;
  std::vector<std::size_t> items;
  for (std::size_t start = 0; start < test.size(); start += kChunk) {
    items.clear();
    for (std::size_t i = start; i < std::min(test.size(), start + kChunk); ++i) items.push_back(i);
    Matrix v, h;
    test.gather(items, v, h);
    const Matrix scores = dcrbm_log_posterior_batch(p, v, h);
    for (std::size_t r = 0; r < items.size(); ++r) {
      const auto& ref = test.items()[items[r]];
      const Vector probs = softmax(scores.row(static_cast<Index>(r)).transpose());
      Index k = 0;
      probs.maxCoeff(&k);
      if (aggregation == Aggregation::majority_vote) {
        votes(static_cast<Index>(ref.sequence), k) += 1.0;
      } else {
        votes.row(static_cast<Index>(ref.sequence)) += probs.transpose();
      }
      if (!ref.label) throw ValueError("test windows must be labelled");
      if (*ref.label >= k_model) throw MismatchError("data label exceeds the model's label count");
      window_truth.push_back(*ref.label);
      window_pred.push_back(k);
    }
  }
  std::vector<Index> seq_truth, seq_pred;
  for (std::size_t s = 0; s < nseq; ++s) {
    const auto& label = test.source().sequences[s].label;
    if (!label) throw ValueError("test sequences must be labelled");
    Index k = 0;
    votes.row(static_cast<Index>(s)).maxCoeff(&k);  // ties go to the lowest index
    seq_truth.push_back(*label);
    seq_pred.push_back(k);
  }
  Metrics m = metrics_from_predictions(seq_truth, seq_pred, k_model);
  m.window_accuracy = metrics_from_predictions(window_truth, window_pred, k_model).accuracy;
  return m;
}

std::string to_string(GenSetting setting) {
  return setting == GenSetting::partial ? "partial" : "full";
}

GenSetting gen_setting_from_string(const std::string& name) {
  if (name == "partial") return GenSetting::partial;
  if (name == "full") return GenSetting::full;
  throw ValueError("unknown generation setting '" + name + "'");
}

ClampMask partial_mask(Index visible) { return ClampMask::range(visible, 0, visible / 2); }

double compensated_mean(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double sum = 0.0;
  double comp = 0.0;
  for (const double x : xs) {
    const double t = sum + x;
    comp += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
    sum = t;
  }
  return (sum + comp) / static_cast<double>(xs.size());
}

CvResult cross_validate(const DyadDataset& data, const CvOptions& opts) {
  if (data.label_count() < 2) throw DataError("cross validation needs a labelled dataset");
  const std::vector<Fold> folds = kfold_split(data, opts.folds, opts.seed);
  CvResult out;
  std::vector<double> acc, window_acc;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const std::uint64_t fold_seed = substream(opts.seed, "fold", f)();
    NormalizedData train_set = normalize(subset(data, folds[f].train));
    NormalizedData test_set = apply_normalization(subset(data, folds[f].test), train_set.stats);
    const Index n = opts.train.history;
    const WindowedDataset train_windows = window(train_set.data, n);
    const WindowedDataset test_windows = window(test_set.data, n);

    const ModelDims dims{data.visible, opts.hidden, data.label_count(), n, opts.unit};
    Rng init = substream(fold_seed, "init");
    FoldResult fr;
    fr.params = DcrbmParams::initialize(dims, init);
    TrainConfig cfg = opts.train;
    cfg.seed = fold_seed;
    fr.report = train(fr.params, train_windows, cfg);
    fr.metrics = classify_dataset(fr.params, test_windows, opts.aggregation);
    fr.metrics.fold = static_cast<Index>(f);
    fr.stats = std::move(train_set.stats);
    acc.push_back(fr.metrics.accuracy);
    window_acc.push_back(fr.metrics.window_accuracy.value_or(0.0));
    out.folds.push_back(std::move(fr));
  }
  out.mean_accuracy = compensated_mean(acc);
  out.mean_window_accuracy = compensated_mean(window_acc);
  std::vector<double> sq;
  for (const double a : acc) sq.push_back((a - out.mean_accuracy) * (a - out.mean_accuracy));
  out.std_accuracy = std::sqrt(compensated_mean(sq));
  return out;
}

namespace {

std::optional<Index> common_label(const DyadDataset& test, std::size_t count) {
  std::optional<Index> level;
  for (std::size_t i = 0; i < count; ++i) {
    const auto& l = test.sequences[i].label;
    if (!l) return std::nullopt;
    if (level && *level != *l) return std::nullopt;
    level = l;
  }
  return level;
}

void check_lengths(const DyadDataset& test, const GenEvalOptions& opts, Index history,
                   std::size_t count) {
  if (opts.lengths.empty()) throw ValueError("at least one generation length is required");
  if (count == 0) throw DataError("generation evaluation needs at least one test sequence");
  const Index longest = *std::max_element(opts.lengths.begin(), opts.lengths.end());
  for (const Index L : opts.lengths) {
    if (L < 1) throw ValueError("generation lengths must be >= 1");
  }
  for (std::size_t i = 0; i < count; ++i) {
    if (test.sequences[i].length() < history + longest) {
      throw DataError("sequence '" + test.sequences[i].id + "' has " +
                      std::to_string(test.sequences[i].length()) + " frames; needs " +
                      std::to_string(history + longest));
    }
  }
}

void finish_curve(GenErrorCurve& c) {
  for (const auto& items : c.per_item) {
    const double mean = compensated_mean(items);
    double var = 0.0;
    for (const double x : items) var += (x - mean) * (x - mean);
    c.mean.push_back(mean);
    c.std.push_back(items.size() > 1 ? std::sqrt(var / static_cast<double>(items.size() - 1)) : 0.0);
  }
}

}  // namespace

GenErrorCurve gen_error_curve(const DcrbmParams& p, const DyadDataset& test,
                              const GenEvalOptions& opts) {
  if (test.visible != p.dims.visible) throw MismatchError("data width does not match the model");
  const std::size_t count = std::min(opts.max_instances, test.sequences.size());
  check_lengths(test, opts, p.dims.history, count);
  GenErrorCurve curve;
  curve.method = "dcrbm";
  curve.setting = opts.setting;
  curve.class_level = common_label(test, count);
  curve.lengths = opts.lengths;
  const ClampMask mask =
      opts.setting == GenSetting::partial ? partial_mask(p.dims.visible) : ClampMask::none(p.dims.visible);
  const Index n = p.dims.history;
  for (std::size_t li = 0; li < opts.lengths.size(); ++li) {
    const Index L = opts.lengths[li];
    std::vector<double> errors;
    for (std::size_t i = 0; i < count; ++i) {
      const auto& seq = test.sequences[i];
      Rng rng = substream(opts.seed, "generation", (static_cast<std::uint64_t>(li) << 32) | i);
      const RowMatrix seed_frames = seq.frames.topRows(n);
      const RowMatrix truth = seq.frames.middleRows(n, L);
      const std::optional<Index> label = p.dims.discriminative() ? seq.label : std::nullopt;
      GeneratedSequence gen;
      if (opts.setting == GenSetting::partial) {
        gen = generate_partial(p, label, truth, seed_frames, mask, opts.iters, rng);
      } else {
        gen = generate_full(p, label, seed_frames, L, opts.iters, rng);
      }
      errors.push_back(generation_error(gen.frames, truth, &mask));
    }
    curve.per_item.push_back(std::move(errors));
  }
  finish_curve(curve);
  return curve;
}

GenErrorCurve baseline_error(const DyadDataset& test, const GenEvalOptions& opts, Index history,
                             BaselineMode mode, const Eigen::Ref<const Vector>& mean_frame) {
  if (mean_frame.size() != test.visible) throw ShapeError("mean frame width mismatch");
  if (mode == BaselineMode::persistence && history < 1) {
    throw ValueError("persistence baseline needs at least one seed frame");
  }
  const std::size_t count = std::min(opts.max_instances, test.sequences.size());
  check_lengths(test, opts, history, count);
  GenErrorCurve curve;
  curve.method = mode == BaselineMode::mean_pose ? "mean-pose" : "persistence";
  curve.setting = opts.setting;
  curve.class_level = common_label(test, count);
  curve.lengths = opts.lengths;
  const ClampMask mask =
      opts.setting == GenSetting::partial ? partial_mask(test.visible) : ClampMask::none(test.visible);
  for (const Index L : opts.lengths) {
    std::vector<double> errors;
    for (std::size_t i = 0; i < count; ++i) {
      const auto& seq = test.sequences[i];
      const RowMatrix truth = seq.frames.middleRows(history, L);
      const Eigen::RowVectorXd pose = mode == BaselineMode::mean_pose
                                          ? Eigen::RowVectorXd(mean_frame.transpose())
                                          : Eigen::RowVectorXd(seq.frames.row(history - 1));
      RowMatrix predicted = pose.replicate(L, 1);
      for (Index d = 0; d < test.visible; ++d) {
        if (mask[d]) predicted.col(d) = truth.col(d);
      }
      errors.push_back(generation_error(predicted, truth, &mask));
    }
    curve.per_item.push_back(std::move(errors));
  }
  finish_curve(curve);
  return curve;
}

nlohmann::json to_json(const Metrics& m) {
  nlohmann::json confusion = nlohmann::json::array();
  for (Index r = 0; r < m.confusion.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Index c = 0; c < m.confusion.cols(); ++c) row.push_back(m.confusion(r, c));
    confusion.push_back(std::move(row));
  }
  return {{"fold", m.fold},
          {"accuracy", m.accuracy},
          {"window_accuracy", m.window_accuracy ? nlohmann::json(*m.window_accuracy) : nlohmann::json()},
          {"total", m.total()},
          {"confusion", std::move(confusion)},
          {"precision", std::vector<double>(m.precision.data(), m.precision.data() + m.precision.size())},
          {"recall", std::vector<double>(m.recall.data(), m.recall.data() + m.recall.size())}};
}

nlohmann::json to_json(const GenErrorCurve& c) {
  return {{"method", c.method},
          {"setting", to_string(c.setting)},
          {"class_level", c.class_level ? nlohmann::json(*c.class_level) : nlohmann::json()},
          {"lengths", c.lengths},
          {"mean", c.mean},
          {"std", c.std},
          {"per_item", c.per_item}};
}

nlohmann::json to_json(const CvResult& cv) {
  nlohmann::json folds = nlohmann::json::array();
  for (const auto& f : cv.folds) {
    nlohmann::json doc = to_json(f.metrics);
    doc["epochs"] = to_json(f.report)["epochs"];
    folds.push_back(std::move(doc));
  }
  return {{"folds", std::move(folds)},
          {"mean_accuracy", cv.mean_accuracy},
          {"std_accuracy", cv.std_accuracy},
          {"mean_window_accuracy", cv.mean_window_accuracy}};
}

std::string curves_to_csv(const std::vector<GenErrorCurve>& curves) {
  std::ostringstream os;
  os << "method,setting,class_level,length,mean_error,std_error,instances\n";
  char buf[64];
  for (const auto& c : curves) {
    for (std::size_t i = 0; i < c.lengths.size(); ++i) {
      os << c.method << "," << to_string(c.setting) << ","
         << (c.class_level ? std::to_string(*c.class_level) : std::string("all")) << ","
         << c.lengths[i] << ",";
      std::snprintf(buf, sizeof buf, "%.17g", c.mean[i]);
      os << buf << ",";
      std::snprintf(buf, sizeof buf, "%.17g", c.std[i]);
      os << buf << "," << c.per_item[i].size() << "\n";
    }
  }
  return os.str();
}

}  // namespace dcrbm
