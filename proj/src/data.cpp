#include "dcrbm/data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dcrbm/error.hpp"

namespace dcrbm {

void DyadDataset::validate() const {
  if (visible < 1) throw DataError("dataset visible dimension must be >= 1");
  if (joints > 0 && visible != 6 * joints) {
    throw DataError("skeletal dataset needs 6 values per joint pair (2 actors x 3 coordinates)");
  }
  for (const auto& seq : sequences) {
    if (seq.frames.cols() != visible) {
      throw DataError("sequence '" + seq.id + "' has " + std::to_string(seq.frames.cols()) +
                      " columns, dataset declares " + std::to_string(visible));
    }
    if (!seq.frames.allFinite()) throw DataError("sequence '" + seq.id + "' has non-finite values");
    if (seq.label && (*seq.label < 0 || *seq.label >= label_count())) {
      throw DataError("sequence '" + seq.id + "' label out of range");
    }
  }
}

DyadDataset subset(const DyadDataset& data, const std::vector<std::size_t>& indices) {
  DyadDataset out = data;
  out.sequences.clear();
  out.sequences.reserve(indices.size());
  for (const std::size_t i : indices) out.sequences.push_back(data.sequences.at(i));
  return out;
}

ActorSpan actor_span(const DyadDataset& data, int actor) {
  const Index width = data.visible / 2;
  return ActorSpan{actor == 0 ? 0 : width, width};
}

Index NormalizationStats::floored_count() const {
  return static_cast<Index>(std::count(floored.begin(), floored.end(), true));
}

Eigen::Vector3d sequence_origin(const DyadSequence& seq, Index joints) {
  if (joints <= 0 || seq.length() == 0) return Eigen::Vector3d::Zero();
  const Index actor_b = 3 * joints;
  Eigen::Vector3d root_a = seq.frames.row(0).segment<3>(0).transpose();
  Eigen::Vector3d root_b = seq.frames.row(0).segment<3>(actor_b).transpose();
  return 0.5 * (root_a + root_b);
}

namespace {

RowMatrix subtract_origin(const RowMatrix& frames, const Eigen::Vector3d& origin, Index joints) {
  RowMatrix out = frames;
  if (joints <= 0) return out;
  for (Index j = 0; j < 2 * joints; ++j) {
    out.middleCols(3 * j, 3).rowwise() -= origin.transpose();
  }
  return out;
}

}  // namespace

NormalizedData apply_normalization(const DyadDataset& data, const NormalizationStats& stats) {
  if (stats.mean.size() != data.visible || stats.std.size() != data.visible) {
    throw MismatchError("normalization statistics have " + std::to_string(stats.mean.size()) +
                        " dimensions, data has " + std::to_string(data.visible));
  }
  NormalizedData out;
  out.data = data;
  out.stats = stats;
  out.origins.reserve(data.sequences.size());
  const Eigen::RowVectorXd inv_std = stats.std.cwiseInverse().transpose();
  for (auto& seq : out.data.sequences) {
    const Eigen::Vector3d origin = sequence_origin(seq, data.joints);
    out.origins.push_back(origin);
    seq.frames = subtract_origin(seq.frames, origin, data.joints);
    seq.frames.rowwise() -= stats.mean.transpose();
    seq.frames.array().rowwise() *= inv_std.array();
  }
  return out;
}

NormalizedData normalize(const DyadDataset& data) {
  if (data.sequences.empty()) throw DataError("cannot normalize an empty dataset");
  const Index dv = data.visible;
  Vector sum = Vector::Zero(dv);
  double count = 0.0;
  std::vector<RowMatrix> centered;
  centered.reserve(data.sequences.size());
  for (const auto& seq : data.sequences) {
    centered.push_back(subtract_origin(seq.frames, sequence_origin(seq, data.joints), data.joints));
    sum += centered.back().colwise().sum().transpose();
    count += static_cast<double>(seq.length());
  }
  if (count == 0.0) throw DataError("cannot normalize sequences without frames");
  NormalizationStats stats;
  stats.mean = sum / count;
  Vector sq = Vector::Zero(dv);
  for (const auto& frames : centered) {
    sq += (frames.rowwise() - stats.mean.transpose()).array().square().colwise().sum().matrix().transpose();
  }
  stats.std = (sq / count).cwiseSqrt();
  stats.floored.assign(static_cast<std::size_t>(dv), false);
  for (Index i = 0; i < dv; ++i) {
    if (!(stats.std[i] >= kStdFloor)) {
      stats.std[i] = kStdFloor;
      stats.floored[static_cast<std::size_t>(i)] = true;
    }
  }
  return apply_normalization(data, stats);
}

RowMatrix denormalize(const Eigen::Ref<const RowMatrix>& frames, const NormalizationStats& stats,
                      const Eigen::Vector3d& origin, Index joints) {
  if (frames.cols() != stats.mean.size()) {
    throw MismatchError("frame width does not match normalization statistics");
  }
  RowMatrix out = frames;
  out.array().rowwise() *= stats.std.transpose().array();
  out.rowwise() += stats.mean.transpose();
  if (joints > 0) {
    for (Index j = 0; j < 2 * joints; ++j) out.middleCols(3 * j, 3).rowwise() += origin.transpose();
  }
  return out;
}

WindowedDataset::WindowedDataset(std::shared_ptr<const DyadDataset> data, Index history)
    : data_(std::move(data)), history_(history) {
  if (history_ < 0) throw ValueError("history order must be >= 0");
  for (std::size_t s = 0; s < data_->sequences.size(); ++s) {
    const auto& seq = data_->sequences[s];
    if (seq.length() <= history_) {
      throw DataError("sequence '" + seq.id + "' has " + std::to_string(seq.length()) +
                      " frames; needs at least " + std::to_string(history_ + 1));
    }
    for (Index t = history_; t < seq.length(); ++t) items_.push_back(WindowRef{s, t, seq.label});
  }
}

Vector WindowedDataset::frame(std::size_t item) const {
  const auto& ref = items_.at(item);
  return data_->sequences[ref.sequence].frames.row(ref.t).transpose();
}

HistoryWindow WindowedDataset::history_window(std::size_t item) const {
  const auto& ref = items_.at(item);
  const auto& frames = data_->sequences[ref.sequence].frames;
  return HistoryWindow::from_frames(frames.middleRows(ref.t - history_, history_));
}

void WindowedDataset::gather(const std::vector<std::size_t>& items, Matrix& visible,
                             Matrix& history) const {
  const Index dv = data_->visible;
  const Index hsize = history_ * dv;
  visible.resize(static_cast<Index>(items.size()), dv);
  history.resize(static_cast<Index>(items.size()), hsize);
  for (std::size_t r = 0; r < items.size(); ++r) {
    const auto& ref = items_.at(items[r]);
    const auto& frames = data_->sequences[ref.sequence].frames;
    const Index row = static_cast<Index>(r);
    visible.row(row) = frames.row(ref.t);
    if (hsize > 0) {
      // Row-major storage makes the n preceding frames one contiguous block.
      history.row(row) = Eigen::Map<const Eigen::RowVectorXd>(frames.row(ref.t - history_).data(), hsize);
    }
  }
}

WindowedDataset window(const DyadDataset& data, Index history) {
  return WindowedDataset(std::make_shared<const DyadDataset>(data), history);
}

void SynthConfig::validate() const {
  if (coupling.empty()) throw ValueError("at least one coupling level is required");
  for (const double rho : coupling) {
    if (!(rho >= 0.0 && rho <= 1.0)) throw ValueError("coupling levels must lie in [0, 1]");
  }
  if (samples_per_class < 1) throw ValueError("samples per class must be >= 1");
  if (joints < 1) throw ValueError("joints must be >= 1");
  if (lag < 0 || history < 0) throw ValueError("lag and history must be >= 0");
  if (frames <= lag + history) throw ValueError("frames must exceed lag + history");
  if (noise_std < 0.0) throw ValueError("noise std must be >= 0");
}

namespace {

/// Per-coordinate trajectories: sinusoid at `omega` plus a smoothed random walk.
RowMatrix smooth_motion(Index frames, Index dims, double omega, Rng& rng) {
  std::uniform_real_distribution<double> amp(0.5, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> step(0.0, 0.1);
  RowMatrix out(frames, dims);
  for (Index d = 0; d < dims; ++d) {
    const double a = amp(rng);
    const double phi = phase(rng);
    double walk = 0.0;
    double smooth = 0.0;
    for (Index t = 0; t < frames; ++t) {
      walk = 0.95 * walk + step(rng);
      smooth = 0.8 * smooth + 0.2 * walk;
      out(t, d) = a * std::sin(omega * static_cast<double>(t) + phi) + smooth;
    }
  }
  return out;
}

}  // namespace

DyadDataset synthesize(const SynthConfig& cfg) {
  cfg.validate();
  DyadDataset data;
  data.joints = cfg.joints;
  data.visible = 6 * cfg.joints;
  data.frame_rate = 30.0;
  static const char* kDefaultNames[] = {"low", "medium", "high"};
  for (std::size_t c = 0; c < cfg.coupling.size(); ++c) {
    data.label_names.push_back(cfg.coupling.size() == 3 ? kDefaultNames[c]
                                                         : "class" + std::to_string(c));
  }
  const Index width = 3 * cfg.joints;
  const Index lag = cfg.lag;
  // Joint layout relative to the root (shared by both actors).
  Vector layout(width);
  for (Index j = 0; j < cfg.joints; ++j) {
    layout.segment<3>(3 * j) << 0.15 * static_cast<double>(j), 0.3 * static_cast<double>(j), 0.0;
  }
  std::size_t index = 0;
  for (std::size_t c = 0; c < cfg.coupling.size(); ++c) {
    const double rho = cfg.coupling[c];
    for (Index i = 0; i < cfg.samples_per_class; ++i, ++index) {
      Rng rng = substream(cfg.seed, "synth", index);
      std::uniform_real_distribution<double> tempo_jitter(0.8, 1.2);
      std::uniform_real_distribution<double> offset(-1.0, 1.0);
      std::normal_distribution<double> noise(0.0, 1.0);
      const double omega_a = cfg.tempo * tempo_jitter(rng);
      const double omega_i = cfg.tempo * tempo_jitter(rng);
      const Eigen::RowVector3d scene(offset(rng), offset(rng), offset(rng));
      Eigen::RowVectorXd base(width);
      for (Index j = 0; j < cfg.joints; ++j) {
        base.segment<3>(3 * j) = scene + layout.segment<3>(3 * j).transpose();
      }
      // Actor A runs `lag` frames ahead so that A_{t-lag} exists for t = 0.
      RowMatrix a = smooth_motion(cfg.frames + lag, width, omega_a, rng);
      RowMatrix ind = smooth_motion(cfg.frames, width, omega_i, rng);
      a.rowwise() += base;
      ind.rowwise() += base;

      DyadSequence seq;
      seq.id = "synth-" + std::to_string(c) + "-" + std::to_string(i);
      seq.label = static_cast<Index>(c);
      seq.frames.resize(cfg.frames, data.visible);
      for (Index t = 0; t < cfg.frames; ++t) {
        for (Index d = 0; d < width; ++d) {
          const double a_now = a(t + lag, d);
          const double a_lagged = a(t, d);
          seq.frames(t, d) = a_now + cfg.noise_std * noise(rng);
          seq.frames(t, width + d) =
              rho * a_lagged + (1.0 - rho) * ind(t, d) + cfg.noise_std * noise(rng);
        }
      }
      data.sequences.push_back(std::move(seq));
    }
  }
  data.metadata["generator"] = "synthetic-dyad";
  return data;
}

double lag_cross_correlation(const DyadSequence& seq, Index joints, Index lag) {
  const Index width = 3 * joints;
  const Index n = seq.length() - lag;
  if (n < 2) throw ValueError("sequence too short for the requested lag");
  double total = 0.0;
  for (Index d = 0; d < width; ++d) {
    const Vector x = seq.frames.col(d).head(n);
    const Vector y = seq.frames.col(width + d).segment(lag, n);
    const Vector xc = x.array() - x.mean();
    const Vector yc = y.array() - y.mean();
    const double denom = std::sqrt(xc.squaredNorm() * yc.squaredNorm());
    total += denom > 0.0 ? xc.dot(yc) / denom : 0.0;
  }
  return total / static_cast<double>(width);
}

std::vector<Fold> kfold_split(const DyadDataset& data, Index k, std::uint64_t seed) {
  if (k < 2) throw ValueError("k-fold split needs k >= 2");
  if (static_cast<Index>(data.sequences.size()) < k) {
    throw DataError("k-fold split needs at least " + std::to_string(k) + " sequences, have " +
                    std::to_string(data.sequences.size()));
  }
  std::map<Index, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < data.sequences.size(); ++i) {
    by_label[data.sequences[i].label.value_or(-1)].push_back(i);
  }
  Rng rng = substream(seed, "folds");
  std::vector<std::size_t> order;
  for (auto& [label, members] : by_label) {
    std::shuffle(members.begin(), members.end(), rng);
    order.insert(order.end(), members.begin(), members.end());
  }
  std::vector<Fold> folds(static_cast<std::size_t>(k));
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const std::size_t f = pos % static_cast<std::size_t>(k);
    for (std::size_t g = 0; g < folds.size(); ++g) {
      (g == f ? folds[g].test : folds[g].train).push_back(order[pos]);
    }
  }
  for (auto& fold : folds) {
    std::sort(fold.train.begin(), fold.train.end());
    std::sort(fold.test.begin(), fold.test.end());
  }
  return folds;
}

}  // namespace dcrbm
