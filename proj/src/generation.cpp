#include "dcrbm/generation.hpp"

#include <algorithm>

#include "dcrbm/error.hpp"

namespace dcrbm {

ClampMask ClampMask::none(Index visible) {
  return ClampMask{std::vector<bool>(static_cast<std::size_t>(visible), false)};
}

ClampMask ClampMask::range(Index visible, Index offset, Index count) {
  if (offset < 0 || count < 0 || offset + count > visible) {
    throw ValueError("clamp range outside the visible layer");
  }
  ClampMask m = none(visible);
  for (Index i = offset; i < offset + count; ++i) m.clamped[static_cast<std::size_t>(i)] = true;
  return m;
}

bool ClampMask::any() const {
  return std::find(clamped.begin(), clamped.end(), true) != clamped.end();
}

Index ClampMask::free_count() const {
  return size() - static_cast<Index>(std::count(clamped.begin(), clamped.end(), true));
}

namespace {

void apply_clamp(Vector& v, const ClampMask& mask, const Vector& observed) {
  for (Index i = 0; i < v.size(); ++i) {
    if (mask[i]) v[i] = observed[i];
  }
}

void check_seed(const DcrbmParams& p, const Eigen::Ref<const RowMatrix>& seed_frames) {
  if (seed_frames.rows() != p.dims.history ||
      (seed_frames.rows() > 0 && seed_frames.cols() != p.dims.visible)) {
    throw ShapeError("seed needs exactly " + std::to_string(p.dims.history) + " frames of width " +
                     std::to_string(p.dims.visible));
  }
}

GeneratedSequence rollout(const DcrbmParams& p, std::optional<Index> label,
                          const RowMatrix* observed, const Eigen::Ref<const RowMatrix>& seed_frames,
                          const ClampMask& mask, Index length, Index iters, Rng& rng) {
  if (length < 1) throw ValueError("generated length must be >= 1");
  check_seed(p, seed_frames);
  HistoryWindow hist = p.dims.history > 0 ? HistoryWindow::from_frames(seed_frames)
                                          : HistoryWindow(0, p.dims.visible);
  GeneratedSequence out;
  out.frames.resize(length, p.dims.visible);
  out.hidden_probs.resize(length, p.dims.hidden);
  Vector hidden;
  for (Index t = 0; t < length; ++t) {
    std::optional<Vector> obs;
    if (observed != nullptr) obs = Vector(observed->row(t).transpose());
    const Vector frame = gibbs_frame(p, hist, label, mask, obs, iters, rng, &hidden);
    out.frames.row(t) = frame.transpose();
    out.hidden_probs.row(t) = hidden.transpose();
    hist.push(frame);
  }
  return out;
}

}  // namespace

Vector gibbs_frame(const DcrbmParams& p, const HistoryWindow& hist, std::optional<Index> label,
                   const ClampMask& mask, const std::optional<Vector>& observed, Index iters,
                   Rng& rng, Vector* hidden_out) {
  if (iters < 1) throw ValueError("gibbs iterations must be >= 1");
  if (mask.size() != p.dims.visible) throw ShapeError("clamp mask width does not match the model");
  if (mask.any() != observed.has_value()) {
    throw ValueError("observed values must be supplied exactly when some dimension is clamped");
  }
  if (observed && observed->size() != p.dims.visible) {
    throw ShapeError("observed frame width does not match the model");
  }
  if (p.dims.discriminative() && !label) throw ValueError("labelled model needs a label");
  const std::optional<Index> used_label = p.dims.discriminative() ? label : std::nullopt;
  const DynamicBiases db = dynamic_biases(p, hist, used_label);

  Vector v = hist.frames() > 0 ? Vector(hist.frame(hist.frames() - 1)) : db.c;
  if (observed) apply_clamp(v, mask, *observed);
  Vector probs;
  for (Index it = 0; it < iters; ++it) {
    probs = (db.d + p.W.transpose() * v).unaryExpr([](double x) { return sigmoid(x); });
    const Vector h = it + 1 < iters ? Vector(sample_bernoulli(probs, rng)) : probs;
    v = db.c + p.W * h;
    if (p.dims.unit == VisibleUnit::binary) v = v.unaryExpr([](double x) { return sigmoid(x); });
    if (observed) apply_clamp(v, mask, *observed);
  }
  if (hidden_out != nullptr) *hidden_out = probs;
  return v;
}

GeneratedSequence generate_full(const DcrbmParams& p, std::optional<Index> label,
                                const Eigen::Ref<const RowMatrix>& seed_frames, Index length,
                                Index iters, Rng& rng) {
  return rollout(p, label, nullptr, seed_frames, ClampMask::none(p.dims.visible), length, iters,
                 rng);
}

GeneratedSequence generate_partial(const DcrbmParams& p, std::optional<Index> label,
                                   const Eigen::Ref<const RowMatrix>& observed,
                                   const Eigen::Ref<const RowMatrix>& seed_frames,
                                   const ClampMask& mask, Index iters, Rng& rng, Index length) {
  if (mask.size() != p.dims.visible) throw ShapeError("clamp mask width does not match the model");
  if (!mask.any()) {
    if (observed.size() > 0) {
      if (observed.cols() != p.dims.visible) throw ShapeError("observed stream width mismatch");
      length = observed.rows();
    }
    return generate_full(p, label, seed_frames, length, iters, rng);
  }
  if (observed.rows() < 1 || observed.cols() != p.dims.visible) {
    throw ShapeError("observed stream must be T_gen x " + std::to_string(p.dims.visible));
  }
  const RowMatrix stream = observed;
  return rollout(p, label, &stream, seed_frames, mask, observed.rows(), iters, rng);
}

}  // namespace dcrbm
