#pragma once

#include <optional>
#include <vector>

#include "dcrbm/models.hpp"

namespace dcrbm {

/// true = observed (clamped) visible dimension.
struct ClampMask {
  std::vector<bool> clamped;

  static ClampMask none(Index visible);
  /// Clamps dimensions [offset, offset + count).
  static ClampMask range(Index visible, Index offset, Index count);

  Index size() const { return static_cast<Index>(clamped.size()); }
  bool any() const;
  Index free_count() const;
  bool operator[](Index i) const { return clamped[static_cast<std::size_t>(i)]; }
};

inline constexpr Index kDefaultGibbsIters = 30;

struct GeneratedSequence {
  RowMatrix frames;          ///< T_gen x Dv
  RowMatrix hidden_probs;    ///< T_gen x Dh, last Gibbs sweep per frame
};

/// Gibbs alternation for one frame: sample h ~ p(h | v, y, hist), set v to the
/// visible mean, reset clamped dims; repeated `iters` times starting from the
/// newest history frame (or the dynamic visible bias when n = 0).
/// `hidden_out`, when given, receives the final hidden probabilities.
Vector gibbs_frame(const DcrbmParams& p, const HistoryWindow& hist, std::optional<Index> label,
                   const ClampMask& mask, const std::optional<Vector>& observed, Index iters,
                   Rng& rng, Vector* hidden_out = nullptr);

/// Autoregressive rollout given only the label and `seed_frames` (n x Dv).
GeneratedSequence generate_full(const DcrbmParams& p, std::optional<Index> label,
                                const Eigen::Ref<const RowMatrix>& seed_frames, Index length,
                                Index iters, Rng& rng);

/// Rollout with the masked dimensions pinned to `observed` (T_gen x Dv) at
/// every Gibbs iteration. An empty mask with an empty stream reduces to
/// generate_full; `length` is only consulted in that case.
GeneratedSequence generate_partial(const DcrbmParams& p, std::optional<Index> label,
                                   const Eigen::Ref<const RowMatrix>& observed,
                                   const Eigen::Ref<const RowMatrix>& seed_frames,
                                   const ClampMask& mask, Index iters, Rng& rng,
                                   Index length = 0);

}  // namespace dcrbm
