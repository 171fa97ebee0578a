#pragma once

// Model checkpoint document ("dcrbm-v1"): dims, visible unit, normalization
// statistics and every parameter tensor as a flat row-major array with shape.

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dcrbm/data.hpp"
#include "dcrbm/models.hpp"

namespace dcrbm {

inline constexpr const char* kCheckpointVersion = "dcrbm-v1";

struct Checkpoint {
  DcrbmParams params;
  std::optional<NormalizationStats> normalization;
  Index joints = 0;
  std::vector<std::string> label_names;
  nlohmann::json metadata = nlohmann::json::object();  ///< resolved config, seed, ...
};

nlohmann::json checkpoint_to_json(const Checkpoint& ckpt);
/// Throws DataError on a malformed or wrong-version document.
Checkpoint checkpoint_from_json(const nlohmann::json& doc);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

/// Short content hash of the parameter tensors (hex).
std::string checkpoint_id(const Checkpoint& ckpt);

/// Writes `text` to `path` via a temporary file and rename.
void write_file_atomic(const std::string& path, const std::string& text);

}  // namespace dcrbm
