#include "dcrbm/checkpoint.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dcrbm/error.hpp"

namespace dcrbm {
namespace {

using nlohmann::json;

json tensor_to_json(const Matrix& m) {
  json values = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) values.push_back(m(r, c));
  }
  return json{{"shape", {m.rows(), m.cols()}}, {"values", std::move(values)}};
}

json vector_to_json(const Vector& v) {
  json values = json::array();
  for (Index i = 0; i < v.size(); ++i) values.push_back(v[i]);
  return json{{"shape", {v.size()}}, {"values", std::move(values)}};
}

Matrix tensor_from_json(const json& doc, const std::string& name, Index rows, Index cols) {
  const auto& t = doc.at(name);
  const auto shape = t.at("shape").get<std::vector<Index>>();
  if (shape.size() != 2 || shape[0] != rows || shape[1] != cols) {
    throw MismatchError("checkpoint tensor '" + name + "' has unexpected shape");
  }
  const auto& values = t.at("values");
  if (static_cast<Index>(values.size()) != rows * cols) {
    throw DataError("checkpoint tensor '" + name + "' has the wrong number of values");
  }
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) m(r, c) = values[static_cast<std::size_t>(r * cols + c)].get<double>();
  }
  return m;
}

Vector vector_from_json(const json& t, const std::string& name, Index size) {
  const auto shape = t.at("shape").get<std::vector<Index>>();
  if (shape.size() != 1 || shape[0] != size) {
    throw MismatchError("checkpoint vector '" + name + "' has unexpected shape");
  }
  const auto values = t.at("values").get<std::vector<double>>();
  if (static_cast<Index>(values.size()) != size) {
    throw DataError("checkpoint vector '" + name + "' has the wrong number of values");
  }
  return Eigen::Map<const Vector>(values.data(), size);
}

}  // namespace

json checkpoint_to_json(const Checkpoint& ckpt) {
  const auto& p = ckpt.params;
  const auto& d = p.dims;
  json doc;
  doc["version"] = kCheckpointVersion;
  doc["dims"] = {{"visible", d.visible},
                 {"hidden", d.hidden},
                 {"labels", d.labels},
                 {"history", d.history}};
  doc["visible_unit"] = to_string(d.unit);
  doc["joints"] = ckpt.joints;
  doc["label_names"] = ckpt.label_names;
  doc["params"] = {{"a", vector_to_json(p.a)}, {"b", vector_to_json(p.b)},
                   {"s", vector_to_json(p.s)}, {"W", tensor_to_json(p.W)},
                   {"U", tensor_to_json(p.U)}, {"A", tensor_to_json(p.A)},
                   {"B", tensor_to_json(p.B)}};
  if (ckpt.normalization) {
    json floored = json::array();
    for (const bool f : ckpt.normalization->floored) floored.push_back(f);
    doc["normalization"] = {{"mean", vector_to_json(ckpt.normalization->mean)},
                            {"std", vector_to_json(ckpt.normalization->std)},
                            {"floored", std::move(floored)},
                            {"origin", "midpoint of both actors' root joints at frame 1"}};
  } else {
    doc["normalization"] = nullptr;
  }
  doc["metadata"] = ckpt.metadata;
  return doc;
}

Checkpoint checkpoint_from_json(const json& doc) {
  try {
    if (doc.at("version").get<std::string>() != kCheckpointVersion) {
      throw DataError("unsupported checkpoint version '" + doc.at("version").get<std::string>() + "'");
    }
    Checkpoint ckpt;
    ModelDims d;
    const auto& dims = doc.at("dims");
    d.visible = dims.at("visible").get<Index>();
    d.hidden = dims.at("hidden").get<Index>();
    d.labels = dims.at("labels").get<Index>();
    d.history = dims.at("history").get<Index>();
    d.unit = visible_unit_from_string(doc.at("visible_unit").get<std::string>());
    d.validate();
    auto& p = ckpt.params;
    p.dims = d;
    const auto& params = doc.at("params");
    p.a = vector_from_json(params.at("a"), "a", d.visible);
    p.b = vector_from_json(params.at("b"), "b", d.hidden);
    p.s = vector_from_json(params.at("s"), "s", d.labels);
    p.W = tensor_from_json(params, "W", d.visible, d.hidden);
    p.U = tensor_from_json(params, "U", d.hidden, d.labels);
    p.A = tensor_from_json(params, "A", d.history_size(), d.visible);
    p.B = tensor_from_json(params, "B", d.history_size(), d.hidden);
    p.validate();
    ckpt.joints = doc.at("joints").get<Index>();
    ckpt.label_names = doc.at("label_names").get<std::vector<std::string>>();
    const auto& norm = doc.at("normalization");
    if (!norm.is_null()) {
      NormalizationStats stats;
      stats.mean = vector_from_json(norm.at("mean"), "mean", d.visible);
      stats.std = vector_from_json(norm.at("std"), "std", d.visible);
      stats.floored = norm.at("floored").get<std::vector<bool>>();
      ckpt.normalization = std::move(stats);
    }
    ckpt.metadata = doc.value("metadata", json::object());
    return ckpt;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("invalid checkpoint: ") + e.what());
  }
}

void write_file_atomic(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << text;
    if (!out) throw DataError("failed writing '" + path + "'");
  }
  std::filesystem::rename(tmp, path);
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  write_file_atomic(path, checkpoint_to_json(ckpt).dump(1) + "\n");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("checkpoint '" + path + "' is not valid JSON: " + e.what());
  }
  return checkpoint_from_json(doc);
}

std::string checkpoint_id(const Checkpoint& ckpt) {
  const std::string text = checkpoint_to_json(ckpt).at("params").dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (const char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace dcrbm
