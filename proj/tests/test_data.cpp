#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "dcrbm/checkpoint.hpp"
#include "dcrbm/data.hpp"
#include "dcrbm/error.hpp"
#include "dcrbm/sequence_io.hpp"

using namespace dcrbm;

namespace {

DyadDataset tiny_dataset() {
  DyadDataset d;
  d.visible = 2;
  d.label_names = {"low", "high"};
  RowMatrix a(4, 2), b(3, 2);
  a << 0, 1, 2, 3, 4, 5, 6, 7;
  b << 10, 11, 12, 13, 14, 15;
  d.sequences.push_back({"a", a, 0});
  d.sequences.push_back({"b", b, 1});
  return d;
}

}  // namespace

TEST_CASE("dataset validation") {
  DyadDataset d = tiny_dataset();
  d.validate();
  d.sequences[0].label = 2;
  CHECK_THROWS_AS(d.validate(), DataError);
  d = tiny_dataset();
  d.sequences[1].frames(0, 0) = std::nan("");
  CHECK_THROWS_AS(d.validate(), DataError);
  d = tiny_dataset();
  d.sequences[1].frames = RowMatrix::Zero(3, 3);
  CHECK_THROWS_AS(d.validate(), DataError);
}

TEST_CASE("windows cover t = n .. T-1 and index the frames directly") {
  const DyadDataset d = tiny_dataset();
  const WindowedDataset w = window(d, 2);
  CHECK(w.size() == 2 + 1);
  CHECK(w.items()[0].t == 2);
  CHECK(w.items()[2].sequence == 1);
  CHECK(w.frame(1)[1] == 7);
  const HistoryWindow h = w.history_window(1);
  CHECK(h.frame(0)[0] == 2);  // oldest = frame 1
  CHECK(h.frame(1)[1] == 5);
  Matrix v, hist;
  w.gather({0, 2}, v, hist);
  CHECK(v(1, 0) == 14);
  CHECK(hist.row(1) == Eigen::RowVector4d(10, 11, 12, 13));
  CHECK_THROWS_AS(window(d, 3), DataError);
  CHECK(window(d, 0).size() == 7);
}

TEST_CASE("normalization z-scores every dimension") {
  SynthConfig sc;
  sc.samples_per_class = 3;
  sc.seed = 2;
  const DyadDataset raw = synthesize(sc);
  const NormalizedData n = normalize(raw);
  Vector sum = Vector::Zero(raw.visible), sq = Vector::Zero(raw.visible);
  double count = 0;
  for (const auto& s : n.data.sequences) {
    sum += s.frames.colwise().sum().transpose();
    sq += s.frames.array().square().colwise().sum().matrix().transpose();
    count += double(s.length());
  }
  CHECK((sum / count).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(((sq / count).array() - 1.0).abs().maxCoeff() < 1e-10);
  CHECK(n.stats.floored_count() == 0);
}

TEST_CASE("origin is the midpoint of both roots at frame 0") {
  DyadDataset d;
  d.visible = 12;
  d.joints = 2;
  RowMatrix f = RowMatrix::Zero(2, 12);
  f.row(0).segment(0, 3) << 2, 4, 6;   // actor A root
  f.row(0).segment(6, 3) << 4, 8, 10;  // actor B root
  d.sequences.push_back({"s", f, std::nullopt});
  const Eigen::Vector3d o = sequence_origin(d.sequences[0], 2);
  CHECK(o == Eigen::Vector3d(3, 6, 8));
  CHECK(actor_span(d, 1).offset == 6);
  CHECK(actor_span(d, 0).width == 6);
}

TEST_CASE("constant dimensions get the std floor and round trip") {
  DyadDataset d = tiny_dataset();
  d.sequences[0].frames.col(1).setConstant(3.0);
  d.sequences[1].frames.col(1).setConstant(3.0);
  const NormalizedData n = normalize(d);
  CHECK(n.stats.floored_count() == 1);
  CHECK(n.stats.std[1] == kStdFloor);
  for (std::size_t i = 0; i < d.sequences.size(); ++i) {
    const RowMatrix back = denormalize(n.data.sequences[i].frames, n.stats, n.origins[i], 0);
    CHECK((back - d.sequences[i].frames).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("fixed statistics are reused and checked") {
  const DyadDataset d = tiny_dataset();
  const NormalizedData n = normalize(d);
  const NormalizedData again = apply_normalization(d, n.stats);
  CHECK(again.data.sequences[1].frames == n.data.sequences[1].frames);
  DyadDataset wide = d;
  wide.visible = 3;
  for (auto& s : wide.sequences) s.frames = RowMatrix::Zero(s.length(), 3);
  CHECK_THROWS_AS(apply_normalization(wide, n.stats), MismatchError);
}

TEST_CASE("full coupling without noise copies the lagged leader") {
  SynthConfig sc;
  sc.coupling = {1.0};
  sc.noise_std = 0.0;
  sc.samples_per_class = 2;
  sc.frames = 60;
  const DyadDataset d = synthesize(sc);
  for (const auto& s : d.sequences) {
    const RowMatrix& f = s.frames;
    const Index L = sc.lag;
    CHECK((f.block(L, 6, 60 - L, 6) - f.block(0, 0, 60 - L, 6)).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("synthesis is seeded and labelled by coupling level") {
  SynthConfig sc;
  sc.samples_per_class = 4;
  sc.seed = 5;
  const DyadDataset a = synthesize(sc), b = synthesize(sc);
  CHECK(a.visible == 12);
  CHECK(a.sequences.size() == 12);
  CHECK(a.label_count() == 3);
  CHECK(a.sequences[7].frames == b.sequences[7].frames);
  int per_label[3] = {0, 0, 0};
  for (const auto& s : a.sequences) per_label[*s.label]++;
  CHECK(per_label[2] == 4);
  sc.seed = 6;
  CHECK(synthesize(sc).sequences[0].frames != a.sequences[0].frames);
  sc.frames = 10;
  CHECK_THROWS_AS(synthesize(sc), ValueError);
}

TEST_CASE("lag cross-correlation separates the coupling levels") {
  // Threshold classifier fitted on one half, scored on the other.
  SynthConfig sc;
  sc.samples_per_class = 40;
  sc.seed = 8;
  const DyadDataset d = synthesize(sc);
  std::vector<std::vector<double>> fit(3);
  std::vector<std::pair<double, Index>> held;
  for (std::size_t i = 0; i < d.sequences.size(); ++i) {
    const double r = lag_cross_correlation(d.sequences[i], d.joints, sc.lag);
    if (i % 2 == 0) {
      fit[std::size_t(*d.sequences[i].label)].push_back(r);
    } else {
      held.emplace_back(r, *d.sequences[i].label);
    }
  }
  auto mean = [](const std::vector<double>& xs) {
    double s = 0;
    for (double x : xs) s += x;
    return s / double(xs.size());
  };
  const double m0 = mean(fit[0]), m1 = mean(fit[1]), m2 = mean(fit[2]);
  CHECK(m0 < m1);
  CHECK(m1 < m2);
  int correct = 0;
  for (const auto& [r, label] : held) {
    const Index pred = r < (m0 + m1) / 2 ? 0 : (r < (m1 + m2) / 2 ? 1 : 2);
    if (pred == label) ++correct;
  }
  const double acc = double(correct) / double(held.size());
  MESSAGE("lag-correlation accuracy " << acc);
  CHECK(acc > 0.9);
}

TEST_CASE("stratified folds partition the sequences") {
  SynthConfig sc;
  sc.samples_per_class = 10;
  const DyadDataset d = synthesize(sc);
  const std::vector<Fold> folds = kfold_split(d, 5, 1);
  CHECK(folds.size() == 5);
  std::multiset<std::size_t> seen;
  for (const auto& f : folds) {
    CHECK(f.test.size() == 6);
    CHECK(f.train.size() == 24);
    int per_label[3] = {0, 0, 0};
    for (std::size_t i : f.test) {
      seen.insert(i);
      per_label[*d.sequences[i].label]++;
      CHECK(std::find(f.train.begin(), f.train.end(), i) == f.train.end());
    }
    CHECK(per_label[0] == 2);
    CHECK(per_label[2] == 2);
  }
  CHECK(seen.size() == 30);
  CHECK(std::set<std::size_t>(seen.begin(), seen.end()).size() == 30);
  CHECK_THROWS(kfold_split(d, 1, 0));
  CHECK(kfold_split(d, 5, 1)[3].test == folds[3].test);
}

TEST_CASE("sequence files round trip exactly") {
  SynthConfig sc;
  sc.samples_per_class = 2;
  sc.frames = 40;
  DyadDataset d = synthesize(sc);
  d.metadata["note"] = "x";
  d.sequences[1].label.reset();
  std::stringstream ss;
  write_sequences(ss, d);
  const std::string text = ss.str();
  const DyadDataset back = read_sequences(ss);
  CHECK(back.visible == d.visible);
  CHECK(back.joints == d.joints);
  CHECK(back.label_names == d.label_names);
  CHECK(back.metadata == d.metadata);
  CHECK_FALSE(back.sequences[1].label.has_value());
  for (std::size_t i = 0; i < d.sequences.size(); ++i) {
    CHECK(back.sequences[i].frames == d.sequences[i].frames);
    CHECK(back.sequences[i].id == d.sequences[i].id);
  }
  std::stringstream again;
  write_sequences(again, back);
  CHECK(again.str() == text);
}

TEST_CASE("malformed sequence files report the line") {
  const std::string good =
      "dyadseq-v1\n"
      "header visible=2 joints=0 rate=30 sequences=1 labels=a,b\n"
      "sequence id=s frames=2 label=1\n"
      "1 2\n"
      "3 4\n"
      "end\n";
  std::istringstream ok(good);
  CHECK(read_sequences(ok).sequences[0].frames(1, 1) == 4);

  std::string bad = good;
  bad.replace(bad.find("3 4"), 3, "3 4 5");
  std::istringstream in(bad);
  try {
    read_sequences(in);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 5);
    CHECK(std::string(e.what()).find("s") != std::string::npos);
  }
  std::istringstream wrong_magic("dyadseq-v0\n");
  CHECK_THROWS_AS(read_sequences(wrong_magic), ParseError);
  std::string truncated = good.substr(0, good.find("end"));
  std::istringstream trunc(truncated);
  CHECK_THROWS_AS(read_sequences(trunc), ParseError);
  CHECK_THROWS_AS(load_sequences("/nonexistent/file.dyad"), DataError);
}

TEST_CASE("checkpoints round trip exactly") {
  const ModelDims dims{12, 5, 3, 2, VisibleUnit::gaussian};
  Rng rng(3);
  Checkpoint c;
  c.params = DcrbmParams::initialize(dims, rng);
  c.params.a[0] = 0.1 + 0.2;
  SynthConfig sc;
  sc.samples_per_class = 1;
  sc.frames = 30;
  c.normalization = normalize(synthesize(sc)).stats;
  c.joints = 2;
  c.label_names = {"low", "medium", "high"};
  c.metadata["config"] = {{"seed", 3}};
  const nlohmann::json doc = checkpoint_to_json(c);
  CHECK(doc["version"] == kCheckpointVersion);
  const Checkpoint back = checkpoint_from_json(doc);
  CHECK(back.params.dims == dims);
  CHECK(back.params.W == c.params.W);
  CHECK(back.params.a == c.params.a);
  CHECK(back.params.B == c.params.B);
  CHECK(back.normalization->std == c.normalization->std);
  CHECK(back.label_names == c.label_names);
  CHECK(checkpoint_id(back) == checkpoint_id(c));
  nlohmann::json wrong = doc;
  wrong["version"] = "dcrbm-v0";
  CHECK_THROWS_AS(checkpoint_from_json(wrong), DataError);
  wrong = doc;
  wrong["params"]["W"]["values"].erase(0);
  CHECK_THROWS_AS(checkpoint_from_json(wrong), DataError);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/model.json"), DataError);
}
