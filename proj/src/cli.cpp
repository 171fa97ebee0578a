#include "dcrbm/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>

#include <CLI11.hpp>
#include <json.hpp>

#include "dcrbm/checkpoint.hpp"
#include "dcrbm/data.hpp"
#include "dcrbm/error.hpp"
#include "dcrbm/eval.hpp"
#include "dcrbm/generation.hpp"
#include "dcrbm/sequence_io.hpp"
#include "dcrbm/training.hpp"

namespace dcrbm::cli {

namespace {

using nlohmann::json;

class VerificationFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// --- config file -----------------------------------------------------------

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// key=value lines; '#' comments, blank lines and [section] headers skipped.
std::vector<std::pair<std::string, std::string>> read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file '" + path + "'");
  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("config line needs key=value", number);
    std::string key = trim(line.substr(0, eq));
    std::replace(key.begin(), key.end(), '_', '-');
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    entries.emplace_back(std::move(key), std::move(value));
  }
  return entries;
}

bool given_on_command_line(const std::vector<std::string>& args, const std::string& key) {
  const std::string flag = "--" + key;
  const std::string negated = "--no-" + key;
  return std::any_of(args.begin(), args.end(), [&](const std::string& a) {
    return a == flag || a.rfind(flag + "=", 0) == 0 || a == negated;
  });
}

// Removes --config from the arguments and appends the file's settings that
// the command line does not already set.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::optional<std::string> path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i),
                 args.begin() + static_cast<std::ptrdiff_t>(i + 2));
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }
  if (!path) return args;
  const std::vector<std::string> given = args;
  for (const auto& [key, value] : read_config(*path)) {
    if (!given_on_command_line(given, key)) args.push_back("--" + key + "=" + value);
  }
  return args;
}

// --- option groups ---------------------------------------------------------

struct ModelOptions {
  Index hidden = 50;
  std::string unit = "gaussian";
};

json to_json(const ModelOptions& m) { return {{"hidden", m.hidden}, {"unit", m.unit}}; }

json to_json(const SynthConfig& c) {
  return {{"coupling", c.coupling}, {"samples_per_class", c.samples_per_class},
          {"frames", c.frames},     {"joints", c.joints},
          {"lag", c.lag},           {"noise_std", c.noise_std},
          {"tempo", c.tempo},       {"seed", c.seed},
          {"history", c.history}};
}

void add_train_options(CLI::App* app, TrainConfig& cfg) {
  app->add_option("--lr", cfg.learning_rate, "Learning rate")->capture_default_str();
  app->add_option("--lr-decay", cfg.lr_decay, "Final-to-initial learning-rate ratio")
      ->capture_default_str();
  app->add_option("--momentum", cfg.momentum)->capture_default_str();
  app->add_option("--momentum-start", cfg.momentum_start_epoch, "First epoch with momentum")
      ->capture_default_str();
  app->add_option("--weight-decay", cfg.weight_decay)->capture_default_str();
  app->add_option("--cd-steps", cfg.cd_steps, "Gibbs steps per CD update")->capture_default_str();
  app->add_option("--epochs", cfg.epochs)->capture_default_str();
  app->add_option("--batch-size", cfg.batch_size)->capture_default_str();
  app->add_option("--history", cfg.history, "History order n (frames)")->capture_default_str();
  app->add_flag("--resample-labels,!--no-resample-labels", cfg.resample_labels,
                "Re-draw labels in the negative phase");
  app->add_flag("--sample-visible", cfg.sample_visible,
                "Sample visibles in the negative phase instead of using means");
}

void add_model_options(CLI::App* app, ModelOptions& m) {
  app->add_option("--hidden", m.hidden, "Hidden units")->capture_default_str();
  app->add_option("--unit", m.unit, "Visible units")
      ->check(CLI::IsMember({"gaussian", "binary"}))
      ->capture_default_str();
}

void add_synth_options(CLI::App* app, SynthConfig& c) {
  app->add_option("--coupling", c.coupling, "Coupling level per class")->delimiter(',');
  app->add_option("--samples-per-class", c.samples_per_class)->capture_default_str();
  app->add_option("--frames", c.frames)->capture_default_str();
  app->add_option("--joints", c.joints, "Joints per actor")->capture_default_str();
  app->add_option("--lag", c.lag, "Follower delay (frames)")->capture_default_str();
  app->add_option("--noise", c.noise_std)->capture_default_str();
  app->add_option("--tempo", c.tempo, "Base tempo (rad/frame)")->capture_default_str();
}

json base_config(const std::string& command, std::uint64_t seed) {
  return {{"command", command}, {"seed", seed}};
}

std::string dump(const json& doc) { return doc.dump(2) + "\n"; }

Aggregation aggregation_from_string(const std::string& name) {
  if (name == "majority") return Aggregation::majority_vote;
  if (name == "mean-posterior") return Aggregation::mean_posterior;
  throw ValueError("unknown aggregation '" + name + "'");
}

// Applies the checkpoint's normalization (if any) and checks compatibility.
DyadDataset prepare_for_model(const Checkpoint& ckpt, const DyadDataset& raw) {
  if (raw.visible != ckpt.params.dims.visible) {
    throw MismatchError("data has " + std::to_string(raw.visible) + " visible dimensions, model has " +
                        std::to_string(ckpt.params.dims.visible));
  }
  if (ckpt.params.dims.discriminative() && raw.label_count() != 0 &&
      raw.label_count() != ckpt.params.dims.labels) {
    throw MismatchError("data has " + std::to_string(raw.label_count()) + " classes, model has " +
                        std::to_string(ckpt.params.dims.labels));
  }
  if (raw.joints != ckpt.joints) throw MismatchError("data and model disagree on joints per actor");
  if (!ckpt.normalization) return raw;
  return apply_normalization(raw, *ckpt.normalization).data;
}

// --- verification suites ---------------------------------------------------

struct Report {
  std::ostream& out;
  bool ok = true;

  void line(const std::string& name, bool pass, double value, double tol) {
    ok = ok && pass;
    out << (pass ? "PASS " : "FAIL ") << name << ": " << value << " (tolerance " << tol << ")\n";
  }
};

DcrbmParams random_dcrbm(const ModelDims& dims, double scale, Rng& rng) {
  std::normal_distribution<double> normal(0.0, scale);
  DcrbmParams p = DcrbmParams::zeros(dims);
  auto fill = [&](auto& m) {
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  };
  fill(p.a), fill(p.b), fill(p.W);
  if (dims.discriminative()) fill(p.s), fill(p.U);
  if (dims.conditional()) fill(p.A), fill(p.B);
  return p;
}

json verify_posterior(Index trials, std::uint64_t seed) {
  Rng rng = substream(seed, "verify-posterior");
  std::uniform_int_distribution<Index> pick_dv(1, 4), pick_dh(1, 10), pick_k(2, 3), pick_n(0, 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst_posterior = 0.0, worst_hidden = 0.0;
  for (Index t = 0; t < trials; ++t) {
    const ModelDims dims{pick_dv(rng), pick_dh(rng), pick_k(rng), 2 * pick_n(rng),
                         t % 2 == 0 ? VisibleUnit::gaussian : VisibleUnit::binary};
    const DcrbmParams p = random_dcrbm(dims, 0.7, rng);
    Vector v(dims.visible), flat(dims.history_size());
    for (Index i = 0; i < v.size(); ++i) {
      v[i] = dims.unit == VisibleUnit::binary ? double(rng() & 1U) : normal(rng);
    }
    for (Index i = 0; i < flat.size(); ++i) flat[i] = normal(rng);
    const HistoryWindow hist(flat, dims.visible);
    const JointTable table = enumerate_joint(p, v, hist);
    const LabelDist closed = dcrbm_posterior(v, hist, p);
    worst_posterior = std::max(worst_posterior,
                               (closed.probs - table.label_marginal().probs).cwiseAbs().maxCoeff());
    for (Index k = 0; k < dims.labels; ++k) {
      worst_hidden = std::max(worst_hidden, (dcrbm_h_given_vy(v, k, hist, p) -
                                             table.hidden_marginal(k)).cwiseAbs().maxCoeff());
    }
  }
  return {{"trials", trials}, {"max_posterior_deviation", worst_posterior},
          {"max_hidden_deviation", worst_hidden}};
}

json verify_gradient(Index trials, std::uint64_t seed, double eps) {
  Rng rng = substream(seed, "verify-gradient");
  std::uniform_int_distribution<Index> pick_dv(2, 4), pick_dh(2, 3);
  double worst = 0.0;
  for (Index t = 0; t < trials; ++t) {
    const ModelDims dims{pick_dv(rng), pick_dh(rng), 0, 0, VisibleUnit::binary};
    const DcrbmParams p = random_dcrbm(dims, 0.5, rng);
    Matrix data(6, dims.visible);
    for (Index i = 0; i < data.size(); ++i) data.data()[i] = double(rng() & 1U);
    worst = std::max(worst, grad_check(p, data, eps));
  }
  return {{"trials", trials}, {"eps", eps}, {"max_relative_error", worst}};
}

// --- subcommands -----------------------------------------------------------

struct Common {
  std::uint64_t seed = 0;
  bool verbose = false;
};

int cmd_synth(const SynthConfig& in, const Common& common, const std::string& out) {
  SynthConfig cfg = in;
  cfg.seed = common.seed;
  DyadDataset data = synthesize(cfg);
  json config = base_config("synth", common.seed);
  config["synth"] = to_json(cfg);
  data.metadata["config"] = config.dump();
  save_sequences(out, data);
  std::cout << "wrote " << data.sequences.size() << " sequences to " << out << "\n";
  return kSuccess;
}

int cmd_train(const std::string& data_path, const std::optional<std::string>& heldout_path,
              const ModelOptions& model, TrainConfig cfg, const Common& common,
              const std::string& out, std::string report_path) {
  cfg.seed = common.seed;
  cfg.validate();
  const DyadDataset raw = load_sequences(data_path);
  NormalizedData norm = normalize(raw);
  const WindowedDataset windows = window(norm.data, cfg.history);
  bool labelled = raw.label_count() >= 2;
  for (const auto& s : raw.sequences) labelled = labelled && s.label.has_value();
  const ModelDims dims{raw.visible, model.hidden, labelled ? raw.label_count() : 0, cfg.history,
                       visible_unit_from_string(model.unit)};
  dims.validate();

  std::optional<WindowedDataset> heldout;
  if (heldout_path) {
    const DyadDataset held = load_sequences(*heldout_path);
    if (held.visible != raw.visible) throw MismatchError("held-out data width differs from training data");
    heldout = window(apply_normalization(held, norm.stats).data, cfg.history);
  }
  Rng init = substream(common.seed, "init");
  Checkpoint ckpt;
  ckpt.params = DcrbmParams::initialize(dims, init);
  const TrainReport report = train(ckpt.params, windows, cfg, heldout ? &*heldout : nullptr);
  if (common.verbose) {
    for (const auto& e : report.epochs) {
      std::cerr << "epoch " << e.epoch << " recon " << e.reconstruction_error;
      if (e.heldout_accuracy) std::cerr << " heldout " << *e.heldout_accuracy;
      std::cerr << "\n";
    }
  }
  ckpt.normalization = norm.stats;
  ckpt.joints = raw.joints;
  ckpt.label_names = labelled ? raw.label_names : std::vector<std::string>{};
  json config = base_config("train", common.seed);
  config["data"] = data_path;
  config["heldout"] = heldout_path ? json(*heldout_path) : json();
  config["model"] = to_json(model);
  config["train"] = to_json(cfg);
  ckpt.metadata["config"] = config;
  save_checkpoint(out, ckpt);

  json doc = to_json(report);
  doc["config"] = config;
  doc["checkpoint_id"] = checkpoint_id(ckpt);
  if (report_path.empty()) report_path = out + ".report.json";
  write_file_atomic(report_path, dump(doc));
  std::cout << "trained " << report.epochs.size() << " epochs on " << windows.size()
            << " windows; checkpoint " << out << "\n";
  return kSuccess;
}

int cmd_classify(const std::string& model_path, const std::string& data_path,
                 const std::string& aggregation, const Common& common, const std::string& out) {
  const Checkpoint ckpt = load_checkpoint(model_path);
  const DyadDataset data = prepare_for_model(ckpt, load_sequences(data_path));
  const Metrics m = classify_dataset(ckpt.params, window(data, ckpt.params.dims.history),
                                     aggregation_from_string(aggregation));
  json doc = to_json(m);
  json config = base_config("classify", common.seed);
  config["model"] = model_path;
  config["checkpoint_id"] = checkpoint_id(ckpt);
  config["data"] = data_path;
  config["aggregation"] = aggregation;
  doc["config"] = config;
  write_file_atomic(out, dump(doc));
  std::cout << "sequence accuracy " << m.accuracy << " over " << m.total() << " sequences\n";
  return kSuccess;
}

int cmd_generate(const std::string& model_path, const std::string& data_path, std::size_t index,
                 std::optional<Index> label, Index length, const std::string& setting_name,
                 Index iters, const Common& common, const std::string& out) {
  const Checkpoint ckpt = load_checkpoint(model_path);
  const DyadDataset raw = load_sequences(data_path);
  const DyadDataset data = prepare_for_model(ckpt, raw);
  if (index >= data.sequences.size()) throw DataError("sequence index out of range");
  const DyadSequence& seq = data.sequences[index];
  const DcrbmParams& p = ckpt.params;
  const Index n = p.dims.history;
  const GenSetting setting = gen_setting_from_string(setting_name);
  if (length < 1) throw ValueError("length must be >= 1");
  const Index needed = n + (setting == GenSetting::partial ? length : 0);
  if (seq.length() < std::max<Index>(needed, n)) {
    throw DataError("sequence '" + seq.id + "' has " + std::to_string(seq.length()) +
                    " frames, needs " + std::to_string(needed));
  }
  if (p.dims.discriminative()) {
    if (!label) label = seq.label;
    if (!label) throw ValueError("labelled model needs --label for an unlabelled sequence");
    if (*label < 0 || *label >= p.dims.labels) throw ValueError("label out of range");
  } else {
    label.reset();
  }
  Rng rng = substream(common.seed, "generation");
  const RowMatrix seed_frames = seq.frames.topRows(n);
  GeneratedSequence gen;
  if (setting == GenSetting::partial) {
    gen = generate_partial(p, label, seq.frames.middleRows(n, length), seed_frames,
                           partial_mask(p.dims.visible), iters, rng);
  } else {
    gen = generate_full(p, label, seed_frames, length, iters, rng);
  }

  DyadDataset result;
  result.visible = data.visible;
  result.joints = data.joints;
  result.frame_rate = data.frame_rate;
  result.label_names = data.label_names;
  RowMatrix frames = gen.frames;
  if (ckpt.normalization) {
    const Eigen::Vector3d origin = sequence_origin(raw.sequences[index], data.joints);
    frames = denormalize(frames, *ckpt.normalization, origin, data.joints);
  }
  result.sequences.push_back({seq.id + "-generated", std::move(frames), label});
  json config = base_config("generate", common.seed);
  config["model"] = model_path;
  config["checkpoint_id"] = checkpoint_id(ckpt);
  config["data"] = data_path;
  config["sequence"] = index;
  config["label"] = label ? json(*label) : json();
  config["length"] = length;
  config["setting"] = setting_name;
  config["iters"] = iters;
  result.metadata["config"] = config.dump();
  save_sequences(out, result);
  std::cout << "generated " << length << " frames (" << setting_name << ") to " << out << "\n";
  return kSuccess;
}

int cmd_eval_gen(const std::string& model_path, const std::string& data_path,
                 const std::vector<Index>& lengths, const std::string& settings, Index iters,
                 std::size_t max_instances, std::optional<Index> only_class, const Common& common,
                 const std::string& out, const std::string& csv) {
  const Checkpoint ckpt = load_checkpoint(model_path);
  const DyadDataset data = prepare_for_model(ckpt, load_sequences(data_path));
  std::vector<GenSetting> modes;
  if (settings == "both" || settings == "partial") modes.push_back(GenSetting::partial);
  if (settings == "both" || settings == "full") modes.push_back(GenSetting::full);

  // Groups: one per class level present, or everything for unlabelled data.
  std::map<std::optional<Index>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < data.sequences.size(); ++i) {
    const auto& l = data.sequences[i].label;
    if (only_class && l != only_class) continue;
    groups[l].push_back(i);
  }
  if (groups.empty()) throw DataError("no sequences to evaluate");
  const Vector mean_frame = Vector::Zero(data.visible);
  std::vector<GenErrorCurve> curves;
  for (const auto& [level, indices] : groups) {
    const DyadDataset group = subset(data, indices);
    for (const GenSetting mode : modes) {
      GenEvalOptions opts;
      opts.lengths = lengths;
      opts.setting = mode;
      opts.iters = iters;
      opts.seed = common.seed;
      opts.max_instances = max_instances;
      if (ckpt.params.dims.discriminative() && !level) {
        throw ValueError("labelled model needs labelled sequences");
      }
      curves.push_back(gen_error_curve(ckpt.params, group, opts));
      curves.push_back(baseline_error(group, opts, ckpt.params.dims.history,
                                      BaselineMode::mean_pose, mean_frame));
      if (ckpt.params.dims.history > 0) {
        curves.push_back(baseline_error(group, opts, ckpt.params.dims.history,
                                        BaselineMode::persistence, mean_frame));
      }
    }
  }
  json config = base_config("eval-gen", common.seed);
  config["model"] = model_path;
  config["checkpoint_id"] = checkpoint_id(ckpt);
  config["data"] = data_path;
  config["lengths"] = lengths;
  config["setting"] = settings;
  config["iters"] = iters;
  config["max_instances"] = max_instances;
  config["class"] = only_class ? json(*only_class) : json();
  json doc{{"config", config}, {"curves", json::array()}};
  for (const auto& c : curves) doc["curves"].push_back(to_json(c));
  write_file_atomic(out, dump(doc));
  if (!csv.empty()) write_file_atomic(csv, curves_to_csv(curves));
  for (const auto& c : curves) {
    std::cout << c.method << " " << to_string(c.setting) << " class "
              << (c.class_level ? std::to_string(*c.class_level) : std::string("all"));
    for (std::size_t i = 0; i < c.lengths.size(); ++i) {
      std::cout << "  " << c.lengths[i] << ":" << c.mean[i];
    }
    std::cout << "\n";
  }
  return kSuccess;
}

int cmd_cv(const std::optional<std::string>& data_path, const SynthConfig& synth,
           const ModelOptions& model, TrainConfig cfg, Index folds, const std::string& aggregation,
           const Common& common, const std::string& out) {
  DyadDataset data;
  json config = base_config("cv", common.seed);
  if (data_path) {
    data = load_sequences(*data_path);
    config["data"] = *data_path;
  } else {
    SynthConfig sc = synth;
    sc.seed = common.seed;
    sc.history = cfg.history;
    data = synthesize(sc);
    config["synth"] = to_json(sc);
  }
  cfg.seed = common.seed;
  CvOptions opts;
  opts.folds = folds;
  opts.hidden = model.hidden;
  opts.unit = visible_unit_from_string(model.unit);
  opts.train = cfg;
  opts.seed = common.seed;
  opts.aggregation = aggregation_from_string(aggregation);
  config["folds"] = folds;
  config["aggregation"] = aggregation;
  config["model"] = to_json(model);
  config["train"] = to_json(cfg);
  const CvResult cv = cross_validate(data, opts);
  json doc = to_json(cv);
  doc["config"] = config;
  if (!out.empty()) write_file_atomic(out, dump(doc));
  for (const auto& f : cv.folds) {
    std::cout << "fold " << f.metrics.fold << " accuracy " << f.metrics.accuracy << " window "
              << f.metrics.window_accuracy.value_or(0.0) << "\n";
  }
  std::cout << "mean accuracy " << cv.mean_accuracy << " (std " << cv.std_accuracy << ")\n";
  return kSuccess;
}

int cmd_verify(Index trials, Index grad_trials, const Common& common, const std::string& out) {
  if (trials < 1 || grad_trials < 1) throw ValueError("trial counts must be >= 1");
  constexpr double kPosteriorTol = 1e-9;
  constexpr double kGradientTol = 1e-4;
  constexpr double kEps = 1e-5;
  const json posterior = verify_posterior(trials, common.seed);
  const json gradient = verify_gradient(grad_trials, common.seed, kEps);
  Report report{std::cout};
  report.line("posterior vs enumeration", posterior["max_posterior_deviation"] < kPosteriorTol,
              posterior["max_posterior_deviation"], kPosteriorTol);
  report.line("hidden conditionals vs enumeration",
              posterior["max_hidden_deviation"] < kPosteriorTol, posterior["max_hidden_deviation"],
              kPosteriorTol);
  report.line("gradient vs finite differences", gradient["max_relative_error"] < kGradientTol,
              gradient["max_relative_error"], kGradientTol);
  if (!out.empty()) {
    json doc{{"config", base_config("verify", common.seed)},
             {"posterior", posterior},
             {"gradient", gradient},
             {"passed", report.ok}};
    doc["config"]["trials"] = trials;
    doc["config"]["grad_trials"] = grad_trials;
    write_file_atomic(out, dump(doc));
  }
  if (!report.ok) throw VerificationFailure("verification failed");
  return kSuccess;
}

int dispatch(const std::vector<std::string>& raw_args) {
  const std::vector<std::string> args = expand_config(raw_args);
  CLI::App app{"Discriminative conditional RBM toolkit for dyadic interaction sequences"};
  app.name(args.empty() ? "dcrbm" : args[0]);
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", common.seed, "Seed for every random stream")->capture_default_str();
    sub->add_flag("-v,--verbose", common.verbose);
    sub->add_option("--config", "key=value settings file; flags win");
  };

  SynthConfig synth;
  TrainConfig train_cfg;
  ModelOptions model;
  std::string out, data_path, model_path, report_path, csv, aggregation = "majority";
  std::string setting = "partial", settings = "both";
  std::optional<std::string> heldout_path, cv_data;
  std::vector<Index> lengths{16, 50, 100, 200, 300};
  Index length = 100, iters = kDefaultGibbsIters, folds = 5, trials = 100, grad_trials = 20;
  std::size_t index = 0, max_instances = 50;
  std::optional<Index> label, only_class;

  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic dyad dataset");
  add_common(synth_cmd);
  add_synth_options(synth_cmd, synth);
  synth_cmd->add_option("--out", out, "Output sequence file")->required();

  auto* train_cmd = app.add_subcommand("train", "Fit a model and write a checkpoint");
  add_common(train_cmd);
  add_model_options(train_cmd, model);
  add_train_options(train_cmd, train_cfg);
  train_cmd->add_option("--data", data_path, "Training sequences")->required();
  train_cmd->add_option("--heldout", heldout_path, "Held-out sequences for per-epoch accuracy");
  train_cmd->add_option("--out", out, "Checkpoint path")->required();
  train_cmd->add_option("--report", report_path, "Training report (default <out>.report.json)");

  auto* classify_cmd = app.add_subcommand("classify", "Classify sequences and write metrics");
  add_common(classify_cmd);
  classify_cmd->add_option("--model", model_path)->required();
  classify_cmd->add_option("--data", data_path)->required();
  classify_cmd->add_option("--aggregation", aggregation, "Window-to-sequence aggregation")
      ->check(CLI::IsMember({"majority", "mean-posterior"}))
      ->capture_default_str();
  classify_cmd->add_option("--out", out, "Metrics document")->required();

  auto* generate_cmd = app.add_subcommand("generate", "Generate one sequence");
  add_common(generate_cmd);
  generate_cmd->add_option("--model", model_path)->required();
  generate_cmd->add_option("--data", data_path, "Source of seed frames and observed actor")
      ->required();
  generate_cmd->add_option("--sequence", index, "Sequence index in --data")->capture_default_str();
  generate_cmd->add_option("--label", label, "Class to condition on (default: the sequence's)");
  generate_cmd->add_option("--length", length)->capture_default_str();
  generate_cmd->add_option("--setting", setting)
      ->check(CLI::IsMember({"partial", "full"}))
      ->capture_default_str();
  generate_cmd->add_option("--iters", iters, "Gibbs alternations per frame")->capture_default_str();
  generate_cmd->add_option("--out", out, "Output sequence file")->required();

  auto* eval_cmd = app.add_subcommand("eval-gen", "Generation error curves and baselines");
  add_common(eval_cmd);
  eval_cmd->add_option("--model", model_path)->required();
  eval_cmd->add_option("--data", data_path)->required();
  eval_cmd->add_option("--lengths", lengths)->delimiter(',');
  eval_cmd->add_option("--setting", settings)
      ->check(CLI::IsMember({"partial", "full", "both"}))
      ->capture_default_str();
  eval_cmd->add_option("--iters", iters)->capture_default_str();
  eval_cmd->add_option("--max-instances", max_instances)->capture_default_str();
  eval_cmd->add_option("--class", only_class, "Evaluate one class level only");
  eval_cmd->add_option("--out", out, "Curves document")->required();
  eval_cmd->add_option("--csv", csv, "Flat table of the curves");

  auto* cv_cmd = app.add_subcommand("cv", "k-fold cross validation");
  add_common(cv_cmd);
  add_model_options(cv_cmd, model);
  add_train_options(cv_cmd, train_cfg);
  add_synth_options(cv_cmd, synth);
  cv_cmd->add_option("--data", cv_data, "Sequences (default: the synthetic benchmark)");
  cv_cmd->add_option("--folds", folds)->capture_default_str();
  cv_cmd->add_option("--aggregation", aggregation)
      ->check(CLI::IsMember({"majority", "mean-posterior"}))
      ->capture_default_str();
  cv_cmd->add_option("--out", out, "Results document");

  auto* verify_cmd = app.add_subcommand("verify", "Exact-oracle checks");
  add_common(verify_cmd);
  verify_cmd->add_option("--trials", trials, "Random models for the posterior check")
      ->capture_default_str();
  verify_cmd->add_option("--grad-trials", grad_trials)->capture_default_str();
  verify_cmd->add_option("--out", out, "Report document");

  try {
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kSuccess : kUsageError;
  }

  if (*synth_cmd) return cmd_synth(synth, common, out);
  if (*train_cmd) {
    return cmd_train(data_path, heldout_path, model, train_cfg, common, out, report_path);
  }
  if (*classify_cmd) return cmd_classify(model_path, data_path, aggregation, common, out);
  if (*generate_cmd) {
    return cmd_generate(model_path, data_path, index, label, length, setting, iters, common, out);
  }
  if (*eval_cmd) {
    return cmd_eval_gen(model_path, data_path, lengths, settings, iters, max_instances, only_class,
                        common, out, csv);
  }
  if (*cv_cmd) return cmd_cv(cv_data, synth, model, train_cfg, folds, aggregation, common, out);
  if (*verify_cmd) return cmd_verify(trials, grad_trials, common, out);
  return kUsageError;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  try {
    return dispatch(args);
  } catch (const VerificationFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kVerificationFailure;
  } catch (const MismatchError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kMismatchError;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternalError;
  }
}

}  // namespace dcrbm::cli
