#include "connectome/pipeline.hpp"

#include <charconv>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "connectome/error.hpp"
#include "connectome/features.hpp"
#include "connectome/parcellation.hpp"
#include "connectome/saliency.hpp"
#include "connectome/synth.hpp"
#include "parallel.hpp"

namespace connectome {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

std::string read_text(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), Errc::io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), Errc::io, "cannot write " + path.string());
  os << text;
  require(static_cast<bool>(os), Errc::io, "write failed for " + path.string());
}

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    fail(Errc::format, what + ": " + e.what());
  }
}

std::uint64_t resolve_seed(const RunContext& ctx, std::optional<std::uint64_t> from_config) {
  if (ctx.seed) return *ctx.seed;
  if (from_config) return *from_config;
  return env_seed(0);
}

RunRecord start_record(const RunContext& ctx, const std::string& command) {
  RunRecord r;
  r.command = command;
  r.command_line = ctx.command_line;
  return r;
}

}  // namespace

// Run records -----------------------------------------------------------------

std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string RunRecord::to_json() const {
  json j;
  j["command"] = command;
  j["command_line"] = command_line;
  j["config_digest"] = config_digest;
  json s = json::object();
  for (const auto& [k, v] : seeds) s[k] = v;
  j["seeds"] = s;
  json t = json::object();
  for (const auto& [k, v] : timings) t[k] = v;
  j["timings_s"] = t;
  j["outputs"] = outputs;
  return j.dump(2) + "\n";
}

void write_run_record(const fs::path& path, const RunRecord& record) { write_text(path, record.to_json()); }

std::uint64_t env_seed(std::uint64_t fallback) {
  const char* v = std::getenv("CONNECTOME_SEED");
  if (!v || !*v) return fallback;
  const std::string s(v);
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  require(ec == std::errc() && p == s.data() + s.size(), Errc::invalid_argument,
          "CONNECTOME_SEED is not an unsigned integer: " + s);
  return out;
}

// synth-gen -------------------------------------------------------------------

RunRecord cmd_synth_gen(const RunContext& ctx, const std::string& config_json, const fs::path& out) {
  Stopwatch sw;
  auto r = start_record(ctx, "synth-gen");
  SynthConfig cfg;
  std::optional<std::uint64_t> file_seed;
  if (!config_json.empty()) {
    cfg = SynthConfig::from_json(config_json);
    if (parse_json(config_json, "synth config").contains("seed")) file_seed = cfg.seed;
  }
  cfg.seed = resolve_seed(ctx, file_seed);
  cfg.validate();
  const auto truth = generate(cfg, out, ctx.jobs);
  r.config_digest = fnv1a_hex(cfg.to_json());
  r.seeds = {{"synth", cfg.seed}};
  r.timings = {{"generate", sw.lap()}};
  r.outputs = {(out / "manifest.json").string(), (out / "truth.json").string(), (out / "mask.cvol").string(),
               (out / "planted_mask.cvol").string(), (out / "bold").string()};
  write_run_record(out / "run.json", r);
  return r;
}

// parcellate ------------------------------------------------------------------

RunRecord cmd_parcellate(const RunContext& ctx, const ParcellateOptions& opt) {
  Stopwatch sw;
  auto r = start_record(ctx, "parcellate");
  require(!opt.scales.empty(), Errc::invalid_argument, "no region counts given");
  const auto mask = read_mask(opt.mask);
  std::vector<std::uint64_t> seeds = opt.seeds;
  if (seeds.empty()) {
    require(opt.count >= 1, Errc::invalid_argument, "parcellation count must be >= 1");
    const auto base = resolve_seed(ctx, std::nullopt);
    for (int k = 0; k < opt.count; ++k) seeds.push_back(base + static_cast<std::uint64_t>(k));
  }
  for (int R : opt.scales) estimate_radius(mask, R);  // fail early on infeasible counts

  struct Unit {
    int regions;
    std::uint64_t seed;
  };
  std::vector<Unit> units;
  for (int R : opt.scales)
    for (auto s : seeds) units.push_back({R, s});

  fs::create_directories(opt.out);
  std::vector<std::string> ids(units.size());
  detail::parallel_ranges(units.size(), ctx.jobs, [&](std::size_t b, std::size_t e) {
    for (auto i = b; i < e; ++i) {
      SamplingConfig sc;
      sc.target_regions = units[i].regions;
      sc.seed = units[i].seed;
      const auto p = sample_parcellation(mask, sc);
      if (opt.check) {
        const auto c = check_parcellation(mask, p);
        if (!c.ok()) {
          std::string msg = "parcellation R=" + std::to_string(sc.target_regions) + " seed=" +
                            std::to_string(sc.seed) + " failed validation";
          for (std::size_t k = 0; k < std::min<std::size_t>(c.problems.size(), 5); ++k) msg += "; " + c.problems[k];
          fail(Errc::internal, msg);
        }
      }
      ids[i] = parcellation_id(sc.target_regions, sc.seed);
      write_volume(opt.out / (ids[i] + ".cvol"), p.labels);
      write_parcellation_sidecar(opt.out / (ids[i] + ".json"), p, ids[i]);
    }
  });

  json cfg{{"mask", opt.mask.string()}, {"scales", opt.scales}, {"seeds", seeds}, {"check", opt.check}};
  r.config_digest = fnv1a_hex(cfg.dump());
  for (const auto& u : units) r.seeds.emplace_back(parcellation_id(u.regions, u.seed), u.seed);
  r.timings = {{"parcellate", sw.lap()}};
  for (const auto& id : ids) r.outputs.push_back((opt.out / (id + ".cvol")).string());
  write_run_record(opt.out / "run.json", r);
  return r;
}

// extract ---------------------------------------------------------------------

RunRecord cmd_extract(const RunContext& ctx, const ExtractOptions& opt) {
  Stopwatch sw;
  auto r = start_record(ctx, "extract");
  const auto manifest = read_manifest(opt.manifest);
  const auto labels = read_labels(opt.parcellation);
  require(labels.meta == manifest.grid, Errc::shape,
          "parcellation grid differs from the manifest grid: " + opt.parcellation.string());
  std::string pid = opt.parcellation.stem().string();
  auto sidecar = opt.parcellation;
  sidecar.replace_extension(".json");
  if (fs::exists(sidecar)) {
    const auto j = parse_json(read_text(sidecar), sidecar.string());
    if (j.contains("parcellation_id")) pid = j.at("parcellation_id").get<std::string>();
  }
  std::optional<MaskVolume> mask;
  if (opt.mask) mask = read_mask(*opt.mask);
  const auto fsx = extract_features(manifest, labels, opt.kind, pid, mask ? &*mask : nullptr, ctx.jobs,
                                    opt.scrub_threshold);
  r.timings.emplace_back("extract", sw.lap());
  write_features(opt.out, fsx);
  r.timings.emplace_back("write", sw.lap());

  json cfg{{"manifest", opt.manifest.string()},
           {"parcellation", opt.parcellation.string()},
           {"parcellation_id", pid},
           {"features", to_string(opt.kind)},
           {"mask", opt.mask ? opt.mask->string() : ""},
           {"scrub_threshold", opt.scrub_threshold}};
  r.config_digest = fnv1a_hex(cfg.dump());
  r.outputs = {(opt.out / "features.json").string()};
  write_run_record(opt.out / "run.json", r);
  return r;
}

// train -----------------------------------------------------------------------

namespace {

const char* optimizer_name(nn::OptimizerKind k) { return k == nn::OptimizerKind::adam ? "adam" : "sgd_momentum"; }

nn::OptimizerKind optimizer_from(const std::string& s) {
  if (s == "adam") return nn::OptimizerKind::adam;
  if (s == "sgd_momentum" || s == "sgd") return nn::OptimizerKind::sgd_momentum;
  fail(Errc::invalid_argument, "unknown optimizer: " + s);
}

template <typename T>
void take(const json& j, const char* key, T& dst) {
  if (!j.contains(key)) return;
  try {
    dst = j.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(Errc::format, std::string("config key ") + key + ": " + e.what());
  }
}

}  // namespace

TrainSettings default_train_settings(Family family, Task task) {
  TrainSettings s;
  s.family = family;
  s.task = task;
  s.train = default_train_config(family, task);
  switch (family) {
    case Family::ridge:
      s.alpha_grid = ridge_alpha_grid();
      break;
    case Family::fcn:
      s.layers = fcn_specs(task);
      break;
    case Family::cnn3d:
      s.layers = cnn3d_specs(task);
      break;
    case Family::brainnet:
      s.layers = brainnet_specs(task);
      break;
  }
  return s;
}

std::string TrainSettings::to_json() const {
  json j;
  j["family"] = connectome::to_string(family);
  j["task"] = connectome::to_string(task);
  j["seed"] = train.seed;
  if (family == Family::ridge) {
    j["alpha_grid"] = alpha_grid;
    j["alpha_folds"] = alpha_folds;
  } else {
    j["batch_size"] = train.batch_size;
    j["max_epochs"] = train.max_epochs;
    j["patience"] = train.patience;
    j["max_steps"] = train.max_steps;
    j["swa_window"] = train.swa_window;
    j["val_fraction"] = train.val_fraction;
    j["optimizer"] = {{"kind", optimizer_name(train.optimizer.kind)},
                      {"lr", train.optimizer.lr},
                      {"momentum", train.optimizer.momentum},
                      {"beta1", train.optimizer.beta1},
                      {"beta2", train.optimizer.beta2},
                      {"eps", train.optimizer.eps}};
    j["layers"] = json::parse(specs_to_json(layers));
  }
  return j.dump(2) + "\n";
}

TrainSettings train_settings_from_json(Family family, Task task, const std::string& text) {
  auto s = default_train_settings(family, task);
  if (text.empty()) return s;
  const auto j = parse_json(text, "train config");
  require(j.is_object(), Errc::format, "train config must be a JSON object");
  static const std::vector<std::string> common{"family", "task", "seed"};
  static const std::vector<std::string> ridge_keys{"alpha_grid", "alpha_folds"};
  static const std::vector<std::string> net_keys{"batch_size", "max_epochs", "patience", "max_steps",
                                                 "swa_window", "val_fraction", "optimizer", "layers"};
  const auto& allowed = family == Family::ridge ? ridge_keys : net_keys;
  for (const auto& [k, v] : j.items()) {
    const bool ok = std::find(common.begin(), common.end(), k) != common.end() ||
                    std::find(allowed.begin(), allowed.end(), k) != allowed.end();
    require(ok, Errc::format, "unknown train config key for " + std::string(to_string(family)) + ": " + k);
  }
  if (j.contains("family"))
    require(family_from_string(j.at("family").get<std::string>()) == family, Errc::invalid_argument,
            "config family differs from the requested model");
  if (j.contains("task"))
    require(task_from_string(j.at("task").get<std::string>()) == task, Errc::invalid_argument,
            "config task differs from the requested task");
  take(j, "seed", s.train.seed);
  take(j, "alpha_grid", s.alpha_grid);
  take(j, "alpha_folds", s.alpha_folds);
  take(j, "batch_size", s.train.batch_size);
  take(j, "max_epochs", s.train.max_epochs);
  take(j, "patience", s.train.patience);
  take(j, "max_steps", s.train.max_steps);
  take(j, "swa_window", s.train.swa_window);
  take(j, "val_fraction", s.train.val_fraction);
  if (j.contains("optimizer")) {
    const auto& o = j.at("optimizer");
    require(o.is_object(), Errc::format, "optimizer must be an object");
    for (const auto& [k, v] : o.items()) {
      static const std::vector<std::string> keys{"kind", "lr", "momentum", "beta1", "beta2", "eps"};
      require(std::find(keys.begin(), keys.end(), k) != keys.end(), Errc::format, "unknown optimizer key: " + k);
    }
    if (o.contains("kind")) s.train.optimizer.kind = optimizer_from(o.at("kind").get<std::string>());
    take(o, "lr", s.train.optimizer.lr);
    take(o, "momentum", s.train.optimizer.momentum);
    take(o, "beta1", s.train.optimizer.beta1);
    take(o, "beta2", s.train.optimizer.beta2);
    take(o, "eps", s.train.optimizer.eps);
  }
  if (j.contains("layers")) s.layers = specs_from_json(j.at("layers").dump());
  if (family == Family::ridge) {
    require(!s.alpha_grid.empty(), Errc::invalid_argument, "empty alpha grid");
    for (double a : s.alpha_grid) require(a >= 0.0 && std::isfinite(a), Errc::invalid_argument, "alpha must be >= 0");
    require(s.alpha_folds >= 2, Errc::invalid_argument, "alpha_folds must be >= 2");
  } else {
    s.train.validate();
  }
  return s;
}

RunRecord cmd_train(const RunContext& ctx, const TrainOptions& opt) {
  Stopwatch sw;
  auto r = start_record(ctx, "train");
  auto settings = train_settings_from_json(opt.family, opt.task, opt.config_json);
  std::optional<std::uint64_t> file_seed;
  if (!opt.config_json.empty() && parse_json(opt.config_json, "train config").contains("seed"))
    file_seed = settings.train.seed;
  settings.train.seed = resolve_seed(ctx, file_seed);

  const auto features = read_features(opt.features);
  require(features.kind == required_features(opt.family), Errc::invalid_argument,
          std::string(to_string(opt.family)) + " needs " + to_string(required_features(opt.family)) +
              " features, got " + to_string(features.kind));
  require(features.task == opt.task, Errc::invalid_argument,
          std::string("features were extracted for ") + to_string(features.task) + ", not " + to_string(opt.task));
  r.timings.emplace_back("load", sw.lap());

  json history;
  Model model;
  if (opt.family == Family::ridge) {
    const auto X = FeatureMatrix::from(features.data);
    const auto search = ridge_alpha_search(X, features.data.y, opt.task, settings.alpha_grid, settings.alpha_folds,
                                           settings.train.seed);
    auto m = train_ridge(X, features.data.y, opt.task, search.alpha);
    m.parcellation_id = features.parcellation_id;
    history["alpha"] = search.alpha;
    history["alpha_grid"] = search.grid;
    history["cv_scores"] = search.scores;
    history["cv_metric"] = opt.task == Task::classification ? "accuracy" : "rmse";
    model = std::move(m);
  } else {
    NetModel net = build_network(opt.family, features.data.sample_shape, settings.layers, opt.task,
                                 derive_seed(settings.train.seed, 0x696e6974));
    net.parcellation_id = features.parcellation_id;
    const auto h = train(net, features.data, settings.train);
    json epochs = json::array();
    for (const auto& e : h.epochs) {
      json ej{{"epoch", e.epoch}, {"train_loss", e.train_loss}};
      ej["val_loss"] = std::isfinite(e.val_loss) ? json(e.val_loss) : json(nullptr);
      epochs.push_back(ej);
    }
    history["epochs"] = epochs;
    history["steps"] = h.steps;
    history["best_epoch"] = h.best_epoch;
    history["swa_applied"] = h.swa_applied;
    model = std::move(net);
  }
  r.timings.emplace_back("train", sw.lap());

  if (opt.out.has_parent_path()) fs::create_directories(opt.out.parent_path());
  save_checkpoint(opt.out, model);
  history["settings"] = json::parse(settings.to_json());
  history["features"] = opt.features.string();
  history["parcellation_id"] = features.parcellation_id;
  auto hist_path = opt.out;
  hist_path += ".history.json";
  write_text(hist_path, history.dump(2) + "\n");
  r.timings.emplace_back("save", sw.lap());

  r.config_digest = fnv1a_hex(settings.to_json());
  r.seeds = {{"train", settings.train.seed}};
  r.outputs = {opt.out.string(), hist_path.string()};
  auto run_path = opt.out;
  run_path += ".run.json";
  write_run_record(run_path, r);
  return r;
}

// Predictions -------------------------------------------------------------------

std::vector<double> Predictions::metric_input(Metric metric) const {
  if (metric == Metric::accuracy && !classes.empty()) return {classes.begin(), classes.end()};
  return values;
}

std::string Predictions::to_json() const {
  json j;
  j["task"] = connectome::to_string(task);
  j["source"] = source;
  j["parcellation_ids"] = parcellation_ids;
  json subs = json::array();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    json s{{"id", ids[i]}, {"truth", truth[i]}, {"prediction", values[i]}};
    if (!classes.empty()) s["class"] = classes[i];
    subs.push_back(std::move(s));
  }
  j["subjects"] = std::move(subs);
  return j.dump(2) + "\n";
}

Predictions Predictions::from_json(const std::string& text) {
  const auto j = parse_json(text, "predictions");
  Predictions p;
  try {
    p.task = task_from_string(j.at("task").get<std::string>());
    p.source = j.value("source", "");
    if (j.contains("parcellation_ids")) p.parcellation_ids = j.at("parcellation_ids").get<std::vector<std::string>>();
    const auto& subs = j.at("subjects");
    bool any_class = false;
    for (const auto& s : subs) any_class = any_class || s.contains("class");
    for (const auto& s : subs) {
      p.ids.push_back(s.at("id").get<std::string>());
      p.truth.push_back(s.at("truth").get<double>());
      p.values.push_back(s.at("prediction").get<double>());
      if (any_class) p.classes.push_back(s.at("class").get<int>());
    }
  } catch (const json::exception& e) {
    fail(Errc::format, std::string("predictions: ") + e.what());
  }
  for (double v : p.values) require(std::isfinite(v), Errc::format, "predictions: non-finite value");
  return p;
}

void write_predictions(const fs::path& path, const Predictions& p) { write_text(path, p.to_json()); }

Predictions read_predictions(const fs::path& path) {
  try {
    return Predictions::from_json(read_text(path));
  } catch (const Error& e) {
    fail(e.code(), path.string() + ": " + e.what());
  }
}

Predictions predict_features(const fs::path& checkpoint, const fs::path& features_dir) {
  auto model = load_checkpoint(checkpoint);
  const auto features = read_features(features_dir);
  const auto family = family_of(model);
  require(features.kind == required_features(family), Errc::invalid_argument,
          checkpoint.string() + ": " + to_string(family) + " needs " + to_string(required_features(family)) +
              " features, got " + to_string(features.kind));
  require(features.task == task_of(model), Errc::invalid_argument,
          checkpoint.string() + ": model task differs from the features task");
  const auto& pid = parcellation_of(model);
  require(pid.empty() || features.parcellation_id.empty() || pid == features.parcellation_id, Errc::invalid_argument,
          checkpoint.string() + ": trained on parcellation " + pid + ", features use " + features.parcellation_id);
  if (const auto* n = std::get_if<NetModel>(&model))
    require(n->net.input_shape() == features.data.sample_shape, Errc::shape,
            checkpoint.string() + ": input " + nn::shape_string(n->net.input_shape()) + " vs features " +
                nn::shape_string(features.data.sample_shape));
  Predictions p;
  p.task = task_of(model);
  p.source = to_string(family);
  p.parcellation_ids = {pid};
  p.ids = features.data.ids;
  p.truth = features.data.y;
  p.values = predict(model, features.data);
  return p;
}

RunRecord cmd_predict(const RunContext& ctx, const fs::path& checkpoint, const fs::path& features,
                      const fs::path& out) {
  Stopwatch sw;
  auto r = start_record(ctx, "predict");
  write_predictions(out, predict_features(checkpoint, features));
  r.timings = {{"predict", sw.lap()}};
  r.config_digest = fnv1a_hex(json{{"checkpoint", checkpoint.string()}, {"features", features.string()}}.dump());
  r.outputs = {out.string()};
  auto run_path = out;
  run_path += ".run.json";
  write_run_record(run_path, r);
  return r;
}

Predictions fuse(const std::vector<Predictions>& members) {
  require(!members.empty(), Errc::invalid_argument, "ensemble has no members");
  const auto& first = members.front();
  for (const auto& m : members) {
    require(m.task == first.task, Errc::invalid_argument, "ensemble members disagree on the task");
    require(m.ids == first.ids, Errc::invalid_argument, "ensemble members cover different subjects");
    require(m.truth == first.truth, Errc::invalid_argument, "ensemble members disagree on the ground truth");
  }
  Predictions out;
  out.task = first.task;
  out.source = "ensemble";
  out.ids = first.ids;
  out.truth = first.truth;
  std::vector<std::vector<double>> values;
  for (const auto& m : members) {
    values.push_back(m.values);
    out.parcellation_ids.insert(out.parcellation_ids.end(), m.parcellation_ids.begin(), m.parcellation_ids.end());
  }
  if (out.task == Task::classification) {
    out.values = mean_probability(values);
    out.classes = fuse_classification(values);
  } else {
    out.values = fuse_regression(values);
  }
  return out;
}

RunRecord cmd_ensemble_predict(const RunContext& ctx, const std::vector<std::pair<fs::path, fs::path>>& members,
                               const fs::path& out) {
  Stopwatch sw;
  auto r = start_record(ctx, "ensemble-predict");
  require(!members.empty(), Errc::invalid_argument, "ensemble has no members");
  std::vector<Predictions> preds(members.size());
  detail::parallel_ranges(members.size(), ctx.jobs, [&](std::size_t b, std::size_t e) {
    for (auto i = b; i < e; ++i) preds[i] = predict_features(members[i].first, members[i].second);
  });
  write_predictions(out, fuse(preds));
  json cfg = json::array();
  for (const auto& [c, f] : members) cfg.push_back({c.string(), f.string()});
  r.config_digest = fnv1a_hex(cfg.dump());
  r.timings = {{"predict", sw.lap()}};
  r.outputs = {out.string()};
  auto run_path = out;
  run_path += ".run.json";
  write_run_record(run_path, r);
  return r;
}

RunRecord cmd_fuse_predictions(const RunContext& ctx, const std::vector<fs::path>& inputs, const fs::path& out) {
  Stopwatch sw;
  auto r = start_record(ctx, "ensemble-predict");
  std::vector<Predictions> preds;
  json cfg = json::array();
  for (const auto& p : inputs) {
    preds.push_back(read_predictions(p));
    require(preds.back().classes.empty(), Errc::invalid_argument, p.string() + " is already an ensemble");
    cfg.push_back(p.string());
  }
  write_predictions(out, fuse(preds));
  r.config_digest = fnv1a_hex(cfg.dump());
  r.timings = {{"fuse", sw.lap()}};
  r.outputs = {out.string()};
  auto run_path = out;
  run_path += ".run.json";
  write_run_record(run_path, r);
  return r;
}

// evaluate / bootstrap ----------------------------------------------------------

EvalReport evaluate(const Predictions& p) {
  auto rep = evaluate(p.values, p.truth, p.task);
  if (!p.classes.empty()) rep.accuracy = accuracy(p.metric_input(Metric::accuracy), p.truth);
  return rep;
}

std::string report_to_json(const EvalReport& r) {
  json j;
  j["task"] = to_string(r.task);
  j["n"] = r.n;
  if (r.task == Task::classification) {
    j["accuracy"] = r.accuracy;
    j["auc"] = r.auc ? json(*r.auc) : json(nullptr);
    json roc = json::array();
    for (const auto& pt : r.roc) roc.push_back({pt.fpr, pt.tpr});
    j["roc"] = roc;
  } else {
    j["rmse"] = r.rmse;
    j["mae"] = r.mae;
  }
  return j.dump(2) + "\n";
}

std::string report_to_text(const EvalReport& r) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(4);
  os << "n " << r.n << '\n';
  if (r.task == Task::classification) {
    os << "accuracy " << r.accuracy << '\n';
    if (r.auc) os << "auc " << *r.auc << '\n';
  } else {
    os << "rmse " << r.rmse << '\n' << "mae " << r.mae << '\n';
  }
  return os.str();
}

RunRecord cmd_bootstrap(const RunContext& ctx, const BootstrapOptions& opt, BootstrapResult* result) {
  Stopwatch sw;
  auto r = start_record(ctx, "bootstrap");
  const auto a = read_predictions(opt.a);
  const auto b = read_predictions(opt.b);
  require(a.task == b.task, Errc::invalid_argument, "bootstrap inputs disagree on the task");
  require(a.ids == b.ids, Errc::invalid_argument, "bootstrap inputs cover different subjects");
  require(a.truth == b.truth, Errc::invalid_argument, "bootstrap inputs disagree on the ground truth");
  const bool cls_metric = opt.metric == Metric::accuracy || opt.metric == Metric::auc;
  require(cls_metric == (a.task == Task::classification), Errc::invalid_argument,
          std::string("metric ") + to_string(opt.metric) + " does not apply to " + to_string(a.task));
  const auto seed = resolve_seed(ctx, std::nullopt);
  const auto res = bootstrap_compare(a.metric_input(opt.metric), b.metric_input(opt.metric), a.truth, opt.metric,
                                     opt.replicates, seed, ctx.jobs);
  r.timings.emplace_back("bootstrap", sw.lap());

  fs::create_directories(opt.out);
  std::string tsv = "difference\n";
  for (double d : res.differences) {
    char buf[40];
    const auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), d);
    tsv.append(buf, p);
    tsv += '\n';
  }
  write_text(opt.out / "differences.tsv", tsv);
  json s{{"metric", to_string(res.metric)},
         {"a", opt.a.string()},
         {"b", opt.b.string()},
         {"replicates", opt.replicates},
         {"seed", seed},
         {"full_sample_difference", res.full_sample_difference},
         {"fraction_a_worse", res.fraction_a_worse},
         {"redraws", res.redraws}};
  write_text(opt.out / "summary.json", s.dump(2) + "\n");

  r.config_digest = fnv1a_hex(json{{"a", opt.a.string()},
                                   {"b", opt.b.string()},
                                   {"metric", to_string(opt.metric)},
                                   {"replicates", opt.replicates}}
                                  .dump());
  r.seeds = {{"bootstrap", seed}};
  r.timings.emplace_back("write", sw.lap());
  r.outputs = {(opt.out / "differences.tsv").string(), (opt.out / "summary.json").string()};
  write_run_record(opt.out / "run.json", r);
  if (result) *result = res;
  return r;
}

// saliency ------------------------------------------------------------------------

RunRecord cmd_saliency(const RunContext& ctx, const SaliencyOptions& opt) {
  Stopwatch sw;
  auto r = start_record(ctx, "saliency");
  require(!opt.members.empty(), Errc::invalid_argument, "saliency needs at least one checkpoint");

  struct Member {
    NetModel model;
    FeatureSet features;
  };
  std::vector<Member> members;
  for (const auto& [ckpt, fdir] : opt.members) {
    auto m = load_checkpoint(ckpt);
    auto* net = std::get_if<NetModel>(&m);
    require(net && net->family == Family::cnn3d, Errc::invalid_argument, ckpt.string() + " is not a cnn3d model");
    auto f = read_features(fdir);
    require(f.kind == FeatureKind::fingerprint, Errc::invalid_argument, fdir.string() + " holds no fingerprints");
    require(net->net.input_shape() == f.data.sample_shape, Errc::shape,
            ckpt.string() + ": input shape differs from " + fdir.string());
    if (!members.empty()) {
      require(f.grid == members.front().features.grid, Errc::shape, "saliency members use different grids");
      require(f.data.ids == members.front().features.data.ids, Errc::invalid_argument,
              "saliency members cover different subjects");
      require(net->task == members.front().model.task, Errc::invalid_argument, "saliency members disagree on the task");
    }
    members.push_back({std::move(*net), std::move(f)});
  }
  const auto& ref = members.front().features;

  std::vector<std::size_t> rows;
  if (opt.subjects.empty()) {
    for (std::size_t i = 0; i < ref.data.size(); ++i) rows.push_back(i);
  } else {
    for (const auto& id : opt.subjects) {
      const auto it = std::find(ref.data.ids.begin(), ref.data.ids.end(), id);
      require(it != ref.data.ids.end(), Errc::invalid_argument, "unknown subject " + id);
      rows.push_back(static_cast<std::size_t>(it - ref.data.ids.begin()));
    }
  }
  r.timings.emplace_back("load", sw.lap());

  fs::create_directories(opt.out);
  // Networks cache activations, so each worker needs its own copies.
  std::vector<RealVolume> subject_maps(rows.size());
  detail::parallel_ranges(rows.size(), ctx.jobs, [&](std::size_t b, std::size_t e) {
    std::vector<NetModel> local;
    for (const auto& m : members) local.push_back(m.model);
    for (auto k = b; k < e; ++k) {
      std::vector<RealVolume> maps;
      for (std::size_t j = 0; j < members.size(); ++j) {
        const auto& f = members[j].features;
        const auto s = f.data.sample(rows[k]);
        FingerprintVolume fp{f.grid, f.regions, std::vector<float>(s.begin(), s.end())};
        maps.push_back(reduce_saliency(input_gradient(local[j], fp), f.grid, &f.mask));
      }
      subject_maps[k] = ensemble_saliency(maps);
      write_volume(opt.out / (ref.data.ids[rows[k]] + ".cvol"), subject_maps[k]);
    }
  });
  write_volume(opt.out / "mean.cvol", ensemble_saliency(subject_maps));
  r.timings.emplace_back("saliency", sw.lap());

  json cfg = json::array();
  for (const auto& [c, f] : opt.members) cfg.push_back({c.string(), f.string()});
  r.config_digest = fnv1a_hex(json{{"members", cfg}, {"subjects", opt.subjects}}.dump());
  for (auto k : rows) r.outputs.push_back((opt.out / (ref.data.ids[k] + ".cvol")).string());
  r.outputs.push_back((opt.out / "mean.cvol").string());
  write_run_record(opt.out / "run.json", r);
  return r;
}

}  // namespace connectome
