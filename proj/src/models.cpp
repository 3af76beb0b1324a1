#include "connectome/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

#include <json.hpp>

#include "connectome/error.hpp"
#include "connectome/nn/loss.hpp"
#include "connectome/rng.hpp"

namespace connectome {

using nn::LayerSpec;
using nn::Shape;

const char* to_string(Family f) {
  switch (f) {
    case Family::ridge: return "ridge";
    case Family::fcn: return "fcn";
    case Family::cnn3d: return "cnn3d";
    case Family::brainnet: return "brainnet";
  }
  return "?";
}

const char* to_string(FeatureKind k) {
  switch (k) {
    case FeatureKind::fingerprint: return "fingerprint";
    case FeatureKind::matrix: return "matrix";
    case FeatureKind::vector: return "vector";
  }
  return "?";
}

Family family_from_string(const std::string& s) {
  for (auto f : {Family::ridge, Family::fcn, Family::cnn3d, Family::brainnet})
    if (s == to_string(f)) return f;
  fail(Errc::invalid_argument, "unknown model family '" + s + "'");
}

FeatureKind feature_kind_from_string(const std::string& s) {
  for (auto k : {FeatureKind::fingerprint, FeatureKind::matrix, FeatureKind::vector})
    if (s == to_string(k)) return k;
  fail(Errc::invalid_argument, "unknown feature kind '" + s + "'");
}

FeatureKind required_features(Family f) {
  switch (f) {
    case Family::cnn3d: return FeatureKind::fingerprint;
    case Family::brainnet: return FeatureKind::matrix;
    default: return FeatureKind::vector;
  }
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out{sample_shape, {}, {}, {}};
  const auto s = sample_size();
  out.x.reserve(rows.size() * s);
  for (auto r : rows) {
    require(r < size(), Errc::invalid_argument, "dataset row out of range");
    out.x.insert(out.x.end(), x.begin() + static_cast<std::ptrdiff_t>(r * s),
                 x.begin() + static_cast<std::ptrdiff_t>((r + 1) * s));
    out.y.push_back(y[r]);
    if (!ids.empty()) out.ids.push_back(ids[r]);
  }
  return out;
}

void Dataset::validate() const {
  require(!sample_shape.empty(), Errc::shape, "dataset has no sample shape");
  require(x.size() == y.size() * sample_size(), Errc::shape,
          "dataset storage does not match " + std::to_string(y.size()) + " samples of " +
              nn::shape_string(sample_shape));
  require(ids.empty() || ids.size() == y.size(), Errc::shape, "dataset ids do not match sample count");
  for (float v : x) require(std::isfinite(v), Errc::numeric, "non-finite feature value");
}

// Architectures ---------------------------------------------------------------

namespace {

void append_head(std::vector<LayerSpec>& specs, Task task) {
  specs.push_back(LayerSpec::dense(1));
  if (task == Task::classification) specs.push_back(LayerSpec::act(nn::Activation::sigmoid));
}

NetModel make_model(Family family, Shape input, std::vector<LayerSpec> specs, Task task,
                    std::uint64_t seed) {
  NetModel m;
  m.family = family;
  m.task = task;
  m.net = nn::Network<float>(std::move(input), std::move(specs), seed);
  return m;
}

}  // namespace

std::vector<LayerSpec> fcn_specs(Task task) {
  std::vector<LayerSpec> s;
  for (int units : {800, 500, 100, 20}) {
    s.push_back(LayerSpec::dense(units));
    s.push_back(LayerSpec::act(nn::Activation::elu));
    s.push_back(LayerSpec::dropout(0.2));
  }
  append_head(s, task);
  return s;
}

std::vector<LayerSpec> cnn3d_specs(Task task) {
  const bool reg = task == Task::regression;
  std::vector<LayerSpec> s;
  int stage = 0;
  for (int filters : {16, 32, 64}) {
    s.push_back(LayerSpec::conv3d(filters, 3, nn::Padding::same));
    s.push_back(LayerSpec::act(nn::Activation::relu));
    s.push_back(LayerSpec::maxpool3d(2, 2));
    if (reg && stage < 2) s.push_back(LayerSpec::batchnorm());
    ++stage;
  }
  s.push_back(LayerSpec::flatten());
  s.push_back(LayerSpec::dense(128));
  s.push_back(LayerSpec::act(nn::Activation::relu));
  s.push_back(LayerSpec::dropout(0.2));
  append_head(s, task);
  return s;
}

std::vector<LayerSpec> brainnet_specs(Task task) {
  std::vector<LayerSpec> s{
      LayerSpec::edge_to_node(256),
      LayerSpec::act(nn::Activation::leaky_relu, 0.33),
      LayerSpec::dropout(0.2),
      LayerSpec::node_to_graph(128),
      LayerSpec::act(nn::Activation::leaky_relu, 0.33),
  };
  append_head(s, task);
  return s;
}

NetModel build_fcn(int regions, Task task, std::uint64_t seed) {
  require(regions >= 2, Errc::invalid_argument, "fcn needs R >= 2");
  const auto dim = static_cast<std::size_t>(regions) * (regions - 1) / 2;
  return make_model(Family::fcn, {dim}, fcn_specs(task), task, seed);
}

NetModel build_cnn3d(const Shape& input, Task task, std::uint64_t seed) {
  require(input.size() == 4 && input[0] >= 1, Errc::shape,
          "cnn3d input must be (R, nz, ny, nx), got " + nn::shape_string(input));
  for (std::size_t a = 1; a < 4; ++a)
    require(input[a] >= 8, Errc::shape,
            "cnn3d spatial extents must be >= 8 for three 2x poolings, got " + nn::shape_string(input));
  return make_model(Family::cnn3d, input, cnn3d_specs(task), task, seed);
}

NetModel build_brainnet(int regions, Task task, std::uint64_t seed) {
  require(regions >= 2, Errc::invalid_argument, "brainnet needs R >= 2");
  const auto R = static_cast<std::size_t>(regions);
  return make_model(Family::brainnet, {1, R, R}, brainnet_specs(task), task, seed);
}

NetModel build_network(Family family, const Shape& input, std::vector<LayerSpec> body, Task task,
                       std::uint64_t seed) {
  require(family != Family::ridge, Errc::invalid_argument, "ridge is not a network family");
  require(!body.empty(), Errc::invalid_argument, "empty layer list");
  // A body that already ends in the head is taken as-is.
  const bool has_head =
      task == Task::classification
          ? body.back().kind == nn::LayerKind::activation && body.back().activation == nn::Activation::sigmoid
          : body.back().kind == nn::LayerKind::dense && body.back().units == 1;
  if (!has_head) append_head(body, task);
  return make_model(family, input, std::move(body), task, seed);
}

// LayerSpec JSON -------------------------------------------------------------

namespace {

nlohmann::json spec_to_json(const LayerSpec& s) {
  nlohmann::json j;
  j["kind"] = nn::to_string(s.kind);
  switch (s.kind) {
    case nn::LayerKind::conv3d:
      j["filters"] = s.units;
      j["kernel"] = s.kernel;
      j["padding"] = s.padding == nn::Padding::same ? "same" : "valid";
      break;
    case nn::LayerKind::maxpool3d:
      j["window"] = s.window;
      j["stride"] = s.stride;
      break;
    case nn::LayerKind::dense:
    case nn::LayerKind::edge_to_node:
    case nn::LayerKind::node_to_graph: j["units"] = s.units; break;
    case nn::LayerKind::dropout: j["rate"] = s.rate; break;
    case nn::LayerKind::activation:
      j["activation"] = nn::to_string(s.activation);
      if (s.activation == nn::Activation::leaky_relu || s.activation == nn::Activation::elu)
        j["alpha"] = s.alpha;
      break;
    default: break;
  }
  return j;
}

LayerSpec spec_from_json(const nlohmann::json& j) {
  const auto kind = nn::layer_kind_from_string(j.at("kind").get<std::string>());
  switch (kind) {
    case nn::LayerKind::conv3d: {
      const auto pad = j.value("padding", std::string("same"));
      require(pad == "same" || pad == "valid", Errc::format, "padding must be same or valid");
      return LayerSpec::conv3d(j.at("filters").get<int>(), j.value("kernel", 3),
                               pad == "same" ? nn::Padding::same : nn::Padding::valid);
    }
    case nn::LayerKind::maxpool3d: return LayerSpec::maxpool3d(j.value("window", 2), j.value("stride", 2));
    case nn::LayerKind::batchnorm: return LayerSpec::batchnorm();
    case nn::LayerKind::dense: return LayerSpec::dense(j.at("units").get<int>());
    case nn::LayerKind::dropout: return LayerSpec::dropout(j.at("rate").get<double>());
    case nn::LayerKind::activation: {
      const auto a = nn::activation_from_string(j.at("activation").get<std::string>());
      return LayerSpec::act(a, j.value("alpha", a == nn::Activation::leaky_relu ? 0.33 : 1.0));
    }
    case nn::LayerKind::flatten: return LayerSpec::flatten();
    case nn::LayerKind::edge_to_node: return LayerSpec::edge_to_node(j.at("units").get<int>());
    case nn::LayerKind::node_to_graph: return LayerSpec::node_to_graph(j.at("units").get<int>());
  }
  fail(Errc::format, "unhandled layer kind");
}

}  // namespace

std::string specs_to_json(const std::vector<LayerSpec>& specs) {
  auto arr = nlohmann::json::array();
  for (const auto& s : specs) arr.push_back(spec_to_json(s));
  return arr.dump();
}

std::vector<LayerSpec> specs_from_json(const std::string& text) {
  try {
    const auto arr = nlohmann::json::parse(text);
    require(arr.is_array(), Errc::format, "layer list must be a JSON array");
    std::vector<LayerSpec> out;
    for (const auto& j : arr) out.push_back(spec_from_json(j));
    return out;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::format, std::string("bad layer list: ") + e.what());
  }
}

// Training -------------------------------------------------------------------

void TrainConfig::validate() const {
  require(batch_size >= 1, Errc::invalid_argument, "batch_size must be >= 1");
  require(max_epochs >= 1, Errc::invalid_argument, "max_epochs must be >= 1");
  require(patience >= 0, Errc::invalid_argument, "patience must be >= 0");
  require(max_steps >= 0, Errc::invalid_argument, "max_steps must be >= 0");
  require(swa_window >= 0, Errc::invalid_argument, "swa_window must be >= 0");
  require(val_fraction >= 0.0 && val_fraction < 1.0, Errc::invalid_argument,
          "val_fraction must lie in [0, 1)");
  require(optimizer.lr > 0.0, Errc::invalid_argument, "learning rate must be positive");
}

TrainConfig default_train_config(Family family, Task task) {
  TrainConfig c;
  const bool cls = task == Task::classification;
  c.optimizer.kind = nn::OptimizerKind::sgd_momentum;
  c.optimizer.momentum = 0.9;
  switch (family) {
    case Family::cnn3d:
      if (cls) {
        c.optimizer.lr = 0.001;
      } else {
        c.optimizer.kind = nn::OptimizerKind::adam;
        c.optimizer.lr = 0.0005;
        c.swa_window = 20;
      }
      break;
    case Family::fcn: c.optimizer.lr = cls ? 0.01 : 0.001; break;
    case Family::brainnet:
      c.optimizer.lr = cls ? 0.008 : 0.0005;
      c.max_steps = 1000;
      c.max_epochs = 100000;
      c.patience = 0;
      break;
    case Family::ridge: break;
  }
  return c;
}

namespace {

// Batch boundaries over `n` items that never leave a trailing batch of one
// (batchnorm cannot normalize a single sample).
std::vector<std::size_t> batch_bounds(std::size_t n, std::size_t batch) {
  std::vector<std::size_t> b{0};
  while (b.back() < n) b.push_back(std::min(n, b.back() + batch));
  if (b.size() > 2 && b[b.size() - 1] - b[b.size() - 2] == 1) b.erase(b.end() - 2);
  return b;
}

nn::Tensor<float> gather(const Dataset& d, std::span<const std::size_t> rows) {
  Shape shape{rows.size()};
  shape.insert(shape.end(), d.sample_shape.begin(), d.sample_shape.end());
  nn::Tensor<float> t(shape);
  const auto s = d.sample_size();
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy_n(d.x.data() + rows[i] * s, s, t.data() + i * s);
  return t;
}

struct Objective {
  Task task;
  double shift, scale;

  float target(double y) const {
    if (task == Task::classification) return y > 0.0 ? 1.0f : 0.0f;
    return static_cast<float>((y - shift) / scale);
  }

  // Mean loss over the batch; writes the gradient w.r.t. the network output
  // (pre-sigmoid logits for classification) into `grad`.
  double operator()(const nn::Tensor<float>& out, const std::vector<float>& t, nn::Tensor<float>* grad) const {
    const auto lv = task == Task::classification ? nn::bce_with_logits<float>(out.values(), t)
                                                 : nn::loss<float>(nn::LossKind::mse, out.values(), t);
    if (grad) *grad = nn::Tensor<float>(out.shape(), lv.gradient);
    return lv.value;
  }
};

double eval_loss(NetModel& m, const Dataset& d, const std::vector<std::size_t>& rows, const Objective& obj,
                 std::size_t batch) {
  double total = 0.0;
  for (std::size_t b = 0; b < rows.size(); b += batch) {
    const std::span<const std::size_t> part(rows.data() + b, std::min(batch, rows.size() - b));
    const auto out = m.net.logits(gather(d, part), nn::Mode::eval);
    for (float v : out.values())
      if (!std::isfinite(v)) return std::numeric_limits<double>::quiet_NaN();
    std::vector<float> t;
    for (auto r : part) t.push_back(obj.target(d.y[r]));
    total += obj(out, t, nullptr) * static_cast<double>(part.size());
  }
  return total / static_cast<double>(rows.size());
}

}  // namespace

TrainHistory train(NetModel& model, const Dataset& data, const TrainConfig& cfg) {
  cfg.validate();
  data.validate();
  require(data.sample_shape == model.net.input_shape(), Errc::shape,
          "features " + nn::shape_string(data.sample_shape) + " do not match model input " +
              nn::shape_string(model.net.input_shape()));
  require(model.net.output_shape() == Shape{1}, Errc::shape, "network must produce one output");

  // Seeded train/validation split.
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng(derive_seed(cfg.seed, 1));
  split_rng.shuffle(order.begin(), order.end());
  std::size_t n_val = static_cast<std::size_t>(std::lround(cfg.val_fraction * static_cast<double>(data.size())));
  if (data.size() < 10) n_val = 0;
  std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> tr(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  require(!tr.empty(), Errc::invalid_argument, "empty training split");

  Objective obj{model.task, 0.0, 1.0};
  if (model.task == Task::regression) {
    double mean = 0.0, ss = 0.0;
    for (auto i : tr) mean += data.y[i];
    mean /= static_cast<double>(tr.size());
    for (auto i : tr) ss += (data.y[i] - mean) * (data.y[i] - mean);
    const double sd = tr.size() > 1 ? std::sqrt(ss / static_cast<double>(tr.size() - 1)) : 0.0;
    obj.shift = mean;
    obj.scale = sd > 0.0 ? sd : 1.0;
  }
  model.target_shift = obj.shift;
  model.target_scale = obj.scale;

  auto& net = model.net;
  const std::size_t head = net.head_start();
  nn::Optimizer<float> opt(cfg.optimizer, net.parameters());
  std::optional<nn::SwaState<float>> swa, swa_buffers;
  if (cfg.swa_window > 0) {
    swa.emplace(cfg.swa_window);
    swa_buffers.emplace(cfg.swa_window);
  }
  Rng dropout_rng(derive_seed(cfg.seed, 2));

  TrainHistory hist;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<float> best_params, best_buffers;
  int since_best = 0;
  const auto bounds_batch = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(tr.begin(), tr.end());
    const auto bounds = batch_bounds(tr.size(), bounds_batch);
    double epoch_loss = 0.0;
    std::size_t seen = 0;
    bool step_limit = false;
    for (std::size_t b = 0; b + 1 < bounds.size(); ++b) {
      const std::span<const std::size_t> part(tr.data() + bounds[b], bounds[b + 1] - bounds[b]);
      const auto x = gather(data, part);
      std::vector<float> t;
      for (auto r : part) t.push_back(obj.target(data.y[r]));
      const auto out = net.forward(x, nn::Mode::train, &dropout_rng, head);
      for (float v : out.values())
        require(std::isfinite(v), Errc::numeric, "training diverged at epoch " + std::to_string(epoch));
      nn::Tensor<float> grad;
      const double l = obj(out, t, &grad);
      require(std::isfinite(l), Errc::numeric, "training diverged at epoch " + std::to_string(epoch));
      net.backward(grad, head, false);
      opt.step(net.parameters(), net.gradients());
      ++hist.steps;
      epoch_loss += l * static_cast<double>(part.size());
      seen += part.size();
      if (cfg.max_steps > 0 && hist.steps >= cfg.max_steps) {
        step_limit = true;
        break;
      }
    }
    for (auto* p : net.parameters())
      for (float v : p->values())
        require(std::isfinite(v), Errc::numeric, "training diverged at epoch " + std::to_string(epoch));

    EpochRecord rec{epoch, epoch_loss / static_cast<double>(seen), std::numeric_limits<double>::quiet_NaN()};
    if (!val.empty()) {
      rec.val_loss = eval_loss(model, data, val, obj, bounds_batch);
      require(std::isfinite(rec.val_loss), Errc::numeric, "training diverged at epoch " + std::to_string(epoch));
    }
    hist.epochs.push_back(rec);
    if (swa) {
      swa->update(net.flat_parameters());
      swa_buffers->update(net.flat_buffers());
    }

    if (!val.empty()) {
      if (rec.val_loss < best_val) {
        best_val = rec.val_loss;
        hist.best_epoch = epoch;
        best_params = net.flat_parameters();
        best_buffers = net.flat_buffers();
        since_best = 0;
      } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
        break;
      }
    }
    if (step_limit) break;
  }

  if (swa) {
    net.set_flat_parameters(swa->finalize());
    if (net.buffer_count() > 0) net.set_flat_buffers(swa_buffers->finalize());
    hist.swa_applied = true;
  } else if (!best_params.empty() && cfg.patience > 0) {
    net.set_flat_parameters(best_params);
    net.set_flat_buffers(best_buffers);
  }
  return hist;
}

std::vector<double> predict(NetModel& model, const Dataset& data) {
  data.validate();
  require(data.sample_shape == model.net.input_shape(), Errc::shape,
          "features " + nn::shape_string(data.sample_shape) + " do not match model input " +
              nn::shape_string(model.net.input_shape()));
  std::vector<double> out;
  out.reserve(data.size());
  constexpr std::size_t kBatch = 64;
  std::vector<std::size_t> rows(data.size());
  std::iota(rows.begin(), rows.end(), 0);
  for (std::size_t b = 0; b < rows.size(); b += kBatch) {
    const std::span<const std::size_t> part(rows.data() + b, std::min(kBatch, rows.size() - b));
    const auto y = model.net.forward(gather(data, part), nn::Mode::eval);
    for (std::size_t i = 0; i < part.size(); ++i) {
      const double v = y[i];
      out.push_back(model.task == Task::classification ? v : v * model.target_scale + model.target_shift);
    }
  }
  return out;
}

Family family_of(const Model& m) {
  return std::holds_alternative<RidgeModel>(m) ? Family::ridge : std::get<NetModel>(m).family;
}

Task task_of(const Model& m) {
  return std::visit([](const auto& v) { return v.task; }, m);
}

const std::string& parcellation_of(const Model& m) {
  return std::visit([](const auto& v) -> const std::string& { return v.parcellation_id; }, m);
}

std::vector<double> predict(Model& m, const Dataset& data) {
  return std::visit([&](auto& v) { return predict(v, data); }, m);
}

}  // namespace connectome
